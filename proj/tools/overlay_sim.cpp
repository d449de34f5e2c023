// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "ovl/cli.hpp"

int main(int argc, char** argv) { return ovl::run_cli(argc, argv, std::cout, std::cerr); }
