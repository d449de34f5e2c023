// SPDX-License-Identifier: Apache-2.0
#include "ovl/overlay.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <sstream>

#include <json.hpp>

namespace ovl {

using json = nlohmann::ordered_json;

const char* to_string(ParamKind kind) {
  switch (kind) {
    case ParamKind::kView: return "view";
    case ParamKind::kScalar: return "scalar";
    case ParamKind::kFlag: return "flag";
  }
  return "unknown";
}

ParamKind parse_param_kind(std::string_view text) {
  if (text == "view") return ParamKind::kView;
  if (text == "scalar") return ParamKind::kScalar;
  if (text == "flag") return ParamKind::kFlag;
  throw Error(ErrorCode::kParse, "unknown parameter kind `" + std::string(text) + "`");
}

namespace {

constexpr auto V = ParamKind::kView;
constexpr auto S = ParamKind::kScalar;
constexpr auto F = ParamKind::kFlag;

const std::vector<IpDescriptor>& builtin_table() {
  static const std::vector<IpDescriptor> table{
      {"LU", {V}},
      {"TransformRowPanel", {V}},
      {"TransformColumnPanel", {V}},
      {"GEMM", {V, V, V, S, S, S}},
      {"Convolution", {V, V, V, F, F, F, F}},
      {"Maxpool", {V, F}},
  };
  return table;
}

}  // namespace

IpDescriptor builtin_ip(std::string_view name) {
  for (const auto& ip : builtin_table()) {
    if (ip.name == name) return ip;
  }
  throw Error(ErrorCode::kConfiguration, "no kernel registered for IP `" + std::string(name) + "`");
}

std::vector<std::string> builtin_ip_names() {
  std::vector<std::string> names;
  for (const auto& ip : builtin_table()) names.push_back(ip.name);
  return names;
}

CommandInterface command(const IpDescriptor& ip, std::uint32_t queue_no, const Signature& signature) {
  const IpDescriptor known = builtin_ip(ip.name);
  if (signature != known.signature || ip.signature != known.signature) {
    throw Error(ErrorCode::kConfiguration, "signature of `" + ip.name + "` does not match its kernel (" +
                                               std::to_string(known.signature.size()) + " parameters)");
  }
  return CommandInterface{queue_no, known};
}

OverlayBuilder& OverlayBuilder::command(const IpDescriptor& ip, std::uint32_t queue_no,
                                        const Signature& signature) {
  return add(ovl::command(ip, queue_no, signature));
}

OverlayBuilder& OverlayBuilder::add(CommandInterface ci) {
  for (const auto& existing : interfaces_) {
    if (existing.queue_no == ci.queue_no) {
      throw Error(ErrorCode::kConfiguration, "queue " + std::to_string(ci.queue_no) +
                                                 " already drives `" + existing.ip.name + "`");
    }
  }
  interfaces_.push_back(std::move(ci));
  return *this;
}

namespace {

void validate(OverlayManifest& m) {
  if (m.interfaces.empty()) throw Error(ErrorCode::kConfiguration, "overlay `" + m.name + "` has no IPs");
  std::sort(m.interfaces.begin(), m.interfaces.end(),
            [](const auto& a, const auto& b) { return a.queue_no < b.queue_no; });
  for (std::size_t q = 0; q < m.interfaces.size(); ++q) {
    if (m.interfaces[q].queue_no != q) {
      throw Error(ErrorCode::kConfiguration,
                  "queue numbers must be 0.." + std::to_string(m.interfaces.size() - 1) + "; found " +
                      std::to_string(m.interfaces[q].queue_no) + " at position " + std::to_string(q));
    }
    const IpDescriptor known = builtin_ip(m.interfaces[q].ip.name);
    if (known.signature != m.interfaces[q].ip.signature) {
      throw Error(ErrorCode::kConfiguration, "signature of `" + known.name + "` does not match its kernel");
    }
  }
}

}  // namespace

OverlayManifest OverlayBuilder::manifest() const {
  OverlayManifest m{name_, interfaces_};
  validate(m);
  return m;
}

OverlayManifest lu_overlay_manifest() {
  return OverlayBuilder("lu")
      .command(builtin_ip("LU"), 0, {V})
      .command(builtin_ip("TransformRowPanel"), 1, {V})
      .command(builtin_ip("TransformColumnPanel"), 2, {V})
      .command(builtin_ip("GEMM"), 3, {V, V, V, S, S, S})
      .manifest();
}

OverlayManifest vgg_overlay_manifest() {
  return OverlayBuilder("vgg")
      .command(builtin_ip("Convolution"), 0, {V, V, V, F, F, F, F})
      .command(builtin_ip("Maxpool"), 1, {V, F})
      .manifest();
}

std::string OverlayManifest::to_json() const {
  json ips = json::array();
  for (const auto& ci : interfaces) {
    json sig = json::array();
    for (ParamKind k : ci.ip.signature) sig.push_back(to_string(k));
    ips.push_back(json{{"name", ci.ip.name}, {"queue", ci.queue_no}, {"signature", sig}});
  }
  return json{{"name", name}, {"ips", ips}}.dump(2) + "\n";
}

OverlayManifest OverlayManifest::from_json(std::string_view text) {
  OverlayManifest m;
  try {
    const json doc = json::parse(text);
    m.name = doc.at("name").get<std::string>();
    for (const auto& ip : doc.at("ips")) {
      CommandInterface ci;
      ci.ip.name = ip.at("name").get<std::string>();
      ci.queue_no = ip.at("queue").get<std::uint32_t>();
      for (const auto& k : ip.at("signature")) ci.ip.signature.push_back(parse_param_kind(k.get<std::string>()));
      m.interfaces.push_back(std::move(ci));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("malformed overlay manifest: ") + e.what());
  }
  std::vector<std::uint32_t> seen;
  for (const auto& ci : m.interfaces) {
    if (std::find(seen.begin(), seen.end(), ci.queue_no) != seen.end()) {
      throw Error(ErrorCode::kConfiguration, "queue " + std::to_string(ci.queue_no) + " claimed twice");
    }
    seen.push_back(ci.queue_no);
  }
  validate(m);
  return m;
}

void OverlayManifest::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path + " for writing");
  out << to_json();
  if (!out) throw Error(ErrorCode::kIo, "write to " + path + " failed");
}

OverlayManifest OverlayManifest::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

// ---------------------------------------------------------------------------
// Kernel bindings

template <class T>
struct detail::KernelBinding {
  using Args = std::vector<Argument<T>>;
  std::function<Shape(const Args&, FeatureBuffer<T>&)> invoke;
  std::function<std::vector<AccessSet>(const Args&, const FeatureBuffer<T>&)> footprint;
  std::function<std::uint64_t(const Args&, const FeatureBuffer<T>&)> flops;
};

namespace {

template <class T>
const BlockView<T>& view_arg(const std::vector<Argument<T>>& args, std::size_t i) {
  return std::get<BlockView<T>>(args[i]);
}

template <class T>
AccessSet sub_access(const BlockView<T>& v, std::size_t r0, std::size_t r1, std::size_t c0,
                     std::size_t c1, AccessMode mode) {
  AccessSet s = access_set(v, mode);
  s.ranges[0] = {v.ranges()[0].begin + r0, v.ranges()[0].begin + r1};
  s.ranges[1] = {v.ranges()[1].begin + c0, v.ranges()[1].begin + c1};
  return s;
}

// Panels read their leading block and rewrite the rest.
template <class T>
std::vector<AccessSet> panel_footprint(const BlockView<T>& v, bool row_panel) {
  if (v.rank() != 2) return {access_set(v, AccessMode::kReadWrite)};
  const std::size_t rows = v.extent(0), cols = v.extent(1);
  const std::size_t m = row_panel ? rows : cols;
  if ((row_panel ? cols : rows) <= m) return {access_set(v, AccessMode::kReadWrite)};
  if (row_panel) {
    return {sub_access(v, 0, rows, 0, m, AccessMode::kRead),
            sub_access(v, 0, rows, m, cols, AccessMode::kReadWrite)};
  }
  return {sub_access(v, 0, m, 0, cols, AccessMode::kRead),
          sub_access(v, m, rows, 0, cols, AccessMode::kReadWrite)};
}

template <class T>
std::uint64_t view_elems(const BlockView<T>& v) {
  return static_cast<std::uint64_t>(v.size());
}

ConvControlFlags conv_flags_of(const auto& args) {
  return ConvControlFlags{std::get<bool>(args[3]), std::get<bool>(args[4]), std::get<bool>(args[5]),
                          std::get<bool>(args[6])};
}

template <class T>
std::map<std::string, detail::KernelBinding<T>> make_bindings() {
  using Binding = detail::KernelBinding<T>;
  using Args = typename Binding::Args;
  std::map<std::string, Binding> b;

  b["LU"] = Binding{
      [](const Args& a, FeatureBuffer<T>&) {
        lu_factor_block(view_arg(a, 0));
        return Shape{};
      },
      [](const Args& a, const FeatureBuffer<T>&) {
        return std::vector<AccessSet>{access_set(view_arg(a, 0), AccessMode::kReadWrite)};
      },
      [](const Args& a, const FeatureBuffer<T>&) -> std::uint64_t {
        const std::uint64_t m = view_arg(a, 0).extent(0);
        return 2 * m * m * m / 3;
      }};

  b["TransformRowPanel"] = Binding{
      [](const Args& a, FeatureBuffer<T>&) {
        transform_row_panel(view_arg(a, 0));
        return Shape{};
      },
      [](const Args& a, const FeatureBuffer<T>&) { return panel_footprint(view_arg(a, 0), true); },
      [](const Args& a, const FeatureBuffer<T>&) -> std::uint64_t {
        const auto& v = view_arg(a, 0);
        const std::uint64_t m = v.extent(0);
        return m * (m - 1) * (v.extent(1) - m);
      }};

  b["TransformColumnPanel"] = Binding{
      [](const Args& a, FeatureBuffer<T>&) {
        transform_column_panel(view_arg(a, 0));
        return Shape{};
      },
      [](const Args& a, const FeatureBuffer<T>&) { return panel_footprint(view_arg(a, 0), false); },
      [](const Args& a, const FeatureBuffer<T>&) -> std::uint64_t {
        const auto& v = view_arg(a, 0);
        const std::uint64_t m = v.extent(1);
        return m * m * (v.extent(0) - m);
      }};

  b["GEMM"] = Binding{
      [](const Args& a, FeatureBuffer<T>&) {
        gemm(view_arg(a, 0), view_arg(a, 1), view_arg(a, 2),
             GemmCoefficients{std::get<double>(a[3]), std::get<double>(a[4]), std::get<double>(a[5])});
        return Shape{};
      },
      [](const Args& a, const FeatureBuffer<T>&) {
        return std::vector<AccessSet>{access_set(view_arg(a, 0), AccessMode::kReadWrite),
                                      access_set(view_arg(a, 1), AccessMode::kRead),
                                      access_set(view_arg(a, 2), AccessMode::kRead)};
      },
      [](const Args& a, const FeatureBuffer<T>&) -> std::uint64_t {
        const auto& c = view_arg(a, 0);
        const std::uint64_t k = view_arg(a, 1).rank() == 2 ? view_arg(a, 1).extent(1) : 1;
        return 2 * view_elems(c) * k + view_elems(c);
      }};

  b["Convolution"] = Binding{
      [](const Args& a, FeatureBuffer<T>& fb) {
        return convolution(view_arg(a, 0), view_arg(a, 1), view_arg(a, 2), conv_flags_of(a), fb);
      },
      [](const Args& a, const FeatureBuffer<T>& fb) {
        const ConvControlFlags f = conv_flags_of(a);
        std::vector<AccessSet> s{access_set(view_arg(a, 2), AccessMode::kRead)};
        if (!f.read_input_from_buffer) s.push_back(access_set(view_arg(a, 0), AccessMode::kRead));
        if (!f.store_output_to_buffer) s.push_back(access_set(view_arg(a, 1), AccessMode::kWrite));
        if (f.read_input_from_buffer || f.store_output_to_buffer) {
          const AccessMode mode = f.read_input_from_buffer && f.store_output_to_buffer ? AccessMode::kReadWrite
                                  : f.read_input_from_buffer                           ? AccessMode::kRead
                                                                                       : AccessMode::kWrite;
          s.push_back(fb.access(mode));
        }
        return s;
      },
      [](const Args& a, const FeatureBuffer<T>& fb) -> std::uint64_t {
        const ConvControlFlags f = conv_flags_of(a);
        const auto& w = view_arg(a, 2);
        if (f.is_fc_layer) return 2 * view_elems(w);
        std::uint64_t pixels = 0;
        if (f.read_input_from_buffer) {
          if (!fb.valid() || fb.get().rank() < 2) return 1;
          pixels = fb.get().shape()[0] * fb.get().shape()[1];
        } else {
          const auto& x = view_arg(a, 0);
          pixels = x.rank() >= 2 ? x.extent(0) * x.extent(1) : 1;
        }
        return 2 * pixels * view_elems(w);
      }};

  b["Maxpool"] = Binding{
      [](const Args& a, FeatureBuffer<T>& fb) { return maxpool(view_arg(a, 0), std::get<bool>(a[1]), fb); },
      [](const Args& a, const FeatureBuffer<T>& fb) {
        if (std::get<bool>(a[1])) return std::vector<AccessSet>{fb.access(AccessMode::kReadWrite)};
        return std::vector<AccessSet>{fb.access(AccessMode::kRead),
                                      access_set(view_arg(a, 0), AccessMode::kWrite)};
      },
      [](const Args&, const FeatureBuffer<T>& fb) -> std::uint64_t {
        return fb.valid() ? static_cast<std::uint64_t>(fb.get().size()) : 1;
      }};
  return b;
}

template <class T>
const std::map<std::string, detail::KernelBinding<T>>& bindings() {
  static const auto table = make_bindings<T>();
  return table;
}

bool kind_matches(ParamKind kind, std::size_t variant_index) {
  switch (kind) {
    case ParamKind::kView: return variant_index == 0;
    case ParamKind::kScalar: return variant_index == 1;
    case ParamKind::kFlag: return variant_index == 2;
  }
  return false;
}

}  // namespace

template <class T>
Overlay<T>::Overlay(OverlayManifest manifest) : manifest_(std::move(manifest)) {
  validate(manifest_);
  const auto& table = bindings<T>();
  for (const auto& ci : manifest_.interfaces) {
    auto it = table.find(ci.ip.name);
    if (it == table.end()) throw Error(ErrorCode::kConfiguration, "no kernel for IP `" + ci.ip.name + "`");
    bindings_.push_back(&it->second);
  }
  queues_.resize(manifest_.interfaces.size());
}

template <class T>
TaskHandle Overlay<T>::enqueue(std::uint32_t queue_no, std::vector<Argument<T>> args, std::string kind,
                               std::int64_t iteration) {
  if (queue_no >= queues_.size()) {
    throw Error(ErrorCode::kInvocation, "overlay `" + name() + "` has no queue " + std::to_string(queue_no));
  }
  const Signature& sig = manifest_.interfaces[queue_no].ip.signature;
  if (args.size() != sig.size()) {
    throw Error(ErrorCode::kInvocation, "queue " + std::to_string(queue_no) + " expects " +
                                            std::to_string(sig.size()) + " arguments, got " +
                                            std::to_string(args.size()));
  }
  for (std::size_t i = 0; i < sig.size(); ++i) {
    if (!kind_matches(sig[i], args[i].index())) {
      throw Error(ErrorCode::kInvocation, "argument " + std::to_string(i) + " of queue " +
                                              std::to_string(queue_no) + " must be a " + to_string(sig[i]));
    }
  }
  TaskInstance<T> task;
  task.meta.id = static_cast<TaskId>(tasks_.size());
  task.meta.kind = std::move(kind);
  task.meta.queue = queue_no;
  task.meta.iteration = iteration;
  task.meta.access = bindings_[queue_no]->footprint(args, feature_buffer_);
  task.args = std::move(args);
  queues_[queue_no].push_back(task.meta.id);
  TaskHandle handle{task.meta.id, task.meta.kind, iteration};
  tasks_.push_back(std::move(task));
  return handle;
}

template <class T>
const std::deque<TaskId>& Overlay<T>::queue(std::uint32_t queue_no) const {
  if (queue_no >= queues_.size()) throw Error(ErrorCode::kInvocation, "no queue " + std::to_string(queue_no));
  return queues_[queue_no];
}

template <class T>
TaskId Overlay<T>::pop(std::uint32_t queue_no) {
  if (queue_no >= queues_.size() || queues_[queue_no].empty()) {
    throw Error(ErrorCode::kInvocation, "queue " + std::to_string(queue_no) + " is empty");
  }
  const TaskId id = queues_[queue_no].front();
  queues_[queue_no].pop_front();
  return id;
}

template <class T>
std::vector<TaskMeta> Overlay<T>::task_metas() const {
  std::vector<TaskMeta> metas;
  metas.reserve(tasks_.size());
  for (const auto& t : tasks_) metas.push_back(t.meta);
  return metas;
}

template <class T>
Shape Overlay<T>::execute(TaskId id) {
  const TaskInstance<T>& t = tasks_.at(id);
  return bindings_[t.meta.queue]->invoke(t.args, feature_buffer_);
}

template <class T>
std::uint64_t Overlay<T>::estimate_flops(TaskId id) const {
  const TaskInstance<T>& t = tasks_.at(id);
  return bindings_[t.meta.queue]->flops(t.args, feature_buffer_);
}

template <class T>
void Overlay<T>::reset_tasks() {
  tasks_.clear();
  for (auto& q : queues_) q.clear();
}

template <class T>
OverlayPtr<T> load_overlay(const std::string& path) {
  OverlayManifest manifest = OverlayManifest::load(path);
  static std::mutex mu;
  static std::map<std::string, std::weak_ptr<Overlay<T>>> loaded;
  std::error_code ec;
  std::string key = std::filesystem::weakly_canonical(path, ec).string();
  if (ec) key = path;
  std::lock_guard lock(mu);
  if (auto existing = loaded[key].lock(); existing && existing->manifest() == manifest) return existing;
  auto fresh = std::make_shared<Overlay<T>>(std::move(manifest));
  loaded[key] = fresh;
  return fresh;
}

template class Overlay<float>;
template class Overlay<double>;
template OverlayPtr<float> load_overlay<float>(const std::string&);
template OverlayPtr<double> load_overlay<double>(const std::string&);

}  // namespace ovl
