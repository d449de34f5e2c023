// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ovl/error.hpp"

namespace ovl {

using Shape = std::vector<std::size_t>;
using BufferId = std::uint32_t;

/// Process-wide fresh identifier, shared by tensor buffers and the
/// feature-buffer slot so access sets never collide.
BufferId next_buffer_id();

/// Half-open element range [begin, end).
struct Range {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool operator==(const Range&) const = default;
};

std::size_t element_count(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major storage, last axis fastest. This is the simulated DDR.
template <class T>
class TensorBuffer {
 public:
  /// Zero-initialized. Throws kInvalidShape on an empty shape or zero extent.
  explicit TensorBuffer(Shape shape);

  BufferId id() const { return id_; }
  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  const std::vector<std::size_t>& strides() const { return strides_; }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }

  T& at(std::span<const std::size_t> index);
  const T& at(std::span<const std::size_t> index) const;
  T& at(std::initializer_list<std::size_t> index) { return at(std::span(index.begin(), index.size())); }
  const T& at(std::initializer_list<std::size_t> index) const {
    return at(std::span(index.begin(), index.size()));
  }

 private:
  BufferId id_;
  Shape shape_;
  std::vector<std::size_t> strides_;
  std::vector<T> data_;
};

template <class T>
using BufferPtr = std::shared_ptr<TensorBuffer<T>>;

struct Zeros {};
struct Constant {
  double value = 0.0;
};
/// Uniform in [lo, hi) from a 64-bit Mersenne Twister seeded with `seed`.
struct SeededRandom {
  double lo = 0.0;
  double hi = 1.0;
  std::uint64_t seed = 0;
};
/// Tensor-text v1 file; its dims must equal the requested shape.
struct FromFile {
  std::string path;
};
using FillSpec = std::variant<Zeros, Constant, SeededRandom, FromFile>;

template <class T>
BufferPtr<T> new_buffer(const Shape& shape, const FillSpec& fill = Zeros{});

enum class CropKind { kWhole, kBlock, kAxis };

struct ViewOrigin {
  CropKind kind = CropKind::kWhole;
  std::size_t block_size = 0;  // kBlock only
  std::size_t axis = 0;        // kAxis only
};

/// Non-owning-in-spirit window into a TensorBuffer: it keeps the buffer alive
/// but never copies elements. Copying a view copies the descriptor only.
///
/// Const on the view does not propagate to elements, same as std::span.
template <class T>
class BlockView {
 public:
  /// Whole-buffer view.
  explicit BlockView(BufferPtr<T> buffer);
  /// Throws kInvalidCrop when any range is empty or outside the buffer.
  BlockView(BufferPtr<T> buffer, std::vector<Range> ranges, ViewOrigin origin);

  const TensorBuffer<T>& buffer() const { return *buffer_; }
  const BufferPtr<T>& buffer_ptr() const { return buffer_; }
  const std::vector<Range>& ranges() const { return ranges_; }
  const ViewOrigin& origin() const { return origin_; }

  std::size_t rank() const { return ranges_.size(); }
  std::size_t extent(std::size_t axis) const { return ranges_[axis].size(); }
  Shape extents() const;
  std::size_t size() const;

  /// Rank-2 element access in view coordinates.
  T& operator()(std::size_t r, std::size_t c) const {
    return base_[(ranges_[0].begin + r) * row_stride_ + ranges_[1].begin + c];
  }
  /// Rank-2 only: pointer to the first element of view row r. The row is
  /// contiguous for extent(1) elements.
  T* row(std::size_t r) const { return &(*this)(r, 0); }

  T& at(std::span<const std::size_t> index) const;
  T& at(std::initializer_list<std::size_t> index) const {
    return at(std::span(index.begin(), index.size()));
  }

  /// Gathers the view's elements in view row-major order.
  std::vector<T> gather() const;
  /// Scatters `values` over the first values.size() elements of the view in
  /// view row-major order. Throws kShape when the view is too small.
  void scatter(std::span<const T> values) const;

 private:
  BufferPtr<T> buffer_;
  std::vector<Range> ranges_;
  ViewOrigin origin_;
  T* base_ = nullptr;
  std::size_t row_stride_ = 0;
};

/// Crops in blocks of m*m with INCLUSIVE block indices.
template <class T>
BlockView<T> bcropped(const BufferPtr<T>& buffer, std::size_t m, std::size_t start_row,
                      std::size_t end_row, std::size_t start_col, std::size_t end_col);

/// Restricts one axis to [start, start+extent); other axes keep their range.
template <class T>
BlockView<T> cropped(const BufferPtr<T>& buffer, std::size_t axis, std::size_t start,
                     std::size_t extent);
/// Same, relative to an existing view.
template <class T>
BlockView<T> cropped(const BlockView<T>& view, std::size_t axis, std::size_t start,
                     std::size_t extent);

enum class AccessMode { kRead, kWrite, kReadWrite };

const char* to_string(AccessMode mode);

struct AccessSet {
  BufferId buffer = 0;
  std::vector<Range> ranges;
  AccessMode mode = AccessMode::kRead;

  bool writes() const { return mode != AccessMode::kRead; }
  bool operator==(const AccessSet&) const = default;
};

template <class T>
AccessSet access_set(const BlockView<T>& view, AccessMode mode);

/// Same buffer and overlapping on every axis.
bool overlaps(const AccessSet& a, const AccessSet& b);
/// Overlapping and at least one side writes.
bool conflicts(const AccessSet& a, const AccessSet& b);
/// Per-axis intersection; only meaningful when overlaps(a, b).
std::vector<Range> intersection(const AccessSet& a, const AccessSet& b);

/// Tensor-text v1: `dims d e1 ... ed` then whitespace-separated decimals in
/// row-major order. Values are written in shortest round-trip form.
template <class T>
void write_tensor_text(const TensorBuffer<T>& buffer, std::ostream& out);
template <class T>
void write_tensor_text(const TensorBuffer<T>& buffer, const std::string& path);
template <class T>
BufferPtr<T> read_tensor_text(std::istream& in);
template <class T>
BufferPtr<T> read_tensor_text(const std::string& path);

}  // namespace ovl
