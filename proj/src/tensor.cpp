// SPDX-License-Identifier: Apache-2.0
#include "ovl/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <type_traits>

namespace ovl {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidShape: return "invalid-shape";
    case ErrorCode::kBlockMisalignment: return "block-misalignment";
    case ErrorCode::kInvalidCrop: return "invalid-crop";
    case ErrorCode::kSingularPivot: return "singular-pivot";
    case ErrorCode::kShape: return "shape";
    case ErrorCode::kAliasing: return "aliasing";
    case ErrorCode::kEmptyFeatureBuffer: return "empty-feature-buffer";
    case ErrorCode::kConfiguration: return "configuration";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kInvocation: return "invocation";
    case ErrorCode::kRule: return "rule";
    case ErrorCode::kCyclicDependence: return "cyclic-dependence";
    case ErrorCode::kUnsafeSchedule: return "unsafe-schedule";
    case ErrorCode::kTaskFailed: return "task-failed";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

const char* to_string(AccessMode mode) {
  switch (mode) {
    case AccessMode::kRead: return "read";
    case AccessMode::kWrite: return "write";
    case AccessMode::kReadWrite: return "read-write";
  }
  return "unknown";
}

BufferId next_buffer_id() {
  static std::atomic<BufferId> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

std::size_t element_count(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

namespace {

void validate_shape(const Shape& shape) {
  if (shape.empty()) throw Error(ErrorCode::kInvalidShape, "shape has no axes");
  for (std::size_t e : shape) {
    if (e == 0) throw Error(ErrorCode::kInvalidShape, "zero extent in shape " + shape_string(shape));
  }
}

std::vector<std::size_t> row_major_strides(const Shape& shape) {
  std::vector<std::size_t> strides(shape.size(), 1);
  for (std::size_t a = shape.size(); a-- > 1;) strides[a - 1] = strides[a] * shape[a];
  return strides;
}

}  // namespace

template <class T>
TensorBuffer<T>::TensorBuffer(Shape shape) : id_(next_buffer_id()), shape_(std::move(shape)) {
  validate_shape(shape_);
  strides_ = row_major_strides(shape_);
  data_.assign(element_count(shape_), T{0});
}

template <class T>
T& TensorBuffer<T>::at(std::span<const std::size_t> index) {
  return const_cast<T&>(std::as_const(*this).at(index));
}

template <class T>
const T& TensorBuffer<T>::at(std::span<const std::size_t> index) const {
  if (index.size() != shape_.size()) throw Error(ErrorCode::kShape, "index rank mismatch");
  std::size_t off = 0;
  for (std::size_t a = 0; a < index.size(); ++a) {
    if (index[a] >= shape_[a]) throw Error(ErrorCode::kInvalidCrop, "index out of bounds");
    off += index[a] * strides_[a];
  }
  return data_[off];
}

template <class T>
BufferPtr<T> new_buffer(const Shape& shape, const FillSpec& fill) {
  validate_shape(shape);
  if (const auto* file = std::get_if<FromFile>(&fill)) {
    auto loaded = read_tensor_text<T>(file->path);
    if (loaded->shape() != shape) {
      throw Error(ErrorCode::kInvalidShape, "file " + file->path + " has shape " +
                                                shape_string(loaded->shape()) + ", expected " +
                                                shape_string(shape));
    }
    return loaded;
  }
  auto buf = std::make_shared<TensorBuffer<T>>(shape);
  auto data = buf->data();
  if (const auto* c = std::get_if<Constant>(&fill)) {
    std::fill(data.begin(), data.end(), static_cast<T>(c->value));
  } else if (const auto* r = std::get_if<SeededRandom>(&fill)) {
    std::mt19937_64 gen(r->seed);
    std::uniform_real_distribution<double> dist(r->lo, r->hi);
    for (T& v : data) v = static_cast<T>(dist(gen));
  }
  return buf;
}

// ---------------------------------------------------------------------------
// BlockView

template <class T>
BlockView<T>::BlockView(BufferPtr<T> buffer) : buffer_(std::move(buffer)) {
  if (!buffer_) throw Error(ErrorCode::kInvalidCrop, "view of null buffer");
  for (std::size_t e : buffer_->shape()) ranges_.push_back({0, e});
  base_ = buffer_->data().data();
  row_stride_ = buffer_->strides()[0];
}

template <class T>
BlockView<T>::BlockView(BufferPtr<T> buffer, std::vector<Range> ranges, ViewOrigin origin)
    : buffer_(std::move(buffer)), ranges_(std::move(ranges)), origin_(origin) {
  if (!buffer_) throw Error(ErrorCode::kInvalidCrop, "view of null buffer");
  const Shape& shape = buffer_->shape();
  if (ranges_.size() != shape.size()) throw Error(ErrorCode::kInvalidCrop, "view rank mismatch");
  for (std::size_t a = 0; a < shape.size(); ++a) {
    const Range& r = ranges_[a];
    if (r.begin >= r.end || r.end > shape[a]) {
      throw Error(ErrorCode::kInvalidCrop, "range [" + std::to_string(r.begin) + "," +
                                               std::to_string(r.end) + ") on axis " +
                                               std::to_string(a) + " outside extent " +
                                               std::to_string(shape[a]) + " or empty");
    }
  }
  base_ = buffer_->data().data();
  row_stride_ = buffer_->strides()[0];
}

template <class T>
Shape BlockView<T>::extents() const {
  Shape s;
  s.reserve(ranges_.size());
  for (const Range& r : ranges_) s.push_back(r.size());
  return s;
}

template <class T>
std::size_t BlockView<T>::size() const {
  std::size_t n = 1;
  for (const Range& r : ranges_) n *= r.size();
  return n;
}

template <class T>
T& BlockView<T>::at(std::span<const std::size_t> index) const {
  if (index.size() != ranges_.size()) throw Error(ErrorCode::kShape, "index rank mismatch");
  const auto& strides = buffer_->strides();
  std::size_t off = 0;
  for (std::size_t a = 0; a < index.size(); ++a) {
    if (index[a] >= ranges_[a].size()) throw Error(ErrorCode::kInvalidCrop, "view index out of bounds");
    off += (ranges_[a].begin + index[a]) * strides[a];
  }
  return base_[off];
}

namespace {

// Calls fn(offset) for every element of the view in row-major view order.
template <class Fn>
void for_each_offset(const std::vector<Range>& ranges, const std::vector<std::size_t>& strides,
                     Fn&& fn) {
  const std::size_t rank = ranges.size();
  const std::size_t inner = ranges[rank - 1].size();
  std::vector<std::size_t> idx(rank, 0);
  while (true) {
    std::size_t off = ranges[rank - 1].begin * strides[rank - 1];
    for (std::size_t a = 0; a + 1 < rank; ++a) off += (ranges[a].begin + idx[a]) * strides[a];
    for (std::size_t k = 0; k < inner; ++k) {
      if (!fn(off + k * strides[rank - 1])) return;
    }
    std::size_t a = rank - 1;
    while (a > 0) {
      --a;
      if (++idx[a] < ranges[a].size()) break;
      idx[a] = 0;
      if (a == 0) return;
    }
    if (rank == 1) return;
  }
}

}  // namespace

template <class T>
std::vector<T> BlockView<T>::gather() const {
  std::vector<T> out;
  out.reserve(size());
  for_each_offset(ranges_, buffer_->strides(), [&](std::size_t off) {
    out.push_back(base_[off]);
    return true;
  });
  return out;
}

template <class T>
void BlockView<T>::scatter(std::span<const T> values) const {
  if (values.size() > size()) {
    throw Error(ErrorCode::kShape, "scatter of " + std::to_string(values.size()) +
                                       " elements into a view of " + std::to_string(size()));
  }
  if (values.empty()) return;
  std::size_t i = 0;
  for_each_offset(ranges_, buffer_->strides(), [&](std::size_t off) {
    base_[off] = values[i++];
    return i < values.size();
  });
}

template <class T>
BlockView<T> bcropped(const BufferPtr<T>& buffer, std::size_t m, std::size_t start_row,
                      std::size_t end_row, std::size_t start_col, std::size_t end_col) {
  if (!buffer || buffer->rank() != 2) throw Error(ErrorCode::kInvalidCrop, "bcropped needs a rank-2 buffer");
  const Shape& shape = buffer->shape();
  if (m == 0 || shape[0] % m != 0 || shape[1] % m != 0) {
    throw Error(ErrorCode::kBlockMisalignment, "extents " + shape_string(shape) +
                                                   " not divisible by block size " + std::to_string(m));
  }
  const std::size_t row_blocks = shape[0] / m;
  const std::size_t col_blocks = shape[1] / m;
  if (start_row > end_row || start_col > end_col || end_row >= row_blocks || end_col >= col_blocks) {
    throw Error(ErrorCode::kInvalidCrop,
                "block crop rows " + std::to_string(start_row) + ".." + std::to_string(end_row) +
                    " cols " + std::to_string(start_col) + ".." + std::to_string(end_col) +
                    " invalid for " + std::to_string(row_blocks) + "x" + std::to_string(col_blocks) + " blocks");
  }
  return BlockView<T>(buffer,
                      {{start_row * m, (end_row + 1) * m}, {start_col * m, (end_col + 1) * m}},
                      ViewOrigin{CropKind::kBlock, m, 0});
}

template <class T>
BlockView<T> cropped(const BlockView<T>& view, std::size_t axis, std::size_t start,
                     std::size_t extent) {
  if (axis >= view.rank()) throw Error(ErrorCode::kInvalidCrop, "crop axis out of range");
  if (extent == 0 || start >= view.extent(axis) || extent > view.extent(axis) - start) {
    throw Error(ErrorCode::kInvalidCrop, "crop [" + std::to_string(start) + ", +" +
                                             std::to_string(extent) + ") outside axis " +
                                             std::to_string(axis) + " of extent " +
                                             std::to_string(view.extent(axis)));
  }
  std::vector<Range> ranges = view.ranges();
  const std::size_t base = ranges[axis].begin;
  ranges[axis] = {base + start, base + start + extent};
  return BlockView<T>(view.buffer_ptr(), std::move(ranges), ViewOrigin{CropKind::kAxis, 0, axis});
}

template <class T>
BlockView<T> cropped(const BufferPtr<T>& buffer, std::size_t axis, std::size_t start,
                     std::size_t extent) {
  return cropped(BlockView<T>(buffer), axis, start, extent);
}

template <class T>
AccessSet access_set(const BlockView<T>& view, AccessMode mode) {
  return AccessSet{view.buffer().id(), view.ranges(), mode};
}

bool overlaps(const AccessSet& a, const AccessSet& b) {
  if (a.buffer != b.buffer || a.ranges.size() != b.ranges.size()) return false;
  for (std::size_t i = 0; i < a.ranges.size(); ++i) {
    if (std::max(a.ranges[i].begin, b.ranges[i].begin) >= std::min(a.ranges[i].end, b.ranges[i].end)) {
      return false;
    }
  }
  return true;
}

bool conflicts(const AccessSet& a, const AccessSet& b) {
  return (a.writes() || b.writes()) && overlaps(a, b);
}

std::vector<Range> intersection(const AccessSet& a, const AccessSet& b) {
  std::vector<Range> out;
  for (std::size_t i = 0; i < a.ranges.size() && i < b.ranges.size(); ++i) {
    out.push_back({std::max(a.ranges[i].begin, b.ranges[i].begin),
                   std::min(a.ranges[i].end, b.ranges[i].end)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// tensor-text v1

template <class T>
void write_tensor_text(const TensorBuffer<T>& buffer, std::ostream& out) {
  out << "dims " << buffer.rank();
  for (std::size_t e : buffer.shape()) out << ' ' << e;
  out << '\n';
  const std::size_t inner = buffer.shape().back();
  char text[64];
  std::size_t col = 0;
  for (T v : buffer.data()) {
    auto [end, ec] = std::to_chars(text, text + sizeof text, v);
    if (col) out << ' ';
    out.write(text, end - text);
    if (++col == inner) {
      out << '\n';
      col = 0;
    }
  }
}

template <class T>
void write_tensor_text(const TensorBuffer<T>& buffer, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path + " for writing");
  write_tensor_text(buffer, out);
  if (!out) throw Error(ErrorCode::kIo, "write to " + path + " failed");
}

template <class T>
BufferPtr<T> read_tensor_text(std::istream& in) {
  std::string tag;
  std::size_t rank = 0;
  if (!(in >> tag >> rank) || tag != "dims" || rank == 0) {
    throw Error(ErrorCode::kParse, "tensor-text header must be `dims d e1 ... ed`");
  }
  Shape shape(rank);
  for (auto& e : shape) {
    long long v = 0;
    if (!(in >> v) || v <= 0) throw Error(ErrorCode::kInvalidShape, "bad extent in tensor-text header");
    e = static_cast<std::size_t>(v);
  }
  auto buf = std::make_shared<TensorBuffer<T>>(shape);
  std::string token;
  for (T& v : buf->data()) {
    if (!(in >> token)) throw Error(ErrorCode::kParse, "tensor-text ended early");
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc{} || ptr != token.data() + token.size()) {
      throw Error(ErrorCode::kParse, "bad number `" + token + "` in tensor-text");
    }
  }
  if (in >> token) throw Error(ErrorCode::kParse, "trailing data after tensor-text payload");
  return buf;
}

template <class T>
BufferPtr<T> read_tensor_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  return read_tensor_text<T>(in);
}

#define OVL_INSTANTIATE(T)                                                                        \
  template class TensorBuffer<T>;                                                                 \
  template class BlockView<T>;                                                                    \
  template BufferPtr<T> new_buffer<T>(const Shape&, const FillSpec&);                             \
  template BlockView<T> bcropped<T>(const BufferPtr<T>&, std::size_t, std::size_t, std::size_t,   \
                                    std::size_t, std::size_t);                                    \
  template BlockView<T> cropped<T>(const BufferPtr<T>&, std::size_t, std::size_t, std::size_t);   \
  template BlockView<T> cropped<T>(const BlockView<T>&, std::size_t, std::size_t, std::size_t);   \
  template AccessSet access_set<T>(const BlockView<T>&, AccessMode);                              \
  template void write_tensor_text<T>(const TensorBuffer<T>&, std::ostream&);                      \
  template void write_tensor_text<T>(const TensorBuffer<T>&, const std::string&);                 \
  template BufferPtr<T> read_tensor_text<T>(std::istream&);                                       \
  template BufferPtr<T> read_tensor_text<T>(const std::string&);

OVL_INSTANTIATE(float)
OVL_INSTANTIATE(double)

#undef OVL_INSTANTIATE

}  // namespace ovl
