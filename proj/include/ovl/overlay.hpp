// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ovl/kernels.hpp"
#include "ovl/tensor.hpp"

namespace ovl {

enum class ParamKind { kView, kScalar, kFlag };

const char* to_string(ParamKind kind);
ParamKind parse_param_kind(std::string_view text);

using Signature = std::vector<ParamKind>;

/// An IP as the overlay sees it: a name that resolves to a kernel, plus the
/// formal parameter kinds of its command.
struct IpDescriptor {
  std::string name;
  Signature signature;

  bool operator==(const IpDescriptor&) const = default;
};

/// Built-in IPs: LU, TransformRowPanel, TransformColumnPanel, GEMM,
/// Convolution, Maxpool. Throws kConfiguration for any other name.
IpDescriptor builtin_ip(std::string_view name);
std::vector<std::string> builtin_ip_names();

struct CommandInterface {
  std::uint32_t queue_no = 0;
  IpDescriptor ip;

  bool operator==(const CommandInterface&) const = default;
};

/// Binds `ip` to a command queue. `signature` is the parameter list the
/// caller declares; it must match the IP's kernel.
CommandInterface command(const IpDescriptor& ip, std::uint32_t queue_no, const Signature& signature);

/// Persistent description of an overlay: what `compile` would hand to the
/// device. Serialized as `{name, ips:[{name, queue, signature}]}`.
struct OverlayManifest {
  std::string name;
  std::vector<CommandInterface> interfaces;  // sorted by queue_no

  bool operator==(const OverlayManifest&) const = default;

  std::string to_json() const;
  static OverlayManifest from_json(std::string_view text);
  void save(const std::string& path) const;
  static OverlayManifest load(const std::string& path);
};

/// Collects command interfaces, rejecting a queue number the second time
/// it is claimed.
class OverlayBuilder {
 public:
  explicit OverlayBuilder(std::string name) : name_(std::move(name)) {}

  OverlayBuilder& command(const IpDescriptor& ip, std::uint32_t queue_no, const Signature& signature);
  OverlayBuilder& add(CommandInterface ci);

  /// Throws kConfiguration when empty or when queues are not 0..k-1.
  OverlayManifest manifest() const;

 private:
  std::string name_;
  std::vector<CommandInterface> interfaces_;
};

/// The two overlays the applications run on.
OverlayManifest lu_overlay_manifest();
OverlayManifest vgg_overlay_manifest();

template <class T>
using Argument = std::variant<BlockView<T>, double, bool>;

namespace detail {
template <class T>
struct KernelBinding;
}  // namespace detail

using TaskId = std::uint32_t;

/// Everything the task graph needs to know about an enqueued command.
struct TaskMeta {
  TaskId id = 0;
  std::string kind;
  std::uint32_t queue = 0;
  std::int64_t iteration = 0;
  std::vector<AccessSet> access;
};

template <class T>
struct TaskInstance {
  TaskMeta meta;
  std::vector<Argument<T>> args;
};

struct TaskHandle {
  TaskId id = 0;
  std::string kind;
  std::int64_t iteration = 0;
};

/// Runtime object for an overlay: one FIFO command queue per IP plus the
/// shared feature-buffer slot. Enqueue only records work; the task runtime
/// executes it.
template <class T>
class Overlay {
 public:
  /// Binds every IP in the manifest to its kernel by name.
  explicit Overlay(OverlayManifest manifest);

  Overlay(const Overlay&) = delete;
  Overlay& operator=(const Overlay&) = delete;

  const std::string& name() const { return manifest_.name; }
  const OverlayManifest& manifest() const { return manifest_; }
  std::size_t queue_count() const { return queues_.size(); }

  /// Appends a command to queue `queue_no`, tagged with the caller's task
  /// kind and iteration. Throws kInvocation on an unknown queue or when the
  /// arguments do not match the interface signature.
  TaskHandle enqueue(std::uint32_t queue_no, std::vector<Argument<T>> args, std::string kind,
                     std::int64_t iteration);

  /// Pending task ids of one queue, head first.
  const std::deque<TaskId>& queue(std::uint32_t queue_no) const;
  /// Removes and returns the head of a queue. Throws kInvocation when empty.
  TaskId pop(std::uint32_t queue_no);

  const TaskInstance<T>& task(TaskId id) const { return tasks_.at(id); }
  std::size_t task_count() const { return tasks_.size(); }
  std::vector<TaskMeta> task_metas() const;

  /// Runs the kernel of task `id`. Returns the produced feature-map shape
  /// for CNN kernels and an empty shape otherwise.
  Shape execute(TaskId id);
  /// Floating-point operation estimate of task `id` given current state.
  std::uint64_t estimate_flops(TaskId id) const;

  /// Forgets all tasks, including ones still queued.
  void reset_tasks();

  FeatureBuffer<T>& feature_buffer() { return feature_buffer_; }

 private:
  OverlayManifest manifest_;
  std::vector<const detail::KernelBinding<T>*> bindings_;  // indexed by queue
  std::vector<std::deque<TaskId>> queues_;
  std::vector<TaskInstance<T>> tasks_;
  FeatureBuffer<T> feature_buffer_;
};

template <class T>
using OverlayPtr = std::shared_ptr<Overlay<T>>;

template <class T>
OverlayPtr<T> build_overlay(const OverlayManifest& manifest) {
  return std::make_shared<Overlay<T>>(manifest);
}

/// Loads a manifest and returns the runnable overlay. While a handle to an
/// overlay loaded from the same file (same element type) is alive, later
/// loads return that same handle instead of creating a second one.
template <class T>
OverlayPtr<T> load_overlay(const std::string& path);

}  // namespace ovl
