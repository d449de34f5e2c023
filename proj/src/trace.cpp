// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>

#include <json.hpp>

#include "ovl/runtime.hpp"

namespace ovl {

using json = nlohmann::ordered_json;

void emit_trace(const ExecutionTrace& trace, std::ostream& out) {
  if (trace.records.empty()) return;
  for (const TraceRecord& r : trace.records) {
    json line{{"id", r.id},       {"kind", r.kind}, {"iter", r.iteration}, {"queue", r.queue},
              {"vstart", r.vstart}, {"vend", r.vend}, {"worker", r.worker}};
    out << line.dump() << '\n';
  }
  json edges = json::array();
  for (const auto& [pre, dep] : trace.edges) edges.push_back(json::array({pre, dep}));
  out << json{{"edges", edges}}.dump() << '\n';
}

void emit_trace(const ExecutionTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot open " + path + " for writing");
  emit_trace(trace, out);
  if (!out) throw Error(ErrorCode::kIo, "write to " + path + " failed");
}

ExecutionTrace parse_trace(std::istream& in) {
  ExecutionTrace trace;
  std::string line;
  std::size_t lineno = 0;
  bool saw_edges = false;
  try {
    while (std::getline(in, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      if (saw_edges) throw Error(ErrorCode::kParse, "content after edges line at line " + std::to_string(lineno));
      const json doc = json::parse(line);
      if (doc.contains("edges")) {
        for (const auto& e : doc.at("edges")) {
          if (!e.is_array() || e.size() != 2) throw Error(ErrorCode::kParse, "edge must be [pre, dep]");
          trace.edges.emplace_back(e[0].get<TaskId>(), e[1].get<TaskId>());
        }
        saw_edges = true;
        continue;
      }
      TraceRecord r;
      r.id = doc.at("id").get<TaskId>();
      r.kind = doc.at("kind").get<std::string>();
      r.iteration = doc.at("iter").get<std::int64_t>();
      r.queue = doc.at("queue").get<std::uint32_t>();
      r.vstart = doc.at("vstart").get<std::uint64_t>();
      r.vend = doc.at("vend").get<std::uint64_t>();
      r.worker = doc.at("worker").get<std::uint32_t>();
      trace.records.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, "malformed trace at line " + std::to_string(lineno) + ": " + e.what());
  }
  if (!trace.records.empty() && !saw_edges) throw Error(ErrorCode::kParse, "trace has no edges line");
  return trace;
}

ExecutionTrace parse_trace_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  return parse_trace(in);
}

TraceSummary summarize_trace(const ExecutionTrace& trace) {
  TraceSummary s;
  s.tasks = trace.records.size();
  if (trace.records.empty()) return s;
  auto violation = [&](std::string text) { s.violations.push_back(std::move(text)); };

  std::map<TaskId, const TraceRecord*> by_id;
  std::uint64_t first = trace.records.front().vstart, last = 0;
  for (std::size_t k = 0; k < trace.records.size(); ++k) {
    const TraceRecord& r = trace.records[k];
    if (r.vend < r.vstart) violation("task " + std::to_string(r.id) + " ends before it starts");
    if (k > 0 && r.vstart < trace.records[k - 1].vstart) {
      violation("records not in start order at task " + std::to_string(r.id));
    }
    if (!by_id.emplace(r.id, &r).second) violation("task " + std::to_string(r.id) + " appears twice");
    first = std::min(first, r.vstart);
    last = std::max(last, r.vend);
  }
  s.span = last - first;

  for (const auto& [pre, dep] : trace.edges) {
    auto a = by_id.find(pre), b = by_id.find(dep);
    if (a == by_id.end() || b == by_id.end()) {
      violation("edge " + std::to_string(pre) + "->" + std::to_string(dep) + " names a missing task");
      continue;
    }
    if (a->second->vend > b->second->vstart) {
      violation("edge " + std::to_string(pre) + "->" + std::to_string(dep) + " violated: predecessor ends at " +
                std::to_string(a->second->vend) + ", successor starts at " + std::to_string(b->second->vstart));
    }
  }

  std::map<std::uint32_t, std::vector<const TraceRecord*>> per_queue;
  std::uint64_t busy_total = 0;
  for (const TraceRecord& r : trace.records) {
    per_queue[r.queue].push_back(&r);
    busy_total += r.vend >= r.vstart ? r.vend - r.vstart : 0;
  }
  for (auto& [q, recs] : per_queue) {
    std::stable_sort(recs.begin(), recs.end(), [](auto* a, auto* b) { return a->vstart < b->vstart; });
    std::uint64_t busy = 0;
    for (std::size_t k = 0; k < recs.size(); ++k) {
      busy += recs[k]->vend >= recs[k]->vstart ? recs[k]->vend - recs[k]->vstart : 0;
      if (k == 0) continue;
      if (recs[k - 1]->vend > recs[k]->vstart) {
        violation("queue " + std::to_string(q) + " overlaps tasks " + std::to_string(recs[k - 1]->id) + " and " +
                  std::to_string(recs[k]->id));
      }
      if (recs[k - 1]->id > recs[k]->id) {
        violation("queue " + std::to_string(q) + " ran task " + std::to_string(recs[k]->id) + " after " +
                  std::to_string(recs[k - 1]->id) + " (not FIFO)");
      }
    }
    s.queue_tasks[q] = recs.size();
    s.queue_utilization[q] = s.span ? static_cast<double>(busy) / static_cast<double>(s.span) : 1.0;
  }

  // Sweep for peak concurrency; ends sort before starts at equal times.
  std::vector<std::pair<std::uint64_t, int>> events;
  for (const TraceRecord& r : trace.records) {
    events.emplace_back(r.vstart, +1);
    events.emplace_back(r.vend, -1);
  }
  std::sort(events.begin(), events.end());
  int live = 0;
  for (const auto& [t, delta] : events) {
    live += delta;
    s.max_concurrency = std::max<std::size_t>(s.max_concurrency, static_cast<std::size_t>(std::max(live, 0)));
  }
  if (s.span && s.max_concurrency) {
    s.worker_utilization =
        static_cast<double>(busy_total) / (static_cast<double>(s.span) * static_cast<double>(s.max_concurrency));
  }

  // Critical path: longest duration-weighted chain along the edges.
  if (s.valid()) {
    std::map<TaskId, std::vector<TaskId>> preds;
    for (const auto& [pre, dep] : trace.edges) preds[dep].push_back(pre);
    std::vector<const TraceRecord*> order;
    for (const TraceRecord& r : trace.records) order.push_back(&r);
    std::stable_sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->vend < b->vend; });
    std::map<TaskId, std::uint64_t> finish;
    for (const TraceRecord* r : order) {
      std::uint64_t start = 0;
      for (TaskId p : preds[r->id]) start = std::max(start, finish[p]);
      finish[r->id] = start + (r->vend - r->vstart);
      s.critical_path = std::max(s.critical_path, finish[r->id]);
    }
  }
  return s;
}

}  // namespace ovl
