#include "specdeck/trace.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace specdeck {

const char* worker_name(Worker w) {
  return w == Worker::draft ? "draft" : "target";
}

const char* action_name(TraceAction a) {
  switch (a) {
    case TraceAction::prefill: return "prefill";
    case TraceAction::decode_one: return "decode_one";
    case TraceAction::verify_batch: return "verify_batch";
    case TraceAction::abort_draft: return "abort";
    case TraceAction::prune: return "prune";
  }
  return "unknown";
}

const char* sched_mode_name(SchedMode m) {
  return m == SchedMode::optimistic ? "optimistic" : "conservative";
}

namespace {

TraceAction parse_action(const std::string& s) {
  if (s == "prefill") return TraceAction::prefill;
  if (s == "decode_one") return TraceAction::decode_one;
  if (s == "verify_batch") return TraceAction::verify_batch;
  if (s == "abort") return TraceAction::abort_draft;
  if (s == "prune") return TraceAction::prune;
  throw std::runtime_error("ScheduleTrace: unknown action '" + s + "'");
}

}  // namespace

double ScheduleTrace::end_time() const {
  double t = 0.0;
  for (const auto& e : events) t = std::max(t, e.end);
  return t;
}

void ScheduleTrace::validate() const {
  double last_end[2] = {0.0, 0.0};
  for (size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    const int w = e.worker == Worker::draft ? 0 : 1;
    if (!(e.end >= e.start) || !std::isfinite(e.start) || !std::isfinite(e.end)) {
      throw std::runtime_error("ScheduleTrace: malformed interval at event " +
                               std::to_string(i));
    }
    // Small negative slack absorbs accumulated rounding on the virtual clock.
    if (e.start < last_end[w] - 1e-9) {
      throw std::runtime_error("ScheduleTrace: overlapping events for worker '" +
                               std::string(worker_name(e.worker)) + "' at event " +
                               std::to_string(i));
    }
    last_end[w] = std::max(last_end[w], e.end);
  }
}

double ScheduleTrace::target_idle_after_prefill() const {
  double cursor = -1.0;
  double idle = 0.0;
  for (const auto& e : events) {
    if (e.worker != Worker::target) continue;
    if (e.action == TraceAction::prefill) {
      cursor = std::max(cursor, e.end);
      continue;
    }
    if (cursor >= 0.0) {
      idle += std::max(0.0, e.start - cursor);
      cursor = std::max(cursor, e.end);
    }
  }
  return idle;
}

std::string ScheduleTrace::to_jsonl() const {
  std::ostringstream os;
  for (const auto& e : events) {
    nlohmann::json j{{"worker", worker_name(e.worker)},
                     {"action", action_name(e.action)},
                     {"start", e.start},
                     {"end", e.end}};
    if (e.action == TraceAction::verify_batch) {
      j["round"] = e.round;
      j["gamma_used"] = e.gamma_used;
      j["accepted"] = e.accepted;
      j["emitted"] = e.emitted;
      j["mode"] = sched_mode_name(e.mode);
    }
    os << j.dump() << "\n";
  }
  return os.str();
}

ScheduleTrace ScheduleTrace::from_jsonl(const std::string& text) {
  ScheduleTrace trace;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    TraceEvent e;
    e.worker = j.at("worker") == "draft" ? Worker::draft : Worker::target;
    e.action = parse_action(j.at("action").get<std::string>());
    e.start = j.at("start").get<double>();
    e.end = j.at("end").get<double>();
    if (e.action == TraceAction::verify_batch) {
      e.round = j.at("round").get<int>();
      e.gamma_used = j.at("gamma_used").get<int>();
      e.accepted = j.at("accepted").get<int>();
      e.emitted = j.at("emitted").get<int>();
      e.mode = j.at("mode") == "optimistic" ? SchedMode::optimistic
                                            : SchedMode::conservative;
    }
    trace.events.push_back(e);
  }
  return trace;
}

std::string ScheduleTrace::render_timeline(int width) const {
  width = std::max(width, 10);
  const double total = end_time();
  std::string rows[2](std::string(static_cast<size_t>(width), '.'));
  if (total > 0.0) {
    for (const auto& e : events) {
      char c = '?';
      switch (e.action) {
        case TraceAction::prefill: c = 'P'; break;
        case TraceAction::decode_one: c = 'D'; break;
        case TraceAction::verify_batch: c = 'V'; break;
        case TraceAction::abort_draft: c = 'X'; break;
        case TraceAction::prune: c = 'R'; break;
      }
      int a = static_cast<int>(std::floor(e.start / total * width));
      int b = static_cast<int>(std::ceil(e.end / total * width));
      a = std::clamp(a, 0, width - 1);
      b = std::clamp(b, a + 1, width);
      auto& row = rows[e.worker == Worker::draft ? 0 : 1];
      for (int i = a; i < b; ++i) {
        if (row[i] == '.' || e.action == TraceAction::abort_draft) row[i] = c;
      }
    }
  }
  std::ostringstream os;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", total);
  os << "timeline 0 .. " << buf
     << "  (P prefill, R prune, D decode, V verify, X abort, . idle)\n";
  os << "draft  |" << rows[0] << "|\n";
  os << "target |" << rows[1] << "|\n";
  return os.str();
}

}  // namespace specdeck
