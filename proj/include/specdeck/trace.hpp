#pragma once

#include <string>
#include <vector>

namespace specdeck {

enum class Worker { draft, target };
enum class TraceAction { prefill, decode_one, verify_batch, abort_draft, prune };
enum class SchedMode { optimistic, conservative };

// One per-worker interval on the virtual clock. Verification events carry
// the round outcome so a trace is self-contained input for the simulator.
struct TraceEvent {
  Worker worker = Worker::draft;
  TraceAction action = TraceAction::decode_one;
  double start = 0.0;
  double end = 0.0;
  int round = -1;        // verify_batch only
  int gamma_used = 0;    // verify_batch only
  int accepted = 0;      // verify_batch only
  int emitted = 0;       // verify_batch only
  SchedMode mode = SchedMode::optimistic;  // verify_batch only
};

struct ScheduleTrace {
  std::vector<TraceEvent> events;

  double end_time() const;
  // Per-worker intervals must be non-overlapping and time-ordered; throws
  // with the offending event index otherwise.
  void validate() const;
  // Target idle time between consecutive target events after its prefill.
  double target_idle_after_prefill() const;

  std::string to_jsonl() const;
  static ScheduleTrace from_jsonl(const std::string& text);

  // Compact text timeline, one row per worker, `width` columns.
  std::string render_timeline(int width = 80) const;
};

const char* worker_name(Worker w);
const char* action_name(TraceAction a);
const char* sched_mode_name(SchedMode m);

}  // namespace specdeck
