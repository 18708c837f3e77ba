#pragma once

#include <map>
#include <string>

#include "specdeck/oracle.hpp"
#include "specdeck/serial.hpp"
#include "specdeck/trace.hpp"

namespace specdeck {

// Per-phase timing parameters in abstract time units. Decode and verify are
// per forward pass; a verification pass costs the same regardless of how
// many draft tokens it covers.
struct LatencyProfile {
  double t_draft_prefill = 0.0;
  double t_target_prefill = 0.0;
  double t_draft_decode = 0.0;
  double t_target_verify = 1.0;
  double t_prune = 0.0;

  void validate() const;  // all >= 0, t_target_verify > 0
};

LatencyProfile profile_from(const ModelOracle& draft, const ModelOracle& target,
                            double t_prune = 0.0);

// Decoding-only effective speedup of one serial round:
// (accepted + 1) * t_verify / (gamma * t_draft_decode + t_verify).
double round_speedup(const LatencyProfile& profile, int gamma, int accepted);

// Tokens the draft can decode while the target is still prefilling:
// floor((t_target_prefill - t_draft_prefill) / t_draft_decode), clamped at 0.
int prefill_buffer(const LatencyProfile& profile);

struct RunMetrics {
  double total_time = 0.0;
  double ar_baseline_time = 0.0;
  double speedup = 0.0;  // ar_baseline_time / total_time, end to end
  double decode_time = 0.0;
  double ar_decode_time = 0.0;
  double speedup_decode = 0.0;  // decoding-only accounting
  double mat = 0.0;             // mean acceptance-run length in tokens
  double mat_per_round = 0.0;   // mean tokens emitted per round
  int tokens_emitted = 0;
  int rounds = 0;
  bool overlapped = false;  // draft-side phases hidden under target time
  std::map<std::string, double> breakdown;

  std::string to_json() const;
  std::string breakdown_csv() const;
};

// An acceptance run accumulates emitted tokens across consecutive fully
// accepted rounds and terminates at the first round containing a rejection,
// inclusive of that round's emissions; a trailing all-accepted run counts.
// Rounds with gamma_used == 0 (plain AR) each close a run of their own.
struct MatStats {
  double mat = 0.0;
  double mat_per_round = 0.0;
};
MatStats mat_from_rounds(const std::vector<RoundRecord>& rounds);

// Serial accounting: prefills, pruning and every round's draft and verify
// time add up; breakdown sums to total_time exactly.
RunMetrics simulate(const RoundLog& log, const LatencyProfile& profile);

// Parallel accounting over a virtual-clock trace: total time is the trace
// makespan, so per-worker busy intervals only count where they extend it.
RunMetrics simulate(const ScheduleTrace& trace, const LatencyProfile& profile);

}  // namespace specdeck
