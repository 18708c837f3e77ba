#pragma once

#include <span>
#include <vector>

#include "specdeck/latency.hpp"
#include "specdeck/serial.hpp"
#include "specdeck/trace.hpp"

namespace specdeck {

enum class VpsdExecutor { virtual_clock, threads };

struct VpsdOptions {
  VpsdExecutor executor = VpsdExecutor::virtual_clock;
  // Disabling speculative lookahead must leave the committed sequence
  // untouched in greedy mode; only the draft-worker trace changes.
  bool speculate = true;
};

struct VpsdResult {
  std::vector<TokenId> tokens;  // committed continuation, length max_new
  RoundLog log;
  ScheduleTrace trace;
  int prefill_buffer_tokens = 0;
};

// Video parallel speculative decoding: synchronous draft-target prefill,
// then adaptive switching between optimistic rounds (verify the buffered
// batch while drafting one batch of lookahead) and conservative rounds
// (verify the first draft token while drafting the rest, aborting on a
// rejection). The virtual-clock executor is the reference semantics; the
// two-worker executor overlaps drafting and verification on real threads
// and must commit the identical token sequence.
//
// Round accounting: a fully accepted batch also commits the bonus token
// drawn from the target's next distribution. The speculative lookahead
// survives the bonus only when its first token equals it; the scheduler
// then consumes that token and keeps the remainder as the next batch.
VpsdResult run_vpsd(const ModelOracle& draft_model,
                    const ModelOracle& target_model,
                    std::span<const TokenId> prompt, int gamma, int max_new,
                    const LatencyProfile& profile, const SeededRng& rng,
                    DecodeMode mode, const VpsdOptions& options = {});

}  // namespace specdeck
