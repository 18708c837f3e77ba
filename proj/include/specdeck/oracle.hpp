#pragma once

#include <span>
#include <vector>

#include "specdeck/prob.hpp"

namespace specdeck {

// Deterministic next-token model: the same prefix always yields the same
// distribution. Implementations must be safe for concurrent reads.
class ModelOracle {
 public:
  virtual ~ModelOracle() = default;

  virtual ProbDist next_dist(std::span<const TokenId> prefix) const = 0;

  // Cost hints in abstract time units, consumed by the latency simulator
  // when a profile is assembled from an oracle pair.
  virtual double prefill_cost() const { return 0.0; }
  virtual double decode_cost() const { return 0.0; }
};

// Target-only greedy auto-regressive continuation; the losslessness oracle.
// Ties break toward the lowest token id, matching the verifier.
std::vector<TokenId> greedy_ar(const ModelOracle& model,
                               std::span<const TokenId> prompt, int max_new);

}  // namespace specdeck
