#pragma once

#include <cstdint>
#include <vector>

#include "specdeck/rng.hpp"

namespace specdeck {

using TokenId = int32_t;

// Normalized probability vector over a token vocabulary (V >= 2).
// Entries are non-negative and sum to one within 1e-9 after construction.
class ProbDist {
 public:
  // Accepts a vector whose entries are non-negative and whose sum is within
  // 1e-6 of one; renormalizes rather than rejecting inside that slack.
  explicit ProbDist(std::vector<double> probs);

  // Normalizes an arbitrary non-negative weight vector with positive sum.
  // Used where unnormalized mass arises by construction (residuals, softmax).
  static ProbDist normalized(std::vector<double> weights);

  int vocab() const { return static_cast<int>(probs_.size()); }
  double operator[](TokenId t) const { return probs_[static_cast<size_t>(t)]; }
  const std::vector<double>& probs() const { return probs_; }

  bool operator==(const ProbDist& other) const { return probs_ == other.probs_; }

 private:
  struct Raw {};
  ProbDist(Raw, std::vector<double> probs) : probs_(std::move(probs)) {}

  std::vector<double> probs_;
};

// Draws index t with probability dist[t]; consumes exactly one uniform.
TokenId sample(const ProbDist& dist, SeededRng& rng);

// Acceptance probability of drafted token x: 1 if p[x] >= q[x], else
// p[x]/q[x]. q[x] == 0 is a vacuous case and accepts; the token could not
// have been drafted, but the function stays total.
double accept_prob(const ProbDist& p, const ProbDist& q, TokenId x);

// norm(max(0, p - q)); when p == q (no positive residual mass) returns p
// itself, keeping the operation total even though rejection has probability
// zero there.
ProbDist residual(const ProbDist& p, const ProbDist& q);

// Argmax with ties broken toward the lowest token id.
TokenId argmax_token(const ProbDist& dist);

}  // namespace specdeck
