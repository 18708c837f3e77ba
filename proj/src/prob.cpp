#include "specdeck/prob.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace specdeck {

namespace {

constexpr double kSumSlack = 1e-6;

void check_entries(const std::vector<double>& probs) {
  if (probs.size() < 2) {
    throw std::invalid_argument("ProbDist: vocabulary must have V >= 2, got " +
                                std::to_string(probs.size()));
  }
  for (double v : probs) {
    if (!std::isfinite(v)) throw std::invalid_argument("ProbDist: non-finite entry");
    if (v < 0.0) throw std::invalid_argument("ProbDist: negative entry");
  }
}

double sum_of(const std::vector<double>& probs) {
  double s = 0.0;
  for (double v : probs) s += v;
  return s;
}

}  // namespace

ProbDist::ProbDist(std::vector<double> probs) {
  check_entries(probs);
  const double s = sum_of(probs);
  if (std::abs(s - 1.0) > kSumSlack) {
    throw std::invalid_argument("ProbDist: entries sum to " + std::to_string(s) +
                                ", outside the 1e-6 normalization slack");
  }
  for (double& v : probs) v /= s;
  probs_ = std::move(probs);
}

ProbDist ProbDist::normalized(std::vector<double> weights) {
  check_entries(weights);
  const double s = sum_of(weights);
  if (s <= 0.0) throw std::invalid_argument("ProbDist: weights sum to zero");
  for (double& v : weights) v /= s;
  return ProbDist(Raw{}, std::move(weights));
}

TokenId sample(const ProbDist& dist, SeededRng& rng) {
  const double u = rng.next_double();
  double acc = 0.0;
  const auto& p = dist.probs();
  for (size_t i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (u < acc) return static_cast<TokenId>(i);
  }
  // Rounding can leave acc marginally below 1; the draw lands on the last
  // token with positive mass.
  for (size_t i = p.size(); i-- > 0;) {
    if (p[i] > 0.0) return static_cast<TokenId>(i);
  }
  return static_cast<TokenId>(p.size() - 1);
}

double accept_prob(const ProbDist& p, const ProbDist& q, TokenId x) {
  if (p.vocab() != q.vocab()) {
    throw std::invalid_argument("accept_prob: vocabulary mismatch (" +
                                std::to_string(p.vocab()) + " vs " +
                                std::to_string(q.vocab()) + ")");
  }
  if (x < 0 || x >= p.vocab()) throw std::out_of_range("accept_prob: token out of range");
  const double px = p[x];
  const double qx = q[x];
  if (qx == 0.0) return 1.0;
  if (px >= qx) return 1.0;
  return px / qx;
}

ProbDist residual(const ProbDist& p, const ProbDist& q) {
  if (p.vocab() != q.vocab()) {
    throw std::invalid_argument("residual: vocabulary mismatch");
  }
  std::vector<double> r(p.probs().size());
  double mass = 0.0;
  for (size_t i = 0; i < r.size(); ++i) {
    const double d = p.probs()[i] - q.probs()[i];
    r[i] = d > 0.0 ? d : 0.0;
    mass += r[i];
  }
  if (mass <= 0.0) return p;
  return ProbDist::normalized(std::move(r));
}

TokenId argmax_token(const ProbDist& dist) {
  const auto& p = dist.probs();
  size_t best = 0;
  for (size_t i = 1; i < p.size(); ++i) {
    if (p[i] > p[best]) best = i;
  }
  return static_cast<TokenId>(best);
}

}  // namespace specdeck
