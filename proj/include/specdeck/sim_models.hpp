#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "specdeck/grid.hpp"
#include "specdeck/oracle.hpp"
#include "specdeck/prob.hpp"

namespace specdeck {

// Rolling hash over the last `depth` tokens (splitmix-style 64-bit mixing);
// the published context key shared by every TableOracle, so oracle dumps and
// traces stay portable across implementations.
uint64_t context_hash(std::span<const TokenId> prefix, int depth);

// Deterministic synthetic model: the distribution for a context is either a
// pinned table entry, a procedurally derived one (seeded by the context
// hash), or the fallback when procedural derivation is off.
class TableOracle : public ModelOracle {
 public:
  // Procedural oracle: every context maps to a seed-derived distribution.
  TableOracle(int vocab, int depth, uint64_t seed);

  // Table-backed oracle: unpinned contexts return `fallback`.
  TableOracle(int vocab, int depth, ProbDist fallback);

  ProbDist next_dist(std::span<const TokenId> prefix) const override;
  double prefill_cost() const override { return prefill_cost_; }
  double decode_cost() const override { return decode_cost_; }

  void pin(std::span<const TokenId> context, ProbDist dist);
  void set_costs(double prefill, double decode);

  int vocab() const { return vocab_; }
  int depth() const { return depth_; }
  uint64_t seed() const { return seed_; }

  std::string to_json() const;
  static TableOracle from_json(const std::string& text);

 private:
  ProbDist derive(uint64_t ctx_hash) const;

  int vocab_ = 2;
  int depth_ = 3;
  uint64_t seed_ = 0;
  bool procedural_ = true;
  std::map<uint64_t, ProbDist> table_;
  std::vector<double> fallback_;
  double prefill_cost_ = 0.0;
  double decode_cost_ = 0.0;
};

// Draft oracle derived from a target: per context it reproduces the target's
// distribution with probability alpha and otherwise swaps the two largest
// coordinates, so greedy agreement is controllable and interpretable.
// Agreement events are keyed on the context hash with a fixed seed, which
// makes them nested across alpha values: raising alpha only adds agreements.
class AgreementDraftOracle : public ModelOracle {
 public:
  AgreementDraftOracle(TableOracle target, double alpha, uint64_t pair_seed);

  ProbDist next_dist(std::span<const TokenId> prefix) const override;
  double prefill_cost() const override { return prefill_cost_; }
  double decode_cost() const override { return decode_cost_; }
  void set_costs(double prefill, double decode);

  double alpha() const { return alpha_; }

 private:
  TableOracle target_;
  double alpha_ = 1.0;
  uint64_t pair_seed_ = 0;
  double prefill_cost_ = 0.0;
  double decode_cost_ = 0.0;
};

struct AgreementPair {
  TableOracle target;
  AgreementDraftOracle draft;
  double alpha = 1.0;

  std::string to_json() const;
  static AgreementPair from_json(const std::string& text);
};

// Random target plus an alpha-agreement draft; both deterministic in seed.
AgreementPair make_pair(int vocab, int depth, double alpha, uint64_t seed);

// Measured greedy agreement over `num_contexts` random held-out contexts.
double measure_agreement(const AgreementPair& pair, int num_contexts,
                         uint64_t seed);

enum class GridScenario { static_background, moving_object, boundary_bias, uniform_noise };

struct ScenarioParams {
  int patch_rows = 2;
  int patch_cols = 2;
  int patch_row0 = -1;  // -1 centers the patch
  int patch_col0 = -1;
  double boundary_scale = 3.0;
  int layers = 2;
  int heads = 2;
  int text_len = 4;
  int key_dim = 8;
};

GridScenario parse_scenario(const std::string& name);
std::string scenario_name(GridScenario s);

// Synthetic video tensors with controllable structure:
//  - static_background: one base frame repeated, a small patch varying per
//    frame (temporal signal confined to the patch);
//  - moving_object: the varying patch also shifts position each frame;
//  - boundary_bias: keys of rows 0 and R-1 scaled so attention-only selection
//    concentrates on them, while those rows stay static across frames;
//  - uniform_noise: the iid null case.
std::pair<VisualTokenGrid, CrossAttentionInputs> make_synthetic_grid(
    int frames, int rows, int cols, int dim, GridScenario scenario,
    uint64_t seed, const ScenarioParams& params = {});

}  // namespace specdeck
