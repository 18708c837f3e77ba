#include "specdeck/sim_models.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <json.hpp>

namespace specdeck {

namespace {

constexpr uint64_t kContextInit = 0x8f1bbcdcbfa53e0bull;
constexpr uint64_t kDeriveSalt = 0x2545f4914f6cdd1dull;
constexpr uint64_t kAgreementSalt = 0x9e2aace2b57d1e4full;

double gauss(SeededRng& rng) {
  // Box-Muller, two uniforms per draw.
  const double u1 = 1.0 - rng.next_double();
  const double u2 = rng.next_double();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<double> swap_top_two(std::vector<double> probs) {
  size_t top = 0;
  for (size_t i = 1; i < probs.size(); ++i) {
    if (probs[i] > probs[top]) top = i;
  }
  size_t second = top == 0 ? 1 : 0;
  for (size_t i = 0; i < probs.size(); ++i) {
    if (i != top && probs[i] > probs[second]) second = i;
  }
  std::swap(probs[top], probs[second]);
  return probs;
}

}  // namespace

uint64_t context_hash(std::span<const TokenId> prefix, int depth) {
  const size_t n = std::min(prefix.size(), static_cast<size_t>(depth));
  uint64_t h = mix64(kContextInit ^ (n + 1));
  for (size_t i = prefix.size() - n; i < prefix.size(); ++i) {
    h = mix64(h ^ (static_cast<uint64_t>(static_cast<uint32_t>(prefix[i])) +
                   0x9E3779B97F4A7C15ull));
  }
  return h;
}

TableOracle::TableOracle(int vocab, int depth, uint64_t seed)
    : vocab_(vocab), depth_(depth), seed_(seed), procedural_(true) {
  if (vocab < 2) throw std::invalid_argument("TableOracle: vocab must be >= 2");
  if (depth < 0) throw std::invalid_argument("TableOracle: depth must be >= 0");
}

TableOracle::TableOracle(int vocab, int depth, ProbDist fallback)
    : vocab_(vocab), depth_(depth), procedural_(false),
      fallback_(fallback.probs()) {
  if (vocab < 2) throw std::invalid_argument("TableOracle: vocab must be >= 2");
  if (fallback.vocab() != vocab) {
    throw std::invalid_argument("TableOracle: fallback vocabulary mismatch");
  }
}

ProbDist TableOracle::derive(uint64_t ctx_hash) const {
  SeededRng rng(mix64(seed_ ^ mix64(ctx_hash + kDeriveSalt)));
  std::vector<double> w(static_cast<size_t>(vocab_));
  for (double& v : w) {
    // Exponential weights: a flat Dirichlet draw after normalization.
    v = -std::log(1.0 - rng.next_double());
  }
  return ProbDist::normalized(std::move(w));
}

ProbDist TableOracle::next_dist(std::span<const TokenId> prefix) const {
  const uint64_t h = context_hash(prefix, depth_);
  if (const auto it = table_.find(h); it != table_.end()) return it->second;
  if (procedural_) return derive(h);
  return ProbDist(fallback_);
}

void TableOracle::pin(std::span<const TokenId> context, ProbDist dist) {
  if (dist.vocab() != vocab_) {
    throw std::invalid_argument("TableOracle: pinned distribution vocabulary mismatch");
  }
  table_.insert_or_assign(context_hash(context, depth_), std::move(dist));
}

void TableOracle::set_costs(double prefill, double decode) {
  prefill_cost_ = prefill;
  decode_cost_ = decode;
}

std::string TableOracle::to_json() const {
  nlohmann::json j;
  j["vocab"] = vocab_;
  j["depth"] = depth_;
  j["seed"] = seed_;
  j["procedural"] = procedural_;
  j["prefill_cost"] = prefill_cost_;
  j["decode_cost"] = decode_cost_;
  if (!procedural_) j["fallback"] = fallback_;
  auto& table = j["table"] = nlohmann::json::object();
  for (const auto& [hash, dist] : table_) {
    table[std::to_string(hash)] = dist.probs();
  }
  return j.dump();
}

TableOracle TableOracle::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  const int vocab = j.at("vocab").get<int>();
  const int depth = j.at("depth").get<int>();
  TableOracle oracle =
      j.at("procedural").get<bool>()
          ? TableOracle(vocab, depth, j.at("seed").get<uint64_t>())
          : TableOracle(vocab, depth,
                        ProbDist(j.at("fallback").get<std::vector<double>>()));
  oracle.set_costs(j.at("prefill_cost").get<double>(),
                   j.at("decode_cost").get<double>());
  for (const auto& [key, probs] : j.at("table").items()) {
    oracle.table_.insert_or_assign(
        std::stoull(key), ProbDist(probs.get<std::vector<double>>()));
  }
  return oracle;
}

AgreementDraftOracle::AgreementDraftOracle(TableOracle target, double alpha,
                                           uint64_t pair_seed)
    : target_(std::move(target)), alpha_(alpha), pair_seed_(pair_seed) {
  if (alpha < 0.0 || alpha > 1.0) {
    throw std::invalid_argument("AgreementDraftOracle: alpha must be in [0, 1]");
  }
}

ProbDist AgreementDraftOracle::next_dist(std::span<const TokenId> prefix) const {
  ProbDist target_dist = target_.next_dist(prefix);
  const uint64_t h = context_hash(prefix, target_.depth());
  // One fixed uniform per context: agreement sets are nested across alpha.
  const double u = u01_from_bits(mix64(pair_seed_ ^ mix64(h + kAgreementSalt)));
  if (u < alpha_) return target_dist;
  return ProbDist::normalized(swap_top_two(target_dist.probs()));
}

void AgreementDraftOracle::set_costs(double prefill, double decode) {
  prefill_cost_ = prefill;
  decode_cost_ = decode;
}

std::string AgreementPair::to_json() const {
  nlohmann::json j;
  j["target"] = nlohmann::json::parse(target.to_json());
  j["alpha"] = alpha;
  return j.dump();
}

AgreementPair make_pair(int vocab, int depth, double alpha, uint64_t seed) {
  if (alpha < 0.0 || alpha > 1.0) {
    throw std::invalid_argument("make_pair: alpha must be in [0, 1]");
  }
  SeededRng root(seed);
  TableOracle target(vocab, depth, root.split(10).seed());
  const uint64_t pair_seed = root.split(11).seed();
  AgreementDraftOracle draft(target, alpha, pair_seed);
  return AgreementPair{std::move(target), std::move(draft), alpha};
}

AgreementPair AgreementPair::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  TableOracle target = TableOracle::from_json(j.at("target").dump());
  const double alpha = j.at("alpha").get<double>();
  // The pair seed is re-derived from the target seed the same way make_pair
  // derives it, so a dump fully determines the pair.
  SeededRng root(target.seed());
  AgreementDraftOracle draft(target, alpha, root.split(11).seed());
  return AgreementPair{std::move(target), std::move(draft), alpha};
}

double measure_agreement(const AgreementPair& pair, int num_contexts,
                         uint64_t seed) {
  SeededRng rng(seed);
  const int depth = pair.target.depth();
  const int vocab = pair.target.vocab();
  int agree = 0;
  std::vector<TokenId> ctx(static_cast<size_t>(std::max(depth, 1)));
  for (int i = 0; i < num_contexts; ++i) {
    for (auto& t : ctx) {
      t = static_cast<TokenId>(rng.next_u64() % static_cast<uint64_t>(vocab));
    }
    if (argmax_token(pair.target.next_dist(ctx)) ==
        argmax_token(pair.draft.next_dist(ctx))) {
      ++agree;
    }
  }
  return static_cast<double>(agree) / num_contexts;
}

GridScenario parse_scenario(const std::string& name) {
  if (name == "static_background") return GridScenario::static_background;
  if (name == "moving_object") return GridScenario::moving_object;
  if (name == "boundary_bias") return GridScenario::boundary_bias;
  if (name == "uniform_noise") return GridScenario::uniform_noise;
  throw std::invalid_argument("unknown scenario: " + name);
}

std::string scenario_name(GridScenario s) {
  switch (s) {
    case GridScenario::static_background: return "static_background";
    case GridScenario::moving_object: return "moving_object";
    case GridScenario::boundary_bias: return "boundary_bias";
    case GridScenario::uniform_noise: return "uniform_noise";
  }
  return "unknown";
}

namespace {

void fill_gauss(float* dst, int n, SeededRng& rng) {
  for (int i = 0; i < n; ++i) dst[i] = static_cast<float>(gauss(rng));
}

}  // namespace

std::pair<VisualTokenGrid, CrossAttentionInputs> make_synthetic_grid(
    int frames, int rows, int cols, int dim, GridScenario scenario,
    uint64_t seed, const ScenarioParams& params) {
  if (frames < 1 || rows < 1 || cols < 1 || dim < 1) {
    throw std::invalid_argument("make_synthetic_grid: all dims must be >= 1");
  }
  SeededRng root(seed);
  SeededRng emb_rng = root.split(1);
  SeededRng qk_rng = root.split(2);

  VisualTokenGrid grid;
  grid.frames = frames;
  grid.rows = rows;
  grid.cols = cols;
  grid.dim = dim;
  grid.data.resize(static_cast<size_t>(frames) * rows * cols * dim);

  const int patch_r = std::min(params.patch_rows, rows);
  const int patch_c = std::min(params.patch_cols, cols);
  const int base_r0 = params.patch_row0 >= 0
                          ? std::min(params.patch_row0, rows - patch_r)
                          : std::max(0, (rows - patch_r) / 2);
  const int base_c0 = params.patch_col0 >= 0
                          ? std::min(params.patch_col0, cols - patch_c)
                          : std::max(0, (cols - patch_c) / 2);

  switch (scenario) {
    case GridScenario::uniform_noise: {
      fill_gauss(grid.data.data(), static_cast<int>(grid.data.size()), emb_rng);
      break;
    }
    case GridScenario::static_background:
    case GridScenario::moving_object: {
      std::vector<float> base(static_cast<size_t>(rows) * cols * dim);
      fill_gauss(base.data(), static_cast<int>(base.size()), emb_rng);
      for (int f = 0; f < frames; ++f) {
        std::copy(base.begin(), base.end(),
                  grid.data.begin() + grid.offset(f, 0, 0));
        int r0 = base_r0;
        int c0 = base_c0;
        if (scenario == GridScenario::moving_object) {
          r0 = (base_r0 + f) % std::max(1, rows - patch_r + 1);
          c0 = (base_c0 + f) % std::max(1, cols - patch_c + 1);
        }
        for (int r = r0; r < r0 + patch_r; ++r) {
          for (int c = c0; c < c0 + patch_c; ++c) {
            fill_gauss(grid.token(f, r, c), dim, emb_rng);
          }
        }
      }
      break;
    }
    case GridScenario::boundary_bias: {
      // Boundary rows stay static across frames; the interior varies, so
      // the temporal score points away from the boundary while biased keys
      // pull raw attention toward it.
      std::vector<float> base(static_cast<size_t>(rows) * cols * dim);
      fill_gauss(base.data(), static_cast<int>(base.size()), emb_rng);
      for (int f = 0; f < frames; ++f) {
        for (int r = 0; r < rows; ++r) {
          for (int c = 0; c < cols; ++c) {
            float* dst = grid.token(f, r, c);
            if (r == 0 || r == rows - 1) {
              const float* src = base.data() + (static_cast<size_t>(r) * cols + c) * dim;
              std::copy(src, src + dim, dst);
            } else {
              fill_gauss(dst, dim, emb_rng);
            }
          }
        }
      }
      break;
    }
  }

  CrossAttentionInputs xattn;
  xattn.layers = params.layers;
  xattn.heads = params.heads;
  xattn.text_len = params.text_len;
  xattn.num_visual = grid.num_tokens();
  xattn.key_dim = params.key_dim;
  xattn.queries.resize(static_cast<size_t>(xattn.layers) * xattn.heads *
                       xattn.text_len * xattn.key_dim);
  xattn.keys.resize(static_cast<size_t>(xattn.layers) * xattn.heads *
                    xattn.num_visual * xattn.key_dim);
  fill_gauss(xattn.queries.data(), static_cast<int>(xattn.queries.size()), qk_rng);
  fill_gauss(xattn.keys.data(), static_cast<int>(xattn.keys.size()), qk_rng);

  if (scenario == GridScenario::boundary_bias) {
    // Shared positive direction on axis 0 gives every logit a common
    // component; scaling boundary-row keys then inflates exactly those
    // logits well past the noise.
    constexpr float kAxisBias = 3.0f;
    for (size_t i = 0; i < xattn.queries.size(); i += xattn.key_dim) {
      xattn.queries[i] += kAxisBias;
    }
    const int tokens_per_frame = rows * cols;
    for (int l = 0; l < xattn.layers; ++l) {
      for (int h = 0; h < xattn.heads; ++h) {
        for (int j = 0; j < xattn.num_visual; ++j) {
          float* key = xattn.keys.data() +
                       ((static_cast<size_t>(l) * xattn.heads + h) * xattn.num_visual + j) *
                           xattn.key_dim;
          key[0] += kAxisBias;
          const int row = (j % tokens_per_frame) / cols;
          if (row == 0 || row == rows - 1) {
            for (int k = 0; k < xattn.key_dim; ++k) {
              key[k] *= static_cast<float>(params.boundary_scale);
            }
          }
        }
      }
    }
  }

  return {std::move(grid), std::move(xattn)};
}

}  // namespace specdeck
