#pragma once

#include <span>
#include <string>
#include <vector>

#include "specdeck/oracle.hpp"
#include "specdeck/prob.hpp"
#include "specdeck/rng.hpp"

namespace specdeck {

enum class DecodeMode { greedy, stochastic };

// Gamma drafted tokens with the distributions they were sampled from;
// dists[i] is conditioned on prefix + tokens[0..i).
struct DraftBatch {
  std::vector<TokenId> tokens;
  std::vector<ProbDist> dists;

  int gamma() const { return static_cast<int>(tokens.size()); }
};

enum class ExtraKind { correction, bonus };

// Result of one verification pass: the accepted run plus exactly one extra
// token (a correction on the first rejection, a bonus on full acceptance).
struct VerifyOutcome {
  int accepted = 0;
  std::vector<TokenId> emitted;
  ExtraKind extra = ExtraKind::correction;
};

// Minimal per-round trace shared by the MAT metrics and the latency
// simulator. gamma_used == 0 marks a draft-free (plain AR) round.
struct RoundRecord {
  int gamma_used = 0;
  int accepted = 0;
  int emitted = 0;
};

enum class LogKind { ar, serial_sd };

struct RoundLog {
  LogKind kind = LogKind::serial_sd;
  std::vector<RoundRecord> rounds;

  int tokens_emitted() const;
  std::string to_jsonl() const;
  static RoundLog from_jsonl(const std::string& text);
};

// Autoregressively extends prefix by gamma draft tokens; greedy mode drafts
// the argmax, stochastic mode samples from the draft stream keyed by absolute
// position. Two calls with the same seed and prefix produce identical batches.
DraftBatch draft(const ModelOracle& model, std::span<const TokenId> prefix,
                 int gamma, const SeededRng& rng,
                 DecodeMode mode = DecodeMode::stochastic);

// One target pass over the drafted batch. Stochastic mode applies the
// acceptance rule per token and resamples from the residual on the first
// rejection; greedy mode accepts on argmax equality and corrects with the
// target argmax. Always emits accepted + 1 tokens.
VerifyOutcome verify(const ModelOracle& target, std::span<const TokenId> prefix,
                     const DraftBatch& batch, const SeededRng& rng,
                     DecodeMode mode);

// Verification core shared with the parallel scheduler: like verify(), but
// the bonus draw is optional. The conservative first-token check must not
// emit a bonus while the rest of the batch is still being drafted.
VerifyOutcome verify_batch(const ModelOracle& target,
                           std::span<const TokenId> prefix,
                           std::span<const TokenId> tokens,
                           std::span<const ProbDist> dists, const SeededRng& rng,
                           DecodeMode mode, bool bonus_on_full);

struct SerialResult {
  std::vector<TokenId> tokens;  // the generated continuation, length max_new
  RoundLog log;                 // per-round records, pre-truncation
};

// Classical serial loop: draft gamma, verify in one pass, repeat until
// max_new tokens are committed. The final round's surplus is logged, then
// dropped.
SerialResult run_serial_sd(const ModelOracle& draft_model,
                           const ModelOracle& target_model,
                           std::span<const TokenId> prompt, int gamma,
                           int max_new, DecodeMode mode, const SeededRng& rng);

// Target-only autoregressive run under the same rng discipline (stochastic
// draws use the target stream keyed by position); greedy mode reproduces
// greedy_ar. Returns the continuation plus an AR-kind RoundLog.
SerialResult run_ar(const ModelOracle& target_model,
                    std::span<const TokenId> prompt, int max_new,
                    DecodeMode mode, const SeededRng& rng);

}  // namespace specdeck
