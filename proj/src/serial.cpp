#include "specdeck/serial.hpp"

#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace specdeck {

namespace {

void check_gamma(int gamma) {
  if (gamma < 1) throw std::invalid_argument("draft: gamma must be >= 1");
}

TokenId draw_emission(const ProbDist& dist, size_t pos, DecodeMode mode,
                      SeededRng& target_stream) {
  if (mode == DecodeMode::greedy) return argmax_token(dist);
  target_stream.seek(pos);
  return sample(dist, target_stream);
}

}  // namespace

std::vector<TokenId> greedy_ar(const ModelOracle& model,
                               std::span<const TokenId> prompt, int max_new) {
  std::vector<TokenId> ctx(prompt.begin(), prompt.end());
  std::vector<TokenId> out;
  out.reserve(static_cast<size_t>(max_new));
  for (int i = 0; i < max_new; ++i) {
    const TokenId t = argmax_token(model.next_dist(ctx));
    out.push_back(t);
    ctx.push_back(t);
  }
  return out;
}

int RoundLog::tokens_emitted() const {
  int total = 0;
  for (const auto& r : rounds) total += r.emitted;
  return total;
}

std::string RoundLog::to_jsonl() const {
  std::ostringstream os;
  os << nlohmann::json{{"log_kind", kind == LogKind::ar ? "ar" : "serial_sd"}}.dump()
     << "\n";
  for (size_t i = 0; i < rounds.size(); ++i) {
    os << nlohmann::json{{"round", i},
                         {"gamma_used", rounds[i].gamma_used},
                         {"accepted", rounds[i].accepted},
                         {"emitted", rounds[i].emitted}}
              .dump()
       << "\n";
  }
  return os.str();
}

RoundLog RoundLog::from_jsonl(const std::string& text) {
  RoundLog log;
  std::istringstream is(text);
  std::string line;
  bool header_seen = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    if (!header_seen && j.contains("log_kind")) {
      log.kind = j.at("log_kind") == "ar" ? LogKind::ar : LogKind::serial_sd;
      header_seen = true;
      continue;
    }
    log.rounds.push_back(RoundRecord{j.at("gamma_used").get<int>(),
                                     j.at("accepted").get<int>(),
                                     j.at("emitted").get<int>()});
  }
  return log;
}

DraftBatch draft(const ModelOracle& model, std::span<const TokenId> prefix,
                 int gamma, const SeededRng& rng, DecodeMode mode) {
  check_gamma(gamma);
  SeededRng draft_stream = rng.split(kDraftStream);
  std::vector<TokenId> ctx(prefix.begin(), prefix.end());
  DraftBatch batch;
  batch.tokens.reserve(static_cast<size_t>(gamma));
  batch.dists.reserve(static_cast<size_t>(gamma));
  for (int i = 0; i < gamma; ++i) {
    ProbDist dist = model.next_dist(ctx);
    TokenId tok;
    if (mode == DecodeMode::greedy) {
      tok = argmax_token(dist);
    } else {
      draft_stream.seek(ctx.size());
      tok = sample(dist, draft_stream);
    }
    batch.tokens.push_back(tok);
    batch.dists.push_back(std::move(dist));
    ctx.push_back(tok);
  }
  return batch;
}

VerifyOutcome verify_batch(const ModelOracle& target,
                           std::span<const TokenId> prefix,
                           std::span<const TokenId> tokens,
                           std::span<const ProbDist> dists, const SeededRng& rng,
                           DecodeMode mode, bool bonus_on_full) {
  if (tokens.empty() || tokens.size() != dists.size()) {
    throw std::invalid_argument("verify: malformed draft batch");
  }
  SeededRng verifier = rng.split(kVerifierStream);
  SeededRng target_stream = rng.split(kTargetStream);

  std::vector<TokenId> ctx(prefix.begin(), prefix.end());
  VerifyOutcome out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    const ProbDist p = target.next_dist(ctx);
    const ProbDist& q = dists[i];
    if (p.vocab() != q.vocab()) {
      throw std::invalid_argument("verify: draft/target vocabulary mismatch");
    }
    const TokenId x = tokens[i];
    const size_t pos = prefix.size() + i;
    bool ok;
    if (mode == DecodeMode::greedy) {
      ok = x == argmax_token(p);
    } else {
      verifier.seek(pos);
      ok = verifier.next_double() < accept_prob(p, q, x);
    }
    if (!ok) {
      TokenId correction;
      if (mode == DecodeMode::greedy) {
        correction = argmax_token(p);
      } else {
        target_stream.seek(pos);
        correction = sample(residual(p, q), target_stream);
      }
      out.emitted.push_back(correction);
      out.extra = ExtraKind::correction;
      return out;
    }
    ++out.accepted;
    out.emitted.push_back(x);
    ctx.push_back(x);
  }
  out.extra = ExtraKind::bonus;
  if (bonus_on_full) {
    const ProbDist p_final = target.next_dist(ctx);
    out.emitted.push_back(
        draw_emission(p_final, ctx.size(), mode, target_stream));
  }
  return out;
}

VerifyOutcome verify(const ModelOracle& target, std::span<const TokenId> prefix,
                     const DraftBatch& batch, const SeededRng& rng,
                     DecodeMode mode) {
  return verify_batch(target, prefix, batch.tokens, batch.dists, rng, mode,
                      /*bonus_on_full=*/true);
}

SerialResult run_serial_sd(const ModelOracle& draft_model,
                           const ModelOracle& target_model,
                           std::span<const TokenId> prompt, int gamma,
                           int max_new, DecodeMode mode, const SeededRng& rng) {
  check_gamma(gamma);
  if (max_new < 1) throw std::invalid_argument("run_serial_sd: max_new must be >= 1");

  std::vector<TokenId> committed(prompt.begin(), prompt.end());
  SerialResult result;
  int emitted = 0;
  while (emitted < max_new) {
    const DraftBatch batch = draft(draft_model, committed, gamma, rng, mode);
    const VerifyOutcome out = verify(target_model, committed, batch, rng, mode);
    result.log.rounds.push_back(RoundRecord{
        gamma, out.accepted, static_cast<int>(out.emitted.size())});
    committed.insert(committed.end(), out.emitted.begin(), out.emitted.end());
    emitted += static_cast<int>(out.emitted.size());
  }
  committed.resize(prompt.size() + static_cast<size_t>(max_new));
  result.tokens.assign(committed.begin() + static_cast<long>(prompt.size()),
                       committed.end());
  return result;
}

SerialResult run_ar(const ModelOracle& target_model,
                    std::span<const TokenId> prompt, int max_new,
                    DecodeMode mode, const SeededRng& rng) {
  if (max_new < 1) throw std::invalid_argument("run_ar: max_new must be >= 1");
  SeededRng target_stream = rng.split(kTargetStream);
  std::vector<TokenId> ctx(prompt.begin(), prompt.end());
  SerialResult result;
  result.log.kind = LogKind::ar;
  for (int i = 0; i < max_new; ++i) {
    const ProbDist dist = target_model.next_dist(ctx);
    const TokenId t = draw_emission(dist, ctx.size(), mode, target_stream);
    result.tokens.push_back(t);
    ctx.push_back(t);
    result.log.rounds.push_back(RoundRecord{0, 0, 1});
  }
  return result;
}

}  // namespace specdeck
