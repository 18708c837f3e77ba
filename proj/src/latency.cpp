#include "specdeck/latency.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace specdeck {

void LatencyProfile::validate() const {
  if (t_draft_prefill < 0 || t_target_prefill < 0 || t_draft_decode < 0 ||
      t_prune < 0) {
    throw std::invalid_argument("LatencyProfile: negative time");
  }
  if (!(t_target_verify > 0)) {
    throw std::invalid_argument("LatencyProfile: t_target_verify must be > 0");
  }
}

LatencyProfile profile_from(const ModelOracle& draft, const ModelOracle& target,
                            double t_prune) {
  LatencyProfile p;
  p.t_draft_prefill = draft.prefill_cost();
  p.t_target_prefill = target.prefill_cost();
  p.t_draft_decode = draft.decode_cost();
  p.t_target_verify = target.decode_cost();
  p.t_prune = t_prune;
  p.validate();
  return p;
}

double round_speedup(const LatencyProfile& profile, int gamma, int accepted) {
  profile.validate();
  if (gamma < 1 || accepted < 0 || accepted > gamma) {
    throw std::invalid_argument("round_speedup: need 0 <= accepted <= gamma, gamma >= 1");
  }
  return (accepted + 1) * profile.t_target_verify /
         (gamma * profile.t_draft_decode + profile.t_target_verify);
}

int prefill_buffer(const LatencyProfile& profile) {
  profile.validate();
  if (!(profile.t_draft_decode > 0)) {
    throw std::invalid_argument("prefill_buffer: t_draft_decode must be > 0");
  }
  const double headroom = profile.t_target_prefill - profile.t_draft_prefill;
  // The 1e-9 slack keeps exact quotients like 0.6 / 0.05 from landing one
  // ulp below the integer they represent.
  const double q = std::floor(headroom / profile.t_draft_decode + 1e-9);
  if (q <= 0.0) return 0;
  return static_cast<int>(q);
}

MatStats mat_from_rounds(const std::vector<RoundRecord>& rounds) {
  MatStats stats;
  if (rounds.empty()) return stats;
  long long total = 0;
  long long run = 0;
  long long runs = 0;
  for (const auto& r : rounds) {
    total += r.emitted;
    run += r.emitted;
    const bool fully_accepted = r.gamma_used >= 1 && r.accepted == r.gamma_used;
    if (!fully_accepted) {
      ++runs;
      run = 0;
    }
  }
  if (run > 0) ++runs;  // trailing all-accepted run
  stats.mat_per_round = static_cast<double>(total) / rounds.size();
  stats.mat = runs > 0 ? static_cast<double>(total) / runs : 0.0;
  return stats;
}

namespace {

void finish_metrics(RunMetrics& m, const LatencyProfile& profile) {
  m.ar_decode_time = m.tokens_emitted * profile.t_target_verify;
  m.ar_baseline_time = profile.t_target_prefill + m.ar_decode_time;
  m.speedup = m.total_time > 0 ? m.ar_baseline_time / m.total_time : 0.0;
  m.speedup_decode = m.decode_time > 0 ? m.ar_decode_time / m.decode_time : 0.0;
}

}  // namespace

RunMetrics simulate(const RoundLog& log, const LatencyProfile& profile) {
  profile.validate();
  RunMetrics m;
  m.rounds = static_cast<int>(log.rounds.size());
  m.tokens_emitted = log.tokens_emitted();
  const MatStats mat = mat_from_rounds(log.rounds);
  m.mat = mat.mat;
  m.mat_per_round = mat.mat_per_round;

  double draft_decode = 0.0;
  double target_decode = 0.0;
  for (const auto& r : log.rounds) {
    draft_decode += r.gamma_used * profile.t_draft_decode;
    target_decode += profile.t_target_verify;
  }
  const bool ar = log.kind == LogKind::ar;
  m.breakdown["target_prefill"] = profile.t_target_prefill;
  m.breakdown["target_decode"] = target_decode;
  m.breakdown["draft_prefill"] = ar ? 0.0 : profile.t_draft_prefill;
  m.breakdown["draft_decode"] = draft_decode;
  m.breakdown["prune"] = ar ? 0.0 : profile.t_prune;
  double total = 0.0;
  for (const auto& [_, v] : m.breakdown) total += v;
  m.total_time = total;
  m.decode_time = draft_decode + target_decode;
  finish_metrics(m, profile);
  return m;
}

RunMetrics simulate(const ScheduleTrace& trace, const LatencyProfile& profile) {
  profile.validate();
  trace.validate();
  RunMetrics m;
  m.overlapped = true;

  std::vector<RoundRecord> rounds;
  double prefill_end = 0.0;
  m.breakdown["target_prefill"] = 0.0;
  m.breakdown["target_decode"] = 0.0;
  m.breakdown["draft_prefill"] = 0.0;
  m.breakdown["draft_decode"] = 0.0;
  m.breakdown["prune"] = 0.0;
  for (const auto& e : trace.events) {
    const double dur = e.end - e.start;
    switch (e.action) {
      case TraceAction::prefill:
        m.breakdown[e.worker == Worker::target ? "target_prefill" : "draft_prefill"] += dur;
        prefill_end = std::max(prefill_end, e.end);
        break;
      case TraceAction::decode_one:
        m.breakdown[e.worker == Worker::target ? "target_decode" : "draft_decode"] += dur;
        break;
      case TraceAction::verify_batch:
        m.breakdown["target_decode"] += dur;
        rounds.push_back(RoundRecord{e.gamma_used, e.accepted, e.emitted});
        m.tokens_emitted += e.emitted;
        break;
      case TraceAction::prune:
        m.breakdown["prune"] += dur;
        break;
      case TraceAction::abort_draft:
        break;
    }
  }
  m.rounds = static_cast<int>(rounds.size());
  const MatStats mat = mat_from_rounds(rounds);
  m.mat = mat.mat;
  m.mat_per_round = mat.mat_per_round;
  m.total_time = trace.end_time();
  m.decode_time = std::max(0.0, m.total_time - prefill_end);
  finish_metrics(m, profile);
  return m;
}

std::string RunMetrics::to_json() const {
  nlohmann::json j;
  j["total_time"] = total_time;
  j["ar_baseline_time"] = ar_baseline_time;
  j["speedup"] = speedup;
  j["decode_time"] = decode_time;
  j["ar_decode_time"] = ar_decode_time;
  j["speedup_decode"] = speedup_decode;
  j["mat"] = mat;
  j["mat_per_round"] = mat_per_round;
  j["tokens_emitted"] = tokens_emitted;
  j["rounds"] = rounds;
  j["overlapped"] = overlapped;
  j["breakdown"] = breakdown;
  return j.dump();
}

std::string RunMetrics::breakdown_csv() const {
  static const std::pair<const char*, const char*> kRows[] = {
      {"target_prefill", "Target Model Prefilling"},
      {"target_decode", "Target Model Decoding"},
      {"draft_prefill", "Draft Model Prefilling"},
      {"draft_decode", "Draft Model Decoding"},
      {"prune", "Video Token Pruning"},
  };
  std::ostringstream os;
  os << "# specdeck-csv v1\n";
  os << "phase,time,overlapped\n";
  for (const auto& [key, name] : kRows) {
    const auto it = breakdown.find(key);
    const double v = it == breakdown.end() ? 0.0 : it->second;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    const bool row_overlapped =
        overlapped && std::string_view(key).substr(0, 6) != "target";
    os << name << ',' << buf << ',' << (row_overlapped ? "yes" : "no") << '\n';
  }
  return os.str();
}

}  // namespace specdeck
