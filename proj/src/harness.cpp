#include "specdeck/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <future>
#include <sstream>

#include <json.hpp>

namespace specdeck {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

[[noreturn]] void bad_field(const std::string& field, const std::string& why) {
  throw ConfigError("config field '" + field + "': " + why);
}

int parse_int(const std::string& field, const std::string& value) {
  try {
    size_t used = 0;
    const int v = std::stoi(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    bad_field(field, "expected an integer, got '" + value + "'");
  }
}

double parse_double(const std::string& field, const std::string& value) {
  try {
    size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    bad_field(field, "expected a number, got '" + value + "'");
  }
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

const char* method_name(Method m) {
  switch (m) {
    case Method::ar: return "ar";
    case Method::serial_sd: return "serial_sd";
    case Method::vpsd: return "vpsd";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  if (name == "ar") return Method::ar;
  if (name == "serial_sd") return Method::serial_sd;
  if (name == "vpsd") return Method::vpsd;
  throw ConfigError("config field 'method': expected ar|serial_sd|vpsd, got '" +
                    name + "'");
}

std::vector<std::string> config_keys() {
  return {"method",        "gamma",         "keep_ratio",      "crop_side",
          "band",          "max_new",       "mode",            "vocab",
          "depth",         "alpha",         "prompt_len",      "seeds",
          "t_draft_prefill", "t_target_prefill", "t_draft_decode",
          "t_target_verify", "t_prune",     "grid_file",       "xattn_file",
          "scenario",      "frames",        "rows",            "cols",
          "dim",           "patch_rows",    "patch_cols",      "boundary_scale",
          "executor"};
}

void apply_config_entry(ExperimentConfig& cfg, const std::string& key,
                        const std::string& value) {
  if (key == "method") {
    cfg.method = parse_method(value);
  } else if (key == "gamma") {
    cfg.gamma = parse_int(key, value);
  } else if (key == "keep_ratio") {
    cfg.keep_ratio = parse_double(key, value);
  } else if (key == "crop_side") {
    cfg.crop_side = parse_int(key, value);
  } else if (key == "band") {
    cfg.band = parse_double(key, value);
  } else if (key == "max_new") {
    cfg.max_new = parse_int(key, value);
  } else if (key == "mode") {
    if (value == "greedy") {
      cfg.mode = DecodeMode::greedy;
    } else if (value == "stochastic") {
      cfg.mode = DecodeMode::stochastic;
    } else {
      bad_field(key, "expected greedy|stochastic, got '" + value + "'");
    }
  } else if (key == "vocab") {
    cfg.vocab = parse_int(key, value);
  } else if (key == "depth") {
    cfg.depth = parse_int(key, value);
  } else if (key == "alpha") {
    cfg.alpha = parse_double(key, value);
  } else if (key == "prompt_len") {
    cfg.prompt_len = parse_int(key, value);
  } else if (key == "seeds") {
    cfg.seeds.clear();
    std::istringstream is(value);
    std::string part;
    while (std::getline(is, part, ',')) {
      part = trim(part);
      if (part.empty()) continue;
      try {
        cfg.seeds.push_back(std::stoull(part));
      } catch (const std::exception&) {
        bad_field(key, "expected comma-separated integers, got '" + value + "'");
      }
    }
  } else if (key == "t_draft_prefill") {
    cfg.profile.t_draft_prefill = parse_double(key, value);
  } else if (key == "t_target_prefill") {
    cfg.profile.t_target_prefill = parse_double(key, value);
  } else if (key == "t_draft_decode") {
    cfg.profile.t_draft_decode = parse_double(key, value);
  } else if (key == "t_target_verify") {
    cfg.profile.t_target_verify = parse_double(key, value);
  } else if (key == "t_prune") {
    cfg.profile.t_prune = parse_double(key, value);
  } else if (key == "grid_file") {
    cfg.grid_file = value;
  } else if (key == "xattn_file") {
    cfg.xattn_file = value;
  } else if (key == "scenario") {
    try {
      cfg.scenario = parse_scenario(value);
    } catch (const std::exception&) {
      bad_field(key, "unknown scenario '" + value + "'");
    }
  } else if (key == "frames") {
    cfg.frames = parse_int(key, value);
  } else if (key == "rows") {
    cfg.rows = parse_int(key, value);
  } else if (key == "cols") {
    cfg.cols = parse_int(key, value);
  } else if (key == "dim") {
    cfg.dim = parse_int(key, value);
  } else if (key == "patch_rows") {
    cfg.scenario_params.patch_rows = parse_int(key, value);
  } else if (key == "patch_cols") {
    cfg.scenario_params.patch_cols = parse_int(key, value);
  } else if (key == "boundary_scale") {
    cfg.scenario_params.boundary_scale = parse_double(key, value);
  } else if (key == "executor") {
    if (value == "virtual") {
      cfg.executor = VpsdExecutor::virtual_clock;
    } else if (value == "threads") {
      cfg.executor = VpsdExecutor::threads;
    } else {
      bad_field(key, "expected virtual|threads, got '" + value + "'");
    }
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

ExperimentConfig parse_config_file(const std::string& path, ExperimentConfig base) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config file '" + path + "': cannot open");
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config file '" + path + "' line " +
                        std::to_string(lineno) + ": expected key = value");
    }
    apply_config_entry(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return base;
}

void ensure_seeds(ExperimentConfig& cfg) {
  if (!cfg.seeds.empty()) return;
  if (const char* env = std::getenv("SPECDECK_SEED"); env != nullptr) {
    try {
      cfg.seeds.push_back(std::stoull(env));
      return;
    } catch (const std::exception&) {
      throw ConfigError("environment variable SPECDECK_SEED: expected an integer, got '" +
                        std::string(env) + "'");
    }
  }
  cfg.seeds.push_back(0);
}

void ExperimentConfig::validate() const {
  if (gamma < 1) bad_field("gamma", "must be >= 1");
  if (!(keep_ratio > 0.0) || keep_ratio > 1.0) bad_field("keep_ratio", "must be in (0, 1]");
  if (crop_side < 1) bad_field("crop_side", "must be >= 1");
  if (!(band > 0.0) || !(band < 0.5)) bad_field("band", "must be in (0, 0.5)");
  if (max_new < 1) bad_field("max_new", "must be >= 1");
  if (vocab < 2) bad_field("vocab", "must be >= 2");
  if (depth < 0) bad_field("depth", "must be >= 0");
  if (alpha < 0.0 || alpha > 1.0) bad_field("alpha", "must be in [0, 1]");
  if (prompt_len < 1) bad_field("prompt_len", "must be >= 1");
  if (seeds.empty()) bad_field("seeds", "at least one seed required");
  if (frames < 1 || rows < 1 || cols < 1 || dim < 1) {
    bad_field("frames/rows/cols/dim", "all grid dimensions must be >= 1");
  }
  if (grid_file.empty() != xattn_file.empty()) {
    bad_field("grid_file/xattn_file", "either both or neither must be set");
  }
  try {
    profile.validate();
  } catch (const std::exception& e) {
    bad_field("latency profile", e.what());
  }
}

std::string config_to_string(const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << "method = " << method_name(cfg.method) << "\n";
  os << "gamma = " << cfg.gamma << "\n";
  os << "keep_ratio = " << fmt(cfg.keep_ratio) << "\n";
  os << "crop_side = " << cfg.crop_side << "\n";
  os << "band = " << fmt(cfg.band) << "\n";
  os << "max_new = " << cfg.max_new << "\n";
  os << "mode = " << (cfg.mode == DecodeMode::greedy ? "greedy" : "stochastic") << "\n";
  os << "vocab = " << cfg.vocab << "\n";
  os << "depth = " << cfg.depth << "\n";
  os << "alpha = " << fmt(cfg.alpha) << "\n";
  os << "prompt_len = " << cfg.prompt_len << "\n";
  os << "seeds = ";
  for (size_t i = 0; i < cfg.seeds.size(); ++i) {
    os << (i > 0 ? "," : "") << cfg.seeds[i];
  }
  os << "\n";
  os << "t_draft_prefill = " << fmt(cfg.profile.t_draft_prefill) << "\n";
  os << "t_target_prefill = " << fmt(cfg.profile.t_target_prefill) << "\n";
  os << "t_draft_decode = " << fmt(cfg.profile.t_draft_decode) << "\n";
  os << "t_target_verify = " << fmt(cfg.profile.t_target_verify) << "\n";
  os << "t_prune = " << fmt(cfg.profile.t_prune) << "\n";
  if (!cfg.grid_file.empty()) os << "grid_file = " << cfg.grid_file << "\n";
  if (!cfg.xattn_file.empty()) os << "xattn_file = " << cfg.xattn_file << "\n";
  os << "scenario = " << scenario_name(cfg.scenario) << "\n";
  os << "frames = " << cfg.frames << "\n";
  os << "rows = " << cfg.rows << "\n";
  os << "cols = " << cfg.cols << "\n";
  os << "dim = " << cfg.dim << "\n";
  os << "executor = "
     << (cfg.executor == VpsdExecutor::virtual_clock ? "virtual" : "threads") << "\n";
  return os.str();
}

std::vector<TokenId> experiment_prompt(const ExperimentConfig& cfg) {
  std::vector<TokenId> prompt(static_cast<size_t>(cfg.prompt_len));
  for (int i = 0; i < cfg.prompt_len; ++i) {
    prompt[i] = static_cast<TokenId>((i * 7 + 3) % cfg.vocab);
  }
  return prompt;
}

ScheduleTrace serial_trace(const RoundLog& log, const LatencyProfile& profile) {
  ScheduleTrace trace;
  double t = 0.0;
  trace.events.push_back({Worker::target, TraceAction::prefill, t, t + profile.t_target_prefill});
  t += profile.t_target_prefill;
  if (log.kind != LogKind::ar) {
    if (profile.t_prune > 0.0) {
      trace.events.push_back({Worker::draft, TraceAction::prune, t, t + profile.t_prune});
      t += profile.t_prune;
    }
    trace.events.push_back({Worker::draft, TraceAction::prefill, t, t + profile.t_draft_prefill});
    t += profile.t_draft_prefill;
  }
  int round = 0;
  for (const auto& r : log.rounds) {
    for (int i = 0; i < r.gamma_used; ++i) {
      trace.events.push_back({Worker::draft, TraceAction::decode_one, t, t + profile.t_draft_decode});
      t += profile.t_draft_decode;
    }
    TraceEvent v{Worker::target, TraceAction::verify_batch, t, t + profile.t_target_verify};
    v.round = round++;
    v.gamma_used = r.gamma_used;
    v.accepted = r.accepted;
    v.emitted = r.emitted;
    v.mode = SchedMode::conservative;
    trace.events.push_back(v);
    t += profile.t_target_verify;
  }
  return trace;
}

namespace {

// The ar method never constructs a draft oracle; it uses the same target
// derivation as make_pair so outputs line up across methods.
TableOracle make_target_only(const ExperimentConfig& cfg, uint64_t seed) {
  SeededRng root(seed);
  return TableOracle(cfg.vocab, cfg.depth, root.split(10).seed());
}

SeedOutcome run_one_seed(const ExperimentConfig& cfg, uint64_t seed) {
  SeedOutcome out;
  out.seed = seed;

  // Token-preservation stage.
  VisualTokenGrid grid;
  CrossAttentionInputs xattn;
  if (!cfg.grid_file.empty()) {
    grid = read_vtg1_file(cfg.grid_file);
    xattn = read_xat1_file(cfg.xattn_file);
  } else {
    auto made = make_synthetic_grid(cfg.frames, cfg.rows, cfg.cols, cfg.dim,
                                    cfg.scenario, seed, cfg.scenario_params);
    grid = std::move(made.first);
    xattn = std::move(made.second);
  }
  ScoreMap scores = make_raw_scores(grid, xattn, cfg.crop_side);
  const KeepSet keep = fuse_and_select(scores, cfg.keep_ratio);
  out.bias = bias_report(keep, grid.frames, grid.rows, grid.cols, cfg.band);
  out.boundary_share = out.bias.overall_share;

  // Scheduling stage on synthetic oracles.
  const std::vector<TokenId> prompt = experiment_prompt(cfg);
  const SeededRng rng(seed);
  if (cfg.method == Method::ar) {
    const TableOracle target = make_target_only(cfg, seed);
    SerialResult res = run_ar(target, prompt, cfg.max_new, cfg.mode, rng);
    out.tokens = std::move(res.tokens);
    out.log = std::move(res.log);
    out.metrics = simulate(out.log, cfg.profile);
    out.trace = serial_trace(out.log, cfg.profile);
  } else if (cfg.method == Method::serial_sd) {
    const AgreementPair pair = make_pair(cfg.vocab, cfg.depth, cfg.alpha, seed);
    SerialResult res = run_serial_sd(pair.draft, pair.target, prompt, cfg.gamma,
                                     cfg.max_new, cfg.mode, rng);
    out.tokens = std::move(res.tokens);
    out.log = std::move(res.log);
    out.metrics = simulate(out.log, cfg.profile);
    out.trace = serial_trace(out.log, cfg.profile);
  } else {
    const AgreementPair pair = make_pair(cfg.vocab, cfg.depth, cfg.alpha, seed);
    VpsdOptions options;
    options.executor = cfg.executor;
    VpsdResult res = run_vpsd(pair.draft, pair.target, prompt, cfg.gamma,
                              cfg.max_new, cfg.profile, rng, cfg.mode, options);
    out.tokens = std::move(res.tokens);
    out.log = std::move(res.log);
    out.trace = std::move(res.trace);
    out.metrics = simulate(out.trace, cfg.profile);
  }
  return out;
}

}  // namespace

ExperimentOutcome run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentConfig final_cfg = cfg;
  ensure_seeds(final_cfg);

  ExperimentOutcome outcome;
  outcome.config = final_cfg;
  std::vector<std::future<SeedOutcome>> futures;
  futures.reserve(final_cfg.seeds.size());
  for (uint64_t seed : final_cfg.seeds) {
    futures.push_back(std::async(std::launch::async, run_one_seed,
                                 std::cref(final_cfg), seed));
  }
  for (auto& f : futures) outcome.per_seed.push_back(f.get());
  return outcome;
}

namespace {

struct Agg {
  double mean = 0.0;
  double stddev = 0.0;
};

Agg aggregate(const std::vector<double>& values) {
  Agg a;
  for (double v : values) a.mean += v;
  a.mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - a.mean) * (v - a.mean);
  a.stddev = std::sqrt(var / static_cast<double>(values.size()));
  return a;
}

}  // namespace

std::string ExperimentOutcome::summary_json() const {
  nlohmann::json j;
  j["method"] = method_name(config.method);
  j["gamma"] = config.gamma;
  j["alpha"] = config.alpha;
  j["keep_ratio"] = config.keep_ratio;
  j["max_new"] = config.max_new;
  j["mode"] = config.mode == DecodeMode::greedy ? "greedy" : "stochastic";
  j["seeds"] = config.seeds;

  std::map<std::string, std::vector<double>> series;
  auto& rows = j["per_seed"] = nlohmann::json::array();
  for (const auto& s : per_seed) {
    nlohmann::json row = nlohmann::json::parse(s.metrics.to_json());
    row.erase("breakdown");
    row.erase("overlapped");
    row["boundary_share"] = s.boundary_share;
    for (const auto& [k, v] : row.items()) {
      if (v.is_number()) series[k].push_back(v.get<double>());
    }
    row["seed"] = s.seed;
    rows.push_back(std::move(row));
  }
  auto& agg = j["aggregate"] = nlohmann::json::object();
  for (const auto& [k, vals] : series) {
    const Agg a = aggregate(vals);
    agg[k]["mean"] = a.mean;
    // Population std; omitted for single-seed runs.
    if (vals.size() > 1) agg[k]["std"] = a.stddev;
  }
  return j.dump(2);
}

std::string ExperimentOutcome::csv() const {
  std::ostringstream os;
  os << "# specdeck-csv v1\n";
  os << "seed,method,gamma,alpha,keep_ratio,mat,mat_per_round,speedup,"
        "speedup_decode,total_time,ar_baseline_time,tokens_emitted,boundary_share\n";
  for (const auto& s : per_seed) {
    os << s.seed << ',' << method_name(config.method) << ',' << config.gamma
       << ',' << fmt(config.alpha) << ',' << fmt(config.keep_ratio) << ','
       << fmt(s.metrics.mat) << ',' << fmt(s.metrics.mat_per_round) << ','
       << fmt(s.metrics.speedup) << ',' << fmt(s.metrics.speedup_decode) << ','
       << fmt(s.metrics.total_time) << ',' << fmt(s.metrics.ar_baseline_time)
       << ',' << s.metrics.tokens_emitted << ',' << fmt(s.boundary_share) << '\n';
  }
  return os.str();
}

std::string sweep(const ExperimentConfig& cfg, const std::string& axis,
                  const std::vector<std::string>& values) {
  static const std::vector<std::string> kNumericAxes = {
      "gamma",     "keep_ratio",     "crop_side",      "band",
      "max_new",   "vocab",          "depth",          "alpha",
      "prompt_len", "t_draft_prefill", "t_target_prefill", "t_draft_decode",
      "t_target_verify", "t_prune",  "frames",         "rows",
      "cols",      "dim"};
  if (std::find(kNumericAxes.begin(), kNumericAxes.end(), axis) ==
      kNumericAxes.end()) {
    throw ConfigError("sweep axis '" + axis + "' is not a numeric config field");
  }
  if (values.empty()) throw ConfigError("sweep: at least one axis value required");

  std::vector<std::future<ExperimentOutcome>> futures;
  futures.reserve(values.size());
  for (const auto& value : values) {
    ExperimentConfig point = cfg;
    apply_config_entry(point, axis, value);
    futures.push_back(std::async(
        std::launch::async,
        [](ExperimentConfig c) { return run_experiment(c); }, std::move(point)));
  }

  std::ostringstream os;
  os << "# specdeck-csv v1\n";
  os << "# axis: " << axis << "\n";
  os << "value,mat,mat_per_round,speedup,boundary_share\n";
  for (size_t i = 0; i < futures.size(); ++i) {
    const ExperimentOutcome out = futures[i].get();
    std::vector<double> mat, mpr, spd, share;
    for (const auto& s : out.per_seed) {
      mat.push_back(s.metrics.mat);
      mpr.push_back(s.metrics.mat_per_round);
      spd.push_back(s.metrics.speedup);
      share.push_back(s.boundary_share);
    }
    os << values[i] << ',' << fmt(aggregate(mat).mean) << ','
       << fmt(aggregate(mpr).mean) << ',' << fmt(aggregate(spd).mean) << ','
       << fmt(aggregate(share).mean) << '\n';
  }
  return os.str();
}

}  // namespace specdeck
