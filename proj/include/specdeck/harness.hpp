#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "specdeck/bias.hpp"
#include "specdeck/latency.hpp"
#include "specdeck/sim_models.hpp"
#include "specdeck/vpsd.hpp"

namespace specdeck {

enum class Method { ar, serial_sd, vpsd };

// Raised on any invalid or unknown configuration input; the message names
// the offending field or file.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  Method method = Method::vpsd;
  int gamma = 5;
  double keep_ratio = 0.1;
  int crop_side = 5;
  double band = 0.1;
  int max_new = 256;
  DecodeMode mode = DecodeMode::greedy;

  int vocab = 16;
  int depth = 3;
  double alpha = 0.8;
  int prompt_len = 8;
  std::vector<uint64_t> seeds;

  LatencyProfile profile{0.2, 0.8, 0.05, 0.15, 0.0};

  std::string grid_file;   // empty: synthesize from the scenario
  std::string xattn_file;
  GridScenario scenario = GridScenario::uniform_noise;
  int frames = 8;
  int rows = 10;
  int cols = 10;
  int dim = 16;
  ScenarioParams scenario_params;

  VpsdExecutor executor = VpsdExecutor::virtual_clock;

  void validate() const;  // throws ConfigError naming the field
};

// Flat key=value text format, '#' comments. Unknown keys are hard errors.
ExperimentConfig parse_config_file(const std::string& path,
                                   ExperimentConfig base = {});
void apply_config_entry(ExperimentConfig& cfg, const std::string& key,
                        const std::string& value);
// Falls back to the SPECDECK_SEED environment variable (then 0) when the
// config names no seeds.
void ensure_seeds(ExperimentConfig& cfg);

std::vector<std::string> config_keys();
std::string config_to_string(const ExperimentConfig& cfg);

struct SeedOutcome {
  uint64_t seed = 0;
  RunMetrics metrics;
  double boundary_share = 0.0;
  std::vector<TokenId> tokens;
  RoundLog log;
  ScheduleTrace trace;
  BiasReport bias;
};

struct ExperimentOutcome {
  ExperimentConfig config;
  std::vector<SeedOutcome> per_seed;

  std::string summary_json() const;  // aggregate mean/std over seeds
  std::string csv() const;           // one row per seed
};

// End-to-end single configuration: prune, schedule, simulate, per seed.
ExperimentOutcome run_experiment(const ExperimentConfig& cfg);

// One run_experiment per axis value; rows emitted in axis order.
// Columns: value, mat, mat_per_round, speedup, boundary_share.
std::string sweep(const ExperimentConfig& cfg, const std::string& axis,
                  const std::vector<std::string>& values);

// Deterministic synthetic prompt shared by every method for one config.
std::vector<TokenId> experiment_prompt(const ExperimentConfig& cfg);

// Serial-accounting trace of an AR or serial-SD round log; the AR variant
// contains no draft-worker events at all.
ScheduleTrace serial_trace(const RoundLog& log, const LatencyProfile& profile);

const char* method_name(Method m);
Method parse_method(const std::string& name);

}  // namespace specdeck
