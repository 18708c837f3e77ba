#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "specdeck/harness.hpp"

namespace {

using namespace specdeck;

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error(path + ": cannot open for writing");
  os << text;
  if (!os) throw std::runtime_error(path + ": write failed");
}

std::string read_text_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error(path + ": cannot open for reading");
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

std::vector<std::string> split_csv_list(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  std::string part;
  while (std::getline(is, part, ',')) {
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

struct ConfigCli {
  std::string config_file;
  std::vector<std::string> sets;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_file, "config file (flat key = value, # comments)");
    cmd->add_option("--set", sets,
                    "override a config key, e.g. --set gamma=3 (repeatable)")
        ->take_all();
  }

  ExperimentConfig resolve() const {
    ExperimentConfig cfg;
    if (!config_file.empty()) cfg = parse_config_file(config_file, cfg);
    for (const std::string& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) {
        throw ConfigError("--set expects key=value, got '" + kv + "'");
      }
      apply_config_entry(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    ensure_seeds(cfg);
    cfg.validate();
    return cfg;
  }
};

int cmd_simulate(const ConfigCli& cli, const std::string& out_json,
                 const std::string& out_csv, const std::string& out_trace,
                 const std::string& out_breakdown, bool timeline) {
  const ExperimentConfig cfg = cli.resolve();
  const ExperimentOutcome outcome = run_experiment(cfg);
  const std::string summary = outcome.summary_json();
  if (out_json.empty()) {
    std::cout << summary << "\n";
  } else {
    write_text_file(out_json, summary + "\n");
  }
  if (!out_csv.empty()) write_text_file(out_csv, outcome.csv());
  if (!out_trace.empty()) {
    write_text_file(out_trace, outcome.per_seed.front().trace.to_jsonl());
  }
  if (!out_breakdown.empty()) {
    write_text_file(out_breakdown, outcome.per_seed.front().metrics.breakdown_csv());
  }
  if (timeline) {
    std::cout << outcome.per_seed.front().trace.render_timeline() << "\n";
  }
  return 0;
}

int cmd_sweep(const ConfigCli& cli, const std::string& axis,
              const std::string& values, const std::string& out_csv) {
  const ExperimentConfig cfg = cli.resolve();
  const std::string table = sweep(cfg, axis, split_csv_list(values));
  if (out_csv.empty()) {
    std::cout << table;
  } else {
    write_text_file(out_csv, table);
  }
  return 0;
}

int cmd_prune(const std::string& grid_file, const std::string& xattn_file,
              double keep_ratio, int crop_side, double band, bool four_sided,
              const std::string& out_prefix) {
  const VisualTokenGrid grid = read_vtg1_file(grid_file);
  const CrossAttentionInputs xattn = read_xat1_file(xattn_file);
  ScoreMap scores = make_raw_scores(grid, xattn, crop_side);
  const KeepSet keep = fuse_and_select(scores, keep_ratio);
  const BiasReport bias =
      bias_report(keep, grid.frames, grid.rows, grid.cols, band, four_sided);

  write_text_file(out_prefix + ".keep.json",
                  keep.to_json(grid.frames, grid.rows, grid.cols) + "\n");
  write_vtg1_file(out_prefix + ".attn.vtg1", score_field_as_grid(scores, scores.raw_attn));
  write_vtg1_file(out_prefix + ".temp.vtg1", score_field_as_grid(scores, scores.raw_temp));
  write_vtg1_file(out_prefix + ".spa.vtg1", score_field_as_grid(scores, scores.raw_spa));
  write_vtg1_file(out_prefix + ".fused.vtg1", score_field_as_grid(scores, scores.fused));
  write_text_file(out_prefix + ".bias.json", bias.to_json() + "\n");
  write_text_file(out_prefix + ".bias.csv", bias.to_csv());

  std::cout << "kept " << keep.indices.size() << " of " << grid.num_tokens()
            << " tokens; boundary share "
            << bias.overall_share << "\n";
  return 0;
}

int cmd_bias_report(const std::string& keep_file, double band, bool four_sided,
                    const std::string& out_json, const std::string& out_csv) {
  int frames = 0;
  int rows = 0;
  int cols = 0;
  const KeepSet keep =
      KeepSet::from_json(read_text_file(keep_file), &frames, &rows, &cols);
  const BiasReport report = bias_report(keep, frames, rows, cols, band, four_sided);
  const std::string json = report.to_json();
  if (out_json.empty()) {
    std::cout << json << "\n";
  } else {
    write_text_file(out_json, json + "\n");
  }
  if (!out_csv.empty()) write_text_file(out_csv, report.to_csv());
  return 0;
}

int cmd_trace_render(const std::string& trace_file, int width) {
  const ScheduleTrace trace = ScheduleTrace::from_jsonl(read_text_file(trace_file));
  trace.validate();
  std::cout << trace.render_timeline(width);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"specdeck: speculative-decoding engine and latency simulator"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "run one experiment configuration");
  ConfigCli sim_cfg;
  sim_cfg.attach(sim);
  std::string sim_json, sim_csv, sim_trace, sim_breakdown;
  bool sim_timeline = false;
  sim->add_option("--out-json", sim_json, "write the JSON summary here (default stdout)");
  sim->add_option("--out-csv", sim_csv, "write per-seed CSV rows here");
  sim->add_option("--trace", sim_trace, "write the first seed's schedule trace (JSON lines)");
  sim->add_option("--breakdown-csv", sim_breakdown, "write the first seed's time breakdown CSV");
  sim->add_flag("--timeline", sim_timeline, "print a text timeline of the first seed's trace");

  // sweep
  auto* sw = app.add_subcommand("sweep", "run one experiment per axis value");
  ConfigCli sw_cfg;
  sw_cfg.attach(sw);
  std::string sw_axis, sw_values, sw_csv;
  sw->add_option("--axis", sw_axis, "numeric config field to sweep")->required();
  sw->add_option("--values", sw_values, "comma-separated axis values")->required();
  sw->add_option("--out-csv", sw_csv, "write the sweep table here (default stdout)");

  // prune
  auto* pr = app.add_subcommand("prune", "score a tensor pair and emit the keep set");
  std::string pr_grid, pr_xattn, pr_prefix = "prune_out";
  double pr_keep = 0.1, pr_band = 0.1;
  int pr_crop = 5;
  bool pr_four = false;
  pr->add_option("--grid", pr_grid, "VTG1 tensor file")->required();
  pr->add_option("--xattn", pr_xattn, "XAT1 tensor file")->required();
  pr->add_option("--keep-ratio", pr_keep, "fraction of tokens to retain (default 0.1)");
  pr->add_option("--crop-side", pr_crop, "spatial crop side length (default 5)");
  pr->add_option("--band", pr_band, "boundary band for the bias report (default 0.1)");
  pr->add_flag("--four-sided", pr_four, "band left/right edges too");
  pr->add_option("--out-prefix", pr_prefix, "output path prefix (default prune_out)");

  // bias-report
  auto* br = app.add_subcommand("bias-report", "boundary statistics of a keep set");
  std::string br_keep, br_json, br_csv;
  double br_band = 0.1;
  bool br_four = false;
  br->add_option("--keep", br_keep, "keep-set JSON produced by prune")->required();
  br->add_option("--band", br_band, "boundary band (default 0.1)");
  br->add_flag("--four-sided", br_four, "band left/right edges too");
  br->add_option("--out-json", br_json, "write the report JSON here (default stdout)");
  br->add_option("--out-csv", br_csv, "write the per-frame CSV here");

  // trace-render
  auto* tr = app.add_subcommand("trace-render", "render a schedule trace as text");
  std::string tr_file;
  int tr_width = 80;
  tr->add_option("--trace", tr_file, "schedule trace JSON lines file")->required();
  tr->add_option("--width", tr_width, "timeline width in columns (default 80)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      return cmd_simulate(sim_cfg, sim_json, sim_csv, sim_trace, sim_breakdown,
                          sim_timeline);
    }
    if (sw->parsed()) return cmd_sweep(sw_cfg, sw_axis, sw_values, sw_csv);
    if (pr->parsed()) {
      return cmd_prune(pr_grid, pr_xattn, pr_keep, pr_crop, pr_band, pr_four,
                       pr_prefix);
    }
    if (br->parsed()) return cmd_bias_report(br_keep, br_band, br_four, br_json, br_csv);
    if (tr->parsed()) return cmd_trace_render(tr_file, tr_width);
  } catch (const specdeck::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
