#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "matchcal/calibrate.hpp"
#include "matchcal/csv.hpp"
#include "matchcal/matching.hpp"
#include "matchcal/montecarlo.hpp"
#include "matchcal/pipeline.hpp"
#include "matchcal/report.hpp"

namespace {

using namespace matchcal;

int cmd_simulate(const std::string& config_path, int study, int reps, std::optional<std::uint64_t> seed,
                 const std::string& out_path, int threads, bool quiet) {
  StudyConfig cfg;
  if (!config_path.empty()) {
    cfg = load_study_config(config_path);
  } else if (study == 1) {
    cfg = study1_preset();
  } else if (study == 2) {
    cfg = study2_preset();
  } else {
    std::cerr << "simulate: pass --config or --study 1|2\n";
    return 2;
  }
  if (reps > 0) cfg.replicates = reps;
  if (seed) cfg.seed = *seed;

  const MonteCarloSummary summary = run_study(cfg, threads);
  const std::string report = study_report_json(cfg, summary);
  if (!out_path.empty()) write_text_file(out_path, report);
  if (!quiet) std::cout << summary_tables_text(summary);
  if (out_path.empty() && quiet) std::cout << report;
  return 0;
}

int cmd_pipeline(const std::string& spec_path, int reps, std::optional<std::uint64_t> seed,
                 const std::string& out_path, int threads, bool quiet) {
  PipelineSpec spec = load_pipeline_spec(spec_path);
  if (reps > 0) spec.replicates = reps;
  if (seed) spec.seed = *seed;
  const MonteCarloSummary summary = run_pipeline(spec, threads);
  const std::string report = pipeline_report_json(spec, summary);
  if (!out_path.empty()) write_text_file(out_path, report);
  if (!quiet) std::cout << summary_tables_text(summary);
  return 0;
}

// Reads a sample CSV whose pi/weight columns (when present) ride along as
// design information; all other columns are matching covariates.
struct MatchInput {
  Mat x;
  Vec pi;
  Vec weight;
};

MatchInput read_match_csv(const std::string& path) {
  const CsvTable t = read_csv(path);
  const int pi_col = t.column("pi");
  const int w_col = t.column("weight");
  std::vector<int> x_cols;
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    if (static_cast<int>(c) != pi_col && static_cast<int>(c) != w_col) {
      x_cols.push_back(static_cast<int>(c));
    }
  }
  if (x_cols.empty()) throw IoError(path + ": no covariate columns");
  MatchInput in;
  const auto n = static_cast<Eigen::Index>(t.rows.size());
  in.x.resize(n, static_cast<Eigen::Index>(x_cols.size()));
  in.pi = Vec::Ones(n);
  in.weight = Vec::Ones(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = t.rows[static_cast<std::size_t>(i)];
    const std::string ctx = path + ":" + std::to_string(i + 2);
    for (std::size_t c = 0; c < x_cols.size(); ++c) {
      in.x(i, static_cast<Eigen::Index>(c)) =
          parse_double(row[static_cast<std::size_t>(x_cols[c])], ctx);
    }
    if (pi_col >= 0) in.pi(i) = parse_double(row[static_cast<std::size_t>(pi_col)], ctx);
    if (w_col >= 0) in.weight(i) = parse_double(row[static_cast<std::size_t>(w_col)], ctx);
  }
  return in;
}

int cmd_match(const std::string& target_path, const std::string& pool_path, bool replace,
              const std::string& standardize, const std::string& out_path) {
  const MatchInput target = read_match_csv(target_path);
  const MatchInput pool = read_match_csv(pool_path);
  Standardize st = Standardize::automatic;
  if (standardize == "on") st = Standardize::on;
  else if (standardize == "off") st = Standardize::off;
  else if (standardize != "auto") {
    std::cerr << "match: --standardize must be auto|on|off\n";
    return 2;
  }

  const MatchSkeleton sk = nn_match(target.x, pool.x, replace, st);
  MatchedSample m;
  m.pairs.resize(static_cast<std::size_t>(sk.size()));
  m.transferred_weight.resize(sk.size());
  m.transferred_pi.resize(sk.size());
  m.y = Vec::Zero(sk.size());
  m.x.resize(sk.size(), pool.x.cols());
  m.distance = sk.distance;
  for (int j = 0; j < sk.size(); ++j) {
    m.pairs[static_cast<std::size_t>(j)] = {j, sk.pool_index[static_cast<std::size_t>(j)]};
    m.transferred_weight(j) = target.weight(j);
    m.transferred_pi(j) = target.pi(j);
    m.x.row(j) = pool.x.row(sk.pool_index[static_cast<std::size_t>(j)]);
  }
  write_matched_csv(m, out_path);
  return 0;
}

int cmd_calibrate(const std::string& weights_path, const std::string& targets_path,
                  const std::string& out_path) {
  const CsvTable t = read_csv(weights_path);
  const int w_col = t.column("weight");
  if (w_col < 0) throw IoError(weights_path + ": need a weight column");
  const auto targets = read_targets_csv(targets_path);

  std::vector<int> x_cols;
  Vec target_vec(static_cast<Eigen::Index>(targets.size()));
  for (std::size_t k = 0; k < targets.size(); ++k) {
    const int idx = t.column(targets[k].first);
    if (idx < 0) throw IoError(weights_path + ": no column named " + targets[k].first);
    x_cols.push_back(idx);
    target_vec(static_cast<Eigen::Index>(k)) = targets[k].second;
  }

  const auto n = static_cast<Eigen::Index>(t.rows.size());
  Vec w(n);
  Mat x(n, static_cast<Eigen::Index>(x_cols.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = t.rows[static_cast<std::size_t>(i)];
    const std::string ctx = weights_path + ":" + std::to_string(i + 2);
    w(i) = parse_double(row[static_cast<std::size_t>(w_col)], ctx);
    for (std::size_t c = 0; c < x_cols.size(); ++c) {
      x(i, static_cast<Eigen::Index>(c)) = parse_double(row[static_cast<std::size_t>(x_cols[c])], ctx);
    }
  }

  const CalibrationResult r = linear_calibrate(w, x, target_vec);
  std::ofstream out(out_path);
  if (!out) throw IoError("cannot write " + out_path);
  out << "weight,g";
  for (const auto& [name, total] : targets) out << "," << name;
  out << "\n";
  for (Eigen::Index i = 0; i < n; ++i) {
    out << format_double(r.weights(i)) << "," << format_double(r.g_factors(i));
    for (Eigen::Index c = 0; c < x.cols(); ++c) out << "," << format_double(x(i, c));
    out << "\n";
  }
  if (r.negative_count > 0) {
    std::cerr << "calibrate: " << r.negative_count << " calibrated weights are negative\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Matching and calibration weighting for nonprobability samples"};
  app.require_subcommand(1);

  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (0 = MATCHCAL_THREADS or all cores)");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Run a replicated simulation study");
  std::string sim_config, sim_out;
  int sim_study = 0, sim_reps = 0;
  std::optional<std::uint64_t> sim_seed;
  bool sim_quiet = false;
  sim->add_option("--config", sim_config, "StudyConfig JSON path");
  sim->add_option("--study", sim_study, "Built-in preset (1 or 2)")->check(CLI::Range(1, 2));
  sim->add_option("--reps", sim_reps, "Replicate count override");
  sim->add_option("--seed", sim_seed, "Master seed override");
  sim->add_option("--out", sim_out, "Write the JSON report here");
  sim->add_flag("--quiet", sim_quiet, "Suppress the text tables");

  // pipeline
  auto* pipe = app.add_subcommand("pipeline", "Run the survey-file pipeline");
  std::string pipe_spec, pipe_out;
  int pipe_reps = 0;
  std::optional<std::uint64_t> pipe_seed;
  bool pipe_quiet = false;
  pipe->add_option("spec", pipe_spec, "PipelineSpec JSON path")->required();
  pipe->add_option("--reps", pipe_reps, "Replicate count override");
  pipe->add_option("--seed", pipe_seed, "Master seed override");
  pipe->add_option("--out", pipe_out, "Write the JSON report here");
  pipe->add_flag("--quiet", pipe_quiet, "Suppress the text tables");

  // match
  auto* match = app.add_subcommand("match", "Nearest-neighbour match two covariate CSVs");
  std::string match_a, match_b, match_out = "matched.csv", match_std = "auto";
  bool match_replace = false;
  match->add_option("target", match_a, "Target CSV (pi/weight columns ride along)")->required();
  match->add_option("pool", match_b, "Pool CSV")->required();
  match->add_flag("--replace", match_replace, "Match with replacement");
  match->add_option("--standardize", match_std, "auto|on|off");
  match->add_option("--out", match_out, "Output CSV path");

  // calibrate
  auto* cal = app.add_subcommand("calibrate", "Calibrate a weights CSV to target totals");
  std::string cal_weights, cal_targets, cal_out = "calibrated.csv";
  cal->add_option("weights", cal_weights, "CSV with weight and covariate columns")->required();
  cal->add_option("targets", cal_targets, "CSV with name,total rows")->required();
  cal->add_option("--out", cal_out, "Output CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() != 0) {
      std::cerr << e.what() << "\n";
      return 2;
    }
    return app.exit(e);  // --help and friends
  }

  try {
    if (sim->parsed()) {
      return cmd_simulate(sim_config, sim_study, sim_reps, sim_seed, sim_out, threads, sim_quiet);
    }
    if (pipe->parsed()) {
      return cmd_pipeline(pipe_spec, pipe_reps, pipe_seed, pipe_out, threads, pipe_quiet);
    }
    if (match->parsed()) {
      return cmd_match(match_a, match_b, match_replace, match_std, match_out);
    }
    if (cal->parsed()) {
      return cmd_calibrate(cal_weights, cal_targets, cal_out);
    }
  } catch (const matchcal::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
