#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "matchcal/common.hpp"
#include "matchcal/population.hpp"

namespace matchcal {

// One replicated-experiment design: population source, probability-sample
// and panel designs, matching choice, estimator list, replicate count and
// master seed.
struct StudyConfig {
  // Population: either HMT parameters or a CSV path with x/y/stratum rows.
  bool use_csv = false;
  std::string population_csv;
  HmtParams hmt;
  int n_strata = 5;  // applied to generated populations only

  std::vector<int> sp_sizes;

  enum class PanelKind { stsrs, poisson_exp };
  PanelKind panel_kind = PanelKind::stsrs;
  std::vector<int> panel_sizes;
  double poisson_rate = 0.085;       // raw probability rate*exp(-rate*X)
  double poisson_expected_size = 1250.0;

  bool match_with_replacement = false;
  bool match_on_propensity = false;

  std::vector<std::string> estimators = {"M1", "M2", "MC1", "MC2", "DR"};
  bool with_variances = true;
  int dr_subsample_size = 0;  // 0 means |S_p|

  int replicates = 1000;
  std::uint64_t seed = 20210501;

  void validate() const;
};

// Section-5 presets: both use the N=100,000 HMT population in five strata
// with a 50-per-stratum probability sample. Study 1 draws the panel as a
// 250-per-stratum stsrs; study 2 draws it by normalized Poisson sampling
// with probabilities decreasing in X.
StudyConfig study1_preset();
StudyConfig study2_preset();

struct EstimatorSummary {
  std::string estimator;
  double mc_mean = 0.0;
  double relbias_pct = 0.0;
  double emp_variance = 0.0;
  double mse = 0.0;
  double ratio_to_min_mse = 0.0;
};

struct VarianceSummary {
  std::string estimator;
  std::string distribution;  // "xi", "Rpi", "Rpixi"
  double mean_v = 0.0;
  double rb_empvar_pct = 0.0;
  double rb_mse_pct = 0.0;
  double ci95_coverage_pct = 0.0;
};

struct MonteCarloSummary {
  double truth = 0.0;
  int replicates = 0;
  int used = 0;
  std::vector<int> failed_replicates;
  std::vector<std::string> failure_messages;
  std::vector<EstimatorSummary> estimators;
  std::vector<VarianceSummary> variances;
};

// Stable summation independent of accumulation order.
double pairwise_sum(const std::vector<double>& values);

// Point-estimator metrics: relbias in percent, empirical variance with the
// B-1 denominator, MSE as the plain mean of squared errors.
EstimatorSummary summarize_estimator(const std::string& name, double truth,
                                     const std::vector<double>& points);

// Variance-estimator metrics against the empirical variance and MSE of the
// point estimates, plus normal-approximation 95% CI coverage.
VarianceSummary summarize_variance(const std::string& estimator, const std::string& distribution,
                                   double truth, const std::vector<double>& points,
                                   const std::vector<double>& variances);

// Runs the replicated experiment. n_threads = 0 reads MATCHCAL_THREADS and
// falls back to all cores; n_threads = 1 uses the serial reference loop.
// Output is bitwise independent of the thread count.
MonteCarloSummary run_study(const StudyConfig& config, int n_threads = 0);

// Thread-count resolution shared with the CLI.
int resolve_threads(int requested);

}  // namespace matchcal
