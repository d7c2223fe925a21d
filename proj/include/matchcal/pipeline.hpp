#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "matchcal/dataset.hpp"
#include "matchcal/montecarlo.hpp"

namespace matchcal {

// Data-driven workflow: treat a weighted survey file as the population,
// draw a reference sample from the full file and a volunteer panel from its
// covered ("web") subset, propensity-match, transfer rescaled weights, and
// estimate weighted means with the same estimator family as the studies.
struct PipelineSpec {
  std::string population_csv;
  DatasetSchema schema;
  std::string web_column;       // raw column defining the covered subset
  std::string web_value;        // rows with this value form the subset
  int n = 500;                  // reference sample size
  int panel_draw = 3000;        // initial panel draw M from the subset
  double population_n = 0.0;    // N for weight rescale; 0 = retained row count
  ModelSpec match_model;        // propensity model for matching (no intercept entry needed)
  ModelSpec calib_model;        // calibration design (intercept added)
  std::optional<ModelSpec> dr2_model;  // DR2 propensity; DR1 uses calib_model
  std::vector<std::string> estimators = {"M1", "M2", "MC1", "MC2", "DR1", "DR2"};
  int replicates = 200;
  std::uint64_t seed = 1;

  void validate() const;
};

// Runs the replicated pipeline and summarizes the estimated means per
// analysis variable against the full-file weighted truth. Estimator rows
// are named "EST" for a single response and "EST[response]" otherwise.
MonteCarloSummary run_pipeline(const PipelineSpec& spec, int n_threads = 0);

}  // namespace matchcal
