#pragma once

#include <map>
#include <string>
#include <utility>

#include "matchcal/calibrate.hpp"
#include "matchcal/common.hpp"
#include "matchcal/matching.hpp"

namespace matchcal {

enum class EstimatorKind { M1, M2, MC1, MC2, DR1, DR2 };

std::string to_string(EstimatorKind kind);

// Point estimate of a total together with whatever variance estimates have
// been attached, keyed by distribution ("xi", "Rpi", "Rpixi").
struct EstimateReport {
  EstimatorKind kind = EstimatorKind::M1;
  double total = 0.0;
  double mean = 0.0;
  double n_hat = 0.0;  // sum of weights
  std::map<std::string, double> variances;
  std::map<std::string, std::pair<double, double>> ci95;

  // Fills ci95 from the stored variances: total +- 1.96*sqrt(v).
  void attach_ci();
};

// Weighted total over the matched sample using the transferred weights.
EstimateReport total_matched(const MatchedSample& matched, EstimatorKind kind);

// Total with the calibrated weights w* = g* .* w-tilde.
EstimateReport total_matched_calibrated(const MatchedSample& matched,
                                        const CalibrationResult& calib, EstimatorKind kind);

// Algebraically identical regression form of the calibrated total,
// sum w~y + (T - X_hat)' B*; kept as an independent route for checking.
double calibrated_total_regression_form(const MatchedSample& matched, const Mat& x,
                                        const Vec& targets, const Vec& sigma_star2 = Vec());

// Doubly robust comparator: combine the probability sample (its weights)
// with the panel subsample (weight 1), fit the membership propensity, weight
// panel units by the odds (1-R)/R, then chi-square calibrate. An intercept
// column is prepended to the propensity design; the calibration design is
// used as given.
EstimateReport dr_estimator(const Mat& p_prop_x, const Vec& p_weights, const Mat& np_prop_x,
                            const Mat& np_calib_x, const Vec& np_y, const Vec& calib_targets,
                            EstimatorKind kind = EstimatorKind::DR1,
                            const Vec& sigma_star2 = Vec());

}  // namespace matchcal
