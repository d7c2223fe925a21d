#pragma once

#include "matchcal/common.hpp"
#include "matchcal/matching.hpp"
#include "matchcal/sampling.hpp"

namespace matchcal {

struct CalibrationResult {
  Vec weights;          // calibrated weights (g/pi for GREG, w* for chi-square)
  Vec g_factors;        // multiplicative adjustments
  Vec target_totals;
  Vec achieved_totals;  // sum_j weights_j x_j
  Vec sigma2;           // variance factors used
  int negative_count = 0;
};

// Chi-square-distance linear calibration of base weights d to the target
// totals: new weight d_j * (1 + (T - sum d x)^T A^{-1} x_j / sigma2_j) with
// A = sum_j d_j x_j x_j^T / sigma2_j. Shared core of both operations below.
CalibrationResult linear_calibrate(const Vec& base_weights, const Mat& x, const Vec& targets,
                                   const Vec& sigma2 = Vec());

// GREG g-weights for a probability sample: base weights 1/pi, result stored
// into sample.greg_weight. x rows correspond to sample units.
CalibrationResult greg_gweights(DesignSample& sample, const Mat& x, const Vec& targets,
                                const Vec& sigma_tilde2 = Vec());

// Chi-square calibration of the transferred weights of a matched sample.
// x is the calibration design matrix (one row per matched unit).
CalibrationResult chi_square_calibrate(const MatchedSample& matched, const Mat& x,
                                       const Vec& targets, const Vec& sigma_star2 = Vec());

}  // namespace matchcal
