#pragma once

#include "matchcal/common.hpp"

namespace matchcal {

struct WlsFit {
  Vec coefficients;
  Vec residuals;      // y - x * coefficients
  Vec weight_used;
  Mat info_matrix;    // sum_j w_j x_j x_j^T
};

// Weighted least squares via a rank-revealing QR of sqrt(w)*x. Throws
// RankError naming the offending column when the design is singular.
WlsFit weighted_ls(const Mat& x, const Vec& y, const Vec& w);

struct LogisticFit {
  Vec coefficients;
  Vec fitted_probs;   // in (0,1)
  bool converged = false;
  int iterations = 0;
  bool separation_suspected = false;  // any |coefficient| > 15
};

// Weighted logistic regression by IRLS with step-halving when the deviance
// would increase. Convergence on max-abs coefficient change below tol.
LogisticFit logistic_irls(const Mat& x, const Vec& label, const Vec& w,
                          int max_iter = 25, double tol = 1e-8);

}  // namespace matchcal
