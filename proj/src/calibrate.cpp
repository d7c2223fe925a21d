#include "matchcal/calibrate.hpp"

namespace matchcal {

CalibrationResult linear_calibrate(const Vec& base_weights, const Mat& x, const Vec& targets,
                                   const Vec& sigma2) {
  const Eigen::Index n = x.rows();
  const Eigen::Index c = x.cols();
  if (base_weights.size() != n) throw StateError("calibrate: weight length mismatch");
  if (targets.size() != c) throw ParameterError("calibrate: one target per covariate column");
  Vec s2 = sigma2.size() == 0 ? Vec::Ones(n) : sigma2;
  if (s2.size() != n) throw ParameterError("calibrate: sigma2 length mismatch");
  for (Eigen::Index j = 0; j < n; ++j) {
    if (!(s2(j) > 0.0)) throw ParameterError("calibrate: sigma2 must be positive");
  }

  const Vec d_over_s2 = base_weights.cwiseQuotient(s2);
  Mat a = x.transpose() * d_over_s2.asDiagonal() * x;
  const Vec achieved0 = x.transpose() * base_weights;

  Eigen::ColPivHouseholderQR<Mat> qr(a);
  if (qr.rank() < c) {
    const auto perm = qr.colsPermutation().indices();
    throw RankError("calibrate: singular calibration matrix at column " +
                    std::to_string(perm(qr.rank())));
  }
  const Vec u = qr.solve(targets - achieved0);

  CalibrationResult r;
  r.g_factors = Vec::Ones(n) + (x * u).cwiseQuotient(s2);
  r.weights = base_weights.cwiseProduct(r.g_factors);
  r.target_totals = targets;
  r.achieved_totals = x.transpose() * r.weights;
  r.sigma2 = std::move(s2);
  for (Eigen::Index j = 0; j < n; ++j) {
    if (r.weights(j) < 0.0) ++r.negative_count;
  }
  return r;
}

CalibrationResult greg_gweights(DesignSample& sample, const Mat& x, const Vec& targets,
                                const Vec& sigma_tilde2) {
  sample.validate();
  if (x.rows() != sample.size()) throw StateError("greg_gweights: x rows must match sample size");
  CalibrationResult r = linear_calibrate(sample.base_weight, x, targets, sigma_tilde2);
  sample.greg_weight = r.weights;
  return r;
}

CalibrationResult chi_square_calibrate(const MatchedSample& matched, const Mat& x,
                                       const Vec& targets, const Vec& sigma_star2) {
  matched.validate();
  if (x.rows() != matched.size()) {
    throw StateError("chi_square_calibrate: x rows must match matched sample size");
  }
  return linear_calibrate(matched.transferred_weight, x, targets, sigma_star2);
}

}  // namespace matchcal
