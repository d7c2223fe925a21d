#include "matchcal/estimators.hpp"

#include <cmath>

#include "matchcal/regress.hpp"

namespace matchcal {

std::string to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::M1: return "M1";
    case EstimatorKind::M2: return "M2";
    case EstimatorKind::MC1: return "MC1";
    case EstimatorKind::MC2: return "MC2";
    case EstimatorKind::DR1: return "DR1";
    case EstimatorKind::DR2: return "DR2";
  }
  return "?";
}

void EstimateReport::attach_ci() {
  ci95.clear();
  for (const auto& [name, v] : variances) {
    const double half = 1.96 * std::sqrt(std::max(v, 0.0));
    ci95[name] = {total - half, total + half};
  }
}

EstimateReport total_matched(const MatchedSample& matched, EstimatorKind kind) {
  matched.validate();
  if (matched.size() == 0) throw StateError("total_matched: empty matched sample");
  EstimateReport r;
  r.kind = kind;
  r.total = matched.transferred_weight.dot(matched.y);
  r.n_hat = matched.transferred_weight.sum();
  r.mean = r.total / r.n_hat;
  return r;
}

EstimateReport total_matched_calibrated(const MatchedSample& matched,
                                        const CalibrationResult& calib, EstimatorKind kind) {
  matched.validate();
  if (calib.weights.size() != matched.size()) {
    throw StateError("total_matched_calibrated: calibration does not match the sample");
  }
  EstimateReport r;
  r.kind = kind;
  r.total = calib.weights.dot(matched.y);
  r.n_hat = calib.weights.sum();
  r.mean = r.total / r.n_hat;
  return r;
}

double calibrated_total_regression_form(const MatchedSample& matched, const Mat& x,
                                        const Vec& targets, const Vec& sigma_star2) {
  matched.validate();
  const Eigen::Index n = matched.size();
  if (x.rows() != n) throw StateError("regression form: x rows must match sample size");
  Vec s2 = sigma_star2.size() == 0 ? Vec::Ones(n) : sigma_star2;
  const Vec w_over_s2 = matched.transferred_weight.cwiseQuotient(s2);
  // B* = A*^{-1} sum w~ x y / sigma*^2 with A* = sum w~ x x^T / sigma*^2.
  const WlsFit fit = weighted_ls(x, matched.y, w_over_s2);
  const Vec x_hat = x.transpose() * matched.transferred_weight;
  const double y_m = matched.transferred_weight.dot(matched.y);
  return y_m + (targets - x_hat).dot(fit.coefficients);
}

EstimateReport dr_estimator(const Mat& p_prop_x, const Vec& p_weights, const Mat& np_prop_x,
                            const Mat& np_calib_x, const Vec& np_y, const Vec& calib_targets,
                            EstimatorKind kind, const Vec& sigma_star2) {
  if (p_prop_x.cols() != np_prop_x.cols()) {
    throw ParameterError("dr_estimator: propensity covariate dimensions differ");
  }
  const Eigen::Index np = p_prop_x.rows();
  const Eigen::Index nq = np_prop_x.rows();
  if (np_calib_x.rows() != nq || np_y.size() != nq) {
    throw StateError("dr_estimator: panel matrices disagree");
  }

  // Membership model over the combined sample: panel units are the class 1.
  const Eigen::Index c = p_prop_x.cols();
  Mat design(np + nq, c + 1);
  design.col(0).setOnes();
  design.block(0, 1, np, c) = p_prop_x;
  design.block(np, 1, nq, c) = np_prop_x;
  Vec label(np + nq), w(np + nq);
  label.head(np).setZero();
  label.tail(nq).setOnes();
  w.head(np) = p_weights;
  w.tail(nq).setOnes();

  const LogisticFit fit = logistic_irls(design, label, w);
  Vec odds(nq);
  for (Eigen::Index j = 0; j < nq; ++j) {
    const double r = fit.fitted_probs(np + j);
    odds(j) = (1.0 - r) / r;
  }

  const CalibrationResult calib = linear_calibrate(odds, np_calib_x, calib_targets, sigma_star2);
  EstimateReport r;
  r.kind = kind;
  r.total = calib.weights.dot(np_y);
  r.n_hat = calib.weights.sum();
  r.mean = r.total / r.n_hat;
  return r;
}

}  // namespace matchcal
