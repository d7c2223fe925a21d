#include "matchcal/regress.hpp"

#include <cmath>
#include <limits>

namespace matchcal {

namespace {

constexpr double kProbClamp = 1e-10;
constexpr double kSeparationCoef = 15.0;

double clamp_prob(double p) {
  if (p < kProbClamp) return kProbClamp;
  if (p > 1.0 - kProbClamp) return 1.0 - kProbClamp;
  return p;
}

double deviance(const Vec& label, const Vec& p, const Vec& w) {
  double d = 0.0;
  for (Eigen::Index i = 0; i < label.size(); ++i) {
    d -= 2.0 * w(i) * (label(i) * std::log(p(i)) + (1.0 - label(i)) * std::log(1.0 - p(i)));
  }
  return d;
}

}  // namespace

WlsFit weighted_ls(const Mat& x, const Vec& y, const Vec& w) {
  const Eigen::Index n = x.rows();
  const Eigen::Index c = x.cols();
  if (y.size() != n || w.size() != n) throw StateError("weighted_ls: length mismatch");
  if (n < c) throw RankError("weighted_ls: fewer rows than columns");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(w(i) > 0.0)) throw ParameterError("weighted_ls: weights must be positive");
  }

  const Vec sw = w.cwiseSqrt();
  Mat xw = sw.asDiagonal() * x;
  Eigen::ColPivHouseholderQR<Mat> qr(xw);
  if (qr.rank() < c) {
    const auto perm = qr.colsPermutation().indices();
    const int bad = perm(qr.rank());
    throw RankError("weighted_ls: singular information matrix at column " +
                    std::to_string(bad));
  }

  WlsFit fit;
  fit.coefficients = qr.solve(sw.cwiseProduct(y));
  fit.residuals = y - x * fit.coefficients;
  fit.weight_used = w;
  fit.info_matrix = x.transpose() * w.asDiagonal() * x;
  return fit;
}

LogisticFit logistic_irls(const Mat& x, const Vec& label, const Vec& w,
                          int max_iter, double tol) {
  const Eigen::Index n = x.rows();
  const Eigen::Index c = x.cols();
  if (label.size() != n || w.size() != n) throw StateError("logistic_irls: length mismatch");
  bool has0 = false, has1 = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (label(i) == 0.0) has0 = true;
    else if (label(i) == 1.0) has1 = true;
    else throw ParameterError("logistic_irls: labels must be 0 or 1");
    if (w(i) < 0.0) throw ParameterError("logistic_irls: weights must be >= 0");
  }
  if (!has0 || !has1) throw ParameterError("logistic_irls: both classes must be present");

  Vec beta = Vec::Zero(c);
  Vec eta = Vec::Zero(n);
  Vec p(n);
  for (Eigen::Index i = 0; i < n; ++i) p(i) = 0.5;
  double dev = deviance(label, p, w);

  LogisticFit fit;
  int it = 0;
  double change = std::numeric_limits<double>::infinity();
  for (it = 1; it <= max_iter; ++it) {
    Vec irls_w(n), z(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double pq = p(i) * (1.0 - p(i));
      irls_w(i) = std::max(w(i) * pq, 1e-300);
      z(i) = eta(i) + (label(i) - p(i)) / pq;
    }
    Vec proposal;
    try {
      proposal = weighted_ls(x, z, irls_w).coefficients;
    } catch (const RankError& e) {
      throw FitError(std::string("logistic_irls: ") + e.what());
    }

    // Step-halving keeps the deviance non-increasing.
    Vec step = proposal - beta;
    double new_dev = 0.0;
    Vec new_eta(n), new_p(n);
    int halvings = 0;
    for (;; ++halvings) {
      Vec cand = beta + step;
      new_eta = x * cand;
      for (Eigen::Index i = 0; i < n; ++i) new_p(i) = clamp_prob(1.0 / (1.0 + std::exp(-new_eta(i))));
      new_dev = deviance(label, new_p, w);
      if (new_dev <= dev + 1e-12 * std::abs(dev) || halvings >= 30) break;
      step *= 0.5;
    }

    change = step.cwiseAbs().maxCoeff();
    beta += step;
    eta = new_eta;
    p = new_p;
    dev = new_dev;
    if (change < tol) break;
  }

  fit.coefficients = beta;
  fit.fitted_probs = p;
  fit.iterations = std::min(it, max_iter);
  fit.converged = change < tol;
  fit.separation_suspected = beta.cwiseAbs().maxCoeff() > kSeparationCoef;
  if (!fit.converged) {
    throw FitError("logistic_irls: no convergence after " + std::to_string(max_iter) +
                   " iterations (last max coefficient change " + std::to_string(change) + ")");
  }
  return fit;
}

}  // namespace matchcal
