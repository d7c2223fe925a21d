#include <doctest.h>

#include <cmath>

#include "matchcal/regress.hpp"
#include "matchcal/rng.hpp"

using namespace matchcal;

namespace {

// Independent Newton-Raphson logistic solver with a fixed damping factor,
// used only as an oracle against the IRLS implementation.
Vec newton_logistic(const Mat& x, const Vec& label, const Vec& w, int iters = 200) {
  Vec beta = Vec::Zero(x.cols());
  for (int it = 0; it < iters; ++it) {
    Vec p(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      p(i) = 1.0 / (1.0 + std::exp(-x.row(i).dot(beta)));
    }
    Vec grad = x.transpose() * (w.cwiseProduct(label - p));
    Mat hess = Mat::Zero(x.cols(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      hess += w(i) * p(i) * (1.0 - p(i)) * x.row(i).transpose() * x.row(i);
    }
    beta += 0.9 * hess.ldlt().solve(grad);  // deliberate constant damping
  }
  return beta;
}

double weighted_loglik(const Mat& x, const Vec& label, const Vec& w, const Vec& beta) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double eta = x.row(i).dot(beta);
    ll += w(i) * (label(i) * eta - std::log(1.0 + std::exp(eta)));
  }
  return ll;
}

}  // namespace

TEST_CASE("wls intercept only is the weighted mean") {
  Mat x = Mat::Ones(4, 1);
  Vec y(4);
  y << 1, 2, 3, 6;
  const auto fit = weighted_ls(x, y, Vec::Ones(4));
  CHECK(fit.coefficients(0) == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(fit.residuals.sum() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("wls exact line") {
  Mat x(3, 2);
  x << 1, 1, 1, 2, 1, 3;
  Vec y(3);
  y << 1, 2, 3;
  Vec w(3);
  w << 0.2, 5.0, 1.7;
  const auto fit = weighted_ls(x, y, w);
  CHECK(fit.coefficients(0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(fit.coefficients(1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fit.residuals.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("wls five-point fixture against explicit normal equations") {
  Mat x(5, 2);
  x << 1, 1, 1, 2, 1, 3, 1, 4, 1, 5;
  Vec y(5);
  y << 1.2, 1.9, 3.4, 3.8, 5.6;
  Vec pi(5), s2(5);
  pi << 0.5, 0.4, 0.25, 0.2, 0.1;
  s2 << 1, 1, 2, 2, 4;
  const Vec w = (pi.cwiseProduct(s2)).cwiseInverse();
  const auto fit = weighted_ls(x, y, w);

  // Oracle: 2x2 normal equations solved by Cramer's rule.
  double sw = 0, swx = 0, swxx = 0, swy = 0, swxy = 0;
  for (int i = 0; i < 5; ++i) {
    sw += w(i);
    swx += w(i) * x(i, 1);
    swxx += w(i) * x(i, 1) * x(i, 1);
    swy += w(i) * y(i);
    swxy += w(i) * x(i, 1) * y(i);
  }
  const double det = sw * swxx - swx * swx;
  const double b0 = (swy * swxx - swx * swxy) / det;
  const double b1 = (sw * swxy - swx * swy) / det;
  CHECK(fit.coefficients(0) == doctest::Approx(b0).epsilon(1e-10));
  CHECK(fit.coefficients(1) == doctest::Approx(b1).epsilon(1e-10));

  // Normal equations: weighted residuals are orthogonal to the design.
  const Vec score = x.transpose() * w.cwiseProduct(fit.residuals);
  CHECK(score.cwiseAbs().maxCoeff() < 1e-8 * std::abs(swy));
}

TEST_CASE("wls predictions invariant under reparameterization") {
  Rng rng(31);
  Mat x(40, 3);
  Vec y(40), w(40);
  for (int i = 0; i < 40; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = rng.normal(0, 1);
    x(i, 2) = rng.normal(2, 3);
    y(i) = rng.normal(x(i, 1) - x(i, 2), 1);
    w(i) = 0.5 + rng.uniform();
  }
  Mat t(3, 3);
  t << 1, 0.5, -2, 0, 2, 1, 0, 0, -0.7;  // invertible
  const auto fit1 = weighted_ls(x, y, w);
  const auto fit2 = weighted_ls(x * t, y, w);
  const Vec pred1 = x * fit1.coefficients;
  const Vec pred2 = (x * t) * fit2.coefficients;
  CHECK((pred1 - pred2).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("wls rank error names the offending column") {
  Mat x(5, 3);
  for (int i = 0; i < 5; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = i;
    x(i, 2) = 2.0 * i;  // collinear with column 1
  }
  Vec y = Vec::Ones(5);
  try {
    weighted_ls(x, y, Vec::Ones(5));
    FAIL("expected RankError");
  } catch (const RankError& e) {
    CHECK(std::string(e.what()).find("column") != std::string::npos);
  }
}

TEST_CASE("logistic closed forms") {
  Mat x = Mat::Ones(4, 1);
  Vec label(4);
  label << 1, 0, 1, 0;
  auto fit = logistic_irls(x, label, Vec::Ones(4));
  CHECK(fit.coefficients(0) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(fit.converged);

  Vec w(4);
  w << 1, 1, 1, 5;  // weighted share of ones = 2/8
  fit = logistic_irls(x, label, w);
  CHECK(fit.coefficients(0) == doctest::Approx(std::log(0.25 / 0.75)).epsilon(1e-9));
}

TEST_CASE("logistic twenty-point fixture against independent Newton oracle") {
  Rng rng(77);
  Mat x(20, 2);
  Vec label(20), w(20);
  for (int i = 0; i < 20; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = rng.normal(0, 2);
    const double p = 1.0 / (1.0 + std::exp(-(0.3 + 0.8 * x(i, 1))));
    label(i) = rng.uniform() < p ? 1.0 : 0.0;
    w(i) = 0.5 + 2.0 * rng.uniform();
  }
  const auto fit = logistic_irls(x, label, w);
  const Vec oracle = newton_logistic(x, label, w);
  CHECK((fit.coefficients - oracle).cwiseAbs().maxCoeff() < 1e-6);

  // Score at the solution vanishes.
  Vec score = x.transpose() * w.cwiseProduct(label - fit.fitted_probs);
  CHECK(score.cwiseAbs().maxCoeff() < 1e-6);

  // Gradient against a central finite difference of the log-likelihood.
  const double h = 1e-5;
  for (int c = 0; c < 2; ++c) {
    Vec bp = fit.coefficients, bm = fit.coefficients;
    bp(c) += h;
    bm(c) -= h;
    const double fd = (weighted_loglik(x, label, w, bp) - weighted_loglik(x, label, w, bm)) / (2 * h);
    const double scale = std::max(1.0, std::abs(weighted_loglik(x, label, w, fit.coefficients)));
    CHECK(std::abs(fd - score(c)) / scale < 1e-4);
  }
}

TEST_CASE("logistic error and warning paths") {
  Mat x = Mat::Ones(4, 1);
  Vec all_ones = Vec::Ones(4);
  CHECK_THROWS_AS(logistic_irls(x, all_ones, all_ones), ParameterError);
  Vec bad(4);
  bad << 0, 1, 2, 1;
  CHECK_THROWS_AS(logistic_irls(x, bad, all_ones), ParameterError);

  // Perfect separation cannot converge and reports a diagnostic error.
  Mat xs(8, 2);
  Vec ls(8);
  for (int i = 0; i < 8; ++i) {
    xs(i, 0) = 1.0;
    xs(i, 1) = i;
    ls(i) = i < 4 ? 0.0 : 1.0;
  }
  CHECK_THROWS_AS(logistic_irls(xs, ls, Vec::Ones(8)), FitError);

  // Quasi-separation on a tiny x scale converges with a huge slope.
  Mat xq(8, 2);
  Vec lq(8);
  for (int i = 0; i < 8; ++i) {
    xq(i, 0) = 1.0;
    xq(i, 1) = 0.001 * i;
  }
  lq << 0, 0, 0, 1, 0, 1, 1, 1;
  const auto fit = logistic_irls(xq, lq, Vec::Ones(8), 50);
  CHECK(fit.separation_suspected);
}
