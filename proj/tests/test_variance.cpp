#include <doctest.h>

#include <cmath>
#include <vector>

#include "matchcal/matching.hpp"
#include "matchcal/population.hpp"
#include "matchcal/regress.hpp"
#include "matchcal/rng.hpp"
#include "matchcal/sampling.hpp"
#include "matchcal/variance.hpp"

using namespace matchcal;

namespace {

MatchedSample matched_fixture(std::vector<double> pi, std::vector<double> y, Mat x) {
  MatchedSample m;
  const auto n = static_cast<Eigen::Index>(pi.size());
  m.pairs.resize(pi.size());
  for (std::size_t i = 0; i < pi.size(); ++i) m.pairs[i] = {static_cast<int>(i), static_cast<int>(i)};
  m.transferred_pi = Eigen::Map<Vec>(pi.data(), n);
  m.transferred_weight = m.transferred_pi.cwiseInverse();
  m.y = Eigen::Map<Vec>(y.data(), n);
  m.x = x;
  m.distance = Vec::Zero(n);
  return m;
}

}  // namespace

TEST_CASE("with-replacement variance basics") {
  CHECK(wr_total_variance(Vec::Constant(5, 3.3)) == doctest::Approx(0.0));
  Vec z(2);
  z << 1, 3;
  CHECK(wr_total_variance(z) == doctest::Approx(4.0).epsilon(1e-14));
  Vec one(1);
  one << 2;
  CHECK_THROWS_AS(wr_total_variance(one), DegenerateSampleError);
}

TEST_CASE("with-replacement covariance") {
  SUBCASE("one column reduces to the variance") {
    Rng rng(4);
    Mat z(7, 1);
    for (int i = 0; i < 7; ++i) z(i, 0) = rng.normal(0, 2);
    CHECK(wr_total_covariance(z)(0, 0) == doctest::Approx(wr_total_variance(z.col(0))).epsilon(1e-12));
  }
  SUBCASE("hand-computed 3x2 fixture") {
    Mat z(3, 2);
    z << 1, 2, 3, 4, 5, 0;
    const Mat cov = wr_total_covariance(z);
    CHECK(cov(0, 0) == doctest::Approx(12.0).epsilon(1e-14));
    CHECK(cov(1, 1) == doctest::Approx(12.0).epsilon(1e-14));
    CHECK(cov(0, 1) == doctest::Approx(-6.0).epsilon(1e-14));
    CHECK(cov(1, 0) == doctest::Approx(-6.0).epsilon(1e-14));
  }
  SUBCASE("centered orthogonal columns give a diagonal matrix") {
    Mat z(4, 2);
    z << 1, 1, -1, 1, 1, -1, -1, -1;
    const Mat cov = wr_total_covariance(z);
    CHECK(cov(0, 1) == doctest::Approx(0.0));
  }
}

TEST_CASE("design covariance of the x-total over the donor sample") {
  SUBCASE("two-strata scalar fixture") {
    DesignSample donor;
    donor.unit_ids = {0, 1, 2, 3, 4};
    donor.pi.resize(5);
    donor.pi << 0.5, 0.5, 0.25, 0.25, 0.25;
    donor.base_weight = donor.pi.cwiseInverse();
    donor.stratum = {1, 1, 2, 2, 2};
    Mat x(5, 1);
    x << 1, 2, 3, 5, 7;
    // stratum 1: z = (2,4): 2*((2-3)^2 + (4-3)^2) = 4
    // stratum 2: z = (12,20,28): 1.5*(64+0+64) = 192
    CHECK(v_pi_xp(donor, x)(0, 0) == doctest::Approx(196.0).epsilon(1e-12));
  }

  SUBCASE("single stratum reduces to wr variance") {
    DesignSample donor;
    donor.unit_ids = {0, 1, 2};
    donor.pi = Vec::Constant(3, 0.5);
    donor.base_weight = donor.pi.cwiseInverse();
    donor.stratum = {1, 1, 1};
    Mat x(3, 1);
    x << 1, 2, 4;
    const Vec z = x.col(0) * 2.0;
    CHECK(v_pi_xp(donor, x)(0, 0) == doctest::Approx(wr_total_variance(z)).epsilon(1e-12));
  }

  SUBCASE("census stratum with constant x contributes zero") {
    DesignSample donor;
    donor.unit_ids = {0, 1, 2};
    donor.pi = Vec::Ones(3);
    donor.base_weight = Vec::Ones(3);
    donor.stratum = {1, 1, 1};
    const Mat x = Mat::Constant(3, 1, 4.0);
    CHECK(v_pi_xp(donor, x)(0, 0) == doctest::Approx(0.0));
  }

  SUBCASE("a one-unit stratum is degenerate") {
    DesignSample donor;
    donor.unit_ids = {0, 1, 2};
    donor.pi = Vec::Constant(3, 0.5);
    donor.base_weight = donor.pi.cwiseInverse();
    donor.stratum = {1, 1, 2};
    Mat x = Mat::Ones(3, 1);
    CHECK_THROWS_AS(v_pi_xp(donor, x), DegenerateSampleError);
  }
}

TEST_CASE("model-variance estimators") {
  Mat x(4, 2);
  x << 1, 1, 1, 2, 1, 3, 1, 4;

  SUBCASE("exact linear y gives zero for every kind") {
    auto m = matched_fixture({0.5, 0.5, 0.5, 0.5}, {3, 5, 7, 9}, x);
    VarianceInputs in;
    in.matched = &m;
    in.design_np = x;
    in.bnp = weighted_ls(x, m.y, m.transferred_pi.cwiseInverse());
    in.bstar = in.bnp;
    in.g = Vec::Ones(4);
    in.g_star = Vec::Ones(4);
    for (auto kind : {XiFactor::inv_pi, XiFactor::g_over_pi, XiFactor::gstar_over_pi,
                      XiFactor::inv_pi_with_estar}) {
      CHECK(v_xi(in, kind) == doctest::Approx(0.0).epsilon(1e-18));
    }
  }

  SUBCASE("unit pi and g with residuals (1,-1)") {
    // Intercept-only design: residuals are y - mean.
    Mat ones = Mat::Ones(2, 1);
    auto m = matched_fixture({1.0, 1.0}, {2.0, 0.0}, ones);
    VarianceInputs in;
    in.matched = &m;
    in.design_np = ones;
    in.bnp = weighted_ls(ones, m.y, Vec::Ones(2));
    in.bstar = in.bnp;
    in.g = Vec::Ones(2);
    CHECK(v_xi(in, XiFactor::inv_pi) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(v_xi(in, XiFactor::g_over_pi) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK_THROWS_AS(v_xi(in, XiFactor::gstar_over_pi), StateError);
  }
}

TEST_CASE("composite estimators assemble from their parts") {
  Rng rng(33);
  const int n = 5;
  Mat x(n, 2);
  std::vector<double> pi(n), y(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = rng.uniform() * 4.0;
    pi[static_cast<std::size_t>(i)] = 0.2 + 0.6 * rng.uniform();
    y[static_cast<std::size_t>(i)] = rng.normal(1 + x(i, 1), 0.5);
  }
  auto m = matched_fixture(pi, y, x);

  DesignSample donor;
  donor.unit_ids = {0, 1, 2, 3, 4};
  donor.pi = m.transferred_pi;
  donor.base_weight = m.transferred_weight;
  donor.stratum = {1, 1, 1, 2, 2};
  Mat donor_x(n, 2);
  donor_x = x;
  donor_x.col(1).array() += 0.05;

  VarianceInputs in;
  in.matched = &m;
  in.design_np = x;
  in.bnp = weighted_ls(x, m.y, m.transferred_pi.cwiseInverse());
  in.bstar = in.bnp;
  in.vpi_xp = v_pi_xp(donor, donor_x);
  in.g = Vec::Constant(n, 1.1);
  in.g_star = Vec::Constant(n, 0.9);

  // Recompute every part with the standalone operations.
  const Vec b = in.bnp.coefficients;
  Mat z = x;
  for (int i = 0; i < n; ++i) z.row(i) /= m.transferred_pi(i);
  const Mat vr_xnp = wr_total_covariance(z);
  const double quad_np = b.dot(vr_xnp * b);
  const double quad_p = b.dot(in.vpi_xp * b);
  const Vec estar = m.y - x * in.bstar.coefficients;

  CHECK(v_composite(CompositeKind::M1_rpixi, in) ==
        doctest::Approx(v_xi(in, XiFactor::inv_pi) + quad_np).epsilon(1e-12));
  CHECK(v_composite(CompositeKind::M2_rpi, in) ==
        doctest::Approx(wr_total_variance(m.y.cwiseQuotient(m.transferred_pi)) + quad_p)
            .epsilon(1e-12));
  CHECK(v_composite(CompositeKind::M2_rpixi, in) ==
        doctest::Approx(v_xi(in, XiFactor::inv_pi) + quad_np + quad_p).epsilon(1e-12));
  CHECK(v_composite(CompositeKind::MC1_rpi, in) ==
        doctest::Approx(wr_total_variance(m.transferred_weight.cwiseProduct(estar)))
            .epsilon(1e-12));
  CHECK(v_composite(CompositeKind::MC2_rpi, in) ==
        doctest::Approx(wr_total_variance(estar.cwiseQuotient(m.transferred_pi)) + quad_p)
            .epsilon(1e-12));
  CHECK(v_composite(CompositeKind::MC2_rpixi, in) ==
        doctest::Approx(v_xi(in, XiFactor::inv_pi_with_estar) + quad_p).epsilon(1e-12));

  // Every estimator is nonnegative on this and any input.
  for (auto kind : {CompositeKind::M1_rpixi, CompositeKind::M2_rpi, CompositeKind::M2_rpixi,
                    CompositeKind::MC1_rpi, CompositeKind::MC2_rpi, CompositeKind::MC2_rpixi}) {
    CHECK(v_composite(kind, in) >= 0.0);
  }
}

TEST_CASE("constant y forces the xi term to vanish in the M1 composite") {
  const int n = 6;
  Mat x(n, 2);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = i + 1.0;
  }
  auto m = matched_fixture(std::vector<double>(n, 0.5), std::vector<double>(n, 7.0), x);
  VarianceInputs in;
  in.matched = &m;
  in.design_np = x;
  in.bnp = weighted_ls(x, m.y, m.transferred_pi.cwiseInverse());
  in.bstar = in.bnp;
  CHECK(in.bnp.coefficients(0) == doctest::Approx(7.0).epsilon(1e-10));
  CHECK(in.bnp.coefficients(1) == doctest::Approx(0.0).epsilon(1e-10));

  Mat z = x;
  for (int i = 0; i < n; ++i) z.row(i) /= m.transferred_pi(i);
  const double expected = in.bnp.coefficients.dot(wr_total_covariance(z) * in.bnp.coefficients);
  CHECK(v_composite(CompositeKind::M1_rpixi, in) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("with-replacement estimator overestimates the model variance as derived") {
  // Fixed 50-unit sample with known beta and sigma; the mean of the
  // estimator over fresh model draws of Y has a closed form.
  Rng rng(101);
  const int n = 50;
  Vec pi(n), mu(n), sigma(n);
  Mat x(n, 2);
  for (int i = 0; i < n; ++i) {
    const double xv = 1.0 + 19.0 * rng.uniform();
    x(i, 0) = 1.0;
    x(i, 1) = xv;
    pi(i) = 0.02 + 0.2 * rng.uniform();
    mu(i) = 0.4 + 0.25 * xv;
    sigma(i) = std::sqrt(0.0625 * std::pow(xv, 1.5));
  }
  const Vec w = pi.cwiseInverse();

  const int draws = 20000;
  std::vector<double> vs(draws);
  Rng noise(555);
  for (int d = 0; d < draws; ++d) {
    Vec z(n);
    for (int i = 0; i < n; ++i) z(i) = w(i) * (mu(i) + noise.normal(0.0, sigma(i)));
    vs[static_cast<std::size_t>(d)] = wr_total_variance(z);
  }
  double mean_v = 0.0;
  for (double v : vs) mean_v += v;
  mean_v /= draws;
  double var_v = 0.0;
  for (double v : vs) var_v += (v - mean_v) * (v - mean_v);
  var_v /= (draws - 1);

  // Expected value: sum sigma^2/pi^2 + n/(n-1) sum ((x/pi - mean)' beta)^2.
  double term1 = 0.0;
  for (int i = 0; i < n; ++i) term1 += sigma(i) * sigma(i) / (pi(i) * pi(i));
  Vec beta(2);
  beta << 0.4, 0.25;
  Vec zb(n);
  for (int i = 0; i < n; ++i) zb(i) = x.row(i).dot(beta) / pi(i);
  const double zbar = zb.mean();
  double term2 = 0.0;
  for (int i = 0; i < n; ++i) term2 += (zb(i) - zbar) * (zb(i) - zbar);
  term2 *= static_cast<double>(n) / (n - 1.0);

  const double se = std::sqrt(var_v / draws);
  CHECK(std::abs(mean_v - (term1 + term2)) < 3.0 * se);
}

TEST_CASE("joint panel and model replication matches the two-term variance structure") {
  // Simulation-study-I shape: the empirical variance of the pi-weighted
  // matched total over joint (panel, model) replication is close to
  // sum_U sigma^2/pi + beta' V_R(Xhat_np) beta.
  HmtParams hp;
  hp.n_units = 100000;
  auto pop = generate_hmt(hp, 64);
  pop = stratify_equal_x_total(pop, 5);
  const std::vector<int> sp_sizes = {50, 50, 50, 50, 50};
  const std::vector<int> panel_sizes = {250, 250, 250, 250, 250};
  const auto sp = stsrs(pop, sp_sizes, 777);  // fixed reference sample
  const int n = sp.size();
  Mat sp_x(n, 1);
  for (int j = 0; j < n; ++j) sp_x(j, 0) = pop.x(sp.unit_ids[static_cast<std::size_t>(j)], 0);

  const int reps = 1200;
  std::vector<double> totals(reps);
  std::vector<double> xhat(reps);
#pragma omp parallel for schedule(dynamic)
  for (int r = 0; r < reps; ++r) {
    const auto rep_seed = derive_seed(4242, stream::replicate, static_cast<std::uint64_t>(r));
    const auto panel = stsrs(pop, panel_sizes, derive_seed(rep_seed, stream::panel_draw));
    Mat panel_x(panel.size(), 1);
    for (int k = 0; k < panel.size(); ++k) {
      panel_x(k, 0) = pop.x(panel.unit_ids[static_cast<std::size_t>(k)], 0);
    }
    const auto sk = nn_match(sp_x, panel_x, false);
    Rng ynoise(derive_seed(rep_seed, 99));
    double tot = 0.0, xh = 0.0;
    for (int j = 0; j < n; ++j) {
      const double xv = panel_x(sk.pool_index[static_cast<std::size_t>(j)], 0);
      const double mean = 0.4 + 0.25 * xv;
      const double var = 0.0625 * std::pow(xv, 1.5);
      const double y = ynoise.gamma(mean * mean / var, var / mean);  // fresh model draw
      tot += y / sp.pi(j);
      xh += xv / sp.pi(j);
    }
    totals[static_cast<std::size_t>(r)] = tot;
    xhat[static_cast<std::size_t>(r)] = xh;
  }

  auto variance = [](const std::vector<double>& v) {
    double m = 0.0;
    for (double t : v) m += t;
    m /= static_cast<double>(v.size());
    double s = 0.0;
    for (double t : v) s += (t - m) * (t - m);
    return s / (static_cast<double>(v.size()) - 1.0);
  };
  const double emp = variance(totals);

  double term1 = 0.0;  // sum over U of sigma^2 / pi with pi = n_h/N_h
  std::vector<double> nh(5, 0.0);
  for (int i = 0; i < pop.n_units(); ++i) nh[static_cast<std::size_t>(pop.stratum[static_cast<std::size_t>(i)] - 1)] += 1.0;
  for (int i = 0; i < pop.n_units(); ++i) {
    const double pi_i = 50.0 / nh[static_cast<std::size_t>(pop.stratum[static_cast<std::size_t>(i)] - 1)];
    term1 += 0.0625 * std::pow(pop.x(i, 0), 1.5) / pi_i;
  }
  const double term2 = 0.25 * 0.25 * variance(xhat);
  CHECK(std::abs(emp - (term1 + term2)) / (term1 + term2) < 0.10);
}
