#include "matchcal/matching.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "matchcal/rng.hpp"

namespace matchcal {

void MatchedSample::validate() const {
  const auto n = static_cast<Eigen::Index>(pairs.size());
  if (transferred_weight.size() != n || transferred_pi.size() != n || y.size() != n ||
      x.rows() != n || distance.size() != n) {
    throw StateError("matched sample: field lengths disagree");
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    if (!(transferred_weight(j) > 0.0)) {
      throw StateError("matched sample: transferred weights must be positive");
    }
  }
}

namespace {

// Z-scores each column using the pooled target+pool moments. Constant
// columns are left unscaled.
void standardize_columns(Mat& a, Mat& b) {
  const double n = static_cast<double>(a.rows() + b.rows());
  for (Eigen::Index c = 0; c < a.cols(); ++c) {
    const double mean = (a.col(c).sum() + b.col(c).sum()) / n;
    const double ss = (a.col(c).array() - mean).square().sum() +
                      (b.col(c).array() - mean).square().sum();
    const double sd = std::sqrt(ss / (n - 1.0));
    if (sd > 0.0) {
      a.col(c) = (a.col(c).array() - mean) / sd;
      b.col(c) = (b.col(c).array() - mean) / sd;
    }
  }
}

int nearest_unused(const Mat& target, const Mat& pool, Eigen::Index t,
                   const std::vector<char>& used, double* best_d2_out) {
  int best = -1;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (Eigen::Index p = 0; p < pool.rows(); ++p) {
    if (!used.empty() && used[static_cast<std::size_t>(p)]) continue;
    const double d2 = (pool.row(p) - target.row(t)).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = static_cast<int>(p);
    }
  }
  *best_d2_out = best_d2;
  return best;
}

void prepare(const Mat& target_x, const Mat& pool_x, bool with_replacement,
             Standardize standardize, Mat& t, Mat& p) {
  if (target_x.cols() != pool_x.cols()) {
    throw ParameterError("nn_match: covariate dimension mismatch");
  }
  if (target_x.rows() == 0) throw ParameterError("nn_match: no target rows");
  if (!with_replacement && pool_x.rows() < target_x.rows()) {
    throw ParameterError("nn_match: pool smaller than target without replacement");
  }
  t = target_x;
  p = pool_x;
  const bool scale = standardize == Standardize::on ||
                     (standardize == Standardize::automatic && target_x.cols() > 1);
  if (scale) standardize_columns(t, p);
}

}  // namespace

MatchSkeleton nn_match_with_replacement_serial(const Mat& target_x, const Mat& pool_x,
                                               Standardize standardize) {
  Mat t, p;
  prepare(target_x, pool_x, true, standardize, t, p);
  MatchSkeleton sk;
  sk.with_replacement = true;
  sk.pool_index.resize(static_cast<std::size_t>(t.rows()));
  sk.distance.resize(t.rows());
  const std::vector<char> no_used;
  for (Eigen::Index i = 0; i < t.rows(); ++i) {
    double d2 = 0.0;
    sk.pool_index[static_cast<std::size_t>(i)] = nearest_unused(t, p, i, no_used, &d2);
    sk.distance(i) = std::sqrt(d2);
  }
  return sk;
}

MatchSkeleton nn_match(const Mat& target_x, const Mat& pool_x, bool with_replacement,
                       Standardize standardize, std::optional<std::uint64_t> order_seed) {
  Mat t, p;
  prepare(target_x, pool_x, with_replacement, standardize, t, p);

  MatchSkeleton sk;
  sk.with_replacement = with_replacement;
  sk.pool_index.resize(static_cast<std::size_t>(t.rows()));
  sk.distance.resize(t.rows());

  if (with_replacement) {
    // Targets are independent; scan them in parallel.
    const std::vector<char> no_used;
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < t.rows(); ++i) {
      double d2 = 0.0;
      sk.pool_index[static_cast<std::size_t>(i)] = nearest_unused(t, p, i, no_used, &d2);
      sk.distance(i) = std::sqrt(d2);
    }
    return sk;
  }

  // Greedy sequential scan; the processing order is the target row order
  // unless a seeded shuffle is requested.
  std::vector<int> order(static_cast<std::size_t>(t.rows()));
  std::iota(order.begin(), order.end(), 0);
  if (order_seed) {
    Rng rng(derive_seed(*order_seed, stream::match_order));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);
    }
  }

  std::vector<char> used(static_cast<std::size_t>(p.rows()), 0);
  for (int i : order) {
    double d2 = 0.0;
    const int best = nearest_unused(t, p, i, used, &d2);
    used[static_cast<std::size_t>(best)] = 1;
    sk.pool_index[static_cast<std::size_t>(i)] = best;
    sk.distance(i) = std::sqrt(d2);
  }
  return sk;
}

PropensityMatchResult propensity_match(const Mat& p_x, const Vec& p_weights, const Mat& pool_x,
                                       std::optional<std::uint64_t> order_seed) {
  if (p_x.cols() != pool_x.cols()) {
    throw ParameterError("propensity_match: covariate dimension mismatch");
  }
  if (p_weights.size() != p_x.rows()) {
    throw ParameterError("propensity_match: weight length mismatch");
  }
  const Eigen::Index np = p_x.rows();
  const Eigen::Index nq = pool_x.rows();
  const Eigen::Index c = p_x.cols();

  Mat design(np + nq, c + 1);
  design.col(0).setOnes();
  design.block(0, 1, np, c) = p_x;
  design.block(np, 1, nq, c) = pool_x;
  Vec label(np + nq);
  label.head(np).setOnes();
  label.tail(nq).setZero();
  Vec w(np + nq);
  w.head(np) = p_weights;
  w.tail(nq).setOnes();

  PropensityMatchResult out;
  out.fit = logistic_irls(design, label, w);
  if (out.fit.separation_suspected) {
    throw FitError("propensity_match: quasi-separation suspected (a coefficient exceeds 15)");
  }
  Vec eta = design * out.fit.coefficients;
  out.target_scores = eta.head(np);
  out.pool_scores = eta.tail(nq);
  out.skeleton = nn_match(out.target_scores, out.pool_scores, /*with_replacement=*/false,
                          Standardize::off, order_seed);
  return out;
}

MatchedSample transfer_weights(const MatchSkeleton& skeleton, const DesignSample& donor,
                               WeightKind which, const Mat& pool_x, const Vec& pool_y) {
  const int n = skeleton.size();
  if (donor.size() != n) {
    throw StateError("transfer_weights: donor sample size differs from match count");
  }
  if (which == WeightKind::greg_weight && !donor.greg_weight) {
    throw StateError("transfer_weights: donor has no greg_weight");
  }
  MatchedSample m;
  m.pairs.resize(static_cast<std::size_t>(n));
  m.transferred_weight.resize(n);
  m.transferred_pi.resize(n);
  m.y.resize(n);
  m.x.resize(n, pool_x.cols());
  m.distance = skeleton.distance;
  for (int j = 0; j < n; ++j) {
    const int np_row = skeleton.pool_index[static_cast<std::size_t>(j)];
    if (np_row < 0 || np_row >= pool_x.rows()) {
      throw StateError("transfer_weights: pool index out of range");
    }
    m.pairs[static_cast<std::size_t>(j)] = {j, np_row};
    m.transferred_weight(j) = which == WeightKind::pi_weight ? donor.base_weight(j)
                                                             : (*donor.greg_weight)(j);
    m.transferred_pi(j) = donor.pi(j);
    m.y(j) = pool_y(np_row);
    m.x.row(j) = pool_x.row(np_row);
  }
  m.validate();
  return m;
}

}  // namespace matchcal
