#include "matchcal/population.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "matchcal/rng.hpp"

namespace matchcal {

int FinitePopulation::n_strata() const {
  int h = 0;
  for (int s : stratum) h = std::max(h, s);
  return h;
}

void FinitePopulation::validate() const {
  if (x.rows() != y.size() || static_cast<std::size_t>(y.size()) != stratum.size()) {
    throw StateError("population: x rows, y length and stratum length disagree");
  }
  for (int s : stratum) {
    if (s < 1) throw StateError("population: stratum labels must be >= 1");
  }
}

FinitePopulation generate_hmt(const HmtParams& params, std::uint64_t seed) {
  if (params.n_units < 1) throw ParameterError("generate_hmt: n_units must be >= 1");
  if (params.sigma2 <= 0.0) throw ParameterError("generate_hmt: sigma2 must be > 0");
  if (params.x_shape <= 0.0 || params.x_scale <= 0.0) {
    throw ParameterError("generate_hmt: gamma shape and scale must be > 0");
  }

  const auto n = static_cast<Eigen::Index>(params.n_units);
  FinitePopulation pop;
  pop.x.resize(n, 1);
  pop.y.resize(n);
  pop.stratum.assign(static_cast<std::size_t>(n), 1);

  Rng rx(derive_seed(seed, stream::population_x));
  for (Eigen::Index i = 0; i < n; ++i) {
    pop.x(i, 0) = rx.gamma(params.x_shape, params.x_scale);
  }

  // Y | X=x is gamma with scale b and shape c chosen so that
  // b*c = alpha + beta*x and b^2*c = sigma2 * x^{3/2}.
  Rng ry(derive_seed(seed, stream::population_y));
  for (Eigen::Index i = 0; i < n; ++i) {
    const double xv = pop.x(i, 0);
    const double mean = params.alpha + params.beta * xv;
    if (mean <= 0.0) {
      throw ParameterError("generate_hmt: alpha + beta*x must be positive for every x");
    }
    const double var = params.sigma2 * std::pow(xv, 1.5);
    const double scale = var / mean;
    const double shape = mean * mean / var;
    pop.y(i) = ry.gamma(shape, scale);
  }
  return pop;
}

FinitePopulation stratify_equal_x_total(const FinitePopulation& pop, int n_strata,
                                        int x_column) {
  pop.validate();
  const int n = pop.n_units();
  if (n_strata < 1) throw ParameterError("stratify_equal_x_total: n_strata must be >= 1");
  if (n_strata > n) throw ParameterError("stratify_equal_x_total: n_strata exceeds population size");
  if (x_column < 0 || x_column >= pop.n_covariates()) {
    throw ParameterError("stratify_equal_x_total: x_column out of range");
  }

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return pop.x(a, x_column) < pop.x(b, x_column);
  });

  const double total = pop.x.col(x_column).sum();
  const double per_stratum = total / n_strata;

  FinitePopulation out = pop;
  double cum = 0.0;
  int h = 1;
  for (int idx : order) {
    out.stratum[static_cast<std::size_t>(idx)] = h;
    cum += pop.x(idx, x_column);
    while (h < n_strata && cum >= h * per_stratum) ++h;
  }
  return out;
}

}  // namespace matchcal
