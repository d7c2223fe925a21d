#pragma once

#include <cstdint>
#include <vector>

#include "matchcal/common.hpp"

namespace matchcal {

// A finite universe U of N units: covariates, one analysis variable, and a
// stratum label per unit. Immutable after construction; safe to share
// read-only across threads.
struct FinitePopulation {
  Mat x;                      // N x C covariates
  Vec y;                      // N
  std::vector<int> stratum;   // N, labels in 1..H

  int n_units() const { return static_cast<int>(y.size()); }
  int n_covariates() const { return static_cast<int>(x.cols()); }
  int n_strata() const;

  // Row count agreement plus label sanity; throws StateError on violation.
  void validate() const;
};

// Parameters of the gamma-within-gamma superpopulation used in the
// simulation studies: E(Y|X=x) = alpha + beta*x, Var(Y|X=x) = sigma2*x^{3/2},
// X ~ Gamma(x_shape, x_scale).
struct HmtParams {
  double alpha = 0.4;
  double beta = 0.25;
  double sigma2 = 0.0625;
  double x_shape = 2.0;
  double x_scale = 5.0;
  std::int64_t n_units = 100000;
};

// Draws the population. Deterministic given seed; consumes dedicated RNG
// streams so later sampling calls do not perturb the generated units.
FinitePopulation generate_hmt(const HmtParams& params, std::uint64_t seed);

// Relabels strata so that contiguous X-ranges carry approximately equal
// totals of X: sort by the stratification column ascending, walk the
// cumulative sum, advance the stratum each time the sum crosses k*total/H.
FinitePopulation stratify_equal_x_total(const FinitePopulation& pop, int n_strata,
                                        int x_column = 0);

}  // namespace matchcal
