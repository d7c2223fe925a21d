#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "matchcal/common.hpp"
#include "matchcal/population.hpp"

namespace matchcal {

// A realized probability sample: selected unit indices with their inclusion
// probabilities and base weights 1/pi. greg_weight is filled in by
// greg_gweights when the sample is calibrated.
struct DesignSample {
  std::vector<int> unit_ids;
  Vec pi;
  Vec base_weight;             // 1/pi elementwise
  std::vector<int> stratum;
  std::optional<Vec> greg_weight;  // g_j / pi_j

  int size() const { return static_cast<int>(unit_ids.size()); }
  void validate() const;
};

// Stratified simple random sampling without replacement. sizes_per_stratum
// has one entry per stratum label 1..H; pi = n_h/N_h within stratum h.
// Selection within a stratum depends only on (seed, stratum contents).
DesignSample stsrs(const FinitePopulation& pop, const std::vector<int>& sizes_per_stratum,
                   std::uint64_t seed);

// Poisson sampling with raw probabilities raw_prob(x) normalized so the
// expected sample size equals target_size. Probabilities that normalize
// above 1 are clamped (count reported through n_clamped when non-null).
DesignSample poisson_panel(const FinitePopulation& pop,
                           const std::function<double(double)>& raw_prob,
                           double target_size, std::uint64_t seed, int x_column = 0,
                           int* n_clamped = nullptr);

// Uniform without-replacement draw of n_draw indices out of 0..n_from-1,
// returned sorted ascending.
std::vector<int> srs(int n_from, int n_draw, std::uint64_t seed);

}  // namespace matchcal
