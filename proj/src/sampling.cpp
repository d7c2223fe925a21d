#include "matchcal/sampling.hpp"

#include <algorithm>
#include <iostream>
#include <numeric>
#include <unordered_set>

#include "matchcal/rng.hpp"

namespace matchcal {

void DesignSample::validate() const {
  const auto n = static_cast<Eigen::Index>(unit_ids.size());
  if (pi.size() != n || base_weight.size() != n ||
      static_cast<Eigen::Index>(stratum.size()) != n) {
    throw StateError("sample: field lengths disagree");
  }
  if (greg_weight && greg_weight->size() != n) {
    throw StateError("sample: greg_weight length disagrees");
  }
  std::unordered_set<int> seen;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (!(pi(j) > 0.0 && pi(j) <= 1.0)) throw StateError("sample: pi outside (0,1]");
    if (!seen.insert(unit_ids[static_cast<std::size_t>(j)]).second) {
      throw StateError("sample: duplicate unit_ids");
    }
  }
}

namespace {

// Partial Fisher-Yates: the first n_draw entries of idx become a uniform
// without-replacement sample.
void draw_prefix(std::vector<int>& idx, int n_draw, Rng& rng) {
  const int m = static_cast<int>(idx.size());
  for (int i = 0; i < n_draw; ++i) {
    const int j = rng.uniform_int(i, m - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
}

}  // namespace

DesignSample stsrs(const FinitePopulation& pop, const std::vector<int>& sizes_per_stratum,
                   std::uint64_t seed) {
  pop.validate();
  const int n_strata = pop.n_strata();
  if (static_cast<int>(sizes_per_stratum.size()) != n_strata) {
    throw ParameterError("stsrs: need one sample size per stratum");
  }

  std::vector<std::vector<int>> members(static_cast<std::size_t>(n_strata));
  for (int i = 0; i < pop.n_units(); ++i) {
    members[static_cast<std::size_t>(pop.stratum[static_cast<std::size_t>(i)] - 1)].push_back(i);
  }

  std::vector<int> chosen;
  std::vector<double> chosen_pi;
  std::vector<int> chosen_stratum;
  for (int h = 0; h < n_strata; ++h) {
    auto& idx = members[static_cast<std::size_t>(h)];
    const int n_h = sizes_per_stratum[static_cast<std::size_t>(h)];
    const int cap = static_cast<int>(idx.size());
    if (n_h < 0 || n_h > cap) {
      throw ParameterError("stsrs: sample size exceeds stratum " + std::to_string(h + 1));
    }
    Rng rng(derive_seed(seed, stream::stsrs, static_cast<std::uint64_t>(h)));
    draw_prefix(idx, n_h, rng);
    std::sort(idx.begin(), idx.begin() + n_h);
    const double p = static_cast<double>(n_h) / cap;
    for (int k = 0; k < n_h; ++k) {
      chosen.push_back(idx[static_cast<std::size_t>(k)]);
      chosen_pi.push_back(p);
      chosen_stratum.push_back(h + 1);
    }
  }

  DesignSample s;
  s.unit_ids = std::move(chosen);
  s.pi = Eigen::Map<Vec>(chosen_pi.data(), static_cast<Eigen::Index>(chosen_pi.size()));
  s.base_weight = s.pi.cwiseInverse();
  s.stratum = std::move(chosen_stratum);
  return s;
}

DesignSample poisson_panel(const FinitePopulation& pop,
                           const std::function<double(double)>& raw_prob,
                           double target_size, std::uint64_t seed, int x_column,
                           int* n_clamped) {
  pop.validate();
  if (target_size <= 0.0) throw ParameterError("poisson_panel: target size must be > 0");
  if (x_column < 0 || x_column >= pop.n_covariates()) {
    throw ParameterError("poisson_panel: x_column out of range");
  }

  const int n = pop.n_units();
  Vec raw(n);
  for (int i = 0; i < n; ++i) {
    raw(i) = raw_prob(pop.x(i, x_column));
    if (raw(i) < 0.0) throw ParameterError("poisson_panel: raw probability < 0");
  }
  const double total = raw.sum();
  if (total <= 0.0) throw ParameterError("poisson_panel: raw probabilities sum to 0");

  int clamped = 0;
  Vec prob = raw * (target_size / total);
  for (int i = 0; i < n; ++i) {
    if (prob(i) > 1.0) {
      prob(i) = 1.0;
      ++clamped;
    }
  }
  if (n_clamped) {
    *n_clamped = clamped;
  } else if (clamped > 0) {
    std::cerr << "poisson_panel: " << clamped
              << " normalized probabilities exceeded 1 and were clamped\n";
  }

  Rng rng(derive_seed(seed, stream::poisson));
  std::vector<int> chosen;
  std::vector<double> chosen_pi;
  std::vector<int> chosen_stratum;
  for (int i = 0; i < n; ++i) {
    if (rng.uniform() < prob(i)) {
      chosen.push_back(i);
      chosen_pi.push_back(prob(i));
      chosen_stratum.push_back(pop.stratum[static_cast<std::size_t>(i)]);
    }
  }

  DesignSample s;
  s.unit_ids = std::move(chosen);
  s.pi = Eigen::Map<Vec>(chosen_pi.data(), static_cast<Eigen::Index>(chosen_pi.size()));
  s.base_weight = s.pi.cwiseInverse();
  s.stratum = std::move(chosen_stratum);
  return s;
}

std::vector<int> srs(int n_from, int n_draw, std::uint64_t seed) {
  if (n_draw < 0 || n_draw > n_from) throw ParameterError("srs: n_draw must be in [0, n_from]");
  std::vector<int> idx(static_cast<std::size_t>(n_from));
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(derive_seed(seed, stream::srs));
  draw_prefix(idx, n_draw, rng);
  idx.resize(static_cast<std::size_t>(n_draw));
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace matchcal
