#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "matchcal/common.hpp"
#include "matchcal/regress.hpp"
#include "matchcal/sampling.hpp"

namespace matchcal {

// Pairing produced by nearest-neighbour matching: pool_index[t] is the pool
// row matched to target row t, distance[t] the Euclidean distance.
struct MatchSkeleton {
  std::vector<int> pool_index;
  Vec distance;
  bool with_replacement = false;

  int size() const { return static_cast<int>(pool_index.size()); }
};

// The matched nonprobability sample: one pair per probability-sample unit,
// the donated weight, the donor's inclusion probability, and the panel
// unit's response and covariates.
struct MatchedSample {
  std::vector<std::pair<int, int>> pairs;  // (target row, pool row)
  Vec transferred_weight;                  // w-tilde
  Vec transferred_pi;                      // pi of the donor unit
  Vec y;                                   // panel response
  Mat x;                                   // panel covariates
  Vec distance;

  int size() const { return static_cast<int>(pairs.size()); }
  void validate() const;
};

enum class Standardize { automatic, on, off };

// Single nearest-neighbour matching on Euclidean distance. Without
// replacement the targets are processed in row order (or in a seeded random
// order when order_seed is set) and each takes the closest unused pool row;
// ties go to the smallest pool index. standardize=automatic turns z-scoring
// on for C > 1 only.
MatchSkeleton nn_match(const Mat& target_x, const Mat& pool_x, bool with_replacement,
                       Standardize standardize = Standardize::automatic,
                       std::optional<std::uint64_t> order_seed = std::nullopt);

// Serial reference for the with-replacement kernel (the production kernel
// scans targets in parallel); kept for testing and benchmarks.
MatchSkeleton nn_match_with_replacement_serial(const Mat& target_x, const Mat& pool_x,
                                               Standardize standardize = Standardize::automatic);

struct PropensityMatchResult {
  MatchSkeleton skeleton;
  LogisticFit fit;       // membership model, S_p = 1 vs pool = 0
  Vec target_scores;     // linear predictors
  Vec pool_scores;
};

// Fits a weighted logistic regression of membership on the stacked
// covariates (an intercept column is prepended) and matches without
// replacement on the 1-D linear predictor.
PropensityMatchResult propensity_match(const Mat& p_x, const Vec& p_weights, const Mat& pool_x,
                                       std::optional<std::uint64_t> order_seed = std::nullopt);

enum class WeightKind { pi_weight, greg_weight };

// Donates the matched probability-sample unit's weight to each panel unit.
// pool_x/pool_y supply the panel rows referenced by the skeleton.
MatchedSample transfer_weights(const MatchSkeleton& skeleton, const DesignSample& donor,
                               WeightKind which, const Mat& pool_x, const Vec& pool_y);

}  // namespace matchcal
