#pragma once

#include "matchcal/common.hpp"
#include "matchcal/matching.hpp"
#include "matchcal/regress.hpp"
#include "matchcal/sampling.hpp"

namespace matchcal {

// With-replacement variance of an estimated total from its weighted
// contributions z_j: n/(n-1) * sum (z_j - mean)^2.
double wr_total_variance(const Vec& z);

// Matrix version: n/(n-1) * sum (z_j - mean)(z_j - mean)^T.
Mat wr_total_covariance(const Mat& z);

// Stratified with-replacement covariance estimator of the HT total of x
// over the donor sample (no finite population correction). Falls back to a
// single stratum when all labels agree.
Mat v_pi_xp(const DesignSample& donor, const Mat& x);

enum class XiFactor { inv_pi, g_over_pi, gstar_over_pi, inv_pi_with_estar };

// Everything the composite variance estimators need for one matched sample.
// Residuals are recomputed from the stored fits on demand.
struct VarianceInputs {
  const MatchedSample* matched = nullptr;
  Mat design_np;        // model matrix for the matched sample
  WlsFit bnp;           // slope fit with weights 1/(pi*sigma~2)
  WlsFit bstar;         // slope fit with weights 1/(pi*sigma*2)
  Mat vpi_xp;           // design covariance of X_hat_p (may be 0x0 when unused)
  Vec g;                // GREG g-factors of the donors (case ii), may be empty
  Vec g_star;           // calibration adjustments, may be empty

  Vec residuals_e() const;      // y - x B~np
  Vec residuals_estar() const;  // y - x B*np
};

// Model-variance estimators of the form sum (factor_j * resid_j)^2. The
// factor kinds cover the four published combinations.
double v_xi(const VarianceInputs& in, XiFactor kind);

enum class CompositeKind { M1_rpixi, M2_rpi, M2_rpixi, MC1_rpi, MC2_rpi, MC2_rpixi };

// Composite quasi-randomization/design/model variance estimators assembled
// from the pieces above with B = B~np(pi) throughout.
double v_composite(CompositeKind kind, const VarianceInputs& in);

// Quadratic form b' M b with M symmetrized first.
double quad_form(const Vec& b, const Mat& m);

}  // namespace matchcal
