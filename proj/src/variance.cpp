#include "matchcal/variance.hpp"

#include <map>

namespace matchcal {

double wr_total_variance(const Vec& z) {
  const Eigen::Index n = z.size();
  if (n < 2) throw DegenerateSampleError("wr_total_variance: need at least 2 contributions");
  const double mean = z.mean();
  const double ss = (z.array() - mean).square().sum();
  return static_cast<double>(n) / (n - 1.0) * ss;
}

Mat wr_total_covariance(const Mat& z) {
  const Eigen::Index n = z.rows();
  if (n < 2) throw DegenerateSampleError("wr_total_covariance: need at least 2 contributions");
  const Eigen::RowVectorXd mean = z.colwise().mean();
  Mat centered = z.rowwise() - mean;
  Mat cov = static_cast<double>(n) / (n - 1.0) * (centered.transpose() * centered);
  return 0.5 * (cov + cov.transpose());
}

Mat v_pi_xp(const DesignSample& donor, const Mat& x) {
  donor.validate();
  if (x.rows() != donor.size()) throw StateError("v_pi_xp: x rows must match donor size");
  const Eigen::Index c = x.cols();

  std::map<int, std::vector<int>> by_stratum;
  for (int j = 0; j < donor.size(); ++j) by_stratum[donor.stratum[static_cast<std::size_t>(j)]].push_back(j);

  Mat total = Mat::Zero(c, c);
  for (const auto& [label, rows] : by_stratum) {
    const auto n_h = static_cast<Eigen::Index>(rows.size());
    if (n_h < 2) {
      throw DegenerateSampleError("v_pi_xp: stratum " + std::to_string(label) +
                                  " has fewer than 2 units");
    }
    Mat z(n_h, c);
    for (Eigen::Index k = 0; k < n_h; ++k) {
      const int j = rows[static_cast<std::size_t>(k)];
      z.row(k) = x.row(j) / donor.pi(j);
    }
    total += wr_total_covariance(z);
  }
  return 0.5 * (total + total.transpose());
}

Vec VarianceInputs::residuals_e() const {
  if (!matched) throw StateError("variance inputs: no matched sample");
  return matched->y - design_np * bnp.coefficients;
}

Vec VarianceInputs::residuals_estar() const {
  if (!matched) throw StateError("variance inputs: no matched sample");
  return matched->y - design_np * bstar.coefficients;
}

double v_xi(const VarianceInputs& in, XiFactor kind) {
  if (!in.matched) throw StateError("v_xi: no matched sample");
  const Vec& pi = in.matched->transferred_pi;
  Vec resid;
  Vec factor;
  switch (kind) {
    case XiFactor::inv_pi:
      resid = in.residuals_e();
      factor = pi.cwiseInverse();
      break;
    case XiFactor::g_over_pi:
      if (in.g.size() != pi.size()) throw StateError("v_xi: g factors missing");
      resid = in.residuals_e();
      factor = in.g.cwiseQuotient(pi);
      break;
    case XiFactor::gstar_over_pi:
      if (in.g_star.size() != pi.size()) throw StateError("v_xi: g* factors missing");
      resid = in.residuals_estar();
      factor = in.g_star.cwiseQuotient(pi);
      break;
    case XiFactor::inv_pi_with_estar:
      resid = in.residuals_estar();
      factor = pi.cwiseInverse();
      break;
  }
  return factor.cwiseProduct(resid).squaredNorm();
}

double quad_form(const Vec& b, const Mat& m) {
  const Mat sym = 0.5 * (m + m.transpose());
  return b.dot(sym * b);
}

namespace {

// Covariance of the pi-weighted x-total over the matched sample, treated as
// an unstratified with-replacement draw.
Mat vr_xnp(const VarianceInputs& in) {
  const Vec& pi = in.matched->transferred_pi;
  Mat z = in.design_np;
  for (Eigen::Index j = 0; j < z.rows(); ++j) z.row(j) /= pi(j);
  return wr_total_covariance(z);
}

}  // namespace

double v_composite(CompositeKind kind, const VarianceInputs& in) {
  if (!in.matched) throw StateError("v_composite: no matched sample");
  const Vec& pi = in.matched->transferred_pi;
  const Vec& b = in.bnp.coefficients;

  switch (kind) {
    case CompositeKind::M1_rpixi:
      return v_xi(in, XiFactor::inv_pi) + quad_form(b, vr_xnp(in));
    case CompositeKind::M2_rpi:
      return wr_total_variance(in.matched->y.cwiseQuotient(pi)) + quad_form(b, in.vpi_xp);
    case CompositeKind::M2_rpixi:
      return v_xi(in, XiFactor::inv_pi) + quad_form(b, vr_xnp(in)) + quad_form(b, in.vpi_xp);
    case CompositeKind::MC1_rpi:
      return wr_total_variance(in.matched->transferred_weight.cwiseProduct(in.residuals_estar()));
    case CompositeKind::MC2_rpi:
      return wr_total_variance(in.residuals_estar().cwiseQuotient(pi)) + quad_form(b, in.vpi_xp);
    case CompositeKind::MC2_rpixi:
      return v_xi(in, XiFactor::inv_pi_with_estar) + quad_form(b, in.vpi_xp);
  }
  throw ParameterError("v_composite: unknown kind");
}

}  // namespace matchcal
