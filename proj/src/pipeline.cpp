#include "matchcal/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "matchcal/calibrate.hpp"
#include "matchcal/estimators.hpp"
#include "matchcal/matching.hpp"
#include "matchcal/regress.hpp"
#include "matchcal/rng.hpp"
#include "matchcal/sampling.hpp"
#include "matchcal/variance.hpp"

namespace matchcal {

void PipelineSpec::validate() const {
  if (population_csv.empty()) throw ParameterError("pipeline: population_csv required");
  if (web_column.empty()) throw ParameterError("pipeline: web_column required");
  if (n < 2) throw ParameterError("pipeline: n must be >= 2");
  if (panel_draw < n) throw ParameterError("pipeline: panel draw must be >= n");
  if (replicates < 2) throw ParameterError("pipeline: need at least 2 replicates");
  for (const auto& e : estimators) {
    if (e != "M1" && e != "M2" && e != "MC1" && e != "MC2" && e != "DR1" && e != "DR2") {
      throw ParameterError("pipeline: unknown estimator " + e);
    }
    if (e == "DR2" && !dr2_model) throw ParameterError("pipeline: DR2 requested without dr2_model");
  }
}

namespace {

struct VarianceKey {
  std::string estimator;
  std::string distribution;
};

std::vector<VarianceKey> variance_keys(const std::vector<std::string>& estimators) {
  std::vector<VarianceKey> keys;
  auto want = [&estimators](const char* e) {
    return std::find(estimators.begin(), estimators.end(), e) != estimators.end();
  };
  if (want("M1")) {
    keys.push_back({"M1", "xi"});
    keys.push_back({"M1", "Rpi"});
    keys.push_back({"M1", "Rpixi"});
  }
  if (want("M2")) {
    keys.push_back({"M2", "xi"});
    keys.push_back({"M2", "Rpi"});
    keys.push_back({"M2", "Rpixi"});
  }
  if (want("MC1")) {
    keys.push_back({"MC1", "xi"});
    keys.push_back({"MC1", "Rpi"});
  }
  if (want("MC2")) {
    keys.push_back({"MC2", "xi"});
    keys.push_back({"MC2", "Rpi"});
    keys.push_back({"MC2", "Rpixi"});
  }
  return keys;
}

struct ReplicateOutcome {
  bool ok = false;
  std::string error;
  std::vector<double> points;     // estimator-major, response-minor
  std::vector<double> variances;  // key-major, response-minor
};

struct PipelineContext {
  Dataset data;
  std::vector<int> web_rows;
  double big_n = 0.0;   // N used in the weight rescale
  double f_nr = 0.0;    // sum final / sum design
  Vec truth;            // weighted mean per response
  Vec calib_targets;    // final-weighted totals of the calibration design
  Mat match_all;        // match-model covariates for every row (no intercept)
  Mat calib_all;        // calibration design for every row (with intercept)
  Mat dr1_all;          // DR propensity covariates (no intercept)
  Mat dr2_all;          // only when dr2_model present
};

ReplicateOutcome run_replicate(const PipelineContext& ctx, const PipelineSpec& spec,
                               std::uint64_t rep_seed) {
  ReplicateOutcome out;
  const auto want = [&spec](const char* e) {
    return std::find(spec.estimators.begin(), spec.estimators.end(), e) != spec.estimators.end();
  };
  const Dataset& d = ctx.data;
  const auto n_resp = static_cast<int>(d.response_names.size());

  // Reference sample from the full file, panel from the covered subset.
  const std::vector<int> sp_rows = srs(d.n_rows(), spec.n, derive_seed(rep_seed, stream::sp_draw));
  const std::vector<int> panel_pick =
      srs(static_cast<int>(ctx.web_rows.size()), spec.panel_draw,
          derive_seed(rep_seed, stream::panel_draw));
  std::vector<int> panel_rows(panel_pick.size());
  for (std::size_t k = 0; k < panel_pick.size(); ++k) {
    panel_rows[k] = ctx.web_rows[static_cast<std::size_t>(panel_pick[k])];
  }

  // Rescaled weights: final-based w~ and nonresponse-adjusted design-based w~pi.
  const double scale = ctx.big_n / spec.n;
  Vec w_final(spec.n), w_design(spec.n);
  for (int j = 0; j < spec.n; ++j) {
    const int r = sp_rows[static_cast<std::size_t>(j)];
    w_final(j) = scale * d.final_weight(r);
    w_design(j) = scale * d.design_weight(r) * ctx.f_nr;
  }

  const auto take_rows = [](const Mat& all, const std::vector<int>& rows) {
    Mat m(static_cast<Eigen::Index>(rows.size()), all.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) m.row(static_cast<Eigen::Index>(k)) = all.row(rows[k]);
    return m;
  };

  // Propensity matching selects n panel units.
  const Mat sp_match = take_rows(ctx.match_all, sp_rows);
  const Mat panel_match = take_rows(ctx.match_all, panel_rows);
  const MatchSkeleton skeleton =
      propensity_match(sp_match, Vec::Ones(spec.n), panel_match).skeleton;

  std::vector<int> matched_rows(static_cast<std::size_t>(spec.n));
  for (int j = 0; j < spec.n; ++j) {
    matched_rows[static_cast<std::size_t>(j)] =
        panel_rows[static_cast<std::size_t>(skeleton.pool_index[static_cast<std::size_t>(j)])];
  }

  const Mat calib_np = take_rows(ctx.calib_all, matched_rows);
  const Mat calib_p = take_rows(ctx.calib_all, sp_rows);

  // Donor sample abstraction: pi = 1 / w~pi, GREG weight = w~.
  DesignSample donor;
  donor.unit_ids = sp_rows;
  donor.pi = w_design.cwiseInverse();
  donor.base_weight = w_design;
  donor.stratum.assign(static_cast<std::size_t>(spec.n), 1);
  donor.greg_weight = w_final;

  MatchedSample m1_proto;  // y filled per response
  m1_proto.pairs.resize(static_cast<std::size_t>(spec.n));
  for (int j = 0; j < spec.n; ++j) {
    m1_proto.pairs[static_cast<std::size_t>(j)] = {j, skeleton.pool_index[static_cast<std::size_t>(j)]};
  }
  m1_proto.transferred_weight = w_design;
  m1_proto.transferred_pi = donor.pi;
  m1_proto.y = Vec::Zero(spec.n);
  m1_proto.x = take_rows(ctx.match_all, matched_rows);
  m1_proto.distance = skeleton.distance;
  MatchedSample m2_proto = m1_proto;
  m2_proto.transferred_weight = w_final;

  const bool need_mc1 = want("MC1");
  const bool need_mc2 = want("MC2");
  CalibrationResult calib1, calib2;
  if (need_mc1) calib1 = chi_square_calibrate(m1_proto, calib_np, ctx.calib_targets);
  if (need_mc2) calib2 = chi_square_calibrate(m2_proto, calib_np, ctx.calib_targets);

  // DR weights are shared across responses: subsample, propensity, calibrate.
  Vec dr1_w, dr2_w;
  std::vector<int> dr_rows;
  if (want("DR1") || want("DR2")) {
    const std::vector<int> sub =
        srs(spec.panel_draw, spec.n, derive_seed(rep_seed, stream::dr_subsample));
    dr_rows.resize(sub.size());
    for (std::size_t k = 0; k < sub.size(); ++k) {
      dr_rows[k] = panel_rows[static_cast<std::size_t>(sub[k])];
    }
    const Mat calib_dr = take_rows(ctx.calib_all, dr_rows);
    const auto dr_weights = [&](const Mat& prop_all) {
      const Mat p_x = take_rows(prop_all, sp_rows);
      const Mat q_x = take_rows(prop_all, dr_rows);
      const Eigen::Index c = p_x.cols();
      Mat design(p_x.rows() + q_x.rows(), c + 1);
      design.col(0).setOnes();
      design.block(0, 1, p_x.rows(), c) = p_x;
      design.block(p_x.rows(), 1, q_x.rows(), c) = q_x;
      Vec label(design.rows()), w(design.rows());
      label.head(p_x.rows()).setZero();
      label.tail(q_x.rows()).setOnes();
      w.head(p_x.rows()) = w_final;
      w.tail(q_x.rows()).setOnes();
      const LogisticFit fit = logistic_irls(design, label, w);
      Vec odds(q_x.rows());
      for (Eigen::Index j = 0; j < q_x.rows(); ++j) {
        const double r = fit.fitted_probs(p_x.rows() + j);
        odds(j) = (1.0 - r) / r;
      }
      return linear_calibrate(odds, calib_dr, ctx.calib_targets).weights;
    };
    if (want("DR1")) dr1_w = dr_weights(ctx.dr1_all);
    if (want("DR2")) dr2_w = dr_weights(ctx.dr2_all);
  }

  // Per-response estimates; weights are response-independent.
  const auto keys = variance_keys(spec.estimators);
  out.points.reserve(spec.estimators.size() * static_cast<std::size_t>(n_resp));
  for (const auto& est : spec.estimators) {
    for (int r = 0; r < n_resp; ++r) {
      Vec y(spec.n);
      for (int j = 0; j < spec.n; ++j) {
        y(j) = d.responses(matched_rows[static_cast<std::size_t>(j)], r);
      }
      double mean = 0.0;
      if (est == "M1") {
        mean = w_design.dot(y) / w_design.sum();
      } else if (est == "M2") {
        mean = w_final.dot(y) / w_final.sum();
      } else if (est == "MC1") {
        mean = calib1.weights.dot(y) / calib1.weights.sum();
      } else if (est == "MC2") {
        mean = calib2.weights.dot(y) / calib2.weights.sum();
      } else {
        const Vec& wdr = est == "DR1" ? dr1_w : dr2_w;
        Vec ydr(wdr.size());
        for (Eigen::Index j = 0; j < wdr.size(); ++j) {
          ydr(j) = d.responses(dr_rows[static_cast<std::size_t>(j)], r);
        }
        mean = wdr.dot(ydr) / wdr.sum();
      }
      out.points.push_back(mean);
    }
  }

  if (!keys.empty()) {
    const Mat vpx = v_pi_xp(donor, calib_p);
    const Vec g_donor = w_final.cwiseQuotient(w_design);

    // Per-response matched samples and slope fits, shared across the keys.
    std::vector<MatchedSample> m1s(static_cast<std::size_t>(n_resp));
    std::vector<WlsFit> fits(static_cast<std::size_t>(n_resp));
    for (int r = 0; r < n_resp; ++r) {
      Vec y(spec.n);
      for (int j = 0; j < spec.n; ++j) {
        y(j) = d.responses(matched_rows[static_cast<std::size_t>(j)], r);
      }
      m1s[static_cast<std::size_t>(r)] = m1_proto;
      m1s[static_cast<std::size_t>(r)].y = y;
      fits[static_cast<std::size_t>(r)] =
          weighted_ls(calib_np, y, m1_proto.transferred_pi.cwiseInverse());
    }

    for (const auto& key : keys) {
      for (int r = 0; r < n_resp; ++r) {
        const MatchedSample& m1 = m1s[static_cast<std::size_t>(r)];
        VarianceInputs in;
        in.matched = &m1;
        in.design_np = calib_np;
        in.bnp = fits[static_cast<std::size_t>(r)];
        in.bstar = in.bnp;
        in.vpi_xp = vpx;
        in.g = g_donor;
        if (need_mc1) in.g_star = calib1.g_factors;

        double v = 0.0;
        if (key.estimator == "M1") {
          if (key.distribution == "xi") v = v_xi(in, XiFactor::inv_pi);
          else if (key.distribution == "Rpi")
            v = wr_total_variance(m1.transferred_weight.cwiseProduct(m1.y));
          else v = v_composite(CompositeKind::M1_rpixi, in);
        } else if (key.estimator == "M2") {
          if (key.distribution == "xi") v = v_xi(in, XiFactor::g_over_pi);
          else if (key.distribution == "Rpi") v = v_composite(CompositeKind::M2_rpi, in);
          else v = v_composite(CompositeKind::M2_rpixi, in);
        } else if (key.estimator == "MC1") {
          if (key.distribution == "xi") v = v_xi(in, XiFactor::gstar_over_pi);
          else v = v_composite(CompositeKind::MC1_rpi, in);
        } else {
          if (key.distribution == "xi") v = v_xi(in, XiFactor::inv_pi_with_estar);
          else if (key.distribution == "Rpi") v = v_composite(CompositeKind::MC2_rpi, in);
          else v = v_composite(CompositeKind::MC2_rpixi, in);
        }

        // The estimators report means: N-hat is treated as a constant, so
        // the total's variance divides by N-hat squared.
        double n_hat = 0.0;
        if (key.estimator == "M1") n_hat = w_design.sum();
        else if (key.estimator == "M2") n_hat = w_final.sum();
        else if (key.estimator == "MC1") n_hat = calib1.weights.sum();
        else n_hat = calib2.weights.sum();
        out.variances.push_back(v / (n_hat * n_hat));
      }
    }
  }

  out.ok = true;
  return out;
}

ReplicateOutcome run_replicate_guarded(const PipelineContext& ctx, const PipelineSpec& spec,
                                       std::uint64_t rep_seed) {
  try {
    return run_replicate(ctx, spec, rep_seed);
  } catch (const Error& e) {
    ReplicateOutcome out;
    out.error = e.what();
    return out;
  }
}

}  // namespace

MonteCarloSummary run_pipeline(const PipelineSpec& spec, int n_threads) {
  spec.validate();

  PipelineContext ctx;
  DatasetSchema schema = spec.schema;
  if (std::find(schema.retain_raw.begin(), schema.retain_raw.end(), spec.web_column) ==
      schema.retain_raw.end()) {
    schema.retain_raw.push_back(spec.web_column);
  }
  ctx.data = load_dataset(spec.population_csv, schema);
  const Dataset& d = ctx.data;
  if (d.response_names.empty()) throw SchemaError("pipeline: schema names no responses");

  const auto& web_raw = d.raw.at(spec.web_column);
  for (int i = 0; i < d.n_rows(); ++i) {
    if (web_raw[static_cast<std::size_t>(i)] == spec.web_value) ctx.web_rows.push_back(i);
  }
  if (static_cast<int>(ctx.web_rows.size()) < spec.panel_draw) {
    throw ParameterError("pipeline: covered subset smaller than the panel draw");
  }

  ctx.big_n = spec.population_n > 0.0 ? spec.population_n : static_cast<double>(d.n_rows());
  ctx.f_nr = d.final_weight.sum() / d.design_weight.sum();

  ModelSpec match_spec = spec.match_model;
  match_spec.intercept = false;  // propensity_match adds its own intercept
  ctx.match_all = build_design(d, match_spec, {});
  ctx.calib_all = build_design(d, spec.calib_model, {});
  ModelSpec dr1_spec = spec.calib_model;
  dr1_spec.intercept = false;
  ctx.dr1_all = build_design(d, dr1_spec, {});
  if (spec.dr2_model) {
    ModelSpec dr2_spec = *spec.dr2_model;
    dr2_spec.intercept = false;
    ctx.dr2_all = build_design(d, dr2_spec, {});
  }

  ctx.calib_targets = ctx.calib_all.transpose() * d.final_weight;
  ctx.truth.resize(d.responses.cols());
  for (Eigen::Index r = 0; r < d.responses.cols(); ++r) {
    ctx.truth(r) = d.final_weight.dot(d.responses.col(r)) / d.final_weight.sum();
  }

  std::vector<ReplicateOutcome> results(static_cast<std::size_t>(spec.replicates));
  const int threads = resolve_threads(n_threads);
  if (threads <= 1) {
    for (int b = 0; b < spec.replicates; ++b) {
      results[static_cast<std::size_t>(b)] = run_replicate_guarded(
          ctx, spec, derive_seed(spec.seed, stream::replicate, static_cast<std::uint64_t>(b)));
    }
  } else {
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(threads)
#endif
    for (int b = 0; b < spec.replicates; ++b) {
      results[static_cast<std::size_t>(b)] = run_replicate_guarded(
          ctx, spec, derive_seed(spec.seed, stream::replicate, static_cast<std::uint64_t>(b)));
    }
  }

  MonteCarloSummary summary;
  summary.replicates = spec.replicates;
  for (int b = 0; b < spec.replicates; ++b) {
    const auto& r = results[static_cast<std::size_t>(b)];
    if (r.ok) ++summary.used;
    else {
      summary.failed_replicates.push_back(b);
      summary.failure_messages.push_back(r.error);
    }
  }
  if (summary.used < spec.replicates &&
      static_cast<double>(spec.replicates - summary.used) > 0.01 * spec.replicates) {
    throw Error("pipeline: " + std::to_string(spec.replicates - summary.used) + " of " +
                std::to_string(spec.replicates) + " replicates failed; first failure: " +
                summary.failure_messages.front());
  }
  if (summary.used < 2) throw Error("pipeline: fewer than 2 usable replicates");

  const auto n_resp = static_cast<int>(d.response_names.size());
  const auto label = [&](const std::string& est, int r) {
    return n_resp == 1 ? est : est + "[" + d.response_names[static_cast<std::size_t>(r)] + "]";
  };
  summary.truth = ctx.truth(0);  // per-row truths differ; rows carry their own metrics

  // Ratio-to-min is taken within each analysis variable.
  std::vector<double> min_mse(static_cast<std::size_t>(n_resp),
                              std::numeric_limits<double>::infinity());
  for (std::size_t e = 0; e < spec.estimators.size(); ++e) {
    for (int r = 0; r < n_resp; ++r) {
      std::vector<double> pts;
      for (const auto& res : results) {
        if (res.ok) pts.push_back(res.points[e * static_cast<std::size_t>(n_resp) +
                                             static_cast<std::size_t>(r)]);
      }
      auto row = summarize_estimator(label(spec.estimators[e], r), ctx.truth(r), pts);
      min_mse[static_cast<std::size_t>(r)] = std::min(min_mse[static_cast<std::size_t>(r)], row.mse);
      summary.estimators.push_back(std::move(row));
    }
  }
  for (std::size_t i = 0; i < summary.estimators.size(); ++i) {
    summary.estimators[i].ratio_to_min_mse =
        summary.estimators[i].mse / min_mse[i % static_cast<std::size_t>(n_resp)];
  }

  const auto keys = variance_keys(spec.estimators);
  for (std::size_t k = 0; k < keys.size(); ++k) {
    const auto it =
        std::find(spec.estimators.begin(), spec.estimators.end(), keys[k].estimator);
    const auto e = static_cast<std::size_t>(it - spec.estimators.begin());
    for (int r = 0; r < n_resp; ++r) {
      std::vector<double> pts, vs;
      for (const auto& res : results) {
        if (!res.ok) continue;
        pts.push_back(res.points[e * static_cast<std::size_t>(n_resp) + static_cast<std::size_t>(r)]);
        vs.push_back(res.variances[k * static_cast<std::size_t>(n_resp) + static_cast<std::size_t>(r)]);
      }
      summary.variances.push_back(
          summarize_variance(label(keys[k].estimator, r), keys[k].distribution, ctx.truth(r), pts, vs));
    }
  }
  return summary;
}

}  // namespace matchcal
