#include "matchcal/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <span>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "matchcal/calibrate.hpp"
#include "matchcal/csv.hpp"
#include "matchcal/estimators.hpp"
#include "matchcal/matching.hpp"
#include "matchcal/regress.hpp"
#include "matchcal/rng.hpp"
#include "matchcal/sampling.hpp"
#include "matchcal/variance.hpp"

namespace matchcal {

void StudyConfig::validate() const {
  if (replicates < 2) throw ParameterError("study: need at least 2 replicates");
  if (sp_sizes.empty()) throw ParameterError("study: sp_sizes is empty");
  if (panel_kind == PanelKind::stsrs && panel_sizes.empty()) {
    throw ParameterError("study: panel_sizes is empty");
  }
  if (panel_kind == PanelKind::poisson_exp && poisson_expected_size <= 0.0) {
    throw ParameterError("study: poisson expected size must be > 0");
  }
  for (const auto& e : estimators) {
    if (e != "M1" && e != "M2" && e != "MC1" && e != "MC2" && e != "DR") {
      throw ParameterError("study: unknown estimator " + e);
    }
  }
}

StudyConfig study1_preset() {
  StudyConfig c;
  c.hmt = HmtParams{};
  c.n_strata = 5;
  c.sp_sizes = {50, 50, 50, 50, 50};
  c.panel_kind = StudyConfig::PanelKind::stsrs;
  c.panel_sizes = {250, 250, 250, 250, 250};
  return c;
}

StudyConfig study2_preset() {
  StudyConfig c = study1_preset();
  c.panel_kind = StudyConfig::PanelKind::poisson_exp;
  c.poisson_rate = 0.085;
  c.poisson_expected_size = 1250.0;
  return c;
}

double pairwise_sum(const std::vector<double>& values) {
  // Recursive halving; blocks of up to 8 summed directly.
  struct Impl {
    static double sum(std::span<const double> s) {
      if (s.size() <= 8) {
        double acc = 0.0;
        for (double v : s) acc += v;
        return acc;
      }
      const std::size_t half = s.size() / 2;
      return sum(s.subspan(0, half)) + sum(s.subspan(half));
    }
  };
  return Impl::sum(std::span<const double>(values));
}

EstimatorSummary summarize_estimator(const std::string& name, double truth,
                                     const std::vector<double>& points) {
  const auto b = points.size();
  if (b < 2) throw ParameterError("summarize: need at least 2 points");
  if (truth == 0.0) throw ParameterError("summarize: relbias undefined for zero truth");

  const double mean = pairwise_sum(points) / static_cast<double>(b);
  std::vector<double> dev2(b), err2(b);
  for (std::size_t i = 0; i < b; ++i) {
    dev2[i] = (points[i] - mean) * (points[i] - mean);
    err2[i] = (points[i] - truth) * (points[i] - truth);
  }
  EstimatorSummary s;
  s.estimator = name;
  s.mc_mean = mean;
  s.relbias_pct = 100.0 * (mean - truth) / truth;
  s.emp_variance = pairwise_sum(dev2) / static_cast<double>(b - 1);
  s.mse = pairwise_sum(err2) / static_cast<double>(b);
  return s;
}

VarianceSummary summarize_variance(const std::string& estimator, const std::string& distribution,
                                   double truth, const std::vector<double>& points,
                                   const std::vector<double>& variances) {
  if (points.size() != variances.size()) throw ParameterError("summarize: length mismatch");
  const EstimatorSummary es = summarize_estimator(estimator, truth, points);

  VarianceSummary v;
  v.estimator = estimator;
  v.distribution = distribution;
  v.mean_v = pairwise_sum(variances) / static_cast<double>(variances.size());
  v.rb_empvar_pct = 100.0 * (v.mean_v - es.emp_variance) / es.emp_variance;
  v.rb_mse_pct = 100.0 * (v.mean_v - es.mse) / es.mse;
  int covered = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double half = 1.96 * std::sqrt(std::max(variances[i], 0.0));
    if (std::abs(points[i] - truth) <= half) ++covered;
  }
  v.ci95_coverage_pct = 100.0 * covered / static_cast<double>(points.size());
  return v;
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("MATCHCAL_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace {

struct VarianceKey {
  std::string estimator;
  std::string distribution;
};

// Fixed output order of the published variance estimators, restricted to
// the configured point estimators.
std::vector<VarianceKey> variance_keys(const StudyConfig& cfg) {
  std::vector<VarianceKey> keys;
  auto want = [&cfg](const char* e) {
    return std::find(cfg.estimators.begin(), cfg.estimators.end(), e) != cfg.estimators.end();
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
  std::vector<double> points;     // aligned with cfg.estimators
  std::vector<double> variances;  // aligned with variance_keys(cfg)
};

Mat with_intercept(const Mat& x) {
  Mat d(x.rows(), x.cols() + 1);
  d.col(0).setOnes();
  d.rightCols(x.cols()) = x;
  return d;
}

ReplicateOutcome run_replicate(const FinitePopulation& pop, const StudyConfig& cfg,
                               const Vec& targets, std::uint64_t rep_seed) {
  ReplicateOutcome out;
  const auto want = [&cfg](const char* e) {
    return std::find(cfg.estimators.begin(), cfg.estimators.end(), e) != cfg.estimators.end();
  };

  // Probability sample and panel; the panel is redrawn every replicate.
  DesignSample sp = stsrs(pop, cfg.sp_sizes, derive_seed(rep_seed, stream::sp_draw));
  DesignSample panel;
  if (cfg.panel_kind == StudyConfig::PanelKind::stsrs) {
    panel = stsrs(pop, cfg.panel_sizes, derive_seed(rep_seed, stream::panel_draw));
  } else {
    const double rate = cfg.poisson_rate;
    panel = poisson_panel(
        pop, [rate](double x) { return rate * std::exp(-rate * x); },
        cfg.poisson_expected_size, derive_seed(rep_seed, stream::panel_draw));
  }

  const auto gather_x = [&pop](const std::vector<int>& ids) {
    Mat x(static_cast<Eigen::Index>(ids.size()), pop.x.cols());
    for (std::size_t k = 0; k < ids.size(); ++k) x.row(static_cast<Eigen::Index>(k)) = pop.x.row(ids[k]);
    return x;
  };
  const auto gather_y = [&pop](const std::vector<int>& ids) {
    Vec y(static_cast<Eigen::Index>(ids.size()));
    for (std::size_t k = 0; k < ids.size(); ++k) y(static_cast<Eigen::Index>(k)) = pop.y(ids[k]);
    return y;
  };

  const Mat sp_x = gather_x(sp.unit_ids);
  const Mat panel_x = gather_x(panel.unit_ids);
  const Vec panel_y = gather_y(panel.unit_ids);
  const Mat sp_design = with_intercept(sp_x);

  const bool need_m2 = want("M2") || want("MC2");
  CalibrationResult greg;
  if (need_m2) greg = greg_gweights(sp, sp_design, targets);

  MatchSkeleton skeleton;
  if (cfg.match_on_propensity) {
    skeleton = propensity_match(sp_x, sp.base_weight, panel_x).skeleton;
  } else {
    skeleton = nn_match(sp_x, panel_x, cfg.match_with_replacement);
  }

  const MatchedSample m1 = transfer_weights(skeleton, sp, WeightKind::pi_weight, panel_x, panel_y);
  MatchedSample m2;
  if (need_m2) m2 = transfer_weights(skeleton, sp, WeightKind::greg_weight, panel_x, panel_y);

  const Mat np_design = with_intercept(m1.x);
  CalibrationResult calib1, calib2;
  if (want("MC1")) calib1 = chi_square_calibrate(m1, np_design, targets);
  if (want("MC2")) calib2 = chi_square_calibrate(m2, np_design, targets);

  out.points.reserve(cfg.estimators.size());
  for (const auto& e : cfg.estimators) {
    if (e == "M1") {
      out.points.push_back(total_matched(m1, EstimatorKind::M1).total);
    } else if (e == "M2") {
      out.points.push_back(total_matched(m2, EstimatorKind::M2).total);
    } else if (e == "MC1") {
      out.points.push_back(total_matched_calibrated(m1, calib1, EstimatorKind::MC1).total);
    } else if (e == "MC2") {
      out.points.push_back(total_matched_calibrated(m2, calib2, EstimatorKind::MC2).total);
    } else if (e == "DR") {
      const int n_dr = cfg.dr_subsample_size > 0 ? cfg.dr_subsample_size : sp.size();
      if (panel.size() < n_dr) throw ParameterError("DR: panel smaller than the subsample");
      const std::vector<int> sub = srs(panel.size(), n_dr, derive_seed(rep_seed, stream::dr_subsample));
      Mat sub_x(n_dr, panel_x.cols());
      Vec sub_y(n_dr);
      for (int k = 0; k < n_dr; ++k) {
        sub_x.row(k) = panel_x.row(sub[static_cast<std::size_t>(k)]);
        sub_y(k) = panel_y(sub[static_cast<std::size_t>(k)]);
      }
      const EstimateReport dr = dr_estimator(sp_x, sp.base_weight, sub_x, with_intercept(sub_x),
                                             sub_y, targets);
      out.points.push_back(dr.total);
    }
  }

  if (cfg.with_variances) {
    VarianceInputs in;
    in.matched = &m1;
    in.design_np = np_design;
    const Vec wls_w = m1.transferred_pi.cwiseInverse();
    in.bnp = weighted_ls(np_design, m1.y, wls_w);
    in.bstar = in.bnp;  // sigma~2 = sigma*2 = 1
    in.vpi_xp = v_pi_xp(sp, sp_design);
    if (need_m2) in.g = greg.g_factors;
    if (want("MC1")) in.g_star = calib1.g_factors;

    for (const auto& key : variance_keys(cfg)) {
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
      } else {  // MC2
        if (key.distribution == "xi") v = v_xi(in, XiFactor::inv_pi_with_estar);
        else if (key.distribution == "Rpi") v = v_composite(CompositeKind::MC2_rpi, in);
        else v = v_composite(CompositeKind::MC2_rpixi, in);
      }
      out.variances.push_back(v);
    }
  }

  out.ok = true;
  return out;
}

ReplicateOutcome run_replicate_guarded(const FinitePopulation& pop, const StudyConfig& cfg,
                                       const Vec& targets, std::uint64_t rep_seed) {
  try {
    return run_replicate(pop, cfg, targets, rep_seed);
  } catch (const Error& e) {
    ReplicateOutcome out;
    out.ok = false;
    out.error = e.what();
    return out;
  }
}

// Serial reference implementation of the replicate loop.
void run_replicates_serial(const FinitePopulation& pop, const StudyConfig& cfg,
                           const Vec& targets, std::vector<ReplicateOutcome>& results) {
  for (int b = 0; b < cfg.replicates; ++b) {
    results[static_cast<std::size_t>(b)] =
        run_replicate_guarded(pop, cfg, targets, derive_seed(cfg.seed, stream::replicate,
                                                             static_cast<std::uint64_t>(b)));
  }
}

// Parallel kernel; identical results to the serial loop because every
// replicate owns a derived seed and writes its own slot.
void run_replicates_parallel(const FinitePopulation& pop, const StudyConfig& cfg,
                             const Vec& targets, int threads,
                             std::vector<ReplicateOutcome>& results) {
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (int b = 0; b < cfg.replicates; ++b) {
    results[static_cast<std::size_t>(b)] =
        run_replicate_guarded(pop, cfg, targets, derive_seed(cfg.seed, stream::replicate,
                                                             static_cast<std::uint64_t>(b)));
  }
#else
  (void)threads;
  run_replicates_serial(pop, cfg, targets, results);
#endif
}

}  // namespace

MonteCarloSummary run_study(const StudyConfig& cfg, int n_threads) {
  cfg.validate();

  FinitePopulation pop;
  if (cfg.use_csv) {
    pop = read_population_csv(cfg.population_csv);
  } else {
    pop = generate_hmt(cfg.hmt, derive_seed(cfg.seed, stream::population_x));
    pop = stratify_equal_x_total(pop, cfg.n_strata);
  }
  pop.validate();

  const double truth = pop.y.sum();
  Vec targets(pop.x.cols() + 1);
  targets(0) = static_cast<double>(pop.n_units());
  targets.tail(pop.x.cols()) = pop.x.colwise().sum().transpose();

  std::vector<ReplicateOutcome> results(static_cast<std::size_t>(cfg.replicates));
  const int threads = resolve_threads(n_threads);
  if (threads <= 1) {
    run_replicates_serial(pop, cfg, targets, results);
  } else {
    run_replicates_parallel(pop, cfg, targets, threads, results);
  }

  MonteCarloSummary summary;
  summary.truth = truth;
  summary.replicates = cfg.replicates;
  for (int b = 0; b < cfg.replicates; ++b) {
    const auto& r = results[static_cast<std::size_t>(b)];
    if (r.ok) {
      ++summary.used;
    } else {
      summary.failed_replicates.push_back(b);
      summary.failure_messages.push_back(r.error);
    }
  }
  if (summary.used < cfg.replicates &&
      static_cast<double>(cfg.replicates - summary.used) > 0.01 * cfg.replicates) {
    throw Error("monte carlo: " + std::to_string(cfg.replicates - summary.used) + " of " +
                std::to_string(cfg.replicates) + " replicates failed; first failure: " +
                summary.failure_messages.front());
  }
  if (summary.used < 2) throw Error("monte carlo: fewer than 2 usable replicates");

  // Points per estimator over the successful replicates, in config order.
  for (std::size_t e = 0; e < cfg.estimators.size(); ++e) {
    std::vector<double> pts;
    pts.reserve(static_cast<std::size_t>(summary.used));
    for (const auto& r : results) {
      if (r.ok) pts.push_back(r.points[e]);
    }
    summary.estimators.push_back(summarize_estimator(cfg.estimators[e], truth, pts));
  }
  double min_mse = std::numeric_limits<double>::infinity();
  for (const auto& row : summary.estimators) min_mse = std::min(min_mse, row.mse);
  for (auto& row : summary.estimators) row.ratio_to_min_mse = row.mse / min_mse;

  if (cfg.with_variances) {
    const auto keys = variance_keys(cfg);
    for (std::size_t k = 0; k < keys.size(); ++k) {
      const auto it = std::find(cfg.estimators.begin(), cfg.estimators.end(), keys[k].estimator);
      const auto e = static_cast<std::size_t>(it - cfg.estimators.begin());
      std::vector<double> pts, vs;
      for (const auto& r : results) {
        if (!r.ok) continue;
        pts.push_back(r.points[e]);
        vs.push_back(r.variances[k]);
      }
      summary.variances.push_back(
          summarize_variance(keys[k].estimator, keys[k].distribution, truth, pts, vs));
    }
  }
  return summary;
}

}  // namespace matchcal
