#include "matchcal/report.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

namespace matchcal {

using nlohmann::ordered_json;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ordered_json parse_json(const std::string& text, const std::string& what) {
  try {
    return ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(what + ": " + e.what());
  }
}

ModelSpec parse_model_spec(const ordered_json& j) {
  ModelSpec m;
  if (j.contains("main")) m.main = j.at("main").get<std::vector<std::string>>();
  if (j.contains("interactions")) {
    for (const auto& pair : j.at("interactions")) {
      m.interactions.emplace_back(pair.at(0).get<std::string>(), pair.at(1).get<std::string>());
    }
  }
  if (j.contains("intercept")) m.intercept = j.at("intercept").get<bool>();
  return m;
}

DatasetSchema parse_schema(const ordered_json& j) {
  DatasetSchema s;
  for (const auto& col : j.at("covariates")) {
    ColumnSpec c;
    c.name = col.at("name").get<std::string>();
    const std::string kind = col.value("kind", std::string("continuous"));
    if (kind == "categorical") {
      c.kind = ColumnSpec::Kind::categorical;
      c.levels = col.at("levels").get<std::vector<std::string>>();
      c.reference = col.value("reference", std::string());
      if (col.contains("merges")) {
        for (const auto& g : col.at("merges")) {
          c.merges.push_back(g.get<std::vector<std::string>>());
        }
      }
    } else if (kind != "continuous") {
      throw IoError("schema: unknown column kind " + kind);
    }
    s.covariates.push_back(std::move(c));
  }
  if (j.contains("responses")) s.responses = j.at("responses").get<std::vector<std::string>>();
  if (j.contains("design_weight")) s.design_weight = j.at("design_weight").get<std::string>();
  if (j.contains("final_weight")) s.final_weight = j.at("final_weight").get<std::string>();
  if (j.contains("drop_codes")) {
    for (const auto& [name, codes] : j.at("drop_codes").items()) {
      s.drop_codes[name] = codes.get<std::vector<std::string>>();
    }
  }
  if (j.contains("response_yes_code")) {
    for (const auto& [name, code] : j.at("response_yes_code").items()) {
      s.response_yes_code[name] = code.get<std::string>();
    }
  }
  if (j.contains("binary_cuts")) {
    for (const auto& cut : j.at("binary_cuts")) {
      BinaryCut b;
      b.column = cut.at("column").get<std::string>();
      b.threshold = cut.at("threshold").get<double>();
      b.name = cut.value("name", std::string());
      s.binary_cuts.push_back(std::move(b));
    }
  }
  return s;
}

}  // namespace

StudyConfig parse_study_config(const std::string& json_text) {
  const ordered_json j = parse_json(json_text, "study config");
  StudyConfig c;
  const auto& pop = j.at("population");
  const std::string kind = pop.value("type", std::string("hmt"));
  if (kind == "hmt") {
    c.hmt.alpha = pop.value("alpha", c.hmt.alpha);
    c.hmt.beta = pop.value("beta", c.hmt.beta);
    c.hmt.sigma2 = pop.value("sigma2", c.hmt.sigma2);
    c.hmt.x_shape = pop.value("x_shape", c.hmt.x_shape);
    c.hmt.x_scale = pop.value("x_scale", c.hmt.x_scale);
    c.hmt.n_units = pop.value("n_units", c.hmt.n_units);
  } else if (kind == "csv") {
    c.use_csv = true;
    c.population_csv = pop.at("path").get<std::string>();
  } else {
    throw IoError("study config: unknown population type " + kind);
  }
  c.n_strata = j.value("strata", c.n_strata);
  c.sp_sizes = j.at("sp_design").at("sizes").get<std::vector<int>>();
  const auto& panel = j.at("panel_design");
  const std::string pkind = panel.value("type", std::string("stsrs"));
  if (pkind == "stsrs") {
    c.panel_kind = StudyConfig::PanelKind::stsrs;
    c.panel_sizes = panel.at("sizes").get<std::vector<int>>();
  } else if (pkind == "poisson_exp") {
    c.panel_kind = StudyConfig::PanelKind::poisson_exp;
    c.poisson_rate = panel.value("rate", c.poisson_rate);
    c.poisson_expected_size = panel.at("expected_size").get<double>();
  } else {
    throw IoError("study config: unknown panel type " + pkind);
  }
  if (j.contains("matching")) {
    const auto& m = j.at("matching");
    c.match_with_replacement = m.value("with_replacement", false);
    c.match_on_propensity = m.value("on_propensity", false);
  }
  if (j.contains("estimators")) c.estimators = j.at("estimators").get<std::vector<std::string>>();
  c.with_variances = j.value("variances", true);
  c.dr_subsample_size = j.value("dr_subsample", 0);
  c.replicates = j.value("replicates", c.replicates);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

StudyConfig load_study_config(const std::string& path) {
  return parse_study_config(read_file(path));
}

PipelineSpec parse_pipeline_spec(const std::string& json_text) {
  const ordered_json j = parse_json(json_text, "pipeline spec");
  PipelineSpec p;
  p.population_csv = j.at("population_csv").get<std::string>();
  p.schema = parse_schema(j.at("schema"));
  p.web_column = j.at("web_rule").at("column").get<std::string>();
  p.web_value = j.at("web_rule").at("value").get<std::string>();
  p.n = j.at("n").get<int>();
  p.panel_draw = j.at("panel_draw").get<int>();
  p.population_n = j.value("population_n", 0.0);
  p.match_model = parse_model_spec(j.at("match_model"));
  p.calib_model = parse_model_spec(j.at("calib_model"));
  if (j.contains("dr2_model")) p.dr2_model = parse_model_spec(j.at("dr2_model"));
  if (j.contains("estimators")) p.estimators = j.at("estimators").get<std::vector<std::string>>();
  p.replicates = j.value("replicates", p.replicates);
  p.seed = j.value("seed", p.seed);
  p.validate();
  return p;
}

PipelineSpec load_pipeline_spec(const std::string& path) {
  return parse_pipeline_spec(read_file(path));
}

namespace {

ordered_json summary_to_json(const MonteCarloSummary& s) {
  ordered_json j;
  j["truth"] = s.truth;
  j["replicates"] = s.replicates;
  j["replicates_used"] = s.used;
  j["failed_replicates"] = s.failed_replicates;
  ordered_json ests = ordered_json::array();
  for (const auto& row : s.estimators) {
    ordered_json r;
    r["estimator"] = row.estimator;
    r["mc_mean"] = row.mc_mean;
    r["relbias_pct"] = row.relbias_pct;
    r["emp_variance"] = row.emp_variance;
    r["mse"] = row.mse;
    r["ratio_to_min_mse"] = row.ratio_to_min_mse;
    ests.push_back(std::move(r));
  }
  j["estimators"] = std::move(ests);
  ordered_json vars = ordered_json::array();
  for (const auto& row : s.variances) {
    ordered_json r;
    r["estimator"] = row.estimator;
    r["distribution"] = row.distribution;
    r["mean_v"] = row.mean_v;
    r["rb_empvar_pct"] = row.rb_empvar_pct;
    r["rb_mse_pct"] = row.rb_mse_pct;
    r["ci95_coverage_pct"] = row.ci95_coverage_pct;
    vars.push_back(std::move(r));
  }
  j["variance_estimators"] = std::move(vars);
  return j;
}

}  // namespace

std::string study_report_json(const StudyConfig& config, const MonteCarloSummary& summary) {
  ordered_json j;
  j["schema_version"] = kReportSchemaVersion;
  j["kind"] = "study";
  ordered_json cfg;
  if (config.use_csv) {
    cfg["population"] = {{"type", "csv"}, {"path", config.population_csv}};
  } else {
    cfg["population"] = {{"type", "hmt"},
                         {"alpha", config.hmt.alpha},
                         {"beta", config.hmt.beta},
                         {"sigma2", config.hmt.sigma2},
                         {"x_shape", config.hmt.x_shape},
                         {"x_scale", config.hmt.x_scale},
                         {"n_units", config.hmt.n_units}};
    cfg["strata"] = config.n_strata;
  }
  cfg["sp_sizes"] = config.sp_sizes;
  if (config.panel_kind == StudyConfig::PanelKind::stsrs) {
    cfg["panel"] = {{"type", "stsrs"}, {"sizes", config.panel_sizes}};
  } else {
    cfg["panel"] = {{"type", "poisson_exp"},
                    {"rate", config.poisson_rate},
                    {"expected_size", config.poisson_expected_size}};
  }
  cfg["estimators"] = config.estimators;
  cfg["replicates"] = config.replicates;
  cfg["seed"] = config.seed;
  j["config"] = std::move(cfg);
  j["summary"] = summary_to_json(summary);
  return j.dump(2) + "\n";
}

std::string pipeline_report_json(const PipelineSpec& spec, const MonteCarloSummary& summary) {
  ordered_json j;
  j["schema_version"] = kReportSchemaVersion;
  j["kind"] = "pipeline";
  ordered_json cfg;
  cfg["population_csv"] = spec.population_csv;
  cfg["n"] = spec.n;
  cfg["panel_draw"] = spec.panel_draw;
  cfg["estimators"] = spec.estimators;
  cfg["replicates"] = spec.replicates;
  cfg["seed"] = spec.seed;
  j["config"] = std::move(cfg);
  j["summary"] = summary_to_json(summary);
  return j.dump(2) + "\n";
}

std::string summary_tables_text(const MonteCarloSummary& s) {
  std::ostringstream out;
  out << std::fixed;
  out << "Point estimators (truth = " << std::setprecision(4) << s.truth << ", replicates used "
      << s.used << "/" << s.replicates << ")\n";
  out << std::left << std::setw(14) << "Estimator" << std::right << std::setw(16)
      << "Rel. bias (%)" << std::setw(16) << "Variance" << std::setw(16) << "MSE"
      << std::setw(18) << "Ratio to min MSE" << "\n";
  for (const auto& row : s.estimators) {
    out << std::left << std::setw(14) << row.estimator << std::right << std::setw(16)
        << std::setprecision(4) << row.relbias_pct << std::setw(16) << std::scientific
        << std::setprecision(4) << row.emp_variance << std::setw(16) << row.mse << std::fixed
        << std::setw(18) << std::setprecision(3) << row.ratio_to_min_mse << "\n";
  }
  if (!s.variances.empty()) {
    out << "\nVariance estimators\n";
    out << std::left << std::setw(22) << "Estimator" << std::right << std::setw(16)
        << "RB.Empvar (%)" << std::setw(14) << "RB.MSE (%)" << std::setw(18)
        << "CI coverage (%)" << "\n";
    for (const auto& row : s.variances) {
      out << std::left << std::setw(22) << ("v_" + row.distribution + "(" + row.estimator + ")")
          << std::right << std::setw(16) << std::setprecision(2) << row.rb_empvar_pct
          << std::setw(14) << row.rb_mse_pct << std::setw(18) << std::setprecision(1)
          << row.ci95_coverage_pct << "\n";
    }
  }
  return out.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << content;
}

}  // namespace matchcal
