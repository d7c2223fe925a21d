#pragma once

#include <string>

#include "matchcal/montecarlo.hpp"
#include "matchcal/pipeline.hpp"

namespace matchcal {

constexpr int kReportSchemaVersion = 1;

// JSON round-trips for the experiment configurations.
StudyConfig parse_study_config(const std::string& json_text);
StudyConfig load_study_config(const std::string& path);
PipelineSpec parse_pipeline_spec(const std::string& json_text);
PipelineSpec load_pipeline_spec(const std::string& path);

// Deterministic JSON report: identical summaries serialize to identical
// bytes regardless of thread count.
std::string study_report_json(const StudyConfig& config, const MonteCarloSummary& summary);
std::string pipeline_report_json(const PipelineSpec& spec, const MonteCarloSummary& summary);

// Aligned-text tables in the layout of the published simulation tables:
// one block for point estimators, one for variance estimators.
std::string summary_tables_text(const MonteCarloSummary& summary);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace matchcal
