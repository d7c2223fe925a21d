#pragma once

#include <string>
#include <utility>
#include <vector>

#include "matchcal/common.hpp"
#include "matchcal/matching.hpp"
#include "matchcal/population.hpp"
#include "matchcal/sampling.hpp"

namespace matchcal {

// Comma-separated, header required, UTF-8, no quoted commas.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 when absent
};

CsvTable read_csv(const std::string& path);
double parse_double(const std::string& cell, const std::string& context);

// Shortest decimal form that round-trips a double (17 significant digits).
std::string format_double(double v);

// Populations serialize with header x_1..x_C,y,stratum.
void write_population_csv(const FinitePopulation& pop, const std::string& path);
FinitePopulation read_population_csv(const std::string& path);

// Samples serialize as unit_id,pi,weight,stratum.
void write_sample_csv(const DesignSample& sample, const std::string& path);

// Matched samples serialize as p_id,np_id,distance,weight,pi.
void write_matched_csv(const MatchedSample& matched, const std::string& path);

// Calibration targets: name,total.
std::vector<std::pair<std::string, double>> read_targets_csv(const std::string& path);

}  // namespace matchcal
