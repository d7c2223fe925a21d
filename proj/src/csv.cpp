#include "matchcal/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace matchcal {

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw IoError(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  t.header = split_line(line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_line(line);
    if (cells.size() != t.header.size()) {
      throw IoError(path + ":" + std::to_string(lineno) + ": expected " +
                    std::to_string(t.header.size()) + " fields, got " +
                    std::to_string(cells.size()));
    }
    t.rows.push_back(std::move(cells));
  }
  return t;
}

double parse_double(const std::string& cell, const std::string& context) {
  try {
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    if (used != cell.size()) throw std::invalid_argument(cell);
    return v;
  } catch (const std::exception&) {
    throw IoError(context + ": unparseable numeric value '" + cell + "'");
  }
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_population_csv(const FinitePopulation& pop, const std::string& path) {
  pop.validate();
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  for (int c = 0; c < pop.n_covariates(); ++c) out << "x_" << (c + 1) << ",";
  out << "y,stratum\n";
  for (int i = 0; i < pop.n_units(); ++i) {
    for (int c = 0; c < pop.n_covariates(); ++c) out << format_double(pop.x(i, c)) << ",";
    out << format_double(pop.y(i)) << "," << pop.stratum[static_cast<std::size_t>(i)] << "\n";
  }
}

FinitePopulation read_population_csv(const std::string& path) {
  const CsvTable t = read_csv(path);
  const int y_col = t.column("y");
  const int s_col = t.column("stratum");
  if (y_col < 0 || s_col < 0) throw IoError(path + ": need y and stratum columns");
  std::vector<int> x_cols;
  for (int c = 1;; ++c) {
    const int idx = t.column("x_" + std::to_string(c));
    if (idx < 0) break;
    x_cols.push_back(idx);
  }
  if (x_cols.empty()) throw IoError(path + ": need at least one x_<k> column");

  FinitePopulation pop;
  const auto n = static_cast<Eigen::Index>(t.rows.size());
  pop.x.resize(n, static_cast<Eigen::Index>(x_cols.size()));
  pop.y.resize(n);
  pop.stratum.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = t.rows[static_cast<std::size_t>(i)];
    const std::string ctx = path + ":" + std::to_string(i + 2);
    for (std::size_t c = 0; c < x_cols.size(); ++c) {
      pop.x(i, static_cast<Eigen::Index>(c)) =
          parse_double(row[static_cast<std::size_t>(x_cols[c])], ctx);
    }
    pop.y(i) = parse_double(row[static_cast<std::size_t>(y_col)], ctx);
    pop.stratum[static_cast<std::size_t>(i)] =
        static_cast<int>(parse_double(row[static_cast<std::size_t>(s_col)], ctx));
  }
  pop.validate();
  return pop;
}

void write_sample_csv(const DesignSample& sample, const std::string& path) {
  sample.validate();
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "unit_id,pi,weight,stratum\n";
  for (int j = 0; j < sample.size(); ++j) {
    const double w = sample.greg_weight ? (*sample.greg_weight)(j) : sample.base_weight(j);
    out << sample.unit_ids[static_cast<std::size_t>(j)] << "," << format_double(sample.pi(j))
        << "," << format_double(w) << "," << sample.stratum[static_cast<std::size_t>(j)] << "\n";
  }
}

void write_matched_csv(const MatchedSample& matched, const std::string& path) {
  matched.validate();
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "p_id,np_id,distance,weight,pi\n";
  for (int j = 0; j < matched.size(); ++j) {
    const auto& pr = matched.pairs[static_cast<std::size_t>(j)];
    out << pr.first << "," << pr.second << "," << format_double(matched.distance(j)) << ","
        << format_double(matched.transferred_weight(j)) << ","
        << format_double(matched.transferred_pi(j)) << "\n";
  }
}

std::vector<std::pair<std::string, double>> read_targets_csv(const std::string& path) {
  const CsvTable t = read_csv(path);
  const int name_col = t.column("name");
  const int total_col = t.column("total");
  if (name_col < 0 || total_col < 0) throw IoError(path + ": need name and total columns");
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    out.emplace_back(row[static_cast<std::size_t>(name_col)],
                     parse_double(row[static_cast<std::size_t>(total_col)],
                                  path + ":" + std::to_string(i + 2)));
  }
  return out;
}

}  // namespace matchcal
