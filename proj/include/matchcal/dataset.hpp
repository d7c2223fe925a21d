#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "matchcal/common.hpp"

namespace matchcal {

// One covariate column: continuous values pass through, categorical columns
// expand to reference-dropped dummies after any level merges.
struct ColumnSpec {
  enum class Kind { continuous, categorical };
  std::string name;
  Kind kind = Kind::continuous;
  std::vector<std::string> levels;                 // categorical only
  std::string reference;                           // dropped level; default first
  std::vector<std::vector<std::string>> merges;    // each list collapses into its first entry
};

// 0/1 recode of a numeric-coded column: 1 when value >= threshold.
struct BinaryCut {
  std::string column;
  double threshold = 0.0;
  std::string name;  // derived column name
};

struct DatasetSchema {
  std::vector<ColumnSpec> covariates;
  std::vector<std::string> responses;
  std::string design_weight;  // optional column names
  std::string final_weight;
  std::map<std::string, std::vector<std::string>> drop_codes;  // column -> codes to drop
  std::map<std::string, std::string> response_yes_code;        // response -> code meaning 1
  std::vector<BinaryCut> binary_cuts;
  std::vector<std::string> retain_raw;  // raw string columns kept alongside
};

struct Dataset {
  std::vector<std::string> design_columns;  // expanded covariate names
  Mat x;                                    // n x E expanded covariates
  std::vector<std::string> response_names;
  Mat responses;                            // n x R
  Vec design_weight;                        // ones when the schema names none
  Vec final_weight;
  std::map<std::string, std::vector<std::string>> raw;
  int rows_read = 0;
  int rows_dropped = 0;

  int n_rows() const { return static_cast<int>(x.rows()); }
  int column(const std::string& name) const;  // expanded column index, -1 when absent
};

// Reads, filters, recodes and dummy-expands a CSV file per the schema.
Dataset load_dataset(const std::string& path, const DatasetSchema& schema);

// A linear-model specification over expanded columns: named main effects
// (a base categorical name pulls in its whole dummy block) plus pairwise
// products of single columns.
struct ModelSpec {
  std::vector<std::string> main;
  std::vector<std::pair<std::string, std::string>> interactions;
  bool intercept = true;
};

Mat build_design(const Dataset& data, const ModelSpec& spec,
                 const std::vector<int>& rows,  // dataset row indices; empty = all
                 std::vector<std::string>* names = nullptr);

}  // namespace matchcal
