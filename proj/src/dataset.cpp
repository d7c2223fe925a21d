#include "matchcal/dataset.hpp"

#include <algorithm>
#include <numeric>

#include "matchcal/csv.hpp"

namespace matchcal {

int Dataset::column(const std::string& name) const {
  for (std::size_t i = 0; i < design_columns.size(); ++i) {
    if (design_columns[i] == name) return static_cast<int>(i);
  }
  return -1;
}

namespace {

// Applies the merge lists: any level in a list maps to the list's first
// entry. Unlisted levels map to themselves.
std::string merged_level(const ColumnSpec& spec, const std::string& level) {
  for (const auto& group : spec.merges) {
    if (std::find(group.begin(), group.end(), level) != group.end()) return group.front();
  }
  return level;
}

std::vector<std::string> effective_levels(const ColumnSpec& spec) {
  std::vector<std::string> out;
  for (const auto& lv : spec.levels) {
    const std::string m = merged_level(spec, lv);
    if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
  }
  return out;
}

}  // namespace

Dataset load_dataset(const std::string& path, const DatasetSchema& schema) {
  const CsvTable t = read_csv(path);

  auto need_column = [&](const std::string& name) {
    const int idx = t.column(name);
    if (idx < 0) throw SchemaError(path + ": missing column " + name);
    return idx;
  };

  std::vector<std::pair<const ColumnSpec*, int>> cov_cols;
  for (const auto& spec : schema.covariates) cov_cols.emplace_back(&spec, need_column(spec.name));
  std::vector<int> resp_cols;
  for (const auto& r : schema.responses) resp_cols.push_back(need_column(r));
  const int dw_col = schema.design_weight.empty() ? -1 : need_column(schema.design_weight);
  const int fw_col = schema.final_weight.empty() ? -1 : need_column(schema.final_weight);
  std::vector<std::pair<std::string, int>> drop_cols;
  for (const auto& [name, codes] : schema.drop_codes) drop_cols.emplace_back(name, need_column(name));
  std::vector<std::pair<const BinaryCut*, int>> cut_cols;
  for (const auto& cut : schema.binary_cuts) cut_cols.emplace_back(&cut, need_column(cut.column));
  std::vector<std::pair<std::string, int>> raw_cols;
  for (const auto& name : schema.retain_raw) raw_cols.emplace_back(name, need_column(name));

  // Filter pass.
  std::vector<int> kept;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    bool drop = false;
    for (const auto& [name, idx] : drop_cols) {
      const auto& codes = schema.drop_codes.at(name);
      const std::string& cell = t.rows[i][static_cast<std::size_t>(idx)];
      if (std::find(codes.begin(), codes.end(), cell) != codes.end()) {
        drop = true;
        break;
      }
    }
    if (!drop) kept.push_back(static_cast<int>(i));
  }

  Dataset d;
  d.rows_read = static_cast<int>(t.rows.size());
  d.rows_dropped = d.rows_read - static_cast<int>(kept.size());

  // Expanded column layout.
  struct Expansion {
    const ColumnSpec* spec;
    int csv_col;
    std::vector<std::string> dummy_levels;  // empty for continuous
  };
  std::vector<Expansion> expansions;
  for (const auto& [spec, idx] : cov_cols) {
    Expansion e{spec, idx, {}};
    if (spec->kind == ColumnSpec::Kind::categorical) {
      if (spec->levels.empty()) throw SchemaError(spec->name + ": categorical needs levels");
      auto levels = effective_levels(*spec);
      const std::string ref =
          spec->reference.empty() ? levels.front() : merged_level(*spec, spec->reference);
      for (const auto& lv : levels) {
        if (lv != ref) e.dummy_levels.push_back(lv);
      }
      for (const auto& lv : e.dummy_levels) d.design_columns.push_back(spec->name + "=" + lv);
    } else {
      d.design_columns.push_back(spec->name);
    }
    expansions.push_back(std::move(e));
  }
  for (const auto& [cut, idx] : cut_cols) {
    d.design_columns.push_back(cut->name.empty() ? cut->column + "_cut" : cut->name);
  }

  const auto n = static_cast<Eigen::Index>(kept.size());
  d.x.setZero(n, static_cast<Eigen::Index>(d.design_columns.size()));
  d.response_names = schema.responses;
  d.responses.resize(n, static_cast<Eigen::Index>(resp_cols.size()));
  d.design_weight = Vec::Ones(n);
  d.final_weight = Vec::Ones(n);
  for (const auto& [name, idx] : raw_cols) d.raw[name].reserve(kept.size());

  for (Eigen::Index out_i = 0; out_i < n; ++out_i) {
    const auto& row = t.rows[static_cast<std::size_t>(kept[static_cast<std::size_t>(out_i)])];
    const std::string ctx =
        path + ":" + std::to_string(kept[static_cast<std::size_t>(out_i)] + 2);
    Eigen::Index col = 0;
    for (const auto& e : expansions) {
      const std::string& cell = row[static_cast<std::size_t>(e.csv_col)];
      if (e.spec->kind == ColumnSpec::Kind::categorical) {
        const std::string lv = merged_level(*e.spec, cell);
        bool known = false;
        for (const auto& full : effective_levels(*e.spec)) {
          if (full == lv) {
            known = true;
            break;
          }
        }
        if (!known) {
          throw SchemaError(ctx + ": unknown level '" + cell + "' in column " + e.spec->name);
        }
        for (const auto& dummy : e.dummy_levels) {
          d.x(out_i, col++) = dummy == lv ? 1.0 : 0.0;
        }
      } else {
        d.x(out_i, col++) = parse_double(cell, ctx);
      }
    }
    for (const auto& [cut, idx] : cut_cols) {
      d.x(out_i, col++) = parse_double(row[static_cast<std::size_t>(idx)], ctx) >= cut->threshold
                              ? 1.0
                              : 0.0;
    }
    for (std::size_t r = 0; r < resp_cols.size(); ++r) {
      const std::string& cell = row[static_cast<std::size_t>(resp_cols[r])];
      const auto yes = schema.response_yes_code.find(schema.responses[r]);
      d.responses(out_i, static_cast<Eigen::Index>(r)) =
          yes != schema.response_yes_code.end() ? (cell == yes->second ? 1.0 : 0.0)
                                                : parse_double(cell, ctx);
    }
    if (dw_col >= 0) d.design_weight(out_i) = parse_double(row[static_cast<std::size_t>(dw_col)], ctx);
    if (fw_col >= 0) d.final_weight(out_i) = parse_double(row[static_cast<std::size_t>(fw_col)], ctx);
    for (const auto& [name, idx] : raw_cols) {
      d.raw[name].push_back(row[static_cast<std::size_t>(idx)]);
    }
  }
  return d;
}

Mat build_design(const Dataset& data, const ModelSpec& spec, const std::vector<int>& rows,
                 std::vector<std::string>* names) {
  std::vector<int> row_idx = rows;
  if (row_idx.empty()) {
    row_idx.resize(static_cast<std::size_t>(data.n_rows()));
    std::iota(row_idx.begin(), row_idx.end(), 0);
  }

  // Resolve main effects: exact expanded column, else a dummy block prefix.
  std::vector<int> cols;
  std::vector<std::string> out_names;
  for (const auto& name : spec.main) {
    const int exact = data.column(name);
    if (exact >= 0) {
      cols.push_back(exact);
      out_names.push_back(name);
      continue;
    }
    bool found = false;
    const std::string prefix = name + "=";
    for (std::size_t c = 0; c < data.design_columns.size(); ++c) {
      if (data.design_columns[c].rfind(prefix, 0) == 0) {
        cols.push_back(static_cast<int>(c));
        out_names.push_back(data.design_columns[c]);
        found = true;
      }
    }
    if (!found) throw SchemaError("design: unknown column " + name);
  }

  std::vector<std::pair<int, int>> inter;
  for (const auto& [a, b] : spec.interactions) {
    const int ca = data.column(a);
    const int cb = data.column(b);
    if (ca < 0 || cb < 0) throw SchemaError("design: interaction references unknown column");
    inter.emplace_back(ca, cb);
    out_names.push_back(a + ":" + b);
  }

  const auto n = static_cast<Eigen::Index>(row_idx.size());
  const Eigen::Index e = static_cast<Eigen::Index>(cols.size() + inter.size()) +
                         (spec.intercept ? 1 : 0);
  Mat design(n, e);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int r = row_idx[static_cast<std::size_t>(i)];
    Eigen::Index c = 0;
    if (spec.intercept) design(i, c++) = 1.0;
    for (int src : cols) design(i, c++) = data.x(r, src);
    for (const auto& [ca, cb] : inter) design(i, c++) = data.x(r, ca) * data.x(r, cb);
  }
  if (names) {
    names->clear();
    if (spec.intercept) names->push_back("(intercept)");
    names->insert(names->end(), out_names.begin(), out_names.end());
  }
  return design;
}

}  // namespace matchcal
