// Exercises the command-line surface end to end: paths, exit codes and the
// file formats. Takes the CLI binary path as argv[1].

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "matchcal/csv.hpp"
#include "matchcal/matching.hpp"
#include "matchcal/rng.hpp"

using namespace matchcal;

namespace {

int checks = 0, failed = 0;

void expect(bool ok, const std::string& what) {
  ++checks;
  if (!ok) {
    ++failed;
    std::printf("[FAIL] %s\n", what.c_str());
  }
}

std::string tmp(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::string slurp(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run(const std::string& cmd) {
  const int status = std::system((cmd + " > /dev/null 2>&1").c_str());
  return WEXITSTATUS(status);
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::printf("usage: cli_tests <matchcal binary>\n");
    return 1;
  }
  const std::string cli = argv[1];

  // Fixture: 6x2 target with pi/weight columns, 20x2 pool.
  Rng rng(31337);
  Mat target(6, 2), pool(20, 2);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 2; ++j) target(i, j) = rng.normal(0, 1);
  for (int i = 0; i < 20; ++i)
    for (int j = 0; j < 2; ++j) pool(i, j) = rng.normal(0, 1);

  const std::string a = tmp("cli_target.csv");
  const std::string b = tmp("cli_pool.csv");
  const std::string m = tmp("cli_matched.csv");
  {
    std::ofstream out(a);
    out << "u,v,pi,weight\n";
    for (int i = 0; i < 6; ++i) {
      out << format_double(target(i, 0)) << "," << format_double(target(i, 1)) << ",0.25,4\n";
    }
  }
  {
    std::ofstream out(b);
    out << "u,v\n";
    for (int i = 0; i < 20; ++i) {
      out << format_double(pool(i, 0)) << "," << format_double(pool(i, 1)) << "\n";
    }
  }

  // Without replacement (default): must equal the module's greedy pairing.
  expect(run(cli + " match " + a + " " + b + " --standardize off --out " + m) == 0,
         "match exits 0");
  {
    const auto sk = nn_match(target, pool, false, Standardize::off);
    const auto table = read_csv(m);
    expect(table.header == std::vector<std::string>({"p_id", "np_id", "distance", "weight", "pi"}),
           "matched csv header");
    expect(static_cast<int>(table.rows.size()) == 6, "matched csv row count");
    for (int i = 0; i < 6; ++i) {
      expect(std::stoi(table.rows[static_cast<std::size_t>(i)][1]) ==
                 sk.pool_index[static_cast<std::size_t>(i)],
             "pairing row " + std::to_string(i));
      expect(std::stod(table.rows[static_cast<std::size_t>(i)][3]) == 4.0, "transferred weight");
    }
  }

  // With replacement flag.
  expect(run(cli + " match " + a + " " + b + " --replace --standardize off --out " + m) == 0,
         "match --replace exits 0");
  {
    const auto sk = nn_match(target, pool, true, Standardize::off);
    const auto table = read_csv(m);
    for (int i = 0; i < 6; ++i) {
      expect(std::stoi(table.rows[static_cast<std::size_t>(i)][1]) ==
                 sk.pool_index[static_cast<std::size_t>(i)],
             "wr pairing row " + std::to_string(i));
    }
  }

  // calibrate with targets already met returns the input weights.
  const std::string w = tmp("cli_weights.csv");
  const std::string t = tmp("cli_targets.csv");
  const std::string o = tmp("cli_calibrated.csv");
  {
    std::ofstream out(w);
    out << "weight,one,x\n2,1,1\n2,1,2\n2,1,3\n";
    std::ofstream tout(t);
    tout << "name,total\none,6\nx,12\n";
  }
  expect(run(cli + " calibrate " + w + " " + t + " --out " + o) == 0, "calibrate exits 0");
  {
    const auto table = read_csv(o);
    expect(static_cast<int>(table.rows.size()) == 3, "calibrated row count");
    for (const auto& row : table.rows) {
      expect(std::stod(row[0]) == 2.0, "weights unchanged when targets already met");
      expect(std::stod(row[1]) == 1.0, "g factors one");
    }
  }

  // simulate twice with one seed: byte-identical outputs.
  const std::string r1 = tmp("cli_r1.json");
  const std::string r2 = tmp("cli_r2.json");
  expect(run(cli + " simulate --study 1 --reps 10 --seed 7 --quiet --out " + r1) == 0,
         "simulate run 1 exits 0");
  expect(run(cli + " simulate --study 1 --reps 10 --seed 7 --quiet --out " + r2) == 0,
         "simulate run 2 exits 0");
  expect(!slurp(r1).empty() && slurp(r1) == slurp(r2), "repeated simulate is byte-identical");

  // pipeline subcommand end to end on a tiny two-group file.
  const std::string popcsv = tmp("cli_pop.csv");
  const std::string specjson = tmp("cli_pipeline.json");
  const std::string preport = tmp("cli_pipeline_report.json");
  {
    std::ofstream out(popcsv);
    out << "z,web,y,wd,wf\n";
    for (int i = 0; i < 200; ++i) {
      const int z = i % 2;
      const int web = (z == 1 ? i % 4 != 3 : i % 4 == 0) ? 1 : 0;
      const int y = (z == 1 ? i % 5 != 4 : i % 5 == 0) ? 1 : 0;
      out << z << "," << web << "," << y << ",1,1\n";
    }
    std::ofstream spec(specjson);
    spec << R"({
      "population_csv": ")" << popcsv << R"(",
      "schema": {
        "covariates": [{"name": "z"}],
        "responses": ["y"],
        "design_weight": "wd",
        "final_weight": "wf"
      },
      "web_rule": {"column": "web", "value": "1"},
      "n": 40,
      "panel_draw": 60,
      "match_model": {"main": ["z"]},
      "calib_model": {"main": ["z"]},
      "estimators": ["M1", "MC1"],
      "replicates": 20,
      "seed": 3
    })";
  }
  expect(run(cli + " pipeline " + specjson + " --quiet --out " + preport) == 0,
         "pipeline exits 0");
  expect(slurp(preport).find("\"kind\": \"pipeline\"") != std::string::npos,
         "pipeline report is tagged");

  // usage errors exit 2; runtime errors exit 1.
  expect(run(cli + " simulate --study 9") == 2, "bad flag value exits 2");
  expect(run(cli + " frobnicate") == 2, "unknown subcommand exits 2");
  expect(run(cli + " match /nonexistent.csv " + b + " --out " + m) == 1,
         "missing input exits 1");

  for (const auto& p : {a, b, m, w, t, o, r1, r2, popcsv, specjson, preport}) {
    std::remove(p.c_str());
  }
  std::printf("%d checks, %d failed\n", checks, failed);
  return failed == 0 ? 0 : 1;
}
