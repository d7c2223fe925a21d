// Benchmark comparing the serial reference paths against the OpenMP
// kernels: the replicated-study loop and with-replacement matching.

#include <chrono>
#include <cstdio>

#include "matchcal/matching.hpp"
#include "matchcal/montecarlo.hpp"
#include "matchcal/report.hpp"
#include "matchcal/rng.hpp"

using namespace matchcal;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void bench_study() {
  StudyConfig cfg = study1_preset();
  cfg.hmt.n_units = 20000;
  cfg.sp_sizes = {30, 30, 30, 30, 30};
  cfg.panel_sizes = {150, 150, 150, 150, 150};
  cfg.replicates = 400;
  cfg.seed = 99;

  auto t0 = std::chrono::steady_clock::now();
  const MonteCarloSummary serial = run_study(cfg, 1);
  const double t_serial = seconds_since(t0);

  const int threads = resolve_threads(0);
  t0 = std::chrono::steady_clock::now();
  const MonteCarloSummary parallel = run_study(cfg, threads);
  const double t_parallel = seconds_since(t0);

  const bool identical = study_report_json(cfg, serial) == study_report_json(cfg, parallel);
  std::printf("study replicates  B=%d      serial %7.3fs   %2d threads %7.3fs   speedup %5.2fx   identical: %s\n",
              cfg.replicates, t_serial, threads, t_parallel, t_serial / t_parallel,
              identical ? "yes" : "NO");
}

void bench_matching() {
  const int n = 2000, m = 20000, c = 3;
  Rng rng(4242);
  Mat target(n, c), pool(m, c);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < c; ++j) target(i, j) = rng.normal(0, 1);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < c; ++j) pool(i, j) = rng.normal(0, 1);

  auto t0 = std::chrono::steady_clock::now();
  const MatchSkeleton serial = nn_match_with_replacement_serial(target, pool);
  const double t_serial = seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  const MatchSkeleton parallel = nn_match(target, pool, /*with_replacement=*/true);
  const double t_parallel = seconds_since(t0);

  bool identical = serial.pool_index == parallel.pool_index;
  std::printf("nn match (wr)     %dx%d  serial %7.3fs   parallel   %7.3fs   speedup %5.2fx   identical: %s\n",
              n, m, t_serial, t_parallel, t_serial / t_parallel, identical ? "yes" : "NO");
}

}  // namespace

int main() {
  bench_matching();
  bench_study();
  return 0;
}
