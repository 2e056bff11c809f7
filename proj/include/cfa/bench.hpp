#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cfa/pipeline.hpp"

namespace cfa {

struct BenchmarkGrid {
  std::vector<std::size_t> batch_sizes{1, 5, 10, 50, 100, 500, 1000, 5000, 10000};
  std::vector<std::size_t> feedback_frequencies{1, 10, 100, 1000};
  std::size_t repetitions = 1;
  std::size_t requests = 200;
  std::uint64_t seed = 1;
};

struct BenchRow {
  std::size_t batch_size = 0;  // 0 marks the uninstrumented baseline row
  std::size_t feedback_freq = 0;
  RunMetrics metrics;
};

struct BenchReport {
  std::vector<BenchRow> rows;
  double baseline_us_per_req = 0.0;

  const BenchRow* find(std::size_t size, std::size_t freq) const;
  double overhead(std::size_t size, std::size_t freq) const;  // vs baseline
};

// One pipeline run per grid cell (median over repetitions), plus a baseline
// row when requested.
BenchReport run_benchmark(const BenchmarkGrid& grid, bool with_baseline);

// CSV schema: batch_size,feedback_freq,prover_us_per_req,verifier_us_per_req,
// ns_per_id_transfer,ids_total,batches_total
std::string to_csv(const BenchReport& report);

// Log-log SVG chart of per-id transfer time and per-request times against
// batch size, one polyline per feedback frequency.
std::string to_svg(const BenchReport& report);

// Trend checks mirroring the sweep conclusions; returns human-readable
// pass/fail lines and sets ok=false when a trend is broken.
std::vector<std::string> trend_report(const BenchReport& report, bool& ok);

}  // namespace cfa
