#include "cfa/bench.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cfa/instrument.hpp"
#include "cfa/workload.hpp"

namespace cfa {

const BenchRow* BenchReport::find(std::size_t size, std::size_t freq) const {
  for (const auto& row : rows)
    if (row.batch_size == size && row.feedback_freq == freq) return &row;
  return nullptr;
}

double BenchReport::overhead(std::size_t size, std::size_t freq) const {
  const BenchRow* row = find(size, freq);
  if (!row || baseline_us_per_req <= 0.0) return 0.0;
  return row->metrics.prover_us_per_req / baseline_us_per_req;
}

BenchReport run_benchmark(const BenchmarkGrid& grid, bool with_baseline) {
  Program program = make_signing_program();
  layout(program);
  InstrumentedProgram iprog = instrument(program);
  KeyMaterial keys = dev_key_material();

  Workload training = driver_inputs();
  for (auto& in : make_workload(grid.seed + 100, 32)) training.push_back(std::move(in));
  RunConfig learn_cfg;
  learn_cfg.batch_size = 64;
  learn_cfg.feedback_frequency = 4;
  learn_cfg.learn_mode = true;
  Cfg cfg = run_reference(iprog, nullptr, training, learn_cfg, keys).learned;

  Workload workload = make_workload(grid.seed, grid.requests);

  BenchReport report;
  for (std::size_t size : grid.batch_sizes) {
    for (std::size_t freq : grid.feedback_frequencies) {
      std::vector<RunMetrics> runs;
      for (std::size_t rep = 0; rep < std::max<std::size_t>(grid.repetitions, 1); ++rep) {
        RunConfig config;
        config.batch_size = size;
        config.feedback_frequency = freq;
        config.timing = true;
        RunResult res = run_pipeline(iprog, &cfg, workload, config, keys);
        runs.push_back(res.metrics);
      }
      std::sort(runs.begin(), runs.end(), [](const RunMetrics& a, const RunMetrics& b) {
        return a.ns_per_id_transfer < b.ns_per_id_transfer;
      });
      report.rows.push_back(BenchRow{size, freq, runs[runs.size() / 2]});
    }
  }
  if (with_baseline) {
    std::vector<double> runs;
    for (std::size_t rep = 0; rep < std::max<std::size_t>(grid.repetitions, 1); ++rep)
      runs.push_back(run_baseline(iprog, workload).prover_us_per_req);
    std::sort(runs.begin(), runs.end());
    report.baseline_us_per_req = runs[runs.size() / 2];
    BenchRow base;
    base.metrics.prover_us_per_req = report.baseline_us_per_req;
    base.metrics.requests = grid.requests;
    report.rows.push_back(base);
  }
  return report;
}

std::string to_csv(const BenchReport& report) {
  std::ostringstream out;
  out << "batch_size,feedback_freq,prover_us_per_req,verifier_us_per_req,"
         "ns_per_id_transfer,ids_total,batches_total\n";
  for (const auto& row : report.rows) {
    const RunMetrics& m = row.metrics;
    out << row.batch_size << "," << row.feedback_freq << "," << m.prover_us_per_req << ","
        << m.verifier_us_per_req << "," << m.ns_per_id_transfer << "," << m.ids_total
        << "," << m.batches_total << "\n";
  }
  return out.str();
}

namespace {

struct Series {
  std::size_t freq;
  std::vector<std::pair<double, double>> points;  // batch size, ns/id
};

}  // namespace

std::string to_svg(const BenchReport& report) {
  const double width = 720, height = 480, ml = 70, mr = 20, mt = 30, mb = 50;
  std::vector<Series> series;
  double xmin = 1e300, xmax = 0, ymin = 1e300, ymax = 0;
  for (const auto& row : report.rows) {
    if (row.batch_size == 0 || row.metrics.ns_per_id_transfer <= 0.0) continue;
    auto it = std::find_if(series.begin(), series.end(),
                           [&](const Series& s) { return s.freq == row.feedback_freq; });
    if (it == series.end()) {
      series.push_back(Series{row.feedback_freq, {}});
      it = series.end() - 1;
    }
    double x = static_cast<double>(row.batch_size), y = row.metrics.ns_per_id_transfer;
    it->points.emplace_back(x, y);
    xmin = std::min(xmin, x);
    xmax = std::max(xmax, x);
    ymin = std::min(ymin, y);
    ymax = std::max(ymax, y);
  }
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << width / 2
      << "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">per-id transfer time vs "
         "batch size (log-log)</text>\n";
  if (!series.empty() && xmax > xmin && ymax > 0) {
    if (ymin == ymax) ymin = ymax / 2;
    auto px = [&](double x) {
      return ml + (std::log10(x) - std::log10(xmin)) /
                      (std::log10(xmax) - std::log10(xmin)) * (width - ml - mr);
    };
    auto py = [&](double y) {
      return height - mb - (std::log10(y) - std::log10(ymin)) /
                               (std::log10(ymax) - std::log10(ymin)) * (height - mt - mb);
    };
    out << "<line x1=\"" << ml << "\" y1=\"" << height - mb << "\" x2=\"" << width - mr
        << "\" y2=\"" << height - mb << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
        << height - mb << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << width / 2 << "\" y=\"" << height - 12
        << "\" text-anchor=\"middle\" font-size=\"12\">batch size (ids)</text>\n";
    out << "<text x=\"16\" y=\"" << height / 2 << "\" font-size=\"12\" transform=\"rotate(-90 16 "
        << height / 2 << ")\" text-anchor=\"middle\">ns per id</text>\n";
    const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"};
    std::size_t ci = 0;
    for (auto& s : series) {
      std::sort(s.points.begin(), s.points.end());
      const char* color = colors[ci % 5];
      out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
      for (const auto& [x, y] : s.points) out << px(x) << "," << py(y) << " ";
      out << "\"/>\n";
      for (const auto& [x, y] : s.points)
        out << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"2.5\" fill=\""
            << color << "\"/>\n";
      out << "<text x=\"" << width - mr - 4 << "\" y=\"" << mt + 14 * (ci + 1)
          << "\" text-anchor=\"end\" font-size=\"11\" fill=\"" << color << "\">feedback every "
          << s.freq << "</text>\n";
      ++ci;
    }
  }
  out << "</svg>\n";
  return out.str();
}

std::vector<std::string> trend_report(const BenchReport& report, bool& ok) {
  ok = true;
  std::vector<std::string> lines;
  constexpr double kStepSlack = 1.10;  // tolerate scheduler noise per step

  std::vector<std::size_t> freqs, sizes;
  for (const auto& row : report.rows) {
    if (row.batch_size == 0) continue;
    if (std::find(freqs.begin(), freqs.end(), row.feedback_freq) == freqs.end())
      freqs.push_back(row.feedback_freq);
    if (std::find(sizes.begin(), sizes.end(), row.batch_size) == sizes.end())
      sizes.push_back(row.batch_size);
  }
  std::sort(freqs.begin(), freqs.end());
  std::sort(sizes.begin(), sizes.end());
  if (sizes.size() < 2) {
    ok = false;
    lines.push_back("FAIL: need at least two batch sizes for a trend");
    return lines;
  }

  for (std::size_t freq : freqs) {
    bool monotone = true;
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
      const BenchRow* a = report.find(sizes[i], freq);
      const BenchRow* b = report.find(sizes[i + 1], freq);
      if (!a || !b) continue;
      if (b->metrics.ns_per_id_transfer > a->metrics.ns_per_id_transfer * kStepSlack)
        monotone = false;
    }
    std::ostringstream line;
    line << (monotone ? "PASS" : "FAIL") << ": per-id time non-increasing in batch size"
         << " at feedback frequency " << freq;
    if (!monotone) ok = false;
    lines.push_back(line.str());
  }

  if (freqs.size() >= 2) {
    auto spread = [&](std::size_t size) {
      double lo = 1e300, hi = 0;
      for (std::size_t freq : freqs) {
        const BenchRow* row = report.find(size, freq);
        if (!row) continue;
        lo = std::min(lo, row->metrics.ns_per_id_transfer);
        hi = std::max(hi, row->metrics.ns_per_id_transfer);
      }
      return hi - lo;
    };
    bool shrinks = spread(sizes.back()) <= spread(sizes.front());
    std::ostringstream line;
    line << (shrinks ? "PASS" : "FAIL")
         << ": feedback-frequency spread no wider at batch size " << sizes.back()
         << " than at " << sizes.front();
    if (!shrinks) ok = false;
    lines.push_back(line.str());
  }

  if (report.baseline_us_per_req > 0.0) {
    double worst = report.overhead(sizes.front(), freqs.front());
    double best = report.overhead(sizes.back(), freqs.back());
    bool improves = best < worst;
    std::ostringstream line;
    line << (improves ? "PASS" : "FAIL") << ": overhead at " << sizes.back() << "/"
         << freqs.back() << " (" << best << "x) below " << sizes.front() << "/"
         << freqs.front() << " (" << worst << "x)";
    if (!improves) ok = false;
    lines.push_back(line.str());
  }
  return lines;
}

}  // namespace cfa
