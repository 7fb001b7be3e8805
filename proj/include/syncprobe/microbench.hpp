#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "syncprobe/backend.hpp"

namespace syncprobe {

struct LinearFit {
  double slope = 0;
  double intercept = 0;
  double r_squared = 1;
};

/// Ordinary least squares. Constant y yields r_squared = 1.
/// Throws Errc::DegenerateX when fewer than two distinct x values exist.
LinearFit fit_linear(std::span<const std::pair<double, double>> points);

/// Flush latency after one operation. An op of kind FlushAll is the
/// baseline variant: nothing runs between the two flushes.
struct BenchStats {
  IoOp op;
  std::uint64_t repetitions = 0;
  double mean = 0;
  double stddev = 0;  // sample (n - 1) standard deviation
};

struct SlopeFit {
  IoOp op;
  std::vector<std::pair<std::uint64_t, double>> points;  // (file count, mean delay)
  LinearFit fit;
};

struct SizeRange {
  std::uint64_t start = 0;
  std::uint64_t stride = 0;
  std::uint64_t end = 0;

  std::vector<std::uint64_t> sizes() const;
};

struct SweepCurve {
  std::vector<std::uint64_t> sizes;
  std::vector<double> means;
  LinearFit below_fit;  // slope in cycles per byte
  LinearFit above_fit;
};

BenchStats run_footprint_bench(Backend& backend, Clock& clock, const IoOp& op,
                               std::uint64_t repetitions);

/// For each k: clean flush, apply `op` to files 0..k-1, flush and record.
/// `repetitions` measurements are averaged per point.
SlopeFit run_concurrency_bench(Backend& backend, Clock& clock, const IoOp& op,
                               std::span<const std::uint64_t> file_counts,
                               std::uint64_t repetitions = 1);

/// Mean flush delay after a single write of each size; separate fits for the
/// sizes inside `below` and inside `above`.
SweepCurve run_write_size_sweep(Backend& backend, Clock& clock, const SizeRange& below,
                                const SizeRange& above, std::uint64_t repetitions = 1);

std::string bench_op_name(const IoOp& op);

void write_csv(std::ostream& out, std::span<const BenchStats> stats);
void write_csv(std::ostream& out, const SlopeFit& fit);
void write_csv(std::ostream& out, const SweepCurve& curve);

}  // namespace syncprobe
