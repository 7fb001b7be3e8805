#include "syncprobe/microbench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <set>

#include "syncprobe/error.hpp"

namespace syncprobe {

LinearFit fit_linear(std::span<const std::pair<double, double>> points) {
  if (points.size() < 2) throw Error(Errc::DegenerateX, "linear fit needs at least two points");
  const double n = static_cast<double>(points.size());
  double mx = 0, my = 0;
  for (auto [x, y] : points) {
    mx += x;
    my += y;
  }
  mx /= n;
  my /= n;

  double sxx = 0, sxy = 0, syy = 0;
  for (auto [x, y] : points) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
    syy += (y - my) * (y - my);
  }
  if (sxx == 0) throw Error(Errc::DegenerateX, "linear fit needs two distinct x values");

  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (syy == 0) {
    f.r_squared = 1;
  } else {
    double ss_res = 0;
    for (auto [x, y] : points) {
      double r = y - (f.intercept + f.slope * x);
      ss_res += r * r;
    }
    f.r_squared = std::clamp(1 - ss_res / syy, 0.0, 1.0);
  }
  return f;
}

std::string bench_op_name(const IoOp& op) {
  if (op.kind == IoOpKind::FlushAll) return "baseline";
  return op_kind_name(op.kind);
}

BenchStats run_footprint_bench(Backend& backend, Clock& clock, const IoOp& op,
                               std::uint64_t repetitions) {
  if (repetitions < 2) throw Error(Errc::Precondition, "footprint bench needs at least 2 repetitions");
  std::vector<double> delays;
  delays.reserve(repetitions);
  for (std::uint64_t i = 0; i < repetitions; ++i) {
    backend.flush_all(clock);
    if (op.kind != IoOpKind::FlushAll) backend.perform_io(op, clock);
    delays.push_back(static_cast<double>(backend.flush_all(clock)));
  }

  BenchStats s{op, repetitions, 0, 0};
  for (double d : delays) s.mean += d;
  s.mean /= static_cast<double>(repetitions);
  double ss = 0;
  for (double d : delays) ss += (d - s.mean) * (d - s.mean);
  s.stddev = std::sqrt(ss / static_cast<double>(repetitions - 1));
  return s;
}

SlopeFit run_concurrency_bench(Backend& backend, Clock& clock, const IoOp& op,
                               std::span<const std::uint64_t> file_counts,
                               std::uint64_t repetitions) {
  std::set<std::uint64_t> distinct(file_counts.begin(), file_counts.end());
  if (distinct.size() < 3) throw Error(Errc::Precondition, "concurrency bench needs at least 3 distinct file counts");
  if (repetitions == 0) throw Error(Errc::Precondition, "repetitions must be positive");

  SlopeFit out;
  out.op = op;
  for (std::uint64_t k : distinct) {
    double sum = 0;
    for (std::uint64_t r = 0; r < repetitions; ++r) {
      backend.flush_all(clock);
      for (std::uint64_t f = 0; f < k; ++f) {
        IoOp per_file = op;
        per_file.file = static_cast<std::uint32_t>(f);
        backend.perform_io(per_file, clock);
      }
      sum += static_cast<double>(backend.flush_all(clock));
    }
    out.points.emplace_back(k, sum / static_cast<double>(repetitions));
  }
  std::vector<std::pair<double, double>> xy;
  for (auto [k, d] : out.points) xy.emplace_back(static_cast<double>(k), d);
  out.fit = fit_linear(xy);
  return out;
}

std::vector<std::uint64_t> SizeRange::sizes() const {
  std::vector<std::uint64_t> v;
  if (stride == 0 || start == 0 || end < start) return v;
  for (std::uint64_t s = start; s <= end; s += stride) v.push_back(s);
  return v;
}

SweepCurve run_write_size_sweep(Backend& backend, Clock& clock, const SizeRange& below,
                                const SizeRange& above, std::uint64_t repetitions) {
  auto below_sizes = below.sizes();
  auto above_sizes = above.sizes();
  if (below_sizes.size() < 2 || above_sizes.size() < 2) {
    throw Error(Errc::Precondition, "each sweep range needs at least two sizes");
  }
  if (below_sizes.back() > kPageSize || above_sizes.front() < kPageSize) {
    throw Error(Errc::Precondition, "below range must lie in (0, 4096] and above range in [4096, inf)");
  }
  if (repetitions == 0) throw Error(Errc::Precondition, "repetitions must be positive");

  std::set<std::uint64_t> all(below_sizes.begin(), below_sizes.end());
  all.insert(above_sizes.begin(), above_sizes.end());

  SweepCurve c;
  std::vector<std::pair<double, double>> lo, hi;
  for (std::uint64_t size : all) {
    double sum = 0;
    for (std::uint64_t r = 0; r < repetitions; ++r) {
      backend.flush_all(clock);
      backend.perform_io(IoOp::write(size), clock);
      sum += static_cast<double>(backend.flush_all(clock));
    }
    double mean = sum / static_cast<double>(repetitions);
    c.sizes.push_back(size);
    c.means.push_back(mean);
    if (size >= below.start && size <= below.end) lo.emplace_back(static_cast<double>(size), mean);
    if (size >= above.start && size <= above.end) hi.emplace_back(static_cast<double>(size), mean);
  }
  c.below_fit = fit_linear(lo);
  c.above_fit = fit_linear(hi);
  return c;
}

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

void write_csv(std::ostream& out, std::span<const BenchStats> stats) {
  out << "op,repetitions,mean_cycles,stddev_cycles\n";
  for (const auto& s : stats) {
    out << bench_op_name(s.op) << ',' << s.repetitions << ',' << num(s.mean) << ',' << num(s.stddev) << '\n';
  }
}

void write_csv(std::ostream& out, const SlopeFit& fit) {
  out << "op,file_count,mean_cycles\n";
  for (auto [k, d] : fit.points) out << bench_op_name(fit.op) << ',' << k << ',' << num(d) << '\n';
  out << "# slope=" << num(fit.fit.slope) << ",intercept=" << num(fit.fit.intercept)
      << ",r2=" << num(fit.fit.r_squared) << '\n';
}

void write_csv(std::ostream& out, const SweepCurve& curve) {
  out << "size_bytes,mean_cycles\n";
  for (std::size_t i = 0; i < curve.sizes.size(); ++i) {
    out << curve.sizes[i] << ',' << num(curve.means[i]) << '\n';
  }
  out << "# below slope=" << num(curve.below_fit.slope) << ",intercept=" << num(curve.below_fit.intercept)
      << ",r2=" << num(curve.below_fit.r_squared) << '\n';
  out << "# above slope=" << num(curve.above_fit.slope) << ",intercept=" << num(curve.above_fit.intercept)
      << ",r2=" << num(curve.above_fit.r_squared) << '\n';
}

}  // namespace syncprobe
