#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "syncprobe/error.hpp"
#include "syncprobe/microbench.hpp"
#include "syncprobe/profiles.hpp"

using namespace syncprobe;

namespace {

SimulatedBackend backend(const std::string& name, bool noise = false, std::uint64_t seed = 0) {
  DelayProfile p = builtin_profile(name);
  if (!noise) p.noise_kind = NoiseKind::None;
  return SimulatedBackend(p, seed);
}

// Closed-form OLS via Cramer's rule on the normal equations.
LinearFit oracle_ols(const std::vector<std::pair<double, double>>& pts) {
  long double n = pts.size(), sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (auto [x, y] : pts) {
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    syy += y * y;
  }
  long double det = n * sxx - sx * sx;
  long double slope = (n * sxy - sx * sy) / det;
  long double intercept = (sxx * sy - sx * sxy) / det;
  long double r = (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
  return {double(slope), double(intercept), double(r * r)};
}

}  // namespace

TEST_CASE("fit_linear examples") {
  std::vector<std::pair<double, double>> a{{0, 0}, {1, 2}, {2, 4}};
  LinearFit f = fit_linear(a);
  CHECK(f.slope == doctest::Approx(2));
  CHECK(f.intercept == doctest::Approx(0));
  CHECK(f.r_squared == doctest::Approx(1));

  std::vector<std::pair<double, double>> flat{{0, 1}, {1, 1}, {2, 1}};
  f = fit_linear(flat);
  CHECK(f.slope == 0);
  CHECK(f.intercept == doctest::Approx(1));
  CHECK(f.r_squared == 1);

  std::vector<std::pair<double, double>> same_x{{3, 1}, {3, 2}};
  CHECK_THROWS_AS(fit_linear(same_x), Error);
  std::vector<std::pair<double, double>> one{{3, 1}};
  CHECK_THROWS_AS(fit_linear(one), Error);
}

TEST_CASE("fit_linear matches a closed-form oracle") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> ux(0, 100);
  std::normal_distribution<double> noise(0, 5);
  std::vector<std::pair<double, double>> pts;
  for (int i = 0; i < 100; ++i) {
    double x = ux(rng);
    pts.emplace_back(x, 3 * x + 7 + noise(rng));
  }
  LinearFit f = fit_linear(pts);
  LinearFit o = oracle_ols(pts);
  CHECK(f.slope >= 2.9);
  CHECK(f.slope <= 3.1);
  CHECK(f.slope == doctest::Approx(o.slope).epsilon(1e-9));
  CHECK(f.intercept == doctest::Approx(o.intercept).epsilon(1e-9));
  CHECK(f.r_squared == doctest::Approx(o.r_squared).epsilon(1e-9));
}

TEST_CASE("footprint bench") {
  SimulatedBackend b = backend("ext4-orin");
  SimulatedClock clock;
  BenchStats w = run_footprint_bench(b, clock, IoOp::write(4096), 100);
  CHECK(w.mean == 121092);
  CHECK(w.stddev == 0);
  CHECK(w.repetitions == 100);
  CHECK_THROWS_AS(run_footprint_bench(b, clock, IoOp::write(4096), 1), Error);

  BenchStats again = run_footprint_bench(b, clock, IoOp::write(4096), 100);
  CHECK(again.mean == w.mean);
  CHECK(again.stddev == w.stddev);
}

TEST_CASE("noisy baseline within the CLT band") {
  SimulatedBackend b = backend("ext4-orin", true, 5);
  SimulatedClock clock;
  BenchStats s = run_footprint_bench(b, clock, IoOp::flush_all(), 1000);
  CHECK(std::abs(s.mean - 2509) <= 3 * 491 / std::sqrt(1000.0));
  CHECK(s.stddev == doctest::Approx(491).epsilon(0.1));
}

TEST_CASE("concurrency slopes") {
  std::vector<std::uint64_t> counts{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  SimulatedBackend b = backend("ext4-xeon-slopes");
  SimulatedClock clock;
  struct Case {
    IoOp op;
    double slope;
  } cases[] = {{IoOp::write(64), 48612}, {IoOp::ftruncate(), 9626}, {IoOp::write_sync(64), 6163}};
  for (const auto& c : cases) {
    SlopeFit f = run_concurrency_bench(b, clock, c.op, counts);
    CHECK(f.fit.slope == doctest::Approx(c.slope).epsilon(0.01));
    CHECK(f.points.size() == counts.size());
  }
  SimulatedBackend flat = backend("flat-test");
  SlopeFit f = run_concurrency_bench(flat, clock, IoOp::write(64), counts);
  CHECK(f.fit.slope == 0);
  CHECK(f.fit.r_squared == 1);
  std::vector<std::uint64_t> few{1, 2};
  CHECK_THROWS_AS(run_concurrency_bench(b, clock, IoOp::write(64), few), Error);
}

TEST_CASE("slope recovery on every profile") {
  std::vector<std::uint64_t> counts{1, 2, 4, 8};
  for (const auto& name : builtin_profile_names()) {
    DelayProfile p = builtin_profile(name);
    p.noise_kind = NoiseKind::None;
    SimulatedBackend b(p);
    SimulatedClock clock;
    SlopeFit f = run_concurrency_bench(b, clock, IoOp::write_sync(64), counts);
    CHECK(f.fit.slope == doctest::Approx(p.journal_cost).epsilon(0.01));
    f = run_concurrency_bench(b, clock, IoOp::rename(), counts);
    CHECK(f.fit.slope == doctest::Approx(p.journal_cost + p.inode_cost).epsilon(0.01));
  }
}

TEST_CASE("write size sweep regimes") {
  SimulatedBackend b = backend("ext4-orin");
  SimulatedClock clock;
  SweepCurve c = run_write_size_sweep(b, clock, {64, 64, 4096}, {4096, 4096, 65536});
  CHECK(c.below_fit.r_squared == doctest::Approx(1));
  CHECK(c.above_fit.slope < c.below_fit.slope);
  CHECK(c.means.front() > 10 * 2509);
  CHECK_THROWS_AS(run_write_size_sweep(b, clock, {64, 64, 0}, {4096, 4096, 65536}), Error);
  CHECK_THROWS_AS(run_write_size_sweep(b, clock, {64, 64, 8192}, {4096, 4096, 65536}), Error);
}

TEST_CASE("size ranges") {
  CHECK(SizeRange{64, 64, 256}.sizes() == std::vector<std::uint64_t>{64, 128, 192, 256});
  CHECK(SizeRange{64, 64, 0}.sizes().empty());
}

TEST_CASE("csv layout") {
  SimulatedBackend b = backend("ext4-orin");
  SimulatedClock clock;
  std::vector<BenchStats> stats{run_footprint_bench(b, clock, IoOp::write(4096), 3)};
  std::ostringstream out;
  write_csv(out, stats);
  CHECK(out.str() == "op,repetitions,mean_cycles,stddev_cycles\nwrite,3,121092,0\n");

  std::vector<std::uint64_t> counts{1, 2, 3};
  SlopeFit f = run_concurrency_bench(b, clock, IoOp::write_sync(64), counts);
  std::ostringstream s;
  write_csv(s, f);
  CHECK(s.str().rfind("op,file_count,mean_cycles\nwrite_sync,1,", 0) == 0);
  CHECK(s.str().find("# slope=38897,intercept=2509,r2=1") != std::string::npos);
}
