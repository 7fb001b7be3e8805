#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <numbers>
#include <random>

#include "syncprobe/analysis.hpp"
#include "syncprobe/error.hpp"
#include "syncprobe/profiles.hpp"
#include "syncprobe/workload.hpp"

using namespace syncprobe;

namespace {

constexpr double kPi = std::numbers::pi;

double mean_of(const std::vector<double>& v) {
  double m = 0;
  for (double x : v) m += x;
  return m / static_cast<double>(v.size());
}

// The transformed sequence: centered, Hann-weighted, centered again.
std::vector<double> weighted(const std::vector<double>& x) {
  const std::size_t n = x.size();
  double mean = mean_of(x);
  std::vector<double> y(n);
  for (std::size_t j = 0; j < n; ++j) y[j] = (0.5 - 0.5 * std::cos(2 * kPi * double(j) / double(n))) * (x[j] - mean);
  double again = mean_of(y);
  for (auto& v : y) v -= again;
  return y;
}

// Direct O(n^2) DFT magnitudes of one window.
std::vector<double> direct_dft(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<double> y = weighted(x);
  std::vector<double> mags(n / 2 + 1);
  for (std::size_t k = 0; k <= n / 2; ++k) {
    std::complex<double> acc;
    for (std::size_t j = 0; j < n; ++j) acc += y[j] * std::polar(1.0, -2 * kPi * double(k * j) / double(n));
    mags[k] = std::abs(acc);
  }
  return mags;
}

DelayTrace trace_from(const std::vector<double>& values) {
  DelayTrace t;
  for (std::size_t i = 0; i < values.size(); ++i) {
    t.samples.push_back({{1000 * (i + 1)}, static_cast<Cycles>(std::llround(values[i]))});
  }
  return t;
}

DelayProfile quiet_orin() {
  DelayProfile p = builtin_profile("ext4-orin");
  p.noise_kind = NoiseKind::None;
  return p;
}

}  // namespace

TEST_CASE("fft matches the direct transform") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  std::vector<std::complex<double>> x(64);
  for (auto& v : x) v = {g(rng), g(rng)};
  auto y = x;
  fft(y);
  for (std::size_t k = 0; k < x.size(); ++k) {
    std::complex<double> acc;
    for (std::size_t j = 0; j < x.size(); ++j) acc += x[j] * std::polar(1.0, -2 * kPi * double(k * j) / 64.0);
    CHECK(std::abs(acc - y[k]) < 1e-9);
  }
  std::vector<std::complex<double>> bad(12);
  CHECK_THROWS_AS(fft(bad), Error);
}

TEST_CASE("hann window is periodic") {
  auto w = hann_window(8);
  CHECK(w[0] == 0);
  CHECK(w[4] == doctest::Approx(1));
  CHECK(w[1] == doctest::Approx(w[7]));
}

TEST_CASE("stft shapes and degenerate input") {
  Spectrogram z = stft(std::vector<double>(512, 0.0), 256, 128);
  CHECK(z.freq_bins == 129);
  CHECK(z.frames == 3);
  for (double m : z.magnitudes) CHECK(m == 0);

  // constant traces are zeroed by centering
  Spectrogram c = stft(std::vector<double>(300, 2509.0), 256, 128);
  for (double m : c.magnitudes) CHECK(m == doctest::Approx(0).epsilon(1e-9));

  try {
    stft(std::vector<double>(255, 1.0), 256, 128);
    FAIL("expected trace-too-short");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::TraceTooShort);
    CHECK(std::string(e.what()).find("trace too short") != std::string::npos);
  }
  CHECK(stft(std::vector<double>(1000, 1.0), 256, 100).frames == 1 + (1000 - 256) / 100);
}

TEST_CASE("sinusoid at bin k peaks at k") {
  for (std::size_t k : {1u, 8u, 64u, 127u}) {
    std::vector<double> x(256 * 3);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = 5000 + 1000 * std::cos(2 * kPi * double(k * i) / 256.0);
    Spectrogram s = stft(x, 256, 256);
    std::vector<double> oracle = direct_dft(std::vector<double>(x.begin(), x.begin() + 256));
    double peak = *std::max_element(oracle.begin(), oracle.end());
    for (std::uint32_t f = 0; f < s.frames; ++f) {
      std::uint32_t best = 0;
      for (std::uint32_t b = 0; b < s.freq_bins; ++b) {
        if (s.at(b, f) > s.at(best, f)) best = b;
        CHECK(std::abs(s.at(b, f) - oracle[b]) <= 1e-9 * peak);
      }
      CHECK(best == k);
    }
  }
}

TEST_CASE("per-window Parseval identity") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g(40000, 8000);
  std::vector<double> x(2048);
  for (auto& v : x) v = g(rng);
  const std::uint32_t w = 256, hop = 128;
  Spectrogram s = stft(x, w, hop);
  for (std::uint32_t f = 0; f < s.frames; ++f) {
    std::vector<double> y = weighted(std::vector<double>(x.begin() + f * hop, x.begin() + f * hop + w));
    double time = 0;
    for (double v : y) time += v * v;
    double freq = 0;
    for (std::uint32_t b = 0; b < s.freq_bins; ++b) {
      double m2 = s.at(b, f) * s.at(b, f);
      freq += (b == 0 || b == w / 2) ? m2 : 2 * m2;
    }
    CHECK(std::abs(freq - w * time) / (w * time) < 1e-6);
  }
}

TEST_CASE("snr") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0, 100);
  std::vector<double> noise(1000), twice(1000);
  for (std::size_t i = 0; i < noise.size(); ++i) {
    noise[i] = 5000 + g(rng);
    twice[i] = 5000 + 2 * (noise[i] - 5000);
  }
  CHECK(snr(noise, noise).snr == doctest::Approx(1.0));
  CHECK(snr(twice, noise).snr == doctest::Approx(4.0));
  std::vector<double> scaled_s(twice), scaled_n(noise);
  for (auto& v : scaled_s) v *= 3.7;
  for (auto& v : scaled_n) v *= 3.7;
  CHECK(snr(scaled_s, scaled_n).snr == doctest::Approx(snr(twice, noise).snr));
  std::vector<double> flat(100, 7.0);
  try {
    snr(noise, flat);
    FAIL("expected zero-noise-variance");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ZeroNoiseVariance);
  }
}

TEST_CASE("browsing stands out from idle") {
  namespace fs = std::filesystem;
  fs::path dir = fs::path(SYNCPROBE_SOURCE_DIR) / "scripts" / "workloads";
  DelayProfile p = builtin_profile("ext4-orin");
  WorkloadRun run;
  run.seed = 3;
  DelayTrace busy = run_workload(load_workload((dir / "browsing.json").string()), p, run);
  DelayTrace idle = run_workload(load_workload((dir / "idle.json").string()), p, run);
  CHECK(snr(busy, idle).snr > 1);
}

TEST_CASE("spike detection") {
  SUBCASE("flat trace has no events") {
    CHECK(detect_spikes(trace_from(std::vector<double>(100, 2509))).empty());
  }
  SUBCASE("adjacent flags merge") {
    std::vector<double> v(100, 2509);
    v[40] = 1e6;
    v[41] = 2e6;
    auto ev = detect_spikes(trace_from(v), 6, 10);
    REQUIRE(ev.size() == 1);
    CHECK(ev[0].index == 41);
  }
  SUBCASE("too short") {
    CHECK_THROWS_AS(detect_spikes(trace_from(std::vector<double>(10, 1))), Error);
  }
  SUBCASE("simulated mount and unmount") {
    SimulatedBackend b(quiet_orin());
    TimedEvent mount{EventKind::ContainerMount, {300'000}, 1'000'000, 5'000};
    TimedEvent unmount{EventKind::ContainerUnmount, {2'500'000}, 1'000'000, 5'000};
    b.inject_event(mount);
    b.inject_event(unmount);
    SimulatedClock clock;
    DelayTrace t = rate_limited_probe(b, clock, {1e9, ClockSource::Simulated}, 1e6, 4000);
    auto first_at = [&](CycleStamp at) {
      std::size_t i = 0;
      while (t.samples[i].timestamp < at) ++i;
      return i;
    };
    auto ev = detect_spikes(t);
    REQUIRE(ev.size() == 2);
    CHECK(ev[0].index == first_at(mount.at));
    CHECK(ev[1].index == first_at(unmount.at));
  }
}

TEST_CASE("rate limiter") {
  for (double rate : {100.0, 1000.0, 10000.0}) {
    SimulatedBackend b(quiet_orin());
    SimulatedClock clock;
    DelayTrace t = rate_limited_probe(b, clock, {1e9, ClockSource::Simulated}, rate, 1000);
    REQUIRE(t.achieved_rate);
    CHECK(*t.achieved_rate <= rate);
    CHECK(*t.achieved_rate >= 0.9 * rate);
  }
  CHECK_THROWS_AS(
      [] {
        SimulatedBackend b(quiet_orin());
        SimulatedClock clock;
        rate_limited_probe(b, clock, {}, 0, 10);
      }(),
      Error);
}

TEST_CASE("unlimited probe equals a plain flush loop") {
  DelayProfile p = builtin_profile("ext4-orin");
  SimulatedBackend a(p, 77), b(p, 77);
  SimulatedClock ca, cb;
  DelayTrace t = rate_limited_probe(a, ca, {1e9, ClockSource::Simulated}, kUnlimitedRate, 500);
  for (const auto& s : t.samples) {
    CHECK(s.timestamp == cb.now());
    CHECK(s.delay == b.flush_all(cb));
  }
}
