// Acceptance suite: one PASS/FAIL/SKIP line per criterion, exit status 1 on
// any FAIL. Criterion 10 needs SYNCPROBE_REAL_PATH pointing at a writable
// directory on a real filesystem and is skipped otherwise;
// SYNCPROBE_REAL_BIT_PERIOD overrides the channel bit period in cycles.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <thread>
#include <vector>

#include <json.hpp>

#include "syncprobe/analysis.hpp"
#include "syncprobe/channel.hpp"
#include "syncprobe/error.hpp"
#include "syncprobe/microbench.hpp"
#include "syncprobe/profiles.hpp"

using namespace syncprobe;
namespace fs = std::filesystem;
using Clk = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int id, const char* name, const std::string& verdict, const std::string& detail) {
  std::printf("AC%-2d %-4s %-28s %s\n", id, verdict.c_str(), name, detail.c_str());
  std::fflush(stdout);
  if (verdict == "FAIL") ++failures;
}

struct Outcome {
  bool pass = false;
  std::string detail;
  bool skipped = false;
};

void run(int id, const char* name, const std::function<Outcome()>& body) {
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  report(id, name, o.skipped ? "SKIP" : (o.pass ? "PASS" : "FAIL"), o.detail);
}

double seconds_since(Clk::time_point t0) { return std::chrono::duration<double>(Clk::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct CliRun {
  int status = -1;
  std::string out;
};

CliRun cli(const std::string& args) {
  CliRun r;
  FILE* p = popen((std::string(SYNCPROBE_CLI) + " " + args + " 2>&1").c_str(), "r");
  if (!p) return r;
  std::array<char, 4096> buf;
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
  int raw = pclose(p);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

Bits random_bits(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Bits b(n, '0');
  for (auto& c : b) c = (rng() & 1) ? '1' : '0';
  return b;
}

// Is there an edit script turning a[i..] into b[j..] with at most `budget`
// unit-cost insertions, deletions and substitutions? Plain enumeration of
// scripts, pruned only by the length difference that any script must pay.
bool script_exists(std::string_view a, std::size_t i, std::string_view b, std::size_t j, unsigned budget) {
  std::size_t ra = a.size() - i, rb = b.size() - j;
  if (ra == 0 && rb == 0) return true;
  if ((ra > rb ? ra - rb : rb - ra) > budget) return false;
  if (ra > 0 && rb > 0) {
    unsigned cost = a[i] == b[j] ? 0 : 1;
    if (cost <= budget && script_exists(a, i + 1, b, j + 1, budget - cost)) return true;
  }
  if (budget == 0) return false;
  if (ra > 0 && script_exists(a, i + 1, b, j, budget - 1)) return true;
  if (rb > 0 && script_exists(a, i, b, j + 1, budget - 1)) return true;
  return false;
}

unsigned exhaustive_edit_distance(std::string_view a, std::string_view b) {
  unsigned d = 0;
  while (!script_exists(a, 0, b, 0, d)) ++d;
  return d;
}

DelayProfile quiet(const std::string& name) {
  DelayProfile p = builtin_profile(name);
  p.noise_kind = NoiseKind::None;
  return p;
}

// Between-class variance of the two means over the mean within-class
// variance.
double two_class_snr(const std::vector<double>& a, const std::vector<double>& b) {
  auto mean = [](const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  auto var = [](const std::vector<double>& v, double m) {
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size());
  };
  double ma = mean(a), mb = mean(b);
  double signal = (ma - mb) * (ma - mb) / 4;
  double noise = (var(a, ma) + var(b, mb)) / 2;
  return signal / noise;
}

}  // namespace

int main() {
  run(1, "calibration fidelity", [] {
    auto t0 = Clk::now();
    CliRun r = cli("bench footprint --op all --reps 1000 --backend sim:ext4-orin --noise off");
    double elapsed = seconds_since(t0);
    if (r.status != 0) return Outcome{false, "cli exit " + std::to_string(r.status) + ": " + r.out};
    std::map<std::string, double> mean;
    for (const auto& row : csv_rows(r.out)) {
      if (row.size() == 4 && row[0] != "op") mean[row[0]] = std::stod(row[2]);
    }
    bool exact = mean["baseline"] == 2509 && mean["write"] == 121092 && mean["write_sync"] == 41406;
    bool ftr = std::abs(mean["ftruncate"] - 61315) <= 0.1 * 61315;
    bool ren = std::abs(mean["rename"] - 66774) <= 0.1 * 66774;
    return Outcome{exact && ftr && ren && elapsed < 1.0,
                   fmt("baseline=%.0f write=%.0f write_sync=%.0f ftruncate=%.0f rename=%.0f in %.3fs",
                       mean["baseline"], mean["write"], mean["write_sync"], mean["ftruncate"], mean["rename"],
                       elapsed)};
  });

  run(2, "slope recovery", [] {
    auto t0 = Clk::now();
    struct Want {
      const char* op;
      double slope;
    } wants[] = {{"write_sync", 6163}, {"ftruncate", 9626}, {"write", 48612}};
    bool ok = true;
    std::string detail;
    for (const auto& w : wants) {
      CliRun r = cli(std::string("bench concurrency --backend sim:ext4-xeon-slopes --noise off --counts 1..10 --op ") +
                     w.op);
      auto pos = r.out.find("# slope=");
      if (r.status != 0 || pos == std::string::npos) return Outcome{false, "cli failed: " + r.out};
      double slope = std::stod(r.out.substr(pos + 8));
      ok &= std::abs(slope - w.slope) <= 0.01 * w.slope;
      detail += fmt("%s=%.1f ", w.op, slope);
    }
    double elapsed = seconds_since(t0);
    return Outcome{ok && elapsed < 1.0, detail + fmt("in %.3fs", elapsed)};
  });

  run(3, "regime structure", [] {
    SizeRange below{64, 64, 4096}, above{4096, 4096, 65536};
    SimulatedBackend off(quiet("ext4-orin"));
    SimulatedClock c1;
    SweepCurve q = run_write_size_sweep(off, c1, below, above);
    SimulatedBackend on(builtin_profile("ext4-orin"), 3);
    SimulatedClock c2;
    SweepCurve n = run_write_size_sweep(on, c2, below, above, 1000);
    bool ok = q.below_fit.r_squared >= 0.99 && q.above_fit.slope < q.below_fit.slope && n.below_fit.r_squared >= 0.9;
    return Outcome{ok, fmt("noise off: r2=%.6f slopes %.3f > %.3f; noise on (1000 reps): r2=%.4f",
                           q.below_fit.r_squared, q.below_fit.slope, q.above_fit.slope, n.below_fit.r_squared)};
  });

  run(4, "covert channel, noiseless", [] {
    SimulatedBackend b(quiet("ext4-orin"));
    ChannelConfig cfg = ChannelConfig::for_profile(b.profile());
    Bits payload = random_bits(10000, 4);
    const double hz = 1e9;
    LoopbackResult r = run_loopback(b, payload, cfg, hz);
    double expected_kbps = hz / static_cast<double>(cfg.bit_period) / 1000.0;
    double rel = std::abs(r.report.bandwidth_kbps - expected_kbps) / expected_kbps;
    return Outcome{r.report.error_rate == 0 && rel <= 0.05,
                   fmt("error_rate=%g bandwidth=%.3f Kbps (period-implied %.3f, off by %.2f%%)", r.report.error_rate,
                       r.report.bandwidth_kbps, expected_kbps, 100 * rel)};
  });

  run(5, "covert channel, noisy", [] {
    DelayProfile p = builtin_profile("ext4-orin");
    FsState one_sync;
    apply_op(one_sync, IoOp::write_sync(64));
    double s_base = delay_sigma(FsState{}, p), s_sync = delay_sigma(one_sync, p);
    auto t0 = Clk::now();
    SimulatedBackend b(p, 5);
    ChannelConfig cfg = ChannelConfig::for_profile(p);
    cfg.threshold.reset();
    Bits payload = random_bits(10000, 5);
    LoopbackResult r = run_loopback(b, payload, cfg);
    double elapsed = seconds_since(t0);
    bool sigmas = std::abs(s_base - 491) < 1e-6 && std::abs(s_sync - 4670) < 1e-6;
    return Outcome{sigmas && r.report.error_rate <= 0.05 && elapsed < 10.0,
                   fmt("sigma baseline=%.0f write_sync=%.0f error_rate=%.4f threshold=%.0f in %.2fs", s_base, s_sync,
                       r.report.error_rate, r.decoded.threshold, elapsed)};
  });

  run(6, "levenshtein oracle", [] {
    std::mt19937_64 rng(6);
    int mismatches = 0;
    for (int i = 0; i < 1000; ++i) {
      auto make = [&] {
        std::string s(rng() % 13, 'a');
        for (auto& c : s) c = "abc"[rng() % 3];
        return s;
      };
      std::string a = make(), b = make();
      if (levenshtein(a, b) != exhaustive_edit_distance(a, b)) ++mismatches;
    }
    return Outcome{mismatches == 0, fmt("%d/1000 pairs disagree with exhaustive edit-script search", mismatches)};
  });

  run(7, "stft correctness", [] {
    std::mt19937_64 rng(7);
    std::lognormal_distribution<double> delay(10, 1);
    double worst = 0;
    for (int t = 0; t < 20; ++t) {
      std::vector<double> x(256 + 128 * (1 + rng() % 30));
      for (auto& v : x) v = delay(rng);
      Spectrogram s = stft(x, 256, 128);
      auto w = hann_window(256);
      for (std::uint32_t f = 0; f < s.frames; ++f) {
        std::vector<double> y(256);
        double m = 0, m2 = 0;
        for (int j = 0; j < 256; ++j) m += x[f * 128 + j];
        m /= 256;
        for (int j = 0; j < 256; ++j) m2 += y[j] = w[j] * (x[f * 128 + j] - m);
        m2 /= 256;
        double time = 0;
        for (double v : y) time += (v - m2) * (v - m2);
        double freq = 0;
        for (std::uint32_t b = 0; b < s.freq_bins; ++b) freq += (b == 0 || b == 128 ? 1 : 2) * s.at(b, f) * s.at(b, f);
        worst = std::max(worst, std::abs(freq - 256 * time) / (256 * time));
      }
    }
    std::string peaks;
    bool peaks_ok = true;
    for (std::size_t k : {1u, 8u, 64u, 127u}) {
      std::vector<double> x(1024);
      for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = 20000 + 5000 * std::sin(2 * std::numbers::pi * double(k * i) / 256.0 + 0.3);
      }
      Spectrogram s = stft(x, 256, 256);
      for (std::uint32_t f = 0; f < s.frames; ++f) {
        std::uint32_t best = 0;
        for (std::uint32_t b = 1; b < s.freq_bins; ++b) best = s.at(b, f) > s.at(best, f) ? b : best;
        peaks_ok &= best == k;
        if (f == 0) peaks += fmt("k=%zu->%u ", k, best);
      }
    }
    return Outcome{worst < 1e-6 && peaks_ok, fmt("max Parseval rel err=%.2e; peaks %s", worst, peaks.c_str())};
  });

  run(8, "spike detection", [] {
    const Cycles extra = 20000;
    DelayProfile p = builtin_profile("ext4-orin");
    p.noise_kind = NoiseKind::Gaussian;
    p.noise_sigma = extra / 20.0;
    p.noise_slope = 0;
    int detected = 0, expected = 0, spurious = 0, misplaced = 0;
    for (std::uint64_t trial = 0; trial < 100; ++trial) {
      std::mt19937_64 rng(trial);
      SimulatedBackend b(p, 1000 + trial);
      TimedEvent mount{EventKind::ContainerMount, {1'000'000 + rng() % 3'000'000}, extra, extra};
      TimedEvent unmount{EventKind::ContainerUnmount, {mount.at.cycles + 1'000'000 + rng() % 3'000'000}, extra, extra};
      b.inject_event(mount);
      b.inject_event(unmount);
      SimulatedClock clock;
      DelayTrace t = rate_limited_probe(b, clock, {1e9, ClockSource::Simulated}, kUnlimitedRate, 4096);
      auto index_at = [&](CycleStamp at) {
        std::size_t i = 0;
        while (i < t.size() && t.samples[i].timestamp < at) ++i;
        return i;
      };
      std::vector<std::size_t> want{index_at(mount.at), index_at(unmount.at)};
      expected += 2;
      auto events = detect_spikes(t);
      std::vector<bool> used(want.size());
      for (const auto& e : events) {
        bool matched = false;
        for (std::size_t k = 0; k < want.size(); ++k) {
          std::size_t d = e.index > want[k] ? e.index - want[k] : want[k] - e.index;
          if (!used[k] && d <= 1) {
            used[k] = matched = true;
            ++detected;
            break;
          }
        }
        if (!matched) ++spurious;
      }
      misplaced += static_cast<int>(std::count(used.begin(), used.end(), false));
    }
    return Outcome{detected == expected && spurious == 0,
                   fmt("%d/%d events at the injected index +-1, %d missed, %d spurious (sigma=%g)", detected, expected,
                       misplaced, spurious, extra / 20.0)};
  });

  run(9, "rate limiter", [] {
    bool ok = true;
    std::string detail;
    for (double rate : {1e2, 1e3, 1e4}) {
      double lo = 1e300, hi = 0;
      for (std::uint64_t seed = 0; seed < 5; ++seed) {
        SimulatedBackend b(builtin_profile("ext4-orin"), seed);
        SimulatedClock clock;
        DelayTrace t = rate_limited_probe(b, clock, {1e9, ClockSource::Simulated}, rate, 1000);
        lo = std::min(lo, *t.achieved_rate);
        hi = std::max(hi, *t.achieved_rate);
      }
      // the hard bound also holds when flushes are slower than the interval
      SimulatedBackend slow(builtin_profile("container-ntfs"), 1);
      SimulatedClock sc;
      double slow_rate = *rate_limited_probe(slow, sc, {1e9, ClockSource::Simulated}, rate, 200).achieved_rate;
      ok &= hi <= rate && lo >= 0.9 * rate && slow_rate <= rate;
      detail += fmt("%g/s -> [%.2f, %.2f] (slow backend %.1f); ", rate, lo, hi, slow_rate);
    }
    return Outcome{ok, detail};
  });

  run(10, "real-backend smoke", [] {
    const char* path = std::getenv("SYNCPROBE_REAL_PATH");
    if (!path || !*path) return Outcome{false, "set SYNCPROBE_REAL_PATH to a writable ext4 directory", true};
    std::string backend = std::string("--backend real:") + path + " --i-understand-flush-scope";

    CliRun base = cli("probe " + backend + " --samples 1 --out /dev/null");
    if (base.status != 0) return Outcome{false, "probe failed: " + base.out};

    auto delays = [&](const IoOp& op) {
      RealBackend b(path);
      auto clock = make_system_clock();
      std::vector<double> v;
      for (int i = 0; i < 1000; ++i) {
        b.flush_all(*clock);
        if (op.kind != IoOpKind::FlushAll) b.perform_io(op, *clock);
        v.push_back(static_cast<double>(b.flush_all(*clock)));
      }
      return v;
    };
    double ratio = two_class_snr(delays(IoOp::write(4096)), delays(IoOp::flush_all()));

    fs::path tmp = fs::temp_directory_path() / "syncprobe-ac10";
    fs::create_directories(tmp);
    std::string payload_hex;
    for (std::uint8_t byte : bits_to_bytes(random_bits(1000, 10))) payload_hex += fmt("%02x", byte);
    auto clock = make_system_clock();
    double hz = calibrate(*clock, std::chrono::milliseconds(100)).cycles_per_second;
    Cycles start = clock->now().cycles + static_cast<Cycles>(1.5 * hz);
    const char* period = std::getenv("SYNCPROBE_REAL_BIT_PERIOD");
    std::string common = backend + " --auto-threshold --start-at " + std::to_string(start);
    if (period && *period) common += std::string(" --bit-period ") + period;
    std::string report = (tmp / "report.json").string();
    std::thread receiver([&] {
      cli("recv " + common + " --expect-hex " + payload_hex + " --report " + report + " --max-samples 20000000 --max-seconds 120");
    });
    CliRun s = cli("send " + common + " --payload-hex " + payload_hex);
    receiver.join();
    double error_rate = 1;
    try {
      std::ifstream in(report);
      error_rate = nlohmann::json::parse(in).at("error_rate").get<double>();
    } catch (const std::exception&) {
    }
    fs::remove_all(tmp);
    return Outcome{s.status == 0 && ratio > 1 && error_rate <= 0.10,
                   fmt("write vs baseline SNR=%.2f, two-process error_rate=%.4f", ratio, error_rate)};
  });

  std::printf("%s\n", failures == 0 ? "ALL PASS" : "FAILURES PRESENT");
  return failures == 0 ? 0 : 1;
}
