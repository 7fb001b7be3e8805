#include "syncprobe/analysis.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "syncprobe/binary_io.hpp"
#include "syncprobe/error.hpp"

namespace syncprobe {

void fft(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  if (!std::has_single_bit(n)) throw Error(Errc::Precondition, "FFT length must be a power of two");

  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    double ang = -2 * std::numbers::pi / static_cast<double>(len);
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < len / 2; ++k) {
        // Twiddles computed directly; accumulating them drifts at large n.
        std::complex<double> w = std::polar(1.0, ang * static_cast<double>(k));
        std::complex<double> u = a[i + k];
        std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
      }
    }
  }
}

std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  }
  return w;
}

Spectrogram stft(std::span<const double> values, std::uint32_t window_size, std::uint32_t hop) {
  if (window_size < 2 || !std::has_single_bit(window_size)) {
    throw Error(Errc::Precondition, "window size must be a power of two >= 2");
  }
  if (hop < 1 || hop > window_size) throw Error(Errc::Precondition, "hop must lie in [1, window_size]");
  if (values.size() < window_size) {
    throw Error(Errc::TraceTooShort, "trace too short: " + std::to_string(values.size()) +
                                         " samples < window " + std::to_string(window_size));
  }

  Spectrogram s;
  s.window_size = window_size;
  s.hop = hop;
  s.freq_bins = window_size / 2 + 1;
  s.frames = static_cast<std::uint32_t>((values.size() - window_size) / hop + 1);
  s.magnitudes.assign(std::size_t{s.freq_bins} * s.frames, 0.0);

  const auto window = hann_window(window_size);
  std::vector<std::complex<double>> buf(window_size);
  for (std::uint32_t f = 0; f < s.frames; ++f) {
    auto frame = values.subspan(std::size_t{f} * hop, window_size);
    double mean = 0;
    for (double v : frame) mean += v;
    mean /= window_size;
    double weighted_mean = 0;
    for (std::uint32_t i = 0; i < window_size; ++i) {
      buf[i] = (frame[i] - mean) * window[i];
      weighted_mean += buf[i].real();
    }
    // Re-center after weighting so the window shape leaves nothing in bin 0.
    weighted_mean /= window_size;
    for (auto& v : buf) v -= weighted_mean;
    fft(buf);
    for (std::uint32_t k = 0; k < s.freq_bins; ++k) {
      s.magnitudes[std::size_t{k} * s.frames + f] = std::abs(buf[k]);
    }
  }
  return s;
}

Spectrogram stft(const DelayTrace& trace, std::uint32_t window_size, std::uint32_t hop) {
  auto values = trace.delays();
  return stft(values, window_size, hop);
}

namespace {

double population_variance(std::span<const double> v) {
  double mean = 0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(v.size());
}

double median(std::vector<double> v) {
  auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  double m = *mid;
  if (v.size() % 2 == 0) m = (m + *std::max_element(v.begin(), mid)) / 2;
  return m;
}

}  // namespace

SnrReport snr(std::span<const double> signal, std::span<const double> noise) {
  if (signal.empty() || noise.empty()) throw Error(Errc::Precondition, "SNR needs non-empty traces");
  SnrReport r;
  r.signal_variance = population_variance(signal);
  r.noise_variance = population_variance(noise);
  if (r.noise_variance <= 0) throw Error(Errc::ZeroNoiseVariance, "noise trace has zero variance");
  r.snr = r.signal_variance / r.noise_variance;
  return r;
}

SnrReport snr(const DelayTrace& signal, const DelayTrace& noise) {
  auto s = signal.delays();
  auto n = noise.delays();
  return snr(s, n);
}

std::vector<SpikeEvent> detect_spikes(const DelayTrace& trace, double z_threshold,
                                      std::size_t min_separation) {
  if (trace.size() < 16) throw Error(Errc::TraceTooShort, "spike detection needs at least 16 samples");
  auto values = trace.delays();
  double center = median(values);

  std::vector<double> dev(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) dev[i] = std::abs(values[i] - center);
  double scale = 1.4826 * median(dev);
  if (scale == 0) {
    // More than half the samples sit exactly on the median (noise-free
    // traces); fall back to the mean absolute deviation.
    double mad = 0;
    for (double d : dev) mad += d;
    scale = 1.2533 * mad / static_cast<double>(dev.size());
  }
  std::vector<SpikeEvent> events;
  if (scale == 0) return events;

  std::size_t last_flag = 0;
  bool open = false;
  for (std::size_t i = 0; i < values.size(); ++i) {
    double z = (values[i] - center) / scale;
    if (!(z > z_threshold)) continue;
    SpikeEvent e{i, trace.samples[i].delay, z};
    if (open && i - last_flag < min_separation) {
      if (e.delay > events.back().delay) events.back() = e;
    } else {
      events.push_back(e);
      open = true;
    }
    last_flag = i;
  }
  return events;
}

DelayTrace rate_limited_probe(Backend& backend, Clock& clock, const ClockCalibration& calibration,
                              double max_rate, std::size_t n_samples) {
  if (!(max_rate > 0)) throw Error(Errc::Precondition, "max_rate must be positive");
  DelayTrace trace;
  trace.clock = calibration;
  trace.backend_kind = backend.kind();
  trace.profile = backend.kind() == BackendKind::Simulated ? backend.label() : "";
  trace.samples.reserve(n_samples);

  const Cycles interval = std::isinf(max_rate)
                              ? 0
                              : static_cast<Cycles>(std::ceil(calibration.cycles_per_second / max_rate));
  CycleStamp first{};
  for (std::size_t i = 0; i < n_samples; ++i) {
    if (i > 0 && interval > 0) wait_until(clock, first + i * interval);
    CycleStamp t = clock.now();
    if (!trace.samples.empty() && t <= trace.samples.back().timestamp) t = trace.samples.back().timestamp + 1;
    if (i == 0) first = t;
    Cycles d = backend.flush_all(clock);
    trace.samples.push_back({t, d});
  }
  if (!trace.samples.empty()) trace.origin = trace.samples.front().timestamp;
  if (trace.samples.size() >= 2) {
    Cycles span = trace.samples.back().timestamp - trace.samples.front().timestamp;
    trace.achieved_rate = static_cast<double>(trace.samples.size() - 1) * calibration.cycles_per_second /
                          static_cast<double>(span);
  }
  return trace;
}

void write_spectrogram(const Spectrogram& s, const std::string& path, const std::string& label) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoFailure, "cannot write spectrogram '" + path + "'");
  out.write("SYNCSPC1", 8);
  detail::put_le<std::uint32_t>(out, s.freq_bins);
  detail::put_le<std::uint32_t>(out, s.frames);
  detail::put_le<std::uint32_t>(out, s.window_size);
  detail::put_le<std::uint32_t>(out, s.hop);
  for (double m : s.magnitudes) detail::put_le<float>(out, static_cast<float>(m));
  if (!out) throw Error(Errc::IoFailure, "short write on '" + path + "'");

  nlohmann::json meta = {{"source_trace", s.source_trace}, {"label", label}};
  std::ofstream side(spectrogram_sidecar_path(path));
  if (!side) throw Error(Errc::IoFailure, "cannot write sidecar for '" + path + "'");
  side << meta.dump(2) << '\n';
}

Spectrogram read_spectrogram(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoFailure, "cannot open spectrogram '" + path + "'");
  detail::expect_magic(in, "SYNCSPC1");
  Spectrogram s;
  s.freq_bins = detail::get_le<std::uint32_t>(in);
  s.frames = detail::get_le<std::uint32_t>(in);
  s.window_size = detail::get_le<std::uint32_t>(in);
  s.hop = detail::get_le<std::uint32_t>(in);
  if (s.window_size == 0 || s.freq_bins != s.window_size / 2 + 1) {
    throw Error(Errc::CorruptFile, "freq_bins does not match window_size in '" + path + "'");
  }
  std::size_t n = std::size_t{s.freq_bins} * s.frames;
  s.magnitudes.resize(n);
  for (auto& m : s.magnitudes) m = detail::get_le<float>(in);
  if (in.peek() != std::char_traits<char>::eof()) throw Error(Errc::CorruptFile, "trailing bytes in '" + path + "'");

  std::ifstream side(spectrogram_sidecar_path(path));
  if (side) {
    try {
      s.source_trace = nlohmann::json::parse(side).value("source_trace", "");
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::CorruptFile, "bad sidecar for '" + path + "': " + e.what());
    }
  }
  return s;
}

void write_pgm(const Spectrogram& s, const std::string& path) {
  std::vector<double> logs(s.magnitudes.size());
  std::transform(s.magnitudes.begin(), s.magnitudes.end(), logs.begin(),
                 [](double m) { return std::log1p(m); });
  double lo = logs.empty() ? 0 : *std::min_element(logs.begin(), logs.end());
  double hi = logs.empty() ? 0 : *std::max_element(logs.begin(), logs.end());

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoFailure, "cannot write image '" + path + "'");
  out << "P5\n" << s.frames << ' ' << s.freq_bins << "\n255\n";
  for (std::uint32_t row = 0; row < s.freq_bins; ++row) {
    std::uint32_t bin = s.freq_bins - 1 - row;
    for (std::uint32_t f = 0; f < s.frames; ++f) {
      double v = hi > lo ? (logs[std::size_t{bin} * s.frames + f] - lo) / (hi - lo) : 0.0;
      out.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255))));
    }
  }
  if (!out) throw Error(Errc::IoFailure, "short write on '" + path + "'");
}

}  // namespace syncprobe
