#pragma once

#include <complex>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "syncprobe/backend.hpp"
#include "syncprobe/trace.hpp"

namespace syncprobe {

/// In-place iterative radix-2 FFT (forward, no normalization).
/// Throws Errc::Precondition unless the length is a power of two.
void fft(std::vector<std::complex<double>>& data);

/// Periodic Hann window of length n.
std::vector<double> hann_window(std::size_t n);

/// STFT magnitudes, stored frequency-major: magnitudes[bin * frames + frame].
struct Spectrogram {
  std::vector<double> magnitudes;
  std::uint32_t freq_bins = 0;
  std::uint32_t frames = 0;
  std::uint32_t window_size = 0;
  std::uint32_t hop = 0;
  std::string source_trace;

  double at(std::uint32_t bin, std::uint32_t frame) const { return magnitudes[std::size_t{bin} * frames + frame]; }
};

/// Each window is mean-centered, Hann-weighted, centered again (so bin 0 is
/// always zero) and transformed; the window_size/2 + 1 non-redundant
/// magnitudes are kept per frame.
/// Throws Errc::TraceTooShort when fewer than window_size values are given.
Spectrogram stft(std::span<const double> values, std::uint32_t window_size, std::uint32_t hop);
Spectrogram stft(const DelayTrace& trace, std::uint32_t window_size = 256, std::uint32_t hop = 128);

struct SnrReport {
  double signal_variance = 0;
  double noise_variance = 0;
  double snr = 0;
};

/// Ratio of population variances. Throws Errc::ZeroNoiseVariance.
SnrReport snr(std::span<const double> signal, std::span<const double> noise);
SnrReport snr(const DelayTrace& signal, const DelayTrace& noise);

struct SpikeEvent {
  std::size_t index = 0;
  Cycles delay = 0;
  double z_score = 0;
};

/// Flags samples whose robust z-score (median / scaled MAD) exceeds
/// z_threshold and merges flags closer than min_separation samples into one
/// event at the local maximum.
std::vector<SpikeEvent> detect_spikes(const DelayTrace& trace, double z_threshold = 6.0,
                                      std::size_t min_separation = 16);

inline constexpr double kUnlimitedRate = std::numeric_limits<double>::infinity();

/// Flush-sampling loop that spaces calls at least 1/max_rate seconds apart.
/// The achieved rate is stored in the returned trace.
DelayTrace rate_limited_probe(Backend& backend, Clock& clock, const ClockCalibration& calibration,
                              double max_rate, std::size_t n_samples);

/// "SYNCSPC1", u32 freq_bins, frames, window_size, hop, then float32
/// magnitudes frequency-major; the JSON sidecar carries source and label.
void write_spectrogram(const Spectrogram& spec, const std::string& path, const std::string& label = "");
Spectrogram read_spectrogram(const std::string& path);

/// 8-bit binary PGM, log-scaled and min-max normalized; highest frequency on
/// the top row.
void write_pgm(const Spectrogram& spec, const std::string& path);

}  // namespace syncprobe
