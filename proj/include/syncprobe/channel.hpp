#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "syncprobe/backend.hpp"
#include "syncprobe/trace.hpp"

namespace syncprobe {

/// A bit string spelled with '0' and '1'.
using Bits = std::string;

Bits bytes_to_bits(std::span<const std::uint8_t> bytes);  // MSB first
std::vector<std::uint8_t> bits_to_bytes(std::string_view bits);  // pads the last byte with 0s
bool is_bit_string(std::string_view s);

struct ChannelConfig {
  Cycles bit_period = 100'000;
  std::uint64_t spin_one = 50'000;   // no-op iterations after the write (bit 1)
  std::uint64_t spin_zero = 50'000;  // no-op iterations (bit 0)
  std::uint64_t write_size = 64;
  /// Decision threshold on the per-window maximum delay; unset means
  /// calibrate from the received trace.
  std::optional<double> threshold;
  Bits start_code = "10101010";
  Bits end_code = "1111111111";
  Cycles sync_offset = 100'000;
  /// Idle windows the receiver must see after the end code before it stops.
  std::uint32_t quiet_windows = 32;
  /// Receiver gives up this many cycles after the start; 0 means never.
  Cycles max_duration = 0;

  /// Checks codes, period and sizes; throws Errc::Precondition.
  void validate() const;

  /// Period sized so one synchronous-write flush plus six standard deviations
  /// fits twice over, rounded up to 1000 cycles. Spins take half the period.
  static ChannelConfig for_profile(const DelayProfile& profile);
};

struct Message {
  std::vector<std::uint8_t> payload;

  Bits bits() const { return bytes_to_bits(payload); }
};

struct SendReport {
  std::uint64_t bits_sent = 0;  // including start and end codes
  std::uint64_t overruns = 0;   // windows whose work exceeded bit_period
  CycleStamp start;
  CycleStamp end;
};

struct DecodeResult {
  Bits payload;
  double threshold = 0;
  std::size_t start_window = 0;  // first window of the start code
  std::size_t end_window = 0;    // one past the last window of the end code
  bool end_found = false;
};

struct ChannelReport {
  std::uint64_t sent_bits = 0;
  double elapsed = 0;  // seconds
  double bandwidth_kbps = 0;
  std::uint64_t edit_distance = 0;
  double error_rate = 0;
};

/// Start stamp both parties agree on: current counter plus a fixed offset.
CycleStamp agree_start(const Clock& clock, Cycles sync_offset);
/// Rounds up to the next multiple of `quantum`, letting independently launched
/// processes land on the same start.
CycleStamp align_start(CycleStamp stamp, Cycles quantum);

/// Transmits start_code ++ payload ++ end_code, one bit per bit_period window
/// starting at `start`: a synchronous write for 1, idle spinning for 0.
SendReport send(Backend& backend, std::string_view payload_bits, const ChannelConfig& config,
                Clock& clock, CycleStamp start);

/// Flushes in a loop from `start`, recording every delay, until the end code
/// followed by quiet_windows idle windows is seen, max_samples is reached or
/// max_duration runs out. Without a configured threshold the stop rule learns
/// the bit levels from the start code at window 0.
DelayTrace receive(Backend& backend, const ChannelConfig& config, Clock& clock, CycleStamp start,
                   std::size_t max_samples);

/// Two-means split of the delay values, winsorized at the 1st and 99th
/// percentiles; midpoint of the cluster means.
/// Throws Errc::DegenerateTrace when all delays are equal.
double calibrate_threshold(std::span<const double> delays);
double calibrate_threshold(const DelayTrace& trace);

/// Per-window bits from trace.origin: 1 where the window's maximum delay
/// exceeds `threshold`. Windows without samples read as 0.
Bits window_bits(const DelayTrace& trace, Cycles bit_period, double threshold);

/// Without a configured threshold, calibrates on the per-window maxima.
/// Locates the first start-code match and the last end-code match after it.
/// Throws Errc::StartCodeNotFound; a missing end code returns everything after
/// the start code with end_found = false.
DecodeResult decode(const DelayTrace& trace, const ChannelConfig& config);

std::uint64_t levenshtein(std::string_view a, std::string_view b);

ChannelReport evaluate(std::string_view sent_bits, std::string_view decoded, double elapsed_seconds);

void write_report_json(std::ostream& out, const ChannelReport& report);

struct LoopbackResult {
  SendReport sent;
  DelayTrace trace;
  DecodeResult decoded;
  ChannelReport report;
};

/// Runs sender and receiver as two threads over one simulated backend, each
/// with its own simulated clock on a shared time base.
LoopbackResult run_loopback(SimulatedBackend& backend, std::string_view payload_bits,
                            const ChannelConfig& config, double clock_hz = 1e9,
                            std::size_t max_samples = 10'000'000);

}  // namespace syncprobe
