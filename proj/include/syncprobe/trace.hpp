#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "syncprobe/backend.hpp"
#include "syncprobe/timekeeping.hpp"

namespace syncprobe {

struct DelaySample {
  CycleStamp timestamp;
  Cycles delay = 0;

  friend bool operator==(const DelaySample&, const DelaySample&) = default;
};

/// Timestamped flush delays as seen by a probing actor.
struct DelayTrace {
  std::vector<DelaySample> samples;
  ClockCalibration clock;
  BackendKind backend_kind = BackendKind::Simulated;
  std::string profile;
  /// Anchor for bit windows; the synchronized start for channel traces.
  CycleStamp origin;
  std::optional<double> achieved_rate;  // calls per second
  /// Set by the receiver when max_samples ran out before the end code.
  bool end_code_missing = false;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  std::vector<double> delays() const;

  /// Throws Errc::Precondition unless timestamps are strictly increasing.
  void validate() const;
};

/// Trace sidecar: the extension is replaced by ".meta.json".
std::string sidecar_path(const std::string& path);
/// Spectrogram sidecar: ".meta.json" is appended, so "x.spec" and "x.trc"
/// never share one.
std::string spectrogram_sidecar_path(const std::string& path);

/// Binary layout: "SYNCTRC1", u32 count, then count x (u64 timestamp,
/// u64 delay), all little-endian. Metadata goes to the JSON sidecar.
void write_trace(const DelayTrace& trace, const std::string& path);
DelayTrace read_trace(const std::string& path);

}  // namespace syncprobe
