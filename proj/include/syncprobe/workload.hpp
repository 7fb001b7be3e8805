#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "syncprobe/analysis.hpp"
#include "syncprobe/backend.hpp"
#include "syncprobe/trace.hpp"

namespace syncprobe {

/// One timed action of a simulated victim: an I/O operation or an injected
/// mount/unmount event.
struct WorkloadStep {
  Cycles offset = 0;
  std::variant<IoOp, TimedEvent> action;
};

struct WorkloadScript {
  std::string name;
  std::vector<WorkloadStep> steps;  // sorted by offset
};

/// Parses a JSON array of {offset_cycles, op, size_bytes?, file?, extra_delay?,
/// duration?, repeat?, every?} entries. `op` is write, write_sync, ftruncate,
/// rename, mount or unmount; `repeat`/`every` expand an entry into a periodic
/// run. Entries must be sorted by offset_cycles.
WorkloadScript parse_workload(std::string_view json_text, std::string name);
WorkloadScript load_workload(const std::string& path);  // name = file stem

struct WorkloadRun {
  std::size_t n_samples = 4096;
  double max_rate = kUnlimitedRate;
  double clock_hz = 1e9;
  std::uint64_t seed = 0;
  /// Uniform random shift in [0, jitter] cycles applied to the whole script.
  Cycles jitter = 0;
  /// Delay before the script's offset 0, measured from the probe's start.
  Cycles lead_in = 0;
};

/// Schedules the script on a fresh simulated backend and samples it with the
/// (optionally rate-limited) probe loop.
DelayTrace run_workload(const WorkloadScript& script, const DelayProfile& profile, const WorkloadRun& run);

struct DatasetOptions {
  std::size_t traces_per_class = 20;
  std::uint32_t window_size = 256;
  std::uint32_t hop = 128;
  WorkloadRun run;
};

/// Writes <out>/<label>/<label>-NNNN.spec (+ sidecars) for every script and a
/// manifest.json listing classes and counts. Trace i of class c uses noise
/// seed run.seed + 1'000'003 * c + i.
void export_dataset(const std::vector<WorkloadScript>& scripts, const DelayProfile& profile,
                    const DatasetOptions& options, const std::string& out_dir);

}  // namespace syncprobe
