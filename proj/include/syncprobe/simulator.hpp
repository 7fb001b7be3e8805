#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "syncprobe/io_op.hpp"
#include "syncprobe/timekeeping.hpp"

namespace syncprobe {

inline constexpr std::uint64_t kPageSize = 4096;

enum class EventKind { ContainerMount, ContainerUnmount };

/// Transient extra flush latency, e.g. superblock lock contention while a
/// container mounts. Active over the closed window [at, at + duration].
struct TimedEvent {
  EventKind kind = EventKind::ContainerMount;
  CycleStamp at;
  Cycles extra_delay = 0;
  Cycles duration = 0;

  bool covers(CycleStamp t) const { return at <= t && t.cycles <= at.cycles + duration; }
  bool expired(CycleStamp t) const { return at.cycles + duration < t.cycles; }
};

/// Pending dirty state the next filesystem-wide flush must write back.
struct FsState {
  std::uint64_t dirty_bytes = 0;
  std::uint64_t dirty_inodes = 0;
  std::uint64_t journal_entries = 0;
  std::vector<TimedEvent> pending_events;

  bool clean() const { return dirty_bytes == 0 && dirty_inodes == 0 && journal_entries == 0; }
  /// Zeroes the three dirty counters; events are time-driven and stay.
  void reset_dirty() { dirty_bytes = dirty_inodes = journal_entries = 0; }
};

enum class NoiseKind { None, Gaussian, Lognormal };

const char* noise_kind_name(NoiseKind kind) noexcept;
NoiseKind parse_noise_kind(const std::string& name);

/// Linear flush-cost model. Costs are in cycles; page costs are per 4096-byte
/// page and are applied pro rata per byte.
///
/// Noise standard deviation for a flush is
///   noise_sigma + noise_slope * (dirty cost) + above_page_noise * (pages past the first)
/// so that clean flushes carry the baseline dispersion and dirty flushes
/// widen with the work they do.
struct DelayProfile {
  std::string name;
  double base_delay = 1;
  double page_cost = 0;
  double above_page_cost = 0;
  double inode_cost = 0;
  double journal_cost = 0;
  double per_file_write_slope = 0;
  NoiseKind noise_kind = NoiseKind::None;
  double noise_sigma = 0;
  double noise_slope = 0;
  double above_page_noise = 0;
  /// Simulated duration of the I/O call itself (not of its flush).
  double op_cost = 500;

  /// Throws Errc::Precondition on violated invariants.
  void validate() const;

  friend bool operator==(const DelayProfile&, const DelayProfile&) = default;
};

/// Applies the dirty-state effect of one operation (FlushAll excluded).
void apply_op(FsState& state, const IoOp& op);

/// Noise-free part of the flush delay, as a real number.
double expected_delay(const FsState& state, const DelayProfile& profile, CycleStamp now);
/// Standard deviation of the flush delay for this state.
double delay_sigma(const FsState& state, const DelayProfile& profile);

/// Seeded per-handle noise stream.
class NoiseSource {
 public:
  explicit NoiseSource(std::uint64_t seed = 0) : rng_(seed) {}

  /// Draws a delay with the given mean and standard deviation; never below 1.
  Cycles draw(double mean, double sigma, NoiseKind kind);
  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

/// Flush delay for `state` at time `now`. Exact when noise is null or the
/// profile's noise kind is None.
Cycles model_delay(const FsState& state, const DelayProfile& profile, CycleStamp now,
                   NoiseSource* noise = nullptr);

/// Appends `event` and prunes events whose window lies entirely before `now`
/// (including `event` itself).
void inject_event(FsState& state, const TimedEvent& event, CycleStamp now);

/// Measured means (and optionally dispersions and concurrency slopes) a
/// profile is solved from.
struct BenchTargets {
  std::string name;
  double baseline = 0;
  std::optional<double> write;
  std::optional<double> write_sync;
  std::optional<double> ftruncate;
  std::optional<double> rename;

  std::optional<double> baseline_stddev;
  std::optional<double> write_sync_stddev;

  // Per-file concurrency slopes.
  std::optional<double> slope_write_sync;
  std::optional<double> slope_ftruncate;
  std::optional<double> slope_write;
  std::uint64_t slope_write_size = 64;

  /// above_page_cost = ratio * page_cost.
  double above_page_ratio = 0.125;
  /// above_page_noise = ratio * above_page_cost.
  double above_page_noise_ratio = 0.5;
};

/// Solves profile constants so that model_delay reproduces the targets.
/// With all four operation means: base from the baseline, journal from the
/// synchronous write, inode+journal from the mean of ftruncate and rename,
/// page cost from the residual of write. With slopes only: journal from the
/// synchronous-write slope, inode from the ftruncate slope, page cost from the
/// write slope at slope_write_size bytes per file.
/// Throws Errc::InconsistentTargets naming the constraint that went negative.
DelayProfile calibrate_profile(const BenchTargets& targets);

}  // namespace syncprobe
