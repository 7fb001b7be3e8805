#pragma once

#include <atomic>
#include <chrono>
#include <compare>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>

namespace syncprobe {

/// A duration measured in counter ticks.
using Cycles = std::uint64_t;

/// A reading of a monotonic cycle counter.
struct CycleStamp {
  std::uint64_t cycles = 0;

  friend constexpr auto operator<=>(CycleStamp, CycleStamp) = default;
  friend constexpr CycleStamp operator+(CycleStamp s, Cycles d) { return {s.cycles + d}; }
  friend constexpr Cycles operator-(CycleStamp a, CycleStamp b) { return a.cycles - b.cycles; }
};

enum class ClockSource { HardwareCounter, OsClock, Simulated };

const char* clock_source_name(ClockSource source) noexcept;
ClockSource parse_clock_source(const std::string& name);

struct ClockCalibration {
  double cycles_per_second = 1e9;
  ClockSource source = ClockSource::Simulated;

  double to_seconds(Cycles c) const { return static_cast<double>(c) / cycles_per_second; }
  Cycles from_seconds(double s) const;
};

/// Monotonic counter. Reads are safe from any thread.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual CycleStamp now() const = 0;
  virtual ClockSource source() const noexcept = 0;
};

/// rdtsc on x86-64, CNTVCT_EL0 on AArch64. Construction throws
/// Errc::CounterUnavailable on other targets.
class HardwareClock final : public Clock {
 public:
  HardwareClock();
  CycleStamp now() const override;
  ClockSource source() const noexcept override { return ClockSource::HardwareCounter; }

  static bool available() noexcept;
};

/// std::chrono::steady_clock scaled to pseudo-cycles.
class OsClock final : public Clock {
 public:
  explicit OsClock(double pseudo_hz = 1e9);
  CycleStamp now() const override;
  ClockSource source() const noexcept override { return ClockSource::OsClock; }
  double rate() const noexcept { return hz_; }

 private:
  double hz_;
  std::chrono::steady_clock::time_point epoch_;
};

/// Deterministic clock that only moves when advanced. Readers may block until
/// the counter reaches a target, which is how a simulated receiver waits for a
/// simulated sender running on another thread.
class SimulatedClock final : public Clock {
 public:
  explicit SimulatedClock(double configured_hz = 1e9, CycleStamp start = {});

  CycleStamp now() const override { return {value_.load(std::memory_order_acquire)}; }
  ClockSource source() const noexcept override { return ClockSource::Simulated; }
  double rate() const noexcept { return hz_; }

  void advance(Cycles delta);
  /// Moves forward to `target`; no-op when already past it.
  void advance_to(CycleStamp target);

  /// Marks the owning actor as finished; wakes every waiter.
  void close();
  bool closed() const noexcept { return closed_.load(std::memory_order_acquire); }

  /// Blocks until now() >= target or the clock is closed.
  void wait_for(CycleStamp target) const;

 private:
  void publish(std::uint64_t v);

  double hz_;
  std::atomic<std::uint64_t> value_;
  std::atomic<bool> closed_{false};
  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
};

/// Estimates the counter rate against the OS monotonic clock over one
/// interval. Simulated clocks return their configured rate.
ClockCalibration calibrate(const Clock& clock, std::chrono::milliseconds sample_duration);

/// Picks the best available non-simulated clock: hardware counter when
/// present, OS clock otherwise.
std::unique_ptr<Clock> make_system_clock();

/// Busy-waits (or advances, for simulated clocks) until now() >= target.
void wait_until(Clock& clock, CycleStamp target);

/// Burns `iterations` no-op loop iterations. Simulated clocks advance by the
/// same number of cycles.
void spin_nops(Clock& clock, std::uint64_t iterations);

}  // namespace syncprobe
