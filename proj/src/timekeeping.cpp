#include "syncprobe/timekeeping.hpp"

#include <cmath>
#include <thread>

#include "syncprobe/error.hpp"

#if defined(__x86_64__) || defined(__i386__)
#include <x86intrin.h>
#endif

namespace syncprobe {

const char* clock_source_name(ClockSource source) noexcept {
  switch (source) {
    case ClockSource::HardwareCounter: return "hardware-counter";
    case ClockSource::OsClock: return "os-clock";
    case ClockSource::Simulated: return "simulated";
  }
  return "unknown";
}

ClockSource parse_clock_source(const std::string& name) {
  if (name == "hardware-counter") return ClockSource::HardwareCounter;
  if (name == "os-clock") return ClockSource::OsClock;
  if (name == "simulated") return ClockSource::Simulated;
  throw Error(Errc::CorruptFile, "unknown clock source '" + name + "'");
}

Cycles ClockCalibration::from_seconds(double s) const {
  return static_cast<Cycles>(std::llround(s * cycles_per_second));
}

// ---------------------------------------------------------------------------

bool HardwareClock::available() noexcept {
#if defined(__x86_64__) || defined(__i386__) || defined(__aarch64__)
  return true;
#else
  return false;
#endif
}

HardwareClock::HardwareClock() {
  if (!available()) {
    throw Error(Errc::CounterUnavailable, "no user-readable cycle counter on this platform");
  }
}

CycleStamp HardwareClock::now() const {
#if defined(__x86_64__) || defined(__i386__)
  unsigned aux = 0;
  return {__rdtscp(&aux)};
#elif defined(__aarch64__)
  std::uint64_t v;
  asm volatile("isb; mrs %0, cntvct_el0" : "=r"(v) :: "memory");
  return {v};
#else
  return {0};
#endif
}

// ---------------------------------------------------------------------------

OsClock::OsClock(double pseudo_hz) : hz_(pseudo_hz), epoch_(std::chrono::steady_clock::now()) {
  if (!(pseudo_hz > 0)) throw Error(Errc::Precondition, "OS clock rate must be positive");
}

CycleStamp OsClock::now() const {
  auto ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                std::chrono::steady_clock::now() - epoch_)
                .count();
  return {static_cast<std::uint64_t>(static_cast<long double>(ns) * hz_ / 1e9L)};
}

// ---------------------------------------------------------------------------

SimulatedClock::SimulatedClock(double configured_hz, CycleStamp start)
    : hz_(configured_hz), value_(start.cycles) {
  if (!(configured_hz > 0)) throw Error(Errc::Precondition, "simulated clock rate must be positive");
}

void SimulatedClock::publish(std::uint64_t v) {
  {
    std::lock_guard lock(mu_);
    value_.store(v, std::memory_order_release);
  }
  cv_.notify_all();
}

void SimulatedClock::advance(Cycles delta) {
  if (delta == 0) return;
  publish(value_.load(std::memory_order_relaxed) + delta);
}

void SimulatedClock::advance_to(CycleStamp target) {
  if (target.cycles > value_.load(std::memory_order_relaxed)) publish(target.cycles);
}

void SimulatedClock::close() {
  {
    std::lock_guard lock(mu_);
    closed_.store(true, std::memory_order_release);
  }
  cv_.notify_all();
}

void SimulatedClock::wait_for(CycleStamp target) const {
  if (value_.load(std::memory_order_acquire) >= target.cycles || closed()) return;
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] {
    return value_.load(std::memory_order_acquire) >= target.cycles || closed();
  });
}

// ---------------------------------------------------------------------------

ClockCalibration calibrate(const Clock& clock, std::chrono::milliseconds sample_duration) {
  if (clock.source() == ClockSource::Simulated) {
    if (sample_duration.count() <= 0) {
      throw Error(Errc::CalibrationFailed, "calibration interval must be positive");
    }
    return {static_cast<const SimulatedClock&>(clock).rate(), ClockSource::Simulated};
  }
  if (sample_duration < std::chrono::milliseconds(10)) {
    throw Error(Errc::CalibrationFailed, "calibration interval must be at least 10 ms");
  }
  auto wall0 = std::chrono::steady_clock::now();
  CycleStamp c0 = clock.now();
  std::this_thread::sleep_for(sample_duration);
  CycleStamp c1 = clock.now();
  auto wall1 = std::chrono::steady_clock::now();

  double secs = std::chrono::duration<double>(wall1 - wall0).count();
  if (secs <= 0 || c1 <= c0) throw Error(Errc::CalibrationFailed, "no elapsed time observed");
  return {static_cast<double>(c1 - c0) / secs, clock.source()};
}

std::unique_ptr<Clock> make_system_clock() {
  if (HardwareClock::available()) return std::make_unique<HardwareClock>();
  return std::make_unique<OsClock>();
}

void wait_until(Clock& clock, CycleStamp target) {
  if (auto* sim = dynamic_cast<SimulatedClock*>(&clock)) {
    sim->advance_to(target);
    return;
  }
  while (clock.now() < target) {
  }
}

void spin_nops(Clock& clock, std::uint64_t iterations) {
  if (auto* sim = dynamic_cast<SimulatedClock*>(&clock)) {
    sim->advance(iterations);
    return;
  }
  for (std::uint64_t i = 0; i < iterations; ++i) asm volatile("nop");
}

}  // namespace syncprobe
