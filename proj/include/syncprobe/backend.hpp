#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "syncprobe/io_op.hpp"
#include "syncprobe/simulator.hpp"
#include "syncprobe/timekeeping.hpp"

namespace syncprobe {

enum class BackendKind { RealMount, Simulated };

const char* backend_kind_name(BackendKind kind) noexcept;
BackendKind parse_backend_kind(const std::string& name);

struct BackendDescriptor {
  BackendKind kind = BackendKind::Simulated;
  std::string working_path;  // RealMount
  std::string profile_name;  // Simulated
  /// Replaces the named profile when set (Simulated).
  std::optional<DelayProfile> profile;
  std::uint64_t noise_seed = 0;

  /// "sim:<profile>" or "real:<path>".
  static BackendDescriptor parse(const std::string& spec);
};

/// The five primitive actions. Every call is timed with the caller's clock;
/// the simulated backend additionally advances that clock.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual BackendKind kind() const noexcept = 0;
  /// Profile name for simulated backends, mount path for real ones.
  virtual std::string label() const = 0;

  /// Returns the operation's own elapsed cycles.
  virtual Cycles perform_io(const IoOp& op, Clock& clock) = 0;
  /// Filesystem-wide flush; returns its delay in cycles.
  virtual Cycles flush_all(Clock& clock) = 0;
};

struct TimedOp {
  CycleStamp at;
  IoOp op;
};

/// Flush-delay model behind the backend interface. Thread-safe for one writer
/// actor and one flushing actor: operations are stamped with the writer's
/// simulated time and a flush at time t absorbs every operation stamped at or
/// before t. When a writer clock is attached, a flush first waits until the
/// writer has moved past t, which makes two-thread runs deterministic.
class SimulatedBackend final : public Backend {
 public:
  explicit SimulatedBackend(DelayProfile profile, std::uint64_t noise_seed = 0);

  BackendKind kind() const noexcept override { return BackendKind::Simulated; }
  std::string label() const override { return profile_.name; }

  Cycles perform_io(const IoOp& op, Clock& clock) override;
  Cycles flush_all(Clock& clock) override;

  /// Queues an operation at an explicit time without touching any clock.
  void schedule(const IoOp& op, CycleStamp at);
  void inject_event(const TimedEvent& event);
  void attach_writer(const SimulatedClock* writer) { writer_ = writer; }

  /// Every operation issued through perform_io, in order.
  std::vector<TimedOp> op_log() const;
  /// Dirty state including operations not yet absorbed by a flush.
  FsState state() const;
  const DelayProfile& profile() const noexcept { return profile_; }

 private:
  void drain_until(CycleStamp t);

  DelayProfile profile_;
  mutable std::mutex mu_;
  FsState state_;
  std::deque<TimedOp> pending_;
  std::vector<TimedOp> log_;
  NoiseSource noise_;
  CycleStamp last_flush_{};
  const SimulatedClock* writer_ = nullptr;
};

/// Issues real system calls against scratch files created inside a writable
/// directory. Scratch files are removed on destruction.
class RealBackend final : public Backend {
 public:
  explicit RealBackend(const std::string& working_path);
  ~RealBackend() override;
  RealBackend(const RealBackend&) = delete;
  RealBackend& operator=(const RealBackend&) = delete;

  BackendKind kind() const noexcept override { return BackendKind::RealMount; }
  std::string label() const override { return dir_; }

  Cycles perform_io(const IoOp& op, Clock& clock) override;
  Cycles flush_all(Clock& clock) override;

 private:
  struct Scratch {
    std::string names[2];
    int current = 0;
    int fd = -1;
    int sync_fd = -1;
  };
  Scratch& scratch(std::uint32_t index);
  void do_op(const IoOp& op);

  std::string dir_;
  std::vector<Scratch> files_;
  std::vector<char> buffer_;
};

std::unique_ptr<Backend> open_backend(const BackendDescriptor& descriptor);

/// True when `path` lives on the same device as "/".
bool on_root_filesystem(const std::string& path);

}  // namespace syncprobe
