#include "syncprobe/backend.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstdio>

#include "syncprobe/error.hpp"
#include "syncprobe/profiles.hpp"

namespace syncprobe {

const char* backend_kind_name(BackendKind kind) noexcept {
  return kind == BackendKind::RealMount ? "real" : "simulated";
}

BackendKind parse_backend_kind(const std::string& name) {
  if (name == "real") return BackendKind::RealMount;
  if (name == "simulated" || name == "sim") return BackendKind::Simulated;
  throw Error(Errc::CorruptFile, "unknown backend kind '" + name + "'");
}

BackendDescriptor BackendDescriptor::parse(const std::string& spec) {
  BackendDescriptor d;
  auto colon = spec.find(':');
  std::string scheme = spec.substr(0, colon);
  std::string rest = colon == std::string::npos ? "" : spec.substr(colon + 1);
  if (scheme == "sim") {
    d.kind = BackendKind::Simulated;
    d.profile_name = rest.empty() ? "ext4-orin" : rest;
  } else if (scheme == "real" && !rest.empty()) {
    d.kind = BackendKind::RealMount;
    d.working_path = rest;
  } else {
    throw Error(Errc::Precondition, "backend must be sim:<profile> or real:<path>, got '" + spec + "'");
  }
  return d;
}

// ---------------------------------------------------------------------------

namespace {

SimulatedClock& require_simulated(Clock& clock) {
  auto* sim = dynamic_cast<SimulatedClock*>(&clock);
  if (sim == nullptr) throw Error(Errc::Precondition, "simulated backend needs a simulated clock");
  return *sim;
}

}  // namespace

SimulatedBackend::SimulatedBackend(DelayProfile profile, std::uint64_t noise_seed)
    : profile_(std::move(profile)), noise_(noise_seed) {
  profile_.validate();
}

Cycles SimulatedBackend::perform_io(const IoOp& op, Clock& clock) {
  if (op.kind == IoOpKind::FlushAll) return flush_all(clock);
  op.validate();
  SimulatedClock& sim = require_simulated(clock);
  CycleStamp t = sim.now();
  {
    std::lock_guard lock(mu_);
    pending_.push_back({t, op});
    log_.push_back({t, op});
  }
  auto cost = static_cast<Cycles>(profile_.op_cost);
  sim.advance(cost);
  return cost;
}

void SimulatedBackend::schedule(const IoOp& op, CycleStamp at) {
  op.validate();
  std::lock_guard lock(mu_);
  auto pos = std::upper_bound(pending_.begin(), pending_.end(), at,
                              [](CycleStamp a, const TimedOp& b) { return a < b.at; });
  pending_.insert(pos, {at, op});
}

void SimulatedBackend::inject_event(const TimedEvent& event) {
  std::lock_guard lock(mu_);
  syncprobe::inject_event(state_, event, last_flush_);
}

void SimulatedBackend::drain_until(CycleStamp t) {
  while (!pending_.empty() && pending_.front().at <= t) {
    const IoOp& op = pending_.front().op;
    if (op.kind == IoOpKind::FlushAll) {
      state_.reset_dirty();
    } else {
      apply_op(state_, op);
    }
    pending_.pop_front();
  }
}

Cycles SimulatedBackend::flush_all(Clock& clock) {
  SimulatedClock& sim = require_simulated(clock);
  CycleStamp t = sim.now();
  if (writer_ != nullptr && writer_ != &sim) writer_->wait_for(t + 1);

  Cycles delay;
  {
    std::lock_guard lock(mu_);
    drain_until(t);
    std::erase_if(state_.pending_events, [&](const TimedEvent& e) { return e.expired(t); });
    delay = model_delay(state_, profile_, t, &noise_);
    state_.reset_dirty();
    last_flush_ = t;
  }
  sim.advance(delay);
  return delay;
}

std::vector<TimedOp> SimulatedBackend::op_log() const {
  std::lock_guard lock(mu_);
  return log_;
}

FsState SimulatedBackend::state() const {
  std::lock_guard lock(mu_);
  FsState s = state_;
  for (const auto& t : pending_) apply_op(s, t.op);
  return s;
}

// ---------------------------------------------------------------------------

RealBackend::RealBackend(const std::string& working_path) : dir_(working_path) {
#ifndef __linux__
  throw Error(Errc::Unsupported, "filesystem-wide flush (syncfs) is not available on this platform");
#endif
  struct stat st {};
  if (::stat(dir_.c_str(), &st) != 0 || !S_ISDIR(st.st_mode)) {
    throw Error(Errc::PathNotWritable, "'" + dir_ + "' is not a directory", errno);
  }
  if (::access(dir_.c_str(), W_OK) != 0) {
    throw Error(Errc::PathNotWritable, "'" + dir_ + "' is not writable", errno);
  }
  buffer_.assign(kPageSize, 'x');
  scratch(0);
}

RealBackend::~RealBackend() {
  for (auto& f : files_) {
    if (f.fd >= 0) ::close(f.fd);
    if (f.sync_fd >= 0) ::close(f.sync_fd);
    ::unlink(f.names[f.current].c_str());
  }
}

RealBackend::Scratch& RealBackend::scratch(std::uint32_t index) {
  while (files_.size() <= index) {
    Scratch s;
    std::string stem = dir_ + "/.syncprobe-" + std::to_string(::getpid()) + "-" +
                       std::to_string(files_.size());
    s.names[0] = stem + ".a";
    s.names[1] = stem + ".b";
    s.fd = ::open(s.names[0].c_str(), O_RDWR | O_CREAT | O_TRUNC | O_APPEND | O_CLOEXEC, 0600);
    if (s.fd < 0) {
      int err = errno;
      if (err == EACCES || err == EROFS || err == EPERM) {
        throw Error(Errc::PathNotWritable, "cannot create scratch file in '" + dir_ + "'", err);
      }
      throw_os_error("open " + s.names[0], err);
    }
    files_.push_back(std::move(s));
  }
  return files_[index];
}

void RealBackend::do_op(const IoOp& op) {
  Scratch& f = scratch(op.file);
  auto write_all = [&](int fd) {
    std::uint64_t left = op.size_bytes;
    while (left > 0) {
      std::size_t chunk = static_cast<std::size_t>(std::min<std::uint64_t>(left, buffer_.size()));
      ssize_t n = ::write(fd, buffer_.data(), chunk);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw_os_error("write " + f.names[f.current], errno);
      }
      left -= static_cast<std::uint64_t>(n);
    }
  };

  switch (op.kind) {
    case IoOpKind::Write:
      write_all(f.fd);
      break;
    case IoOpKind::WriteSync:
      if (f.sync_fd < 0) {
        f.sync_fd = ::open(f.names[f.current].c_str(), O_WRONLY | O_APPEND | O_SYNC | O_CLOEXEC);
        if (f.sync_fd < 0) throw_os_error("open O_SYNC " + f.names[f.current], errno);
      }
      write_all(f.sync_fd);
      break;
    case IoOpKind::Ftruncate:
      if (::ftruncate(f.fd, 0) != 0) throw_os_error("ftruncate " + f.names[f.current], errno);
      break;
    case IoOpKind::Rename: {
      int next = 1 - f.current;
      if (::rename(f.names[f.current].c_str(), f.names[next].c_str()) != 0) {
        throw_os_error("rename " + f.names[f.current], errno);
      }
      f.current = next;
      break;
    }
    case IoOpKind::FlushAll:
      break;
  }
}

Cycles RealBackend::perform_io(const IoOp& op, Clock& clock) {
  if (op.kind == IoOpKind::FlushAll) return flush_all(clock);
  op.validate();
  CycleStamp start = clock.now();
  do_op(op);
  return clock.now() - start;
}

Cycles RealBackend::flush_all(Clock& clock) {
  int fd = files_.front().fd;
  CycleStamp start = clock.now();
#ifdef __linux__
  if (::syncfs(fd) != 0) throw_os_error("syncfs", errno);
#endif
  return clock.now() - start;
}

// ---------------------------------------------------------------------------

std::unique_ptr<Backend> open_backend(const BackendDescriptor& d) {
  if (d.kind == BackendKind::RealMount) return std::make_unique<RealBackend>(d.working_path);
  DelayProfile p = d.profile ? *d.profile : find_profile(d.profile_name);
  return std::make_unique<SimulatedBackend>(std::move(p), d.noise_seed);
}

bool on_root_filesystem(const std::string& path) {
  struct stat a {}, b {};
  if (::stat(path.c_str(), &a) != 0 || ::stat("/", &b) != 0) return false;
  return a.st_dev == b.st_dev;
}

}  // namespace syncprobe
