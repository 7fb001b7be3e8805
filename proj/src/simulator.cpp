#include "syncprobe/simulator.hpp"

#include <algorithm>
#include <cmath>

#include "syncprobe/error.hpp"

namespace syncprobe {

const char* noise_kind_name(NoiseKind kind) noexcept {
  switch (kind) {
    case NoiseKind::None: return "none";
    case NoiseKind::Gaussian: return "gaussian";
    case NoiseKind::Lognormal: return "lognormal";
  }
  return "none";
}

NoiseKind parse_noise_kind(const std::string& name) {
  if (name == "none" || name == "off") return NoiseKind::None;
  if (name == "gaussian" || name == "on") return NoiseKind::Gaussian;
  if (name == "lognormal") return NoiseKind::Lognormal;
  throw Error(Errc::Precondition, "unknown noise kind '" + name + "'");
}

void DelayProfile::validate() const {
  auto fail = [&](const std::string& what) {
    throw Error(Errc::Precondition, "profile '" + name + "': " + what);
  };
  if (!(base_delay > 0)) fail("base_delay must be positive");
  for (double v : {page_cost, above_page_cost, inode_cost, journal_cost, per_file_write_slope,
                   noise_sigma, noise_slope, above_page_noise, op_cost}) {
    if (!(v >= 0) || !std::isfinite(v)) fail("costs and noise terms must be finite and non-negative");
  }
  // The sub-page regime must be the steeper one. A profile without page cost
  // (flat-test) has both slopes at zero.
  if (page_cost > 0 ? !(above_page_cost < page_cost) : above_page_cost != 0) {
    fail("above_page_cost must be smaller than page_cost");
  }
}

void apply_op(FsState& state, const IoOp& op) {
  op.validate();
  switch (op.kind) {
    case IoOpKind::Write:
      state.dirty_bytes += op.size_bytes;
      state.dirty_inodes += 1;
      state.journal_entries += 1;
      break;
    case IoOpKind::WriteSync:
      state.journal_entries += 1;
      break;
    case IoOpKind::Ftruncate:
    case IoOpKind::Rename:
      state.dirty_inodes += 1;
      state.journal_entries += 1;
      break;
    case IoOpKind::FlushAll:
      break;
  }
}

namespace {

double page_term(std::uint64_t bytes, const DelayProfile& p) {
  double below = static_cast<double>(std::min(bytes, kPageSize));
  double above = static_cast<double>(bytes > kPageSize ? bytes - kPageSize : 0);
  return p.page_cost * below / kPageSize + p.above_page_cost * above / kPageSize;
}

double dirty_cost(const FsState& s, const DelayProfile& p) {
  return page_term(s.dirty_bytes, p) + p.inode_cost * static_cast<double>(s.dirty_inodes) +
         p.journal_cost * static_cast<double>(s.journal_entries);
}

double event_term(const FsState& s, CycleStamp now) {
  double extra = 0;
  for (const auto& e : s.pending_events) {
    if (e.covers(now)) extra += static_cast<double>(e.extra_delay);
  }
  return extra;
}

}  // namespace

double expected_delay(const FsState& state, const DelayProfile& profile, CycleStamp now) {
  return profile.base_delay + dirty_cost(state, profile) + event_term(state, now);
}

double delay_sigma(const FsState& state, const DelayProfile& profile) {
  double pages_above = state.dirty_bytes > kPageSize
                           ? static_cast<double>(state.dirty_bytes - kPageSize) / kPageSize
                           : 0.0;
  return profile.noise_sigma + profile.noise_slope * dirty_cost(state, profile) +
         profile.above_page_noise * pages_above;
}

Cycles NoiseSource::draw(double mean, double sigma, NoiseKind kind) {
  double v = mean;
  if (sigma > 0) {
    switch (kind) {
      case NoiseKind::None:
        break;
      case NoiseKind::Gaussian: {
        std::normal_distribution<double> d(mean, sigma);
        v = d(rng_);
        break;
      }
      case NoiseKind::Lognormal: {
        // Parameterized so the draw keeps the requested mean and deviation.
        double s2 = std::log1p((sigma * sigma) / (mean * mean));
        std::lognormal_distribution<double> d(std::log(mean) - s2 / 2, std::sqrt(s2));
        v = d(rng_);
        break;
      }
    }
  }
  return static_cast<Cycles>(std::max<long long>(1, std::llround(v)));
}

Cycles model_delay(const FsState& state, const DelayProfile& profile, CycleStamp now,
                   NoiseSource* noise) {
  double mean = expected_delay(state, profile, now);
  if (noise == nullptr || profile.noise_kind == NoiseKind::None) {
    return static_cast<Cycles>(std::llround(mean));
  }
  return noise->draw(mean, delay_sigma(state, profile), profile.noise_kind);
}

void inject_event(FsState& state, const TimedEvent& event, CycleStamp now) {
  if (event.duration == 0 || event.extra_delay == 0) {
    throw Error(Errc::Precondition, "events need positive duration and extra_delay");
  }
  state.pending_events.push_back(event);
  std::erase_if(state.pending_events, [&](const TimedEvent& e) { return e.expired(now); });
}

DelayProfile calibrate_profile(const BenchTargets& t) {
  auto require_nonneg = [&](double v, const char* constraint) {
    if (!(v >= 0)) {
      throw Error(Errc::InconsistentTargets,
                  std::string("targets '") + t.name + "': " + constraint + " solves to " +
                      std::to_string(v) + " < 0");
    }
    return v;
  };

  DelayProfile p;
  p.name = t.name;
  if (!(t.baseline > 0)) throw Error(Errc::InconsistentTargets, "baseline mean must be positive");
  p.base_delay = t.baseline;

  bool have_means = t.write && t.write_sync && t.ftruncate && t.rename;
  bool have_slopes = t.slope_write && t.slope_write_sync && t.slope_ftruncate;
  double per_file_bytes = static_cast<double>(std::min(t.slope_write_size, kPageSize));

  if (have_means) {
    p.journal_cost = require_nonneg(*t.write_sync - t.baseline, "journal_cost (write_sync - baseline)");
    double inode_journal = require_nonneg((*t.ftruncate + *t.rename) / 2 - t.baseline,
                                          "inode+journal (mean(ftruncate, rename) - baseline)");
    p.inode_cost = require_nonneg(inode_journal - p.journal_cost, "inode_cost");
    p.page_cost = require_nonneg(*t.write - t.baseline - inode_journal, "page_cost (write residual)");
  } else if (have_slopes) {
    if (t.slope_write_size == 0) throw Error(Errc::InconsistentTargets, "slope_write_size must be positive");
    p.journal_cost = require_nonneg(*t.slope_write_sync, "journal_cost (write_sync slope)");
    p.inode_cost = require_nonneg(*t.slope_ftruncate - *t.slope_write_sync, "inode_cost (ftruncate slope)");
    p.page_cost = require_nonneg((*t.slope_write - *t.slope_ftruncate) * kPageSize / per_file_bytes,
                                 "page_cost (write slope)");
  } else {
    throw Error(Errc::InconsistentTargets,
                "targets need either all four operation means or all three concurrency slopes");
  }

  p.per_file_write_slope =
      t.slope_write ? *t.slope_write
                    : p.page_cost * per_file_bytes / kPageSize + p.inode_cost + p.journal_cost;
  p.above_page_cost = p.page_cost * t.above_page_ratio;

  if (t.baseline_stddev) {
    p.noise_kind = NoiseKind::Gaussian;
    p.noise_sigma = *t.baseline_stddev;
    if (t.write_sync_stddev && p.journal_cost > 0) {
      p.noise_slope = require_nonneg((*t.write_sync_stddev - *t.baseline_stddev) / p.journal_cost,
                                     "noise_slope (write_sync stddev - baseline stddev)");
    }
    p.above_page_noise = p.above_page_cost * t.above_page_noise_ratio;
  }
  p.validate();
  return p;
}

}  // namespace syncprobe
