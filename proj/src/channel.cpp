#include "syncprobe/channel.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <ostream>
#include <thread>

#include <json.hpp>

#include "syncprobe/error.hpp"

namespace syncprobe {

Bits bytes_to_bits(std::span<const std::uint8_t> bytes) {
  Bits bits;
  bits.reserve(bytes.size() * 8);
  for (std::uint8_t b : bytes) {
    for (int i = 7; i >= 0; --i) bits.push_back(((b >> i) & 1) ? '1' : '0');
  }
  return bits;
}

std::vector<std::uint8_t> bits_to_bytes(std::string_view bits) {
  std::vector<std::uint8_t> out((bits.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] == '1') out[i / 8] |= static_cast<std::uint8_t>(0x80u >> (i % 8));
  }
  return out;
}

bool is_bit_string(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return c == '0' || c == '1'; });
}

void ChannelConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(Errc::Precondition, "channel config: " + what); };
  if (start_code.empty() || end_code.empty()) fail("start and end codes must be non-empty");
  if (!is_bit_string(start_code) || !is_bit_string(end_code)) fail("codes must be bit strings");
  if (start_code.find(end_code) != Bits::npos || end_code.find(start_code) != Bits::npos) {
    fail("neither code may contain the other");
  }
  if (bit_period == 0) fail("bit_period must be positive");
  if (write_size == 0) fail("write_size must be positive");
  if (threshold && !(*threshold > 0)) fail("threshold must be positive");
}

ChannelConfig ChannelConfig::for_profile(const DelayProfile& profile) {
  FsState one_write;
  apply_op(one_write, IoOp::write_sync(64));
  double worst = expected_delay(one_write, profile, {}) + 6 * delay_sigma(one_write, profile);
  ChannelConfig c;
  auto period = static_cast<Cycles>(std::ceil(2 * worst / 1000.0)) * 1000;
  c.bit_period = std::max<Cycles>(period, 1000);
  c.spin_one = c.spin_zero = c.bit_period / 2;
  c.sync_offset = c.bit_period;
  return c;
}

CycleStamp agree_start(const Clock& clock, Cycles sync_offset) { return clock.now() + sync_offset; }

CycleStamp align_start(CycleStamp stamp, Cycles quantum) {
  if (quantum == 0) return stamp;
  return {(stamp.cycles + quantum - 1) / quantum * quantum};
}

SendReport send(Backend& backend, std::string_view payload_bits, const ChannelConfig& config,
                Clock& clock, CycleStamp start) {
  config.validate();
  if (!is_bit_string(payload_bits)) throw Error(Errc::Precondition, "payload must be a bit string");

  Bits frame = config.start_code;
  frame.append(payload_bits);
  frame.append(config.end_code);

  SendReport r;
  r.start = start;
  const IoOp write = IoOp::write_sync(config.write_size);
  for (std::size_t i = 0; i < frame.size(); ++i) {
    CycleStamp window = start + i * config.bit_period;
    wait_until(clock, window);
    if (frame[i] == '1') {
      backend.perform_io(write, clock);
      spin_nops(clock, config.spin_one);
    } else {
      spin_nops(clock, config.spin_zero);
    }
    if (clock.now() > window + config.bit_period) ++r.overruns;
  }
  r.end = start + frame.size() * config.bit_period;
  wait_until(clock, r.end);
  r.bits_sent = frame.size();
  return r;
}

namespace {

// Incremental window framing used by the receiver to decide when to stop.
// Without a configured threshold the levels are learned from the start code,
// which the synchronized start places at window 0.
class OnlineFramer {
 public:
  OnlineFramer(const ChannelConfig& config, CycleStamp origin) : cfg_(config), origin_(origin) {
    if (cfg_.threshold) threshold_ = *cfg_.threshold;
  }

  // Returns true once the end code and the quiet tail have been observed.
  bool push(const DelaySample& s) {
    if (s.timestamp < origin_) return false;
    std::size_t w = (s.timestamp - origin_) / cfg_.bit_period;
    bool done = false;
    while (current_ < w) done = close_window() || done;
    cur_max_ = std::max(cur_max_, static_cast<double>(s.delay));
    return done;
  }

 private:
  void learn_levels() {
    double lo = 0, hi = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cfg_.start_code.size(); ++i) {
      if (cfg_.start_code[i] == '1') {
        hi = std::min(hi, maxima_[i]);
      } else {
        lo = std::max(lo, maxima_[i]);
      }
    }
    if (hi > lo) threshold_ = (lo + hi) / 2;
  }

  bool close_window() {
    maxima_.push_back(cur_max_);
    cur_max_ = 0;
    ++current_;
    if (!threshold_) {
      if (maxima_.size() < cfg_.start_code.size()) return false;
      learn_levels();
      if (!threshold_) return false;
      for (double m : maxima_) bits_.push_back(m > *threshold_ ? '1' : '0');
    } else {
      bits_.push_back(maxima_.back() > *threshold_ ? '1' : '0');
    }
    if (start_ == Bits::npos) {
      start_ = bits_.find(cfg_.start_code);
      if (start_ == Bits::npos) return false;
    }
    std::size_t tail = cfg_.end_code.size() + cfg_.quiet_windows;
    if (bits_.size() < start_ + cfg_.start_code.size() + tail) return false;
    std::string_view suffix(bits_.data() + bits_.size() - tail, tail);
    return suffix.substr(0, cfg_.end_code.size()) == cfg_.end_code &&
           suffix.find('1', cfg_.end_code.size()) == std::string_view::npos;
  }

  const ChannelConfig& cfg_;
  CycleStamp origin_;
  std::vector<double> maxima_;
  std::optional<double> threshold_;
  Bits bits_;
  std::size_t current_ = 0;
  std::size_t start_ = Bits::npos;
  double cur_max_ = 0;
};

std::vector<double> window_maxima(const DelayTrace& trace, Cycles bit_period) {
  std::vector<double> maxima;
  for (const auto& s : trace.samples) {
    if (s.timestamp < trace.origin) continue;
    std::size_t w = (s.timestamp - trace.origin) / bit_period;
    if (maxima.size() <= w) maxima.resize(w + 1, -std::numeric_limits<double>::infinity());
    maxima[w] = std::max(maxima[w], static_cast<double>(s.delay));
  }
  return maxima;
}

}  // namespace

DelayTrace receive(Backend& backend, const ChannelConfig& config, Clock& clock, CycleStamp start,
                   std::size_t max_samples) {
  config.validate();
  DelayTrace trace;
  trace.backend_kind = backend.kind();
  trace.profile = backend.kind() == BackendKind::Simulated ? backend.label() : "";
  trace.origin = start;
  if (auto* sim = dynamic_cast<SimulatedClock*>(&clock)) trace.clock = {sim->rate(), ClockSource::Simulated};

  OnlineFramer framer(config, start);
  wait_until(clock, start);
  bool finished = false;
  const CycleStamp deadline = config.max_duration ? start + config.max_duration : CycleStamp{~0ull};
  while (!finished && trace.samples.size() < max_samples) {
    CycleStamp t = clock.now();
    if (t >= deadline) break;
    if (!trace.samples.empty() && t <= trace.samples.back().timestamp) t = trace.samples.back().timestamp + 1;
    Cycles d = backend.flush_all(clock);
    trace.samples.push_back({t, d});
    finished = framer.push(trace.samples.back());
  }
  trace.end_code_missing = !finished;
  return trace;
}

double calibrate_threshold(std::span<const double> delays) {
  if (delays.size() < 2) throw Error(Errc::DegenerateTrace, "threshold calibration needs at least 2 samples");
  std::vector<double> values(delays.begin(), delays.end());
  std::vector<double> sorted(values);
  std::sort(sorted.begin(), sorted.end());
  if (sorted.front() == sorted.back()) throw Error(Errc::DegenerateTrace, "all delays are equal; cannot separate bits");
  // Winsorize so a handful of extreme outliers cannot claim a cluster.
  const double n1 = static_cast<double>(sorted.size() - 1);
  double floor_v = sorted[static_cast<std::size_t>(std::floor(0.01 * n1))];
  double ceil_v = sorted[static_cast<std::size_t>(std::ceil(0.99 * n1))];
  if (floor_v < ceil_v) {
    for (double& v : values) v = std::clamp(v, floor_v, ceil_v);
  }
  auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  double boundary = (*mn + *mx) / 2;
  for (int iter = 0; iter < 1000; ++iter) {
    double s0 = 0, s1 = 0;
    std::size_t n0 = 0, n1c = 0;
    for (double v : values) {
      if (v <= boundary) {
        s0 += v;
        ++n0;
      } else {
        s1 += v;
        ++n1c;
      }
    }
    double next = (s0 / static_cast<double>(n0) + s1 / static_cast<double>(n1c)) / 2;
    if (next == boundary) break;
    boundary = next;
  }
  return boundary;
}

double calibrate_threshold(const DelayTrace& trace) {
  auto values = trace.delays();
  return calibrate_threshold(values);
}

Bits window_bits(const DelayTrace& trace, Cycles bit_period, double threshold) {
  if (bit_period == 0) throw Error(Errc::Precondition, "bit_period must be positive");
  auto maxima = window_maxima(trace, bit_period);
  Bits bits(maxima.size(), '0');
  for (std::size_t i = 0; i < maxima.size(); ++i) {
    if (maxima[i] > threshold) bits[i] = '1';
  }
  return bits;
}

DecodeResult decode(const DelayTrace& trace, const ChannelConfig& config) {
  DecodeResult r;
  if (config.threshold) {
    r.threshold = *config.threshold;
  } else {
    if (config.bit_period == 0) throw Error(Errc::Precondition, "bit_period must be positive");
    std::vector<double> occupied;
    for (double m : window_maxima(trace, config.bit_period)) {
      if (std::isfinite(m)) occupied.push_back(m);
    }
    r.threshold = calibrate_threshold(occupied);
  }
  Bits bits = window_bits(trace, config.bit_period, r.threshold);

  std::size_t s = bits.find(config.start_code);
  if (s == Bits::npos) throw Error(Errc::StartCodeNotFound, "start code not found in trace");
  r.start_window = s;
  std::size_t body = s + config.start_code.size();

  if (config.end_code.empty()) {
    r.payload = bits.substr(body);
    r.end_window = bits.size();
    r.end_found = true;
    return r;
  }
  // The end code is followed only by idle windows, so its last occurrence is
  // the true one even when the payload happens to contain the same pattern.
  std::size_t e = bits.rfind(config.end_code);
  if (e == Bits::npos || e < body) {
    r.payload = bits.substr(body);
    r.end_window = bits.size();
    r.end_found = false;
    return r;
  }
  r.payload = bits.substr(body, e - body);
  r.end_window = e + config.end_code.size();
  r.end_found = true;
  return r;
}

std::uint64_t levenshtein(std::string_view a, std::string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::uint64_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::uint64_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      std::uint64_t up = row[j];
      std::uint64_t sub = diag + (a[i - 1] == b[j - 1] ? 0 : 1);
      row[j] = std::min({up + 1, row[j - 1] + 1, sub});
      diag = up;
    }
  }
  return row[b.size()];
}

ChannelReport evaluate(std::string_view sent_bits, std::string_view decoded, double elapsed_seconds) {
  if (!(elapsed_seconds > 0)) throw Error(Errc::Precondition, "elapsed time must be positive");
  ChannelReport r;
  r.sent_bits = sent_bits.size();
  r.elapsed = elapsed_seconds;
  r.bandwidth_kbps = static_cast<double>(r.sent_bits) / elapsed_seconds / 1000.0;
  r.edit_distance = levenshtein(sent_bits, decoded);
  if (r.sent_bits == 0) {
    r.error_rate = decoded.empty() ? 0.0 : 1.0;
  } else {
    r.error_rate = std::min(1.0, static_cast<double>(r.edit_distance) / static_cast<double>(r.sent_bits));
  }
  return r;
}

void write_report_json(std::ostream& out, const ChannelReport& r) {
  nlohmann::json j = {
      {"sent_bits", r.sent_bits},
      {"elapsed_seconds", r.elapsed},
      {"bandwidth_kbps", r.bandwidth_kbps},
      {"edit_distance", r.edit_distance},
      {"error_rate", r.error_rate},
  };
  out << j.dump(2) << '\n';
}

LoopbackResult run_loopback(SimulatedBackend& backend, std::string_view payload_bits,
                            const ChannelConfig& config, double clock_hz, std::size_t max_samples) {
  config.validate();
  SimulatedClock sender_clock(clock_hz);
  SimulatedClock receiver_clock(clock_hz);
  CycleStamp start = agree_start(receiver_clock, config.sync_offset);

  LoopbackResult out;
  std::exception_ptr sender_error;
  backend.attach_writer(&sender_clock);
  std::thread sender([&] {
    try {
      out.sent = send(backend, payload_bits, config, sender_clock, agree_start(sender_clock, config.sync_offset));
    } catch (...) {
      sender_error = std::current_exception();
    }
    sender_clock.close();
  });
  try {
    out.trace = receive(backend, config, receiver_clock, start, max_samples);
  } catch (...) {
    sender.join();
    backend.attach_writer(nullptr);
    throw;
  }
  sender.join();
  backend.attach_writer(nullptr);
  if (sender_error) std::rethrow_exception(sender_error);

  out.decoded = decode(out.trace, config);
  double elapsed = static_cast<double>(out.decoded.end_window - out.decoded.start_window) *
                   static_cast<double>(config.bit_period) / clock_hz;
  out.report = evaluate(payload_bits, out.decoded.payload, elapsed);
  return out;
}

}  // namespace syncprobe
