// syncprobe command-line front end.
//
// Exit codes: 0 success, 2 usage error, 3 I/O failure, 4 analysis error.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "syncprobe/analysis.hpp"
#include "syncprobe/backend.hpp"
#include "syncprobe/channel.hpp"
#include "syncprobe/error.hpp"
#include "syncprobe/microbench.hpp"
#include "syncprobe/profiles.hpp"
#include "syncprobe/trace.hpp"
#include "syncprobe/workload.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace syncprobe;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitAnalysis = 4;

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::IoFailure:
    case Errc::PathNotWritable:
    case Errc::CorruptFile:
    case Errc::CounterUnavailable:
    case Errc::Unsupported:
      return kExitIo;
    case Errc::Precondition:
    case Errc::UnknownProfile:
      return kExitUsage;
    case Errc::CalibrationFailed:
    case Errc::InconsistentTargets:
    case Errc::DegenerateX:
    case Errc::DegenerateTrace:
    case Errc::StartCodeNotFound:
    case Errc::TraceTooShort:
    case Errc::ZeroNoiseVariance:
      return kExitAnalysis;
  }
  return kExitAnalysis;
}

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Shared option groups

struct BackendOptions {
  std::string spec = "sim:ext4-orin";
  std::string noise = "profile";
  double noise_sigma = -1;
  std::uint64_t seed = 0;
  double clock_hz = 1e9;
  bool flush_scope_ack = false;

  void add(CLI::App& app) {
    app.add_option("--backend", spec, "sim:<profile> or real:<path>")->capture_default_str();
    app.add_option("--noise", noise, "simulated noise: profile, off, gaussian, lognormal")->capture_default_str();
    app.add_option("--noise-sigma", noise_sigma, "override the baseline noise standard deviation (cycles)");
    app.add_option("--seed", seed, "noise seed for the simulated backend")->capture_default_str();
    app.add_option("--clock-hz", clock_hz, "simulated clock rate")->capture_default_str();
    app.add_flag("--i-understand-flush-scope", flush_scope_ack,
                 "allow a real backend on the root filesystem (flushes affect every tenant)");
  }

  BackendDescriptor descriptor() const {
    BackendDescriptor d = BackendDescriptor::parse(spec);
    d.noise_seed = seed;
    if (d.kind == BackendKind::Simulated) {
      DelayProfile p = find_profile(d.profile_name);
      if (noise != "profile") {
        p.noise_kind = parse_noise_kind(noise);
        if (p.noise_kind != NoiseKind::None && p.noise_sigma == 0 && noise_sigma < 0) {
          throw UsageError("profile '" + p.name + "' has no noise model; pass --noise-sigma");
        }
      }
      if (noise_sigma >= 0) p.noise_sigma = noise_sigma;
      d.profile = p;
    } else if (on_root_filesystem(d.working_path) && !flush_scope_ack) {
      throw UsageError("'" + d.working_path +
                       "' is on the root filesystem; pass --i-understand-flush-scope to flush it");
    }
    return d;
  }

  bool simulated() const { return spec.rfind("sim", 0) == 0; }
};

struct Actor {
  std::unique_ptr<Backend> backend;
  std::unique_ptr<Clock> clock;
  ClockCalibration calibration;
};

Actor open_actor(const BackendOptions& opts, bool need_calibration = true) {
  Actor a;
  BackendDescriptor d = opts.descriptor();
  a.backend = open_backend(d);
  if (d.kind == BackendKind::Simulated) {
    a.clock = std::make_unique<SimulatedClock>(opts.clock_hz);
    a.calibration = {opts.clock_hz, ClockSource::Simulated};
  } else {
    a.clock = make_system_clock();
    if (need_calibration) a.calibration = calibrate(*a.clock, std::chrono::milliseconds(100));
  }
  return a;
}

class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty() && path != "-") {
      file_.open(path, std::ios::binary);
      if (!file_) throw syncprobe::Error(Errc::IoFailure, "cannot write '" + path + "'");
    }
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw syncprobe::Error(Errc::IoFailure, "cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::uint8_t> parse_hex(const std::string& hex) {
  if (hex.size() % 2 != 0) throw UsageError("hex payload needs an even number of digits");
  std::vector<std::uint8_t> out;
  for (std::size_t i = 0; i < hex.size(); i += 2) {
    auto nib = [&](char c) -> int {
      if (c >= '0' && c <= '9') return c - '0';
      if (c >= 'a' && c <= 'f') return c - 'a' + 10;
      if (c >= 'A' && c <= 'F') return c - 'A' + 10;
      throw UsageError(std::string("invalid hex digit '") + c + "'");
    };
    out.push_back(static_cast<std::uint8_t>(nib(hex[i]) * 16 + nib(hex[i + 1])));
  }
  return out;
}

std::string to_hex(const std::vector<std::uint8_t>& bytes) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  for (auto b : bytes) {
    s.push_back(digits[b >> 4]);
    s.push_back(digits[b & 15]);
  }
  return s;
}

struct PayloadOptions {
  std::string file;
  std::string hex;
  std::uint64_t random_bits = 0;
  std::uint64_t seed = 1;

  void add(CLI::App& app, const std::string& prefix = "payload") {
    app.add_option("--" + prefix + "-file", file, "payload bytes from a file");
    app.add_option("--" + prefix + "-hex", hex, "payload bytes as hex");
    app.add_option("--" + prefix + "-random-bits", random_bits, "random payload of N bits");
    app.add_option("--" + prefix + "-seed", seed, "seed for the random payload")->capture_default_str();
  }

  bool given() const { return !file.empty() || !hex.empty() || random_bits > 0; }

  Bits bits() const {
    int sources = (!file.empty()) + (!hex.empty()) + (random_bits > 0);
    if (sources > 1) throw UsageError("give exactly one payload source");
    if (!file.empty()) return bytes_to_bits(read_file_bytes(file));
    if (!hex.empty()) return bytes_to_bits(parse_hex(hex));
    Bits b(random_bits, '0');
    std::mt19937_64 rng(seed);
    for (auto& c : b) c = (rng() & 1) ? '1' : '0';
    return b;
  }
};

struct ChannelOptions {
  Cycles bit_period = 0;
  std::int64_t spin_one = -1;
  std::int64_t spin_zero = -1;
  std::uint64_t write_size = 64;
  double threshold = 0;
  bool auto_threshold = false;
  Cycles sync_offset = 0;
  Cycles sync_quantum = 0;
  Cycles start_at = 0;
  std::string start_code = "10101010";
  std::string end_code = "1111111111";

  void add(CLI::App& app) {
    app.add_option("--bit-period", bit_period, "cycles per bit (default: sized from the profile)");
    app.add_option("--spin-one", spin_one, "no-op iterations after the write for bit 1");
    app.add_option("--spin-zero", spin_zero, "no-op iterations for bit 0");
    app.add_option("--write-size", write_size, "bytes per synchronous write")->capture_default_str();
    auto* t = app.add_option("--threshold", threshold, "decision threshold (cycles)");
    app.add_flag("--auto-threshold", auto_threshold, "calibrate the threshold from the trace")->excludes(t);
    app.add_option("--sync-offset", sync_offset, "cycles added to the counter to form the start");
    app.add_option("--sync-quantum", sync_quantum, "round the start up to a multiple of this");
    app.add_option("--start-at", start_at, "absolute counter value of the first window");
    app.add_option("--start-code", start_code)->capture_default_str();
    app.add_option("--end-code", end_code)->capture_default_str();
  }

  ChannelConfig config(const Backend& backend) const {
    ChannelConfig c;
    if (const auto* sim = dynamic_cast<const SimulatedBackend*>(&backend)) {
      c = ChannelConfig::for_profile(sim->profile());
    } else {
      c.bit_period = 2'000'000;
      c.spin_one = c.spin_zero = 0;
      c.sync_offset = 1'000'000'000;
    }
    if (bit_period > 0) {
      c.bit_period = bit_period;
      c.spin_one = c.spin_zero = backend.kind() == BackendKind::Simulated ? bit_period / 2 : 0;
    }
    if (spin_one >= 0) c.spin_one = static_cast<std::uint64_t>(spin_one);
    if (spin_zero >= 0) c.spin_zero = static_cast<std::uint64_t>(spin_zero);
    if (sync_offset > 0) c.sync_offset = sync_offset;
    c.write_size = write_size;
    if (threshold > 0) c.threshold = threshold;
    c.start_code = start_code;
    c.end_code = end_code;
    c.validate();
    return c;
  }

  CycleStamp start(const Backend& backend, const Clock& clock, const ChannelConfig& cfg) const {
    if (start_at > 0) return {start_at};
    Cycles quantum = sync_quantum;
    if (quantum == 0 && backend.kind() == BackendKind::RealMount) quantum = Cycles{1} << 32;
    return align_start(agree_start(clock, cfg.sync_offset), quantum);
  }
};

std::vector<std::uint64_t> parse_counts(const std::string& text) {
  std::vector<std::uint64_t> out;
  if (auto dots = text.find(".."); dots != std::string::npos) {
    std::uint64_t a = std::stoull(text.substr(0, dots));
    std::uint64_t b = std::stoull(text.substr(dots + 2));
    for (std::uint64_t k = a; k <= b; ++k) out.push_back(k);
    return out;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoull(item));
  return out;
}

SizeRange parse_range(const std::string& text) {
  SizeRange r;
  if (std::sscanf(text.c_str(), "%lu:%lu:%lu", &r.start, &r.stride, &r.end) != 3) {
    throw UsageError("range must look like start:stride:end, got '" + text + "'");
  }
  return r;
}

IoOp make_op(const std::string& name, std::uint64_t size) {
  IoOpKind kind = parse_op_kind(name);
  IoOp op{kind, 0};
  if (kind == IoOpKind::Write || kind == IoOpKind::WriteSync) op.size_bytes = size;
  return op;
}

// ---------------------------------------------------------------------------
// Simulated sender/receiver link: the sender's timestamped operations.

void save_link(const std::string& path, const SimulatedBackend& backend, double clock_hz) {
  json ops = json::array();
  for (const auto& t : backend.op_log()) {
    ops.push_back({{"at", t.at.cycles}, {"op", op_kind_name(t.op.kind)},
                   {"size_bytes", t.op.size_bytes}, {"file", t.op.file}});
  }
  json doc = {{"profile", backend.profile().name}, {"clock_hz", clock_hz}, {"ops", ops}};
  std::ofstream out(path);
  if (!out) throw syncprobe::Error(Errc::IoFailure, "cannot write link file '" + path + "'");
  out << doc.dump() << '\n';
}

void load_link(const std::string& path, SimulatedBackend& backend) {
  std::ifstream in(path);
  if (!in) throw syncprobe::Error(Errc::IoFailure, "cannot open link file '" + path + "'");
  try {
    json doc = json::parse(in);
    for (const auto& o : doc.at("ops")) {
      IoOp op{parse_op_kind(o.at("op").get<std::string>()), o.at("size_bytes").get<std::uint64_t>(),
              o.at("file").get<std::uint32_t>()};
      backend.schedule(op, {o.at("at").get<std::uint64_t>()});
    }
  } catch (const json::exception& e) {
    throw syncprobe::Error(Errc::CorruptFile, "bad link file '" + path + "': " + e.what());
  }
}

json report_json(const ChannelReport& r) {
  return {{"sent_bits", r.sent_bits},          {"elapsed_seconds", r.elapsed},
          {"bandwidth_kbps", r.bandwidth_kbps}, {"edit_distance", r.edit_distance},
          {"error_rate", r.error_rate}};
}

void write_json(const std::string& path, const json& j) {
  Output out(path);
  out.stream() << j.dump(2) << '\n';
}

std::string trace_id(const std::string& path) { return fs::path(path).stem().string(); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"syncfs timing side-channel toolkit"};
  app.require_subcommand(1);

  // bench ------------------------------------------------------------------
  auto* bench = app.add_subcommand("bench", "flush-latency microbenchmarks");
  bench->require_subcommand(1);
  BackendOptions bench_backend;

  std::string fp_op = "all", fp_out;
  std::uint64_t fp_size = 4096, fp_reps = 1000;
  auto* footprint = bench->add_subcommand("footprint", "flush delay after each I/O operation");
  bench_backend.add(*footprint);
  footprint->add_option("--op", fp_op, "write, write_sync, ftruncate, rename, baseline or all")->capture_default_str();
  footprint->add_option("--size", fp_size, "bytes per write")->capture_default_str();
  footprint->add_option("--reps", fp_reps, "repetitions")->capture_default_str();
  footprint->add_option("--out", fp_out, "CSV output (default stdout)");

  std::string cc_op = "write", cc_counts = "1..10", cc_out;
  std::uint64_t cc_size = 64, cc_reps = 1;
  auto* concurrency = bench->add_subcommand("concurrency", "flush delay versus number of touched files");
  bench_backend.add(*concurrency);
  concurrency->add_option("--op", cc_op)->capture_default_str();
  concurrency->add_option("--size", cc_size)->capture_default_str();
  concurrency->add_option("--counts", cc_counts, "a..b or a comma list")->capture_default_str();
  concurrency->add_option("--reps", cc_reps)->capture_default_str();
  concurrency->add_option("--out", cc_out);

  std::string sw_below = "64:64:4096", sw_above = "4096:4096:65536", sw_out;
  std::uint64_t sw_reps = 1;
  auto* sweep = bench->add_subcommand("sweep", "flush delay versus write size");
  bench_backend.add(*sweep);
  sweep->add_option("--below", sw_below, "start:stride:end within one page")->capture_default_str();
  sweep->add_option("--above", sw_above, "start:stride:end beyond one page")->capture_default_str();
  sweep->add_option("--reps", sw_reps)->capture_default_str();
  sweep->add_option("--out", sw_out);

  // probe ------------------------------------------------------------------
  BackendOptions probe_backend;
  std::uint64_t probe_samples = 10000;
  double probe_rate = kUnlimitedRate;
  std::string probe_out;
  auto* probe = app.add_subcommand("probe", "sample flush delays into a trace file");
  probe_backend.add(*probe);
  probe->add_option("--samples", probe_samples)->capture_default_str();
  probe->add_option("--max-rate", probe_rate, "cap on flush calls per second");
  probe->add_option("--out", probe_out, "trace file")->required();

  // send / recv / loopback -------------------------------------------------
  BackendOptions send_backend;
  ChannelOptions send_channel;
  PayloadOptions send_payload;
  std::string send_link, send_report;
  auto* send_cmd = app.add_subcommand("send", "transmit a payload over the flush-delay channel");
  send_backend.add(*send_cmd);
  send_channel.add(*send_cmd);
  send_payload.add(*send_cmd);
  send_cmd->add_option("--link", send_link, "simulated backends: file receiving the timestamped op log");
  send_cmd->add_option("--report", send_report, "JSON send summary");

  BackendOptions recv_backend;
  ChannelOptions recv_channel;
  PayloadOptions recv_expect;
  std::string recv_link, recv_report, recv_trace, recv_payload_out;
  std::uint64_t recv_max = 10'000'000;
  double recv_max_seconds = 0;
  auto* recv_cmd = app.add_subcommand("recv", "receive a payload over the flush-delay channel");
  recv_backend.add(*recv_cmd);
  recv_channel.add(*recv_cmd);
  recv_expect.add(*recv_cmd, "expect");
  recv_cmd->add_option("--link", recv_link, "simulated backends: op log written by send");
  recv_cmd->add_option("--max-samples", recv_max)->capture_default_str();
  recv_cmd->add_option("--max-seconds", recv_max_seconds, "give up this long after the start");
  recv_cmd->add_option("--report", recv_report, "JSON channel report");
  recv_cmd->add_option("--trace-out", recv_trace, "save the raw delay trace");
  recv_cmd->add_option("--payload-out", recv_payload_out, "write decoded payload bytes");

  BackendOptions loop_backend;
  ChannelOptions loop_channel;
  PayloadOptions loop_payload;
  std::string loop_report, loop_trace;
  auto* loopback = app.add_subcommand("loopback", "sender and receiver threads on one simulated backend");
  loop_backend.add(*loopback);
  loop_channel.add(*loopback);
  loop_payload.add(*loopback);
  loopback->add_option("--report", loop_report, "JSON channel report (default stdout)");
  loopback->add_option("--trace-out", loop_trace);

  // sim run ----------------------------------------------------------------
  auto* sim = app.add_subcommand("sim", "simulated victim workloads");
  sim->require_subcommand(1);
  BackendOptions sim_backend;
  std::string sim_script, sim_out;
  std::uint64_t sim_samples = 4096, sim_lead = 0, sim_jitter = 0;
  double sim_rate = kUnlimitedRate;
  auto* sim_run = sim->add_subcommand("run", "run a workload script while a probe samples");
  sim_backend.add(*sim_run);
  sim_run->add_option("script", sim_script, "workload JSON")->required();
  sim_run->add_option("--samples", sim_samples)->capture_default_str();
  sim_run->add_option("--max-rate", sim_rate);
  sim_run->add_option("--lead-in", sim_lead, "cycles before the script starts")->capture_default_str();
  sim_run->add_option("--jitter", sim_jitter, "random script shift (cycles)")->capture_default_str();
  sim_run->add_option("--out", sim_out, "trace file")->required();

  // analysis -----------------------------------------------------------------
  std::string stft_in, stft_out, stft_pgm, stft_label;
  std::uint32_t stft_window = 256, stft_hop = 0;
  auto* stft_cmd = app.add_subcommand("stft", "spectrogram of a trace");
  stft_cmd->add_option("trace", stft_in)->required();
  stft_cmd->add_option("--window", stft_window)->capture_default_str();
  stft_cmd->add_option("--hop", stft_hop, "default window/2");
  stft_cmd->add_option("--out", stft_out, "spectrogram file");
  stft_cmd->add_option("--pgm", stft_pgm, "grayscale image export");
  stft_cmd->add_option("--label", stft_label);

  std::string snr_signal, snr_noise;
  auto* snr_cmd = app.add_subcommand("snr", "signal-to-noise ratio of two traces");
  snr_cmd->add_option("signal", snr_signal)->required();
  snr_cmd->add_option("noise", snr_noise)->required();

  std::string detect_in;
  double detect_z = 6;
  std::size_t detect_sep = 16;
  auto* detect = app.add_subcommand("detect", "flag latency spikes (mount/unmount)");
  detect->add_option("trace", detect_in)->required();
  detect->add_option("--z", detect_z)->capture_default_str();
  detect->add_option("--min-separation", detect_sep)->capture_default_str();

  // export-dataset -----------------------------------------------------------
  BackendOptions ds_backend;
  std::vector<std::string> ds_scripts;
  std::string ds_out;
  DatasetOptions ds;
  std::uint64_t ds_traces = 20, ds_samples = 8192;
  std::uint32_t ds_hop = 0;
  auto* dataset = app.add_subcommand("export-dataset", "labelled spectrogram dataset from workload scripts");
  ds_backend.add(*dataset);
  dataset->add_option("--scripts", ds_scripts, "workload JSON files or directories")->required();
  dataset->add_option("--traces", ds_traces, "traces per class")->capture_default_str();
  dataset->add_option("--samples", ds_samples, "samples per trace")->capture_default_str();
  dataset->add_option("--max-rate", ds.run.max_rate, "probe rate cap (calls/s)");
  dataset->add_option("--window", ds.window_size)->capture_default_str();
  dataset->add_option("--hop", ds_hop, "default window/2");
  dataset->add_option("--jitter", ds.run.jitter)->capture_default_str();
  dataset->add_option("--lead-in", ds.run.lead_in)->capture_default_str();
  dataset->add_option("--out", ds_out)->required();

  // profile show -------------------------------------------------------------
  std::string profile_name;
  auto* profile = app.add_subcommand("profile", "print a delay profile in key = value form");
  profile->add_option("name", profile_name)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (footprint->parsed()) {
      Actor a = open_actor(bench_backend, false);
      std::vector<BenchStats> stats;
      std::vector<std::string> ops =
          fp_op == "all" ? std::vector<std::string>{"baseline", "write", "write_sync", "ftruncate", "rename"}
                         : std::vector<std::string>{fp_op};
      for (const auto& name : ops) {
        stats.push_back(run_footprint_bench(*a.backend, *a.clock, make_op(name, fp_size), fp_reps));
      }
      Output out(fp_out);
      write_csv(out.stream(), stats);
    } else if (concurrency->parsed()) {
      Actor a = open_actor(bench_backend, false);
      auto counts = parse_counts(cc_counts);
      SlopeFit fit = run_concurrency_bench(*a.backend, *a.clock, make_op(cc_op, cc_size), counts, cc_reps);
      Output out(cc_out);
      write_csv(out.stream(), fit);
    } else if (sweep->parsed()) {
      Actor a = open_actor(bench_backend, false);
      SweepCurve c = run_write_size_sweep(*a.backend, *a.clock, parse_range(sw_below), parse_range(sw_above), sw_reps);
      Output out(sw_out);
      write_csv(out.stream(), c);
    } else if (probe->parsed()) {
      Actor a = open_actor(probe_backend);
      DelayTrace t = rate_limited_probe(*a.backend, *a.clock, a.calibration, probe_rate, probe_samples);
      write_trace(t, probe_out);
    } else if (send_cmd->parsed()) {
      Actor a = open_actor(send_backend, false);
      ChannelConfig cfg = send_channel.config(*a.backend);
      Bits payload = send_payload.bits();
      CycleStamp start = send_channel.start(*a.backend, *a.clock, cfg);
      SendReport r = send(*a.backend, payload, cfg, *a.clock, start);
      if (auto* simb = dynamic_cast<SimulatedBackend*>(a.backend.get())) {
        if (send_link.empty()) throw UsageError("simulated send needs --link <file> for the receiver");
        save_link(send_link, *simb, send_backend.clock_hz);
      }
      if (!send_report.empty()) {
        write_json(send_report, {{"bits_sent", r.bits_sent}, {"payload_bits", payload.size()},
                                 {"overruns", r.overruns}, {"start_cycles", r.start.cycles},
                                 {"end_cycles", r.end.cycles}, {"bit_period", cfg.bit_period}});
      }
    } else if (recv_cmd->parsed()) {
      Actor a = open_actor(recv_backend);
      ChannelConfig cfg = recv_channel.config(*a.backend);
      if (recv_channel.auto_threshold) cfg.threshold.reset();
      if (recv_max_seconds > 0) cfg.max_duration = a.calibration.from_seconds(recv_max_seconds);
      if (auto* simb = dynamic_cast<SimulatedBackend*>(a.backend.get())) {
        if (recv_link.empty()) throw UsageError("simulated recv needs --link <file> written by send");
        load_link(recv_link, *simb);
      }
      CycleStamp start = recv_channel.start(*a.backend, *a.clock, cfg);
      DelayTrace trace = receive(*a.backend, cfg, *a.clock, start, recv_max);
      trace.clock = a.calibration;
      if (!recv_trace.empty()) write_trace(trace, recv_trace);
      DecodeResult d = decode(trace, cfg);
      double elapsed = static_cast<double>(d.end_window - d.start_window) * static_cast<double>(cfg.bit_period) /
                       a.calibration.cycles_per_second;
      json j;
      if (recv_expect.given()) {
        j = report_json(evaluate(recv_expect.bits(), d.payload, elapsed));
      } else {
        j = {{"sent_bits", d.payload.size()}, {"elapsed_seconds", elapsed},
             {"bandwidth_kbps", static_cast<double>(d.payload.size()) / elapsed / 1000.0}};
      }
      j["threshold"] = d.threshold;
      j["end_code_found"] = d.end_found;
      j["decoded_hex"] = to_hex(bits_to_bytes(d.payload));
      if (!recv_payload_out.empty()) {
        auto bytes = bits_to_bytes(d.payload);
        std::ofstream out(recv_payload_out, std::ios::binary);
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
      }
      write_json(recv_report, j);
    } else if (loopback->parsed()) {
      if (!loop_backend.simulated()) throw UsageError("loopback runs on simulated backends only");
      BackendDescriptor desc = loop_backend.descriptor();
      SimulatedBackend backend(*desc.profile, desc.noise_seed);
      ChannelConfig cfg = loop_channel.config(backend);
      if (loop_channel.auto_threshold) cfg.threshold.reset();
      LoopbackResult r = run_loopback(backend, loop_payload.bits(), cfg, loop_backend.clock_hz);
      if (!loop_trace.empty()) write_trace(r.trace, loop_trace);
      json j = report_json(r.report);
      j["threshold"] = r.decoded.threshold;
      j["overruns"] = r.sent.overruns;
      j["end_code_found"] = r.decoded.end_found;
      write_json(loop_report, j);
    } else if (sim_run->parsed()) {
      if (!sim_backend.simulated()) throw UsageError("sim run needs a sim:<profile> backend");
      BackendDescriptor desc = sim_backend.descriptor();
      WorkloadRun run{sim_samples, sim_rate, sim_backend.clock_hz, sim_backend.seed, sim_jitter, sim_lead};
      DelayTrace t = run_workload(load_workload(sim_script), *desc.profile, run);
      write_trace(t, sim_out);
    } else if (stft_cmd->parsed()) {
      DelayTrace t = read_trace(stft_in);
      Spectrogram s = stft(t, stft_window, stft_hop == 0 ? stft_window / 2 : stft_hop);
      s.source_trace = trace_id(stft_in);
      if (!stft_out.empty()) write_spectrogram(s, stft_out, stft_label);
      if (!stft_pgm.empty()) write_pgm(s, stft_pgm);
      std::cout << json{{"freq_bins", s.freq_bins}, {"frames", s.frames}, {"window_size", s.window_size},
                        {"hop", s.hop}}
                       .dump()
                << '\n';
    } else if (snr_cmd->parsed()) {
      SnrReport r = snr(read_trace(snr_signal), read_trace(snr_noise));
      std::cout << json{{"signal_variance", r.signal_variance}, {"noise_variance", r.noise_variance},
                        {"snr", r.snr}}
                       .dump(2)
                << '\n';
    } else if (detect->parsed()) {
      DelayTrace t = read_trace(detect_in);
      json events = json::array();
      for (const auto& e : detect_spikes(t, detect_z, detect_sep)) {
        events.push_back({{"index", e.index},
                          {"timestamp_cycles", t.samples[e.index].timestamp.cycles},
                          {"delay_cycles", e.delay},
                          {"z_score", e.z_score}});
      }
      std::cout << events.dump(2) << '\n';
    } else if (dataset->parsed()) {
      if (!ds_backend.simulated()) throw UsageError("export-dataset needs a sim:<profile> backend");
      BackendDescriptor desc = ds_backend.descriptor();
      std::vector<WorkloadScript> scripts;
      for (const auto& path : ds_scripts) {
        if (fs::is_directory(path)) {
          std::vector<fs::path> files;
          for (const auto& entry : fs::directory_iterator(path)) {
            if (entry.path().extension() == ".json") files.push_back(entry.path());
          }
          std::sort(files.begin(), files.end());
          for (const auto& f : files) scripts.push_back(load_workload(f.string()));
        } else {
          scripts.push_back(load_workload(path));
        }
      }
      ds.traces_per_class = ds_traces;
      ds.hop = ds_hop == 0 ? ds.window_size / 2 : ds_hop;
      ds.run.n_samples = ds_samples;
      ds.run.clock_hz = ds_backend.clock_hz;
      ds.run.seed = ds_backend.seed;
      export_dataset(scripts, *desc.profile, ds, ds_out);
    } else if (profile->parsed()) {
      std::cout << format_profile(find_profile(profile_name));
    }
  } catch (const UsageError& e) {
    std::cerr << "syncprobe: " << e.what() << '\n';
    return kExitUsage;
  } catch (const syncprobe::Error& e) {
    std::cerr << "syncprobe: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::invalid_argument& e) {
    std::cerr << "syncprobe: invalid number: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "syncprobe: " << e.what() << '\n';
    return kExitIo;
  }
  return 0;
}
