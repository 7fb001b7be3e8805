#include "syncprobe/workload.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "syncprobe/error.hpp"

namespace syncprobe {

using nlohmann::json;

WorkloadScript parse_workload(std::string_view text, std::string name) {
  WorkloadScript script;
  script.name = std::move(name);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(Errc::CorruptFile, "workload '" + script.name + "': " + e.what());
  }
  if (!doc.is_array()) throw Error(Errc::CorruptFile, "workload '" + script.name + "': expected a JSON array");

  Cycles previous = 0;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const json& e = doc[i];
    auto where = "workload '" + script.name + "' entry " + std::to_string(i);
    try {
      Cycles offset = e.at("offset_cycles").get<Cycles>();
      if (offset < previous) throw Error(Errc::CorruptFile, where + ": entries must be sorted by offset_cycles");
      previous = offset;
      std::string op = e.at("op").get<std::string>();
      std::uint64_t repeat = e.value("repeat", std::uint64_t{1});
      Cycles every = e.value("every", Cycles{0});
      if (repeat > 1 && every == 0) throw Error(Errc::CorruptFile, where + ": 'repeat' needs 'every'");

      std::variant<IoOp, TimedEvent> action;
      if (op == "mount" || op == "unmount") {
        TimedEvent ev;
        ev.kind = op == "mount" ? EventKind::ContainerMount : EventKind::ContainerUnmount;
        ev.extra_delay = e.value("extra_delay", Cycles{10'000'000});
        ev.duration = e.value("duration", Cycles{1'000'000});
        if (ev.extra_delay == 0 || ev.duration == 0) {
          throw Error(Errc::CorruptFile, where + ": events need positive extra_delay and duration");
        }
        action = ev;
      } else {
        IoOp io;
        io.kind = parse_op_kind(op);
        if (io.kind == IoOpKind::FlushAll) throw Error(Errc::CorruptFile, where + ": flush is not a workload op");
        io.size_bytes = e.value("size_bytes", std::uint64_t{0});
        io.file = e.value("file", std::uint32_t{0});
        io.validate();
        action = io;
      }
      for (std::uint64_t r = 0; r < repeat; ++r) script.steps.push_back({offset + r * every, action});
    } catch (const json::exception& ex) {
      throw Error(Errc::CorruptFile, where + ": " + ex.what());
    } catch (const Error& ex) {
      if (ex.code() == Errc::CorruptFile) throw;
      throw Error(Errc::CorruptFile, where + ": " + ex.what());
    }
  }
  std::stable_sort(script.steps.begin(), script.steps.end(),
                   [](const WorkloadStep& a, const WorkloadStep& b) { return a.offset < b.offset; });
  return script;
}

WorkloadScript load_workload(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoFailure, "cannot open workload '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_workload(buf.str(), std::filesystem::path(path).stem().string());
}

DelayTrace run_workload(const WorkloadScript& script, const DelayProfile& profile, const WorkloadRun& run) {
  SimulatedBackend backend(profile, run.seed);
  std::mt19937_64 shift_rng(run.seed ^ 0x9e3779b97f4a7c15ULL);
  Cycles shift = run.jitter > 0 ? std::uniform_int_distribution<Cycles>(0, run.jitter)(shift_rng) : 0;
  CycleStamp base{run.lead_in + shift};

  for (const auto& step : script.steps) {
    CycleStamp at = base + step.offset;
    if (const auto* op = std::get_if<IoOp>(&step.action)) {
      backend.schedule(*op, at);
    } else {
      TimedEvent ev = std::get<TimedEvent>(step.action);
      ev.at = at;
      backend.inject_event(ev);
    }
  }
  SimulatedClock clock(run.clock_hz);
  DelayTrace trace = rate_limited_probe(backend, clock, {run.clock_hz, ClockSource::Simulated},
                                        run.max_rate, run.n_samples);
  return trace;
}

void export_dataset(const std::vector<WorkloadScript>& scripts, const DelayProfile& profile,
                    const DatasetOptions& options, const std::string& out_dir) {
  if (scripts.empty()) throw Error(Errc::Precondition, "dataset needs at least one workload script");
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  json manifest;
  manifest["classes"] = json::array();
  manifest["counts"] = json::object();
  manifest["traces_per_class"] = options.traces_per_class;
  manifest["window_size"] = options.window_size;
  manifest["hop"] = options.hop;
  manifest["samples_per_trace"] = options.run.n_samples;
  manifest["profile"] = profile.name;
  if (!std::isinf(options.run.max_rate)) manifest["max_rate"] = options.run.max_rate;

  for (std::size_t c = 0; c < scripts.size(); ++c) {
    const auto& script = scripts[c];
    fs::path class_dir = fs::path(out_dir) / script.name;
    fs::create_directories(class_dir);
    for (std::size_t i = 0; i < options.traces_per_class; ++i) {
      WorkloadRun run = options.run;
      run.seed = options.run.seed + 1'000'003ULL * c + i;
      DelayTrace trace = run_workload(script, profile, run);

      char id[256];
      std::snprintf(id, sizeof id, "%s-%04zu", script.name.c_str(), i);
      Spectrogram spec = stft(trace, options.window_size, options.hop);
      spec.source_trace = id;
      write_spectrogram(spec, (class_dir / (std::string(id) + ".spec")).string(), script.name);
      if (c == 0 && i == 0) manifest["spec_shape"] = {spec.freq_bins, spec.frames};
    }
    manifest["classes"].push_back(script.name);
    manifest["counts"][script.name] = options.traces_per_class;
  }
  std::ofstream out(fs::path(out_dir) / "manifest.json");
  if (!out) throw Error(Errc::IoFailure, "cannot write manifest in '" + out_dir + "'");
  out << manifest.dump(2) << '\n';
}

}  // namespace syncprobe
