#include "syncprobe/trace.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "syncprobe/binary_io.hpp"
#include "syncprobe/error.hpp"

namespace syncprobe {

using nlohmann::json;

std::vector<double> DelayTrace::delays() const {
  std::vector<double> v;
  v.reserve(samples.size());
  for (const auto& s : samples) v.push_back(static_cast<double>(s.delay));
  return v;
}

void DelayTrace::validate() const {
  for (std::size_t i = 1; i < samples.size(); ++i) {
    if (!(samples[i - 1].timestamp < samples[i].timestamp)) {
      throw Error(Errc::Precondition,
                  "trace timestamps must be strictly increasing (sample " + std::to_string(i) + ")");
    }
  }
}

std::string sidecar_path(const std::string& path) {
  std::filesystem::path p(path);
  p.replace_extension(".meta.json");
  return p.string();
}

std::string spectrogram_sidecar_path(const std::string& path) { return path + ".meta.json"; }

void write_trace(const DelayTrace& trace, const std::string& path) {
  trace.validate();
  if (trace.samples.size() > UINT32_MAX) throw Error(Errc::Precondition, "trace too long for the file format");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoFailure, "cannot write trace '" + path + "'");
  out.write("SYNCTRC1", 8);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(trace.samples.size()));
  for (const auto& s : trace.samples) {
    detail::put_le<std::uint64_t>(out, s.timestamp.cycles);
    detail::put_le<std::uint64_t>(out, s.delay);
  }
  if (!out) throw Error(Errc::IoFailure, "short write on '" + path + "'");

  json meta = {
      {"clock", {{"cycles_per_second", trace.clock.cycles_per_second},
                 {"source", clock_source_name(trace.clock.source)}}},
      {"backend_kind", backend_kind_name(trace.backend_kind)},
      {"profile", trace.profile},
      {"origin_cycles", trace.origin.cycles},
      {"end_code_missing", trace.end_code_missing},
  };
  if (trace.achieved_rate) meta["achieved_rate"] = *trace.achieved_rate;
  std::ofstream side(sidecar_path(path));
  if (!side) throw Error(Errc::IoFailure, "cannot write sidecar for '" + path + "'");
  side << meta.dump(2) << '\n';
}

DelayTrace read_trace(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoFailure, "cannot open trace '" + path + "'");
  detail::expect_magic(in, "SYNCTRC1");
  DelayTrace t;
  auto count = detail::get_le<std::uint32_t>(in);
  t.samples.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    DelaySample s;
    s.timestamp.cycles = detail::get_le<std::uint64_t>(in);
    s.delay = detail::get_le<std::uint64_t>(in);
    t.samples.push_back(s);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw Error(Errc::CorruptFile, "trailing bytes in '" + path + "'");
  if (!t.samples.empty()) t.origin = t.samples.front().timestamp;

  std::ifstream side(sidecar_path(path));
  if (side) {
    try {
      json meta = json::parse(side);
      t.clock.cycles_per_second = meta.at("clock").at("cycles_per_second").get<double>();
      t.clock.source = parse_clock_source(meta.at("clock").at("source").get<std::string>());
      t.backend_kind = parse_backend_kind(meta.at("backend_kind").get<std::string>());
      t.profile = meta.value("profile", "");
      t.origin.cycles = meta.value("origin_cycles", t.origin.cycles);
      t.end_code_missing = meta.value("end_code_missing", false);
      if (meta.contains("achieved_rate")) t.achieved_rate = meta["achieved_rate"].get<double>();
    } catch (const json::exception& e) {
      throw Error(Errc::CorruptFile, "bad sidecar for '" + path + "': " + e.what());
    }
  }
  t.validate();
  return t;
}

}  // namespace syncprobe
