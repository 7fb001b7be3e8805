#include "syncprobe/profiles.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "syncprobe/error.hpp"

namespace syncprobe {

BenchTargets orin_ext4_targets() {
  BenchTargets t;
  t.name = "ext4-orin";
  t.baseline = 2509;
  t.write = 121092;
  t.write_sync = 41406;
  t.ftruncate = 61315;
  t.rename = 66774;
  t.baseline_stddev = 491;
  t.write_sync_stddev = 4670;
  return t;
}

BenchTargets xeon_ext4_slope_targets() {
  BenchTargets t;
  t.name = "ext4-xeon-slopes";
  // No baseline was reported for this host; the Orin baseline stands in.
  t.baseline = 2509;
  t.slope_write_sync = 6163;
  t.slope_ftruncate = 9626;
  t.slope_write = 48612;
  t.slope_write_size = 64;
  return t;
}

BenchTargets container_ntfs_targets() {
  BenchTargets t;
  t.name = "container-ntfs";
  t.baseline = 1526882;
  t.write = 19592860;
  t.write_sync = 4854316;
  t.ftruncate = 10548983;
  t.rename = 10616821;
  t.baseline_stddev = 243092;
  t.write_sync_stddev = 330761;
  return t;
}

std::vector<std::string> builtin_profile_names() {
  return {"ext4-orin", "ext4-xeon-slopes", "container-ntfs", "flat-test"};
}

DelayProfile builtin_profile(const std::string& name) {
  if (name == "ext4-orin") return calibrate_profile(orin_ext4_targets());
  if (name == "ext4-xeon-slopes") return calibrate_profile(xeon_ext4_slope_targets());
  if (name == "container-ntfs") return calibrate_profile(container_ntfs_targets());
  if (name == "flat-test") {
    DelayProfile p;
    p.name = "flat-test";
    p.base_delay = 1000;
    return p;
  }
  throw Error(Errc::UnknownProfile, "unknown profile '" + name + "'");
}

DelayProfile find_profile(const std::string& name) {
  if (const char* dir = std::getenv("SYNCPROBE_PROFILE_DIR"); dir && *dir) {
    std::filesystem::path candidate = std::filesystem::path(dir) / (name + ".profile");
    if (std::filesystem::exists(candidate)) return load_profile_file(candidate.string());
  }
  return builtin_profile(name);
}

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

using Setter = std::function<void(DelayProfile&, const std::string&)>;

double parse_number(const std::string& key, const std::string& v) {
  char* end = nullptr;
  double d = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size()) {
    throw Error(Errc::CorruptFile, "profile key '" + key + "': not a number: '" + v + "'");
  }
  return d;
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> m;
    m["name"] = [](DelayProfile& p, const std::string& v) { p.name = v; };
    m["noise_kind"] = [](DelayProfile& p, const std::string& v) { p.noise_kind = parse_noise_kind(v); };
    auto num = [&m](const char* key, double DelayProfile::*field) {
      m[key] = [key, field](DelayProfile& p, const std::string& v) { p.*field = parse_number(key, v); };
    };
    num("base_delay", &DelayProfile::base_delay);
    num("page_cost", &DelayProfile::page_cost);
    num("above_page_cost", &DelayProfile::above_page_cost);
    num("inode_cost", &DelayProfile::inode_cost);
    num("journal_cost", &DelayProfile::journal_cost);
    num("per_file_write_slope", &DelayProfile::per_file_write_slope);
    num("noise_sigma", &DelayProfile::noise_sigma);
    num("noise_slope", &DelayProfile::noise_slope);
    num("above_page_noise", &DelayProfile::above_page_noise);
    num("op_cost", &DelayProfile::op_cost);
    return m;
  }();
  return table;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

DelayProfile parse_profile(std::string_view text) {
  DelayProfile p;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::string body = trim(line);
    if (body.empty()) continue;
    auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw Error(Errc::CorruptFile, "profile line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    std::string key = trim(std::string_view(body).substr(0, eq));
    std::string value = trim(std::string_view(body).substr(eq + 1));
    auto it = setters().find(key);
    if (it == setters().end()) {
      throw Error(Errc::CorruptFile, "profile line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    it->second(p, value);
  }
  p.validate();
  return p;
}

std::string format_profile(const DelayProfile& p) {
  std::ostringstream out;
  out << "name = " << p.name << '\n'
      << "base_delay = " << fmt_double(p.base_delay) << '\n'
      << "page_cost = " << fmt_double(p.page_cost) << '\n'
      << "above_page_cost = " << fmt_double(p.above_page_cost) << '\n'
      << "inode_cost = " << fmt_double(p.inode_cost) << '\n'
      << "journal_cost = " << fmt_double(p.journal_cost) << '\n'
      << "per_file_write_slope = " << fmt_double(p.per_file_write_slope) << '\n'
      << "noise_kind = " << noise_kind_name(p.noise_kind) << '\n'
      << "noise_sigma = " << fmt_double(p.noise_sigma) << '\n'
      << "noise_slope = " << fmt_double(p.noise_slope) << '\n'
      << "above_page_noise = " << fmt_double(p.above_page_noise) << '\n'
      << "op_cost = " << fmt_double(p.op_cost) << '\n';
  return out.str();
}

DelayProfile load_profile_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoFailure, "cannot open profile '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_profile(buf.str());
}

void save_profile_file(const DelayProfile& profile, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::IoFailure, "cannot write profile '" + path + "'");
  out << format_profile(profile);
}

}  // namespace syncprobe
