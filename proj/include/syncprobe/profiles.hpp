#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "syncprobe/simulator.hpp"

namespace syncprobe {

/// Per-operation flush latency on an ext4 Jetson AGX Orin (1000 reps).
BenchTargets orin_ext4_targets();
/// Concurrency slopes measured on an ext4 Xeon host.
BenchTargets xeon_ext4_slope_targets();
/// Cross-container flush latency on NTFS3.
BenchTargets container_ntfs_targets();

/// "ext4-orin", "ext4-xeon-slopes", "container-ntfs", "flat-test".
std::vector<std::string> builtin_profile_names();
DelayProfile builtin_profile(const std::string& name);

/// Looks in $SYNCPROBE_PROFILE_DIR/<name>.profile first, then the built-ins.
/// Throws Errc::UnknownProfile.
DelayProfile find_profile(const std::string& name);

/// Flat `key = value` text, one entry per line, '#' starts a comment.
DelayProfile parse_profile(std::string_view text);
std::string format_profile(const DelayProfile& profile);

DelayProfile load_profile_file(const std::string& path);
void save_profile_file(const DelayProfile& profile, const std::string& path);

}  // namespace syncprobe
