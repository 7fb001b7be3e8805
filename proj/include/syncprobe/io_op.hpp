#pragma once

#include <cstdint>
#include <string>

namespace syncprobe {

enum class IoOpKind { Write, WriteSync, Ftruncate, Rename, FlushAll };

/// One primitive filesystem action. `file` selects a logical scratch file;
/// only the concurrency benchmark uses more than file 0.
struct IoOp {
  IoOpKind kind = IoOpKind::FlushAll;
  std::uint64_t size_bytes = 0;
  std::uint32_t file = 0;

  static IoOp write(std::uint64_t n) { return {IoOpKind::Write, n}; }
  static IoOp write_sync(std::uint64_t n) { return {IoOpKind::WriteSync, n}; }
  static IoOp ftruncate() { return {IoOpKind::Ftruncate, 0}; }
  static IoOp rename() { return {IoOpKind::Rename, 0}; }
  static IoOp flush_all() { return {IoOpKind::FlushAll, 0}; }

  /// Throws Errc::Precondition when a write carries no bytes.
  void validate() const;

  friend bool operator==(const IoOp&, const IoOp&) = default;
};

/// "write", "write_sync", "ftruncate", "rename", "flush". The flush op is
/// reported as "baseline" by the benchmarks.
const char* op_kind_name(IoOpKind kind) noexcept;
IoOpKind parse_op_kind(const std::string& name);

}  // namespace syncprobe
