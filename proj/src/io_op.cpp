#include "syncprobe/io_op.hpp"

#include "syncprobe/error.hpp"

namespace syncprobe {

void IoOp::validate() const {
  if ((kind == IoOpKind::Write || kind == IoOpKind::WriteSync) && size_bytes == 0) {
    throw Error(Errc::Precondition, "write operations need size_bytes > 0");
  }
}

const char* op_kind_name(IoOpKind kind) noexcept {
  switch (kind) {
    case IoOpKind::Write: return "write";
    case IoOpKind::WriteSync: return "write_sync";
    case IoOpKind::Ftruncate: return "ftruncate";
    case IoOpKind::Rename: return "rename";
    case IoOpKind::FlushAll: return "flush";
  }
  return "unknown";
}

IoOpKind parse_op_kind(const std::string& name) {
  if (name == "write") return IoOpKind::Write;
  if (name == "write_sync" || name == "osync" || name == "write-sync") return IoOpKind::WriteSync;
  if (name == "ftruncate") return IoOpKind::Ftruncate;
  if (name == "rename") return IoOpKind::Rename;
  if (name == "flush" || name == "baseline") return IoOpKind::FlushAll;
  throw Error(Errc::Precondition, "unknown operation '" + name + "'");
}

}  // namespace syncprobe
