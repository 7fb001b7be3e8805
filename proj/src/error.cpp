#include "syncprobe/error.hpp"

#include <cstring>

namespace syncprobe {

const char* errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::CounterUnavailable: return "counter-unavailable";
    case Errc::CalibrationFailed: return "calibration-failed";
    case Errc::PathNotWritable: return "path-not-writable";
    case Errc::UnknownProfile: return "unknown-profile";
    case Errc::Unsupported: return "unsupported";
    case Errc::IoFailure: return "io-failure";
    case Errc::Precondition: return "precondition";
    case Errc::InconsistentTargets: return "inconsistent-targets";
    case Errc::DegenerateX: return "degenerate-x";
    case Errc::DegenerateTrace: return "degenerate-trace";
    case Errc::StartCodeNotFound: return "start-code-not-found";
    case Errc::TraceTooShort: return "trace-too-short";
    case Errc::ZeroNoiseVariance: return "zero-noise-variance";
    case Errc::CorruptFile: return "corrupt-file";
  }
  return "unknown";
}

void throw_os_error(const std::string& context, int err) {
  throw Error(Errc::IoFailure, context + ": " + std::strerror(err), err);
}

}  // namespace syncprobe
