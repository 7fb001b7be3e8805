#pragma once

#include <stdexcept>
#include <string>

namespace syncprobe {

enum class Errc {
  CounterUnavailable,
  CalibrationFailed,
  PathNotWritable,
  UnknownProfile,
  Unsupported,
  IoFailure,
  Precondition,
  InconsistentTargets,
  DegenerateX,
  DegenerateTrace,
  StartCodeNotFound,
  TraceTooShort,
  ZeroNoiseVariance,
  CorruptFile,
};

const char* errc_name(Errc code) noexcept;

// Every failure in the library surfaces as this exception. os_error carries
// errno for failed system calls and is 0 otherwise.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what, int os_error = 0)
      : std::runtime_error(what), code_(code), os_error_(os_error) {}

  Errc code() const noexcept { return code_; }
  int os_error() const noexcept { return os_error_; }

 private:
  Errc code_;
  int os_error_;
};

[[noreturn]] void throw_os_error(const std::string& context, int err);

}  // namespace syncprobe
