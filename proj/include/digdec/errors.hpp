#pragma once

#include <stdexcept>
#include <string>

namespace digdec {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define DIGDEC_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                       \
   public:                                                          \
    explicit Name(const std::string& what) : Error(#Name ": " + what) {} \
  };

DIGDEC_DEFINE_ERROR(InvalidArgument)
DIGDEC_DEFINE_ERROR(CapExceeded)
DIGDEC_DEFINE_ERROR(UnknownObservation)
DIGDEC_DEFINE_ERROR(PolicyNotInClass)
DIGDEC_DEFINE_ERROR(SharedValueViolated)
DIGDEC_DEFINE_ERROR(ZeroEvidence)
DIGDEC_DEFINE_ERROR(NotComplete)
DIGDEC_DEFINE_ERROR(OddEpoch)
DIGDEC_DEFINE_ERROR(InfiniteKL)

#undef DIGDEC_DEFINE_ERROR

/// Config parse failure carrying the offending line and key.
class ConfigError : public Error {
 public:
  ConfigError(int line, const std::string& key, const std::string& msg)
      : Error(format(line, key, msg)), line_(line), key_(key) {}

  int line() const { return line_; }
  const std::string& key() const { return key_; }

 private:
  static std::string format(int line, const std::string& key, const std::string& msg) {
    std::string out = "config";
    if (line > 0) out += " line " + std::to_string(line);
    if (!key.empty()) out += " key '" + key + "'";
    return out + ": " + msg;
  }

  int line_;
  std::string key_;
};

}  // namespace digdec
