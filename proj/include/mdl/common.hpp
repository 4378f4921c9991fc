#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mdl {

// Error categories map onto CLI exit codes: config -> 2, dependency -> 3,
// numeric -> 4. Everything else is a generic failure (1).
enum class ErrorKind {
  dimension,    // shape/size contract violated
  data,         // empty or degenerate input data
  config,       // bad configuration file or values
  dependency,   // missing upstream artifact
  numeric,      // divergence, non-finite values
  unsupported,  // operation not available for this input
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

  static Error dimension(const std::string& w) { return {ErrorKind::dimension, w}; }
  static Error data(const std::string& w) { return {ErrorKind::data, w}; }
  static Error config(const std::string& w) { return {ErrorKind::config, w}; }
  static Error dependency(const std::string& w) { return {ErrorKind::dependency, w}; }
  static Error numeric(const std::string& w) { return {ErrorKind::numeric, w}; }
  static Error unsupported(const std::string& w) { return {ErrorKind::unsupported, w}; }

 private:
  ErrorKind kind_;
};

inline int exit_code_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::config: return 2;
    case ErrorKind::dependency: return 3;
    case ErrorKind::numeric: return 4;
    default: return 1;
  }
}

}  // namespace mdl
