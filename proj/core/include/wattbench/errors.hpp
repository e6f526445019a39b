#pragma once

#include <stdexcept>
#include <string>

namespace wattbench {

enum class ErrorKind {
  format,             // malformed input file
  value,              // invalid or out-of-range value
  range,              // window or index outside bounds
  insufficient_data,  // too few samples/points for the operation
  no_steady_state,    // no window satisfied the CV threshold
  coverage,           // instruction missing from the calibration system
  shape,              // square-system row/column mismatch
  compatibility,      // grouping-rules fingerprint mismatch
  generation,         // synthetic dataset could not be generated
  derivation,         // scaling-factor derivation failure
  solver,             // NNLS did not converge
  fit,                // regression fit failure
  io,                 // filesystem failure
  usage,              // CLI misuse
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace wattbench
