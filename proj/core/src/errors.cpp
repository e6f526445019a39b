#include "wattbench/errors.hpp"

namespace wattbench {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::format: return "format";
    case ErrorKind::value: return "value";
    case ErrorKind::range: return "range";
    case ErrorKind::insufficient_data: return "insufficient-data";
    case ErrorKind::no_steady_state: return "no-steady-state";
    case ErrorKind::coverage: return "coverage";
    case ErrorKind::shape: return "shape";
    case ErrorKind::compatibility: return "compatibility";
    case ErrorKind::generation: return "generation";
    case ErrorKind::derivation: return "derivation";
    case ErrorKind::solver: return "solver";
    case ErrorKind::fit: return "fit";
    case ErrorKind::io: return "io";
    case ErrorKind::usage: return "usage";
  }
  return "unknown";
}

}  // namespace wattbench
