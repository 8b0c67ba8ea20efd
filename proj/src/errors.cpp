#include "deepntk/errors.hpp"

namespace deepntk {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid-argument";
    case ErrorKind::numeric: return "numeric-error";
    case ErrorKind::convergence: return "convergence-error";
    case ErrorKind::divergence: return "divergence-error";
    case ErrorKind::no_solution: return "no-solution";
    case ErrorKind::assumption_violated: return "assumption-violated";
    case ErrorKind::invalid_dataset: return "invalid-dataset";
    case ErrorKind::invalid_row: return "invalid-row";
    case ErrorKind::singular_matrix: return "singular-matrix";
    case ErrorKind::resolution: return "resolution-error";
    case ErrorKind::unsupported: return "unsupported";
    case ErrorKind::parse: return "parse-error";
    case ErrorKind::io: return "io-error";
  }
  return "error";
}

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::io: return 4;
    case ErrorKind::numeric:
    case ErrorKind::convergence:
    case ErrorKind::divergence:
    case ErrorKind::no_solution:
    case ErrorKind::singular_matrix:
    case ErrorKind::resolution:
      return 3;
    default:
      return 2;
  }
}

void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace deepntk
