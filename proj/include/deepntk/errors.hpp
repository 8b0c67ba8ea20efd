#pragma once

#include <stdexcept>
#include <string>

namespace deepntk {

enum class ErrorKind {
  invalid_argument,
  numeric,
  convergence,
  divergence,
  no_solution,
  assumption_violated,
  invalid_dataset,
  invalid_row,
  singular_matrix,
  resolution,
  unsupported,
  parse,
  io,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what);
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

// Process exit code for an error kind: 2 config, 3 numeric, 4 io.
int exit_code_for(ErrorKind kind);

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

inline void require(bool ok, const std::string& what) {
  if (!ok) fail(ErrorKind::invalid_argument, what);
}

}  // namespace deepntk
