#pragma once

#include <functional>
#include <string>
#include <vector>

namespace deepntk {

struct CheckResult {
  std::string module;
  std::string name;
  bool passed = false;
  std::string detail;
};

// Runs fn and records its verdict; exceptions count as failures.
CheckResult run_check(const std::string& module, const std::string& name,
                      const std::function<bool(std::string&)>& fn);

// Invariant suites of the numerical modules (gaussmath .. empirical).
std::vector<CheckResult> run_module_invariants();

}  // namespace deepntk
