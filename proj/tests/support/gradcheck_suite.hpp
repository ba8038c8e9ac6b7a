#pragma once

#include <string>
#include <vector>

// The finite-difference suite over every differentiable operation, run in
// 64-bit precision. Kept free of library types so 32-bit code can call it.
namespace gradcheck {

struct CaseResult {
  std::string name;
  double error = 0;
  double tolerance = 0;
  bool passed() const { return error < tolerance; }
};

std::vector<CaseResult> run_suite();

}  // namespace gradcheck
