#pragma once

#include <functional>
#include <set>
#include <string>
#include <vector>

namespace stiffavg::acceptance {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::vector<std::string> details;  // measured values against their thresholds
  double seconds = 0.0;
  double budget_seconds = 0.0;  // runtime ceiling, 0 = none
};

struct Options {
  std::set<int> only;  // empty = all criteria
  bool verbose = false;
};

/// Number of criteria in the suite.
int criterion_count();

/// Runs the acceptance criteria in order; `on_result` is called as each one
/// finishes. An exception inside a criterion marks it failed.
std::vector<CriterionResult> run(const Options& opts,
                                 const std::function<void(const CriterionResult&)>& on_result = {});

/// "PASS [n] name (1.2 s)" / "FAIL ..." line.
std::string summary_line(const CriterionResult& r);

}  // namespace stiffavg::acceptance
