#pragma once

#include <string>
#include <vector>

namespace csdp {

// One named check with its worst observed statistic (residual, deviation, or
// gap, depending on the suite).
struct SuiteCheck {
  std::string name;
  bool passed = false;
  double stat = 0.0;
};

struct SuiteResult {
  std::string suite;
  std::vector<SuiteCheck> checks;

  bool passed() const {
    for (const auto& c : checks)
      if (!c.passed) return false;
    return true;
  }
};

// Conditional-independence checks of the local-state histories given the
// shared observables, on random instances plus the cross-coupled negative
// control; includes the partial-observation variants.
SuiteResult run_suite_independence(int seeds);

// Controlled-Markov checks of (X^i_t, Z_{1:t}, U_{1:t-1}) with control U^i_t,
// plus the same negative control.
SuiteResult run_suite_markov(int seeds);

// Finite-horizon coordinator DP against exhaustive strategy search (reduced
// and belief-measurable patterns) and full-history best-response tests.
SuiteResult run_suite_dp_equivalence(int seeds);

// Closed-form fixed-point residuals and maximizer agreement, plus closed-form
// vs relative-value-iteration gain agreement.
SuiteResult run_suite_mab_fixed_point();

// Recursive belief updates against exact conditionals computed by
// enumeration: the common-information beliefs on full-observation instances
// (T=3) and the local posteriors on partial-observation instances (T=2).
SuiteResult run_suite_filter(int seeds);

// Dispatch by suite name; throws Error for unknown names.
SuiteResult run_suite(const std::string& name, int seeds);

}  // namespace csdp
