#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tea {

struct CheckResult {
  std::string group;  // module the property belongs to
  std::string name;
  bool passed = false;
  bool core_claim = false;  // counts toward the headline-claims tally
  std::string detail;       // measured values, shown on the report line
};

struct SelfcheckReport {
  std::vector<CheckResult> results;
  int total = 0, passed = 0, failed = 0;
  int core_total = 0, core_passed = 0;
  bool all_passed() const { return failed == 0; }
  std::string to_json_string(int indent = 2) const;
};

struct SelfcheckOptions {
  std::uint64_t seed = 0;
  // quick skips the slower sweeps (full equivalence grid, linear probe);
  // everything structural still runs.
  bool quick = false;
};

// Runs the property suite across every module and returns per-check
// results. Honors g_inject_grad_fault (the gradient group must then fail).
SelfcheckReport run_selfcheck(const SelfcheckOptions& opts);

}  // namespace tea
