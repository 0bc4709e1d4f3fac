#pragma once

#include <string>
#include <vector>

namespace apnn {

struct PropertyResult {
  std::string name;
  bool pass = false;
  std::string detail;  // measured value against its bound
};

// Mathematical invariants of the implementation, each checked against an
// independent oracle: closed forms, finite differences, a second code path,
// or grid refinement. Fixed seeds throughout, so results are reproducible.
std::vector<PropertyResult> run_property_suite();

bool all_pass(const std::vector<PropertyResult>& results);

}
