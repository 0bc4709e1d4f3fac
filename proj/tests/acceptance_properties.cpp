// Fast acceptance gate: every mathematical invariant of the implementation,
// checked against independent oracles with pinned bounds. One line per
// criterion; exit 0 only if all hold.

#include <cstdio>

#include "apnn/verify.hpp"

int main() {
  const auto results = apnn::run_property_suite();
  std::size_t passed = 0;
  for (const auto& r : results) {
    std::printf("%s %-42s %s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(),
                r.detail.c_str());
    passed += r.pass ? 1 : 0;
  }
  std::printf("%s: %zu/%zu property criteria hold\n",
              passed == results.size() ? "PASS" : "FAIL", passed,
              results.size());
  return passed == results.size() ? 0 : 1;
}
