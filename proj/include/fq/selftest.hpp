#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace fq {

struct SelftestResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Fast invariant suite (a few seconds): mapping, pulse shaping, link
/// physics, receiver chain, metrics, gradients and container round trips.
std::vector<SelftestResult> run_selftest();

/// Prints one line per check; returns true when all pass.
bool report_selftest(const std::vector<SelftestResult>& results, std::ostream& os);

}  // namespace fq
