#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace hyrsm {

struct GradCheckReport {
  std::string component;
  double worst_rel_err = 0.0;
  std::size_t points = 0;
};

// Central-difference verification of every backward rule: tensor primitives,
// recurrent cells, the relation module, the matching metrics, and the full
// episode loss. Each component is checked at `points` random tie-free points
// (points whose metric selections sit too close to a tie are redrawn, since
// finite differences straddle the kink there). Deterministic given seed.
std::vector<GradCheckReport> grad_check_all(std::uint64_t seed, std::size_t points);

}  // namespace hyrsm
