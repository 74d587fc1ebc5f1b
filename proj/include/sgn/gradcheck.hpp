#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sgn/nn.hpp"

namespace sgn {

struct GradCheckResult {
    std::string name;
    double rel_error = 0.0;
    bool pass = false;
};

/// Central finite differences (step 1e-5) against the analytic backward pass
/// of every layer and loss, plus a composite GC-P-FC network end to end.
/// Relative error threshold 1e-6 per tensor. `corrupt` perturbs one analytic
/// gradient to prove the harness detects a broken backward pass.
std::vector<GradCheckResult> run_gradient_checks(std::uint64_t seed, bool corrupt = false);

bool all_passed(const std::vector<GradCheckResult>& results);

/// Random similarity graph from seeded points in the plane; used by the
/// gradient checks and the property tests.
SimilarityGraph random_geometric_graph(int n, std::uint64_t seed);

}  // namespace sgn
