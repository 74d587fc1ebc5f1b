#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace sgn {

/// Bad input data, malformed files, inconsistent configuration. CLI exit code 1.
struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numerical failure (solver divergence, NaN loss). CLI exit code 2.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

/// FNV-1a over the raw matrix bytes plus dimensions; used to tie cached
/// artifacts (graphs, bases) back to the data they were computed from.
std::uint64_t matrix_hash(const Eigen::MatrixXd& m);

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ValidationError(msg);
}

}  // namespace sgn
