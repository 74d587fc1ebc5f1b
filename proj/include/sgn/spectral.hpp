#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "sgn/graph.hpp"

namespace sgn {

/// Eigenbasis of the normalized graph Laplacian. The ROWS of U are the
/// eigenvectors, so the graph Fourier transform of x is U*x and the inverse
/// is U^T * xhat.
struct SpectralBasis {
    Eigen::VectorXd eigenvalues;  // ascending, in [0, 2]
    Eigen::MatrixXd U;            // N x N, rows are eigenvectors

    Eigen::Index size() const { return eigenvalues.size(); }
};

/// L = I - D^{-1/2} W D^{-1/2}. Throws when a node has zero degree.
Eigen::MatrixXd normalized_laplacian(const SimilarityGraph& W);

/// Symmetric eigendecomposition with a deterministic sign convention: each
/// eigenvector's largest-magnitude entry is made positive (ties broken by
/// the lowest index).
SpectralBasis eigendecompose(const Eigen::MatrixXd& L);

Eigen::VectorXd gft(const SpectralBasis& basis, const Eigen::VectorXd& x);
Eigen::VectorXd igft(const SpectralBasis& basis, const Eigen::VectorXd& xhat);

/// Natural cubic-spline interpolation operator from N0 knots, placed
/// uniformly over the frequency index range {0, ..., N-1}, evaluated at all
/// N indices. Maps subsampled weights to full spectral multipliers.
struct SplineKernel {
    Eigen::MatrixXd K;        // N x N0
    int n0 = 0;
    std::vector<int> knots;   // knot_j = round(j * (N-1) / (N0-1))
};

SplineKernel build_spline_kernel(int n, int n0);

/// w = K * wt; exact at the knots.
Eigen::VectorXd interpolate_weights(const SplineKernel& kernel, const Eigen::VectorXd& wt);

/// Persistence: <path>_eigenvalues.bin (N x 1), <path>_U.bin (N x N) and a
/// JSON sidecar <path>.json carrying the source graph hash.
void save_basis(const std::string& path_prefix, const SpectralBasis& basis,
                std::uint64_t graph_hash);
SpectralBasis load_basis(const std::string& path_prefix);

}  // namespace sgn
