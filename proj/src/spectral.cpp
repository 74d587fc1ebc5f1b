#include "sgn/spectral.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <fstream>

#include <json.hpp>

namespace sgn {

Eigen::MatrixXd normalized_laplacian(const SimilarityGraph& W) {
    const Eigen::Index n = W.size();
    Eigen::VectorXd deg = W.weights.rowwise().sum();
    for (Eigen::Index i = 0; i < n; ++i)
        if (!(deg[i] > 0.0))
            throw ValidationError("isolated node " + std::to_string(i) +
                                  ": zero degree, normalized Laplacian undefined");
    Eigen::VectorXd dinv_sqrt = deg.array().rsqrt();
    Eigen::MatrixXd L = Eigen::MatrixXd::Identity(n, n) -
                        dinv_sqrt.asDiagonal() * W.weights * dinv_sqrt.asDiagonal();
    L = ((L + L.transpose()) / 2.0).eval();
    return L;
}

SpectralBasis eigendecompose(const Eigen::MatrixXd& L) {
    const Eigen::Index n = L.rows();
    require(n >= 1 && L.cols() == n, "Laplacian must be square");
    require((L - L.transpose()).cwiseAbs().maxCoeff() < 1e-10,
            "matrix is not symmetric within 1e-10");
    Eigen::MatrixXd sym = (L + L.transpose()) / 2.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
    if (es.info() != Eigen::Success)
        throw NumericalError("symmetric eigensolver failed to converge (n=" +
                             std::to_string(n) + ")");
    SpectralBasis basis;
    basis.eigenvalues = es.eigenvalues();
    basis.U = es.eigenvectors().transpose();  // rows are eigenvectors
    // sign convention: largest-magnitude entry positive, ties -> lowest index
    for (Eigen::Index r = 0; r < n; ++r) {
        Eigen::Index best = 0;
        double best_abs = -1.0;
        for (Eigen::Index c = 0; c < n; ++c) {
            double a = std::abs(basis.U(r, c));
            if (a > best_abs) {
                best_abs = a;
                best = c;
            }
        }
        if (basis.U(r, best) < 0.0) basis.U.row(r) = -basis.U.row(r);
    }
    return basis;
}

Eigen::VectorXd gft(const SpectralBasis& basis, const Eigen::VectorXd& x) {
    require(x.size() == basis.size(), "gft: vector length " + std::to_string(x.size()) +
                                          " does not match basis size " +
                                          std::to_string(basis.size()));
    return basis.U * x;
}

Eigen::VectorXd igft(const SpectralBasis& basis, const Eigen::VectorXd& xhat) {
    require(xhat.size() == basis.size(), "igft: vector length " + std::to_string(xhat.size()) +
                                             " does not match basis size " +
                                             std::to_string(basis.size()));
    return basis.U.transpose() * xhat;
}

namespace {

/// Natural cubic spline through (t_i, y_i); returns values at x = 0..n-1.
Eigen::VectorXd natural_spline_eval(const std::vector<int>& t, const Eigen::VectorXd& y, int n) {
    const int m = static_cast<int>(t.size());
    Eigen::VectorXd m2 = Eigen::VectorXd::Zero(m);  // second derivatives, natural ends
    if (m > 2) {
        const int k = m - 2;
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(k, k);
        Eigen::VectorXd rhs(k);
        for (int i = 1; i <= k; ++i) {
            double h0 = t[i] - t[i - 1];
            double h1 = t[i + 1] - t[i];
            if (i > 1) A(i - 1, i - 2) = h0;
            A(i - 1, i - 1) = 2.0 * (h0 + h1);
            if (i < k) A(i - 1, i) = h1;
            rhs[i - 1] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
        }
        m2.segment(1, k) = A.ldlt().solve(rhs);
    }
    Eigen::VectorXd out(n);
    int seg = 0;
    for (int x = 0; x < n; ++x) {
        while (seg < m - 2 && x > t[seg + 1]) ++seg;
        double h = t[seg + 1] - t[seg];
        double a = t[seg + 1] - x;
        double b = x - t[seg];
        out[x] = m2[seg] * a * a * a / (6.0 * h) + m2[seg + 1] * b * b * b / (6.0 * h) +
                 (y[seg] / h - m2[seg] * h / 6.0) * a +
                 (y[seg + 1] / h - m2[seg + 1] * h / 6.0) * b;
    }
    return out;
}

}  // namespace

SplineKernel build_spline_kernel(int n, int n0) {
    require(n0 >= 2 && n0 <= n, "need 2 <= N0 <= N (got N0=" + std::to_string(n0) +
                                    ", N=" + std::to_string(n) + ")");
    SplineKernel kernel;
    kernel.n0 = n0;
    kernel.knots.resize(static_cast<std::size_t>(n0));
    for (int j = 0; j < n0; ++j)
        kernel.knots[static_cast<std::size_t>(j)] =
            static_cast<int>(std::lround(static_cast<double>(j) * (n - 1) / (n0 - 1)));
    kernel.K.resize(n, n0);
    Eigen::VectorXd e = Eigen::VectorXd::Zero(n0);
    for (int j = 0; j < n0; ++j) {
        e[j] = 1.0;
        kernel.K.col(j) = natural_spline_eval(kernel.knots, e, n);
        e[j] = 0.0;
    }
    // rows at knot positions are exact standard basis vectors
    for (int j = 0; j < n0; ++j) {
        kernel.K.row(kernel.knots[static_cast<std::size_t>(j)]).setZero();
        kernel.K(kernel.knots[static_cast<std::size_t>(j)], j) = 1.0;
    }
    return kernel;
}

Eigen::VectorXd interpolate_weights(const SplineKernel& kernel, const Eigen::VectorXd& wt) {
    require(wt.size() == kernel.n0, "interpolate_weights: expected " + std::to_string(kernel.n0) +
                                        " subsampled weights, got " + std::to_string(wt.size()));
    return kernel.K * wt;
}

void save_basis(const std::string& path_prefix, const SpectralBasis& basis,
                std::uint64_t graph_hash) {
    save_matrix_binary(path_prefix + "_eigenvalues.bin", basis.eigenvalues);
    save_matrix_binary(path_prefix + "_U.bin", basis.U);
    nlohmann::json j;
    j["n"] = basis.size();
    j["graph_hash"] = graph_hash;
    std::ofstream out(path_prefix + ".json");
    require(out.good(), "cannot write sidecar: " + path_prefix + ".json");
    out << j.dump(2) << "\n";
}

SpectralBasis load_basis(const std::string& path_prefix) {
    SpectralBasis basis;
    basis.eigenvalues = load_matrix_binary(path_prefix + "_eigenvalues.bin");
    basis.U = load_matrix_binary(path_prefix + "_U.bin");
    require(basis.U.rows() == basis.eigenvalues.size() && basis.U.cols() == basis.U.rows(),
            "basis files at " + path_prefix + " have inconsistent shapes");
    return basis;
}

}  // namespace sgn
