#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

#include "sgn/gradcheck.hpp"
#include "sgn/spectral.hpp"

using namespace sgn;

namespace {

SimilarityGraph cycle_graph(int n) {
    SimilarityGraph g;
    g.weights = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        g.weights(i, (i + 1) % n) = 1.0;
        g.weights((i + 1) % n, i) = 1.0;
    }
    return g;
}

// union-find connected components over the support of W (off-diagonal)
int component_count(const Eigen::MatrixXd& w) {
    const int n = static_cast<int>(w.rows());
    std::vector<int> parent(static_cast<std::size_t>(n));
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int a) {
        while (parent[static_cast<std::size_t>(a)] != a) {
            parent[static_cast<std::size_t>(a)] =
                parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(a)])];
            a = parent[static_cast<std::size_t>(a)];
        }
        return a;
    };
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (w(i, j) > 0.0) parent[static_cast<std::size_t>(find(i))] = find(j);
    int count = 0;
    for (int i = 0; i < n; ++i)
        if (find(i) == i) ++count;
    return count;
}

// random graph with exact zeros so disconnected cases occur
SimilarityGraph sparse_random_graph(int n, std::mt19937_64& rng) {
    SimilarityGraph g;
    g.weights = Eigen::MatrixXd::Zero(n, n);
    const double p = 0.02 + static_cast<double>(rng() % 100) / 250.0;
    for (int i = 0; i < n; ++i) {
        g.weights(i, i) = 1.0;
        for (int j = i + 1; j < n; ++j) {
            if (static_cast<double>(rng() % 10000) / 10000.0 < p) {
                const double w = 0.1 + 0.9 * static_cast<double>(rng() % 1000) / 1000.0;
                g.weights(i, j) = w;
                g.weights(j, i) = w;
            }
        }
    }
    return g;
}

}  // namespace

TEST_CASE("normalized Laplacian of a 2-node edge") {
    SimilarityGraph w;
    w.weights.resize(2, 2);
    w.weights << 0, 1, 1, 0;
    Eigen::MatrixXd l = normalized_laplacian(w);
    Eigen::MatrixXd expected(2, 2);
    expected << 1, -1, -1, 1;
    CHECK((l - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("self-loop-only graph has a zero Laplacian") {
    SimilarityGraph w;
    w.weights = Eigen::MatrixXd::Identity(3, 3);
    CHECK(normalized_laplacian(w).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("4-cycle eigenvalues are 1 - cos(2 pi r / 4)") {
    SpectralBasis basis = eigendecompose(normalized_laplacian(cycle_graph(4)));
    std::vector<double> expected = {0.0, 1.0, 1.0, 2.0};
    for (int r = 0; r < 4; ++r) CHECK(basis.eigenvalues[r] == doctest::Approx(expected[static_cast<std::size_t>(r)]));
}

TEST_CASE("isolated node raises a named error") {
    SimilarityGraph w;
    w.weights = Eigen::MatrixXd::Zero(3, 3);
    w.weights(0, 1) = w.weights(1, 0) = 1.0;
    try {
        normalized_laplacian(w);
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("node 2") != std::string::npos);
    }
}

TEST_CASE("eigendecompose hand instance") {
    Eigen::MatrixXd l(2, 2);
    l << 1, -1, -1, 1;
    SpectralBasis basis = eigendecompose(l);
    CHECK(basis.eigenvalues[0] == doctest::Approx(0.0));
    CHECK(basis.eigenvalues[1] == doctest::Approx(2.0));
    const double s = 1.0 / std::sqrt(2.0);
    CHECK(basis.U(0, 0) == doctest::Approx(s));
    CHECK(basis.U(0, 1) == doctest::Approx(s));
    CHECK(basis.U(1, 0) == doctest::Approx(s));   // sign convention
    CHECK(basis.U(1, 1) == doctest::Approx(-s));
}

TEST_CASE("identity Laplacian yields the identity basis") {
    SpectralBasis basis = eigendecompose(Eigen::MatrixXd::Identity(5, 5));
    CHECK((basis.eigenvalues.array() - 1.0).abs().maxCoeff() < 1e-12);
    CHECK((basis.U - Eigen::MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("reconstruction U^T diag(lambda) U = L") {
    std::mt19937_64 rng(3);
    Eigen::MatrixXd a = Eigen::MatrixXd::Random(10, 10);
    Eigen::MatrixXd l = (a + a.transpose()) / 2.0;
    SpectralBasis basis = eigendecompose(l);
    Eigen::MatrixXd rec =
        basis.U.transpose() * basis.eigenvalues.asDiagonal() * basis.U;
    CHECK((rec - l).norm() < 1e-8);
    CHECK((basis.U * basis.U.transpose() - Eigen::MatrixXd::Identity(10, 10)).norm() < 1e-8);
}

TEST_CASE("eigendecompose rejects asymmetric input") {
    Eigen::MatrixXd l = Eigen::MatrixXd::Random(4, 4);
    l(0, 1) = l(1, 0) + 1.0;
    CHECK_THROWS_AS(eigendecompose(l), ValidationError);
}

TEST_CASE("eigendecompose is deterministic and eigenpairs verify") {
    SimilarityGraph w = random_geometric_graph(24, 5);
    Eigen::MatrixXd l = normalized_laplacian(w);
    SpectralBasis a = eigendecompose(l);
    SpectralBasis b = eigendecompose(l);
    CHECK((a.U - b.U).cwiseAbs().maxCoeff() == 0.0);
    for (Eigen::Index r = 0; r < a.size(); ++r) {
        Eigen::VectorXd v = a.U.row(r).transpose();
        CHECK((l * v - a.eigenvalues[r] * v).cwiseAbs().maxCoeff() < 1e-6);
    }
}

TEST_CASE("gft of the degree-scaled constant concentrates at frequency 0") {
    SimilarityGraph w = random_geometric_graph(16, 8);
    SpectralBasis basis = eigendecompose(normalized_laplacian(w));
    Eigen::VectorXd deg = w.weights.rowwise().sum();
    Eigen::VectorXd x = deg.array().sqrt();
    x /= x.norm();
    Eigen::VectorXd xhat = gft(basis, x);
    CHECK(std::abs(std::abs(xhat[0]) - 1.0) < 1e-8);
    CHECK(xhat.tail(15).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("gft round-trip and Parseval") {
    SimilarityGraph w = random_geometric_graph(20, 9);
    SpectralBasis basis = eigendecompose(normalized_laplacian(w));
    std::mt19937_64 rng(1);
    for (int t = 0; t < 100; ++t) {
        Eigen::VectorXd x = Eigen::VectorXd::Random(20);
        Eigen::VectorXd xhat = gft(basis, x);
        CHECK((igft(basis, xhat) - x).cwiseAbs().maxCoeff() < 1e-10);
        CHECK(std::abs(xhat.norm() - x.norm()) < 1e-10);
    }
    CHECK(gft(basis, Eigen::VectorXd::Zero(20)).cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(gft(basis, Eigen::VectorXd::Zero(7)), ValidationError);
}

TEST_CASE("eigenvalue range and zero multiplicity vs union-find oracle") {
    std::mt19937_64 rng(77);
    for (int t = 0; t < 200; ++t) {
        const int n = 2 + static_cast<int>(rng() % 63);
        SimilarityGraph g = sparse_random_graph(n, rng);
        SpectralBasis basis = eigendecompose(normalized_laplacian(g));
        CHECK(basis.eigenvalues[0] > -1e-10);
        CHECK(basis.eigenvalues[n - 1] < 2.0 + 1e-10);
        const int zeros = static_cast<int>(
            (basis.eigenvalues.array() < 1e-8).count());
        CHECK(zeros == component_count(g.weights));
    }
}

TEST_CASE("spline kernel with N0 = N is the identity") {
    SplineKernel k = build_spline_kernel(8, 8);
    CHECK((k.K - Eigen::MatrixXd::Identity(8, 8)).cwiseAbs().maxCoeff() < 1e-12);
    Eigen::VectorXd wt = Eigen::VectorXd::Random(8);
    CHECK((interpolate_weights(k, wt) - wt).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("spline kernel reproduces constants") {
    for (auto [n, n0] : {std::pair{16, 5}, std::pair{60, 7}, std::pair{100, 13}}) {
        SplineKernel k = build_spline_kernel(n, n0);
        Eigen::VectorXd ones = Eigen::VectorXd::Ones(n0);
        CHECK((k.K * ones - Eigen::VectorXd::Ones(n)).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("spline kernel reproduces linear functions of the frequency index") {
    const int n = 41, n0 = 6;
    SplineKernel k = build_spline_kernel(n, n0);
    Eigen::VectorXd wt(n0);
    for (int j = 0; j < n0; ++j) wt[j] = 2.0 * k.knots[static_cast<std::size_t>(j)] + 3.0;
    Eigen::VectorXd w = interpolate_weights(k, wt);
    for (int i = 0; i < n; ++i) CHECK(std::abs(w[i] - (2.0 * i + 3.0)) < 1e-10);
}

TEST_CASE("spline kernel rows at knots select single weights") {
    SplineKernel k = build_spline_kernel(30, 6);
    for (int j = 0; j < 6; ++j) {
        Eigen::RowVectorXd row = k.K.row(k.knots[static_cast<std::size_t>(j)]);
        CHECK(row[j] == 1.0);
        CHECK(row.sum() == doctest::Approx(1.0));
        for (int c = 0; c < 6; ++c)
            if (c != j) CHECK(row[c] == 0.0);
    }
    CHECK_THROWS_AS(build_spline_kernel(8, 1), ValidationError);
    CHECK_THROWS_AS(build_spline_kernel(8, 9), ValidationError);
    CHECK_THROWS_AS(interpolate_weights(k, Eigen::VectorXd::Zero(5)), ValidationError);
}

TEST_CASE("basis persistence round-trips") {
    namespace fs = std::filesystem;
    SimilarityGraph w = random_geometric_graph(10, 3);
    SpectralBasis basis = eigendecompose(normalized_laplacian(w));
    const std::string prefix = (fs::temp_directory_path() / "sgn_basis").string();
    save_basis(prefix, basis, 42);
    SpectralBasis back = load_basis(prefix);
    CHECK((back.U - basis.U).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.eigenvalues - basis.eigenvalues).cwiseAbs().maxCoeff() == 0.0);
}
