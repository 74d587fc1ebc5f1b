#include "sgn/graph.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <vector>

#include <json.hpp>

namespace sgn {

std::string graph_method_name(GraphMethod m) {
    switch (m) {
        case GraphMethod::Rbf: return "rbf";
        case GraphMethod::RbfLocal: return "rbf-local";
        case GraphMethod::Supervised: return "supervised";
        case GraphMethod::SupervisedLowRank: return "supervised-lowrank";
        case GraphMethod::Known: return "known";
    }
    return "unknown";
}

GraphMethod graph_method_from_name(const std::string& name) {
    if (name == "rbf") return GraphMethod::Rbf;
    if (name == "rbf-local") return GraphMethod::RbfLocal;
    if (name == "supervised") return GraphMethod::Supervised;
    if (name == "supervised-lowrank") return GraphMethod::SupervisedLowRank;
    if (name == "known") return GraphMethod::Known;
    throw ValidationError("unknown graph method '" + name +
                          "' (valid: rbf, rbf-local, supervised, supervised-lowrank, known)");
}

void validate_similarity_graph(const SimilarityGraph& g, bool require_unit_diagonal) {
    const Eigen::Index n = g.size();
    require(n >= 1 && g.weights.cols() == n, "similarity matrix must be square");
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            double w = g.weights(i, j);
            require(std::isfinite(w) && w >= 0.0, "weight (" + std::to_string(i) + "," +
                                                      std::to_string(j) + ") invalid");
            require(g.weights(i, j) == g.weights(j, i),
                    "asymmetry at (" + std::to_string(i) + "," + std::to_string(j) + ")");
            if (require_unit_diagonal)
                require(w <= 1.0, "weight (" + std::to_string(i) + "," + std::to_string(j) +
                                      ") exceeds 1");
        }
        if (require_unit_diagonal)
            require(std::abs(g.weights(i, i) - 1.0) < 1e-12,
                    "diagonal entry " + std::to_string(i) + " is not 1");
        require(g.weights.row(i).sum() > 0.0,
                "node " + std::to_string(i) + " has zero degree");
    }
}

namespace {

DistanceMatrix distances_between_rows(const Eigen::MatrixXd& R) {
    const Eigen::Index n = R.rows();
    DistanceMatrix D;
    D.values.setZero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) {
            double d = (R.row(i) - R.row(j)).squaredNorm();
            D.values(i, j) = d;
            D.values(j, i) = d;
        }
    return D;
}

}  // namespace

DistanceMatrix pairwise_sq_distances(const FeatureMatrix& X) {
    require(X.values.allFinite(), "feature matrix has non-finite entries");
    return distances_between_rows(X.values.transpose());
}

DistanceMatrix supervised_distance(const Eigen::MatrixXd& W1) {
    require(W1.allFinite(), "first-layer weights have non-finite entries");
    return distances_between_rows(W1);
}

SimilarityGraph gaussian_kernel(const DistanceMatrix& D, double sigma) {
    require(sigma > 0.0, "sigma must be positive");
    SimilarityGraph g;
    g.weights = (-D.values.array() / (sigma * sigma)).exp();
    g.sigma_info.method = GraphMethod::Rbf;
    g.sigma_info.sigma = sigma;
    return g;
}

SimilarityGraph self_tuning_kernel(const DistanceMatrix& D, int k) {
    const Eigen::Index n = D.size();
    require(k >= 1 && k <= n - 1, "k must lie in [1, N-1]");
    Eigen::VectorXd sigmas(n);
    std::vector<double> row;
    for (Eigen::Index i = 0; i < n; ++i) {
        row.clear();
        for (Eigen::Index j = 0; j < n; ++j)
            if (j != i) row.push_back(D.values(i, j));
        std::nth_element(row.begin(), row.begin() + (k - 1), row.end());
        sigmas[i] = row[static_cast<std::size_t>(k - 1)];
        if (sigmas[i] <= 0.0)
            throw ValidationError("degenerate local scale: feature " + std::to_string(i) +
                                  " has zero distance to its " + std::to_string(k) +
                                  "-th nearest neighbor");
    }
    SimilarityGraph g;
    g.weights.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        g.weights(i, i) = 1.0;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            double w = std::exp(-D.values(i, j) / (sigmas[i] * sigmas[j]));
            g.weights(i, j) = w;
            g.weights(j, i) = w;
        }
    }
    g.sigma_info.method = GraphMethod::RbfLocal;
    g.sigma_info.local_sigmas = sigmas;
    g.sigma_info.knn_k = k;
    return g;
}

double median_heuristic_sigma(const DistanceMatrix& D) {
    const Eigen::Index n = D.size();
    require(n >= 2, "need at least 2 features for the median heuristic");
    std::vector<double> off;
    off.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) off.push_back(D.values(i, j));
    std::size_t mid = off.size() / 2;
    std::nth_element(off.begin(), off.begin() + static_cast<std::ptrdiff_t>(mid), off.end());
    double med = off[mid];
    require(med > 0.0, "median off-diagonal distance is zero; supply sigma explicitly");
    return std::sqrt(med);
}

SimilarityGraph low_rank_project(const SimilarityGraph& W, int m) {
    const Eigen::Index n = W.size();
    require(m >= 1 && m <= n, "rank m must lie in [1, N]");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(W.weights);
    if (es.info() != Eigen::Success)
        throw NumericalError("eigendecomposition of W failed in low_rank_project");
    // eigenvalues ascending: keep the last m
    const Eigen::MatrixXd V = es.eigenvectors().rightCols(m);
    const Eigen::VectorXd mu = es.eigenvalues().tail(m);
    Eigen::MatrixXd Wm = V * mu.asDiagonal() * V.transpose();
    Wm = ((Wm + Wm.transpose()) / 2.0).cwiseMax(0.0).cwiseMin(1.0).eval();
    Wm.diagonal().setOnes();
    SimilarityGraph out;
    out.weights = std::move(Wm);
    out.sigma_info = W.sigma_info;
    out.sigma_info.rank_m = m;
    return out;
}

long long count_graph_parameters(GraphMethod method, Eigen::Index n, int m) {
    switch (method) {
        case GraphMethod::Known:
            return 0;
        case GraphMethod::SupervisedLowRank:
            require(m >= 1, "low-rank parameter count needs m");
            return static_cast<long long>(m) * static_cast<long long>(n);
        default:
            return static_cast<long long>(n) * static_cast<long long>(n) / 2;
    }
}

void save_graph(const std::string& path, const SimilarityGraph& g, std::uint64_t source_hash) {
    save_matrix_binary(path, g.weights);
    nlohmann::json j;
    j["method"] = graph_method_name(g.sigma_info.method);
    j["sigma"] = g.sigma_info.sigma;
    j["knn_k"] = g.sigma_info.knn_k;
    j["rank_m"] = g.sigma_info.rank_m;
    j["source_hash"] = source_hash;
    if (g.sigma_info.local_sigmas.size() > 0) {
        std::vector<double> ls(g.sigma_info.local_sigmas.data(),
                               g.sigma_info.local_sigmas.data() + g.sigma_info.local_sigmas.size());
        j["local_sigmas"] = ls;
    }
    std::ofstream out(path + ".json");
    require(out.good(), "cannot write sidecar: " + path + ".json");
    out << j.dump(2) << "\n";
}

SimilarityGraph load_graph(const std::string& path) {
    SimilarityGraph g;
    g.weights = load_matrix_binary(path);
    std::ifstream in(path + ".json");
    if (in.good()) {
        nlohmann::json j;
        in >> j;
        g.sigma_info.method = graph_method_from_name(j.value("method", "known"));
        g.sigma_info.sigma = j.value("sigma", 0.0);
        g.sigma_info.knn_k = j.value("knn_k", 0);
        g.sigma_info.rank_m = j.value("rank_m", 0);
        if (j.contains("local_sigmas")) {
            auto ls = j["local_sigmas"].get<std::vector<double>>();
            g.sigma_info.local_sigmas =
                Eigen::Map<Eigen::VectorXd>(ls.data(), static_cast<Eigen::Index>(ls.size()));
        }
    }
    return g;
}

}  // namespace sgn
