#include "sgn/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include <json.hpp>

#include "sgn/spectral.hpp"

namespace sgn {

std::string pool_mode_name(PoolMode m) { return m == PoolMode::Max ? "max" : "average"; }

PoolMode pool_mode_from_name(const std::string& name) {
    if (name == "max") return PoolMode::Max;
    if (name == "average" || name == "avg") return PoolMode::Average;
    throw ValidationError("unknown pooling mode '" + name + "' (valid: max, average)");
}

namespace {

struct KMeansResult {
    std::vector<int> assignment;
    Eigen::MatrixXd centers;
};

int nearest_center(const Eigen::MatrixXd& X, const Eigen::MatrixXd& centers, Eigen::Index i) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < centers.rows(); ++c) {
        double d = (X.row(i) - centers.row(c)).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(c);
        }
    }
    return best;
}

KMeansResult kmeans(const Eigen::MatrixXd& X, int k, std::uint64_t seed) {
    const Eigen::Index n = X.rows();
    KMeansResult res;
    res.centers.resize(k, X.cols());

    // farthest-point seeding from a seed-chosen start
    std::mt19937_64 rng(seed);
    std::vector<Eigen::Index> chosen;
    chosen.push_back(static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(n)));
    Eigen::VectorXd dist_to_set =
        (X.rowwise() - X.row(chosen[0])).rowwise().squaredNorm();
    while (static_cast<int>(chosen.size()) < k) {
        Eigen::Index far = 0;
        double best = -1.0;
        for (Eigen::Index i = 0; i < n; ++i)
            if (dist_to_set[i] > best) {
                best = dist_to_set[i];
                far = i;
            }
        chosen.push_back(far);
        dist_to_set =
            dist_to_set.cwiseMin((X.rowwise() - X.row(far)).rowwise().squaredNorm());
    }
    for (int c = 0; c < k; ++c) res.centers.row(c) = X.row(chosen[static_cast<std::size_t>(c)]);

    res.assignment.assign(static_cast<std::size_t>(n), 0);
    double prev_inertia = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < 100; ++iter) {
        double inertia = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            int c = nearest_center(X, res.centers, i);
            res.assignment[static_cast<std::size_t>(i)] = c;
            inertia += (X.row(i) - res.centers.row(c)).squaredNorm();
        }
        // repair empty clusters: split the largest at its farthest member
        std::vector<int> counts(static_cast<std::size_t>(k), 0);
        for (int a : res.assignment) ++counts[static_cast<std::size_t>(a)];
        for (int c = 0; c < k; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0) continue;
            int big = static_cast<int>(std::max_element(counts.begin(), counts.end()) -
                                       counts.begin());
            Eigen::Index far = -1;
            double best = -1.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                if (res.assignment[static_cast<std::size_t>(i)] != big) continue;
                double d = (X.row(i) - res.centers.row(big)).squaredNorm();
                if (d > best) {
                    best = d;
                    far = i;
                }
            }
            res.assignment[static_cast<std::size_t>(far)] = c;
            res.centers.row(c) = X.row(far);
            --counts[static_cast<std::size_t>(big)];
            ++counts[static_cast<std::size_t>(c)];
        }
        // update means
        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, X.cols());
        std::vector<int> cnt(static_cast<std::size_t>(k), 0);
        for (Eigen::Index i = 0; i < n; ++i) {
            sums.row(res.assignment[static_cast<std::size_t>(i)]) += X.row(i);
            ++cnt[static_cast<std::size_t>(res.assignment[static_cast<std::size_t>(i)])];
        }
        for (int c = 0; c < k; ++c)
            if (cnt[static_cast<std::size_t>(c)] > 0)
                res.centers.row(c) = sums.row(c) / cnt[static_cast<std::size_t>(c)];

        if (std::abs(prev_inertia - inertia) <= 1e-6 * std::max(prev_inertia, 1e-300)) break;
        prev_inertia = inertia;
    }
    return res;
}

}  // namespace

Partition spectral_cluster(const SimilarityGraph& W, int M, std::uint64_t seed) {
    const Eigen::Index n = W.size();
    require(M >= 1 && M <= n, "cluster count M must lie in [1, N]");
    Partition p;
    p.num_clusters = M;
    p.assignment.assign(static_cast<std::size_t>(n), 0);
    if (M == 1) return p;
    if (M == n) {
        for (Eigen::Index i = 0; i < n; ++i) p.assignment[static_cast<std::size_t>(i)] = static_cast<int>(i);
        return p;
    }
    SpectralBasis basis = eigendecompose(normalized_laplacian(W));
    Eigen::MatrixXd embed = basis.U.topRows(M).transpose();  // N x M
    for (Eigen::Index i = 0; i < n; ++i) {
        double norm = embed.row(i).norm();
        if (norm > 1e-300) embed.row(i) /= norm;
    }
    KMeansResult km = kmeans(embed, M, seed);
    p.assignment = std::move(km.assignment);
    return p;
}

SimilarityGraph coarsen_graph(const SimilarityGraph& W, const Partition& p) {
    const Eigen::Index n = W.size();
    require(p.size() == n, "partition length does not match graph size");
    const int m = p.num_clusters;
    SimilarityGraph out;
    out.weights = Eigen::MatrixXd::Zero(m, m);
    out.sigma_info = W.sigma_info;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            out.weights(p.assignment[static_cast<std::size_t>(i)],
                        p.assignment[static_cast<std::size_t>(j)]) += W.weights(i, j);
    out.weights = ((out.weights + out.weights.transpose()) / 2.0).eval();
    return out;
}

ClusterHierarchy build_hierarchy(const SimilarityGraph& W, const std::vector<int>& strides,
                                 std::uint64_t seed) {
    const Eigen::Index n = W.size();
    long long product = 1;
    for (int s : strides) {
        require(s >= 2, "pooling stride must be >= 2, got " + std::to_string(s));
        product *= s;
    }
    require(product <= n, "product of strides exceeds graph size");

    ClusterHierarchy h;
    h.strides = strides;
    h.seed = seed;

    HierarchyLevel root;
    root.partition.num_clusters = static_cast<int>(n);
    root.partition.assignment.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i)
        root.partition.assignment[static_cast<std::size_t>(i)] = static_cast<int>(i);
    root.graph = W;
    h.levels.push_back(std::move(root));

    for (std::size_t l = 0; l < strides.size(); ++l) {
        const SimilarityGraph& prev = h.levels.back().graph;
        int m_prev = static_cast<int>(prev.size());
        int m_next = (m_prev + strides[l] - 1) / strides[l];
        HierarchyLevel level;
        level.partition = spectral_cluster(prev, m_next, seed + l + 1);
        level.graph = coarsen_graph(prev, level.partition);
        h.levels.push_back(std::move(level));
    }
    return h;
}

PoolingMap build_pooling_map(const ClusterHierarchy& h, std::size_t level, PoolMode mode) {
    require(level + 1 < h.levels.size(), "no pooling level " + std::to_string(level));
    const Partition& p = h.levels[level + 1].partition;
    const Eigen::MatrixXd& coarse_w = h.levels[level + 1].graph.weights;
    const int n_in = static_cast<int>(p.size());
    const int m = p.num_clusters;

    std::vector<std::vector<int>> members(static_cast<std::size_t>(m));
    for (int i = 0; i < n_in; ++i)
        members[static_cast<std::size_t>(p.assignment[static_cast<std::size_t>(i)])].push_back(i);

    PoolingMap map;
    map.mode = mode;
    map.stride = h.strides[level];
    map.pool_size = 2 * map.stride;
    map.input_size = n_in;
    map.receptive_fields.resize(static_cast<std::size_t>(m));
    for (int o = 0; o < m; ++o) {
        std::vector<int> field = members[static_cast<std::size_t>(o)];
        if (m > 1) {
            int nb = o == 0 ? 1 : 0;
            double best = coarse_w(o, nb);
            for (int b = 0; b < m; ++b) {
                if (b == o) continue;
                if (coarse_w(o, b) > best) {
                    best = coarse_w(o, b);
                    nb = b;
                }
            }
            field.insert(field.end(), members[static_cast<std::size_t>(nb)].begin(),
                         members[static_cast<std::size_t>(nb)].end());
        }
        std::sort(field.begin(), field.end());
        map.receptive_fields[static_cast<std::size_t>(o)] = std::move(field);
    }
    return map;
}

void save_hierarchy(const std::string& path_prefix, const ClusterHierarchy& h) {
    nlohmann::json j;
    j["strides"] = h.strides;
    j["seed"] = h.seed;
    j["levels"] = nlohmann::json::array();
    for (std::size_t l = 0; l < h.levels.size(); ++l) {
        nlohmann::json lvl;
        lvl["num_clusters"] = h.levels[l].partition.num_clusters;
        lvl["assignment"] = h.levels[l].partition.assignment;
        j["levels"].push_back(lvl);
        save_matrix_binary(path_prefix + "_level" + std::to_string(l) + ".bin",
                           h.levels[l].graph.weights);
    }
    std::ofstream out(path_prefix + ".json");
    require(out.good(), "cannot write hierarchy: " + path_prefix + ".json");
    out << j.dump(2) << "\n";
}

ClusterHierarchy load_hierarchy(const std::string& path_prefix) {
    std::ifstream in(path_prefix + ".json");
    require(in.good(), "cannot open hierarchy: " + path_prefix + ".json");
    nlohmann::json j;
    in >> j;
    ClusterHierarchy h;
    h.strides = j["strides"].get<std::vector<int>>();
    h.seed = j["seed"].get<std::uint64_t>();
    for (std::size_t l = 0; l < j["levels"].size(); ++l) {
        HierarchyLevel level;
        level.partition.num_clusters = j["levels"][l]["num_clusters"].get<int>();
        level.partition.assignment = j["levels"][l]["assignment"].get<std::vector<int>>();
        level.graph.weights =
            load_matrix_binary(path_prefix + "_level" + std::to_string(l) + ".bin");
        h.levels.push_back(std::move(level));
    }
    return h;
}

}  // namespace sgn
