#pragma once

#include <Eigen/Dense>
#include <string>

#include "sgn/data.hpp"

namespace sgn {

/// Symmetric N x N matrix of squared distances between features, zero diagonal.
struct DistanceMatrix {
    Eigen::MatrixXd values;
    Eigen::Index size() const { return values.rows(); }
};

enum class GraphMethod { Rbf, RbfLocal, Supervised, SupervisedLowRank, Known };

std::string graph_method_name(GraphMethod m);
GraphMethod graph_method_from_name(const std::string& name);

/// Kernel parameters recorded alongside the weights so runs are reproducible.
struct SigmaInfo {
    GraphMethod method = GraphMethod::Known;
    double sigma = 0.0;             // global bandwidth, when applicable
    Eigen::VectorXd local_sigmas;   // per-node scales for the self-tuning kernel
    int knn_k = 0;
    int rank_m = 0;
};

/// Symmetric nonnegative similarity matrix W with entries in [0,1],
/// unit diagonal and strictly positive degrees.
struct SimilarityGraph {
    Eigen::MatrixXd weights;
    SigmaInfo sigma_info;
    Eigen::Index size() const { return weights.rows(); }
};

/// Throws ValidationError if the SimilarityGraph invariants are violated.
/// Coarsened graphs accumulate self-loops, so the unit-diagonal rule is
/// optional for them.
void validate_similarity_graph(const SimilarityGraph& g, bool require_unit_diagonal = true);

/// Squared Euclidean distances between the COLUMNS of X (features, not
/// samples). Upper triangle computed once and mirrored; diagonal forced to 0.
DistanceMatrix pairwise_sq_distances(const FeatureMatrix& X);

/// Squared Euclidean distances between the ROWS of a first-layer weight
/// matrix W1 (N features x M1 hidden units).
DistanceMatrix supervised_distance(const Eigen::MatrixXd& W1);

/// w(i,j) = exp(-d(i,j) / sigma^2).
SimilarityGraph gaussian_kernel(const DistanceMatrix& D, double sigma);

/// w(i,j) = exp(-d(i,j) / (sigma_i sigma_j)) with sigma_i the distance to
/// the k-th nearest neighbor of i (self excluded). Note d is already a
/// squared distance and is used as-is for the scales.
SimilarityGraph self_tuning_kernel(const DistanceMatrix& D, int k);

/// Median heuristic: sigma = sqrt(median of off-diagonal d(i,j)), so that
/// the kernel argument is d / median(d).
double median_heuristic_sigma(const DistanceMatrix& D);

/// Keeps the m largest-eigenvalue components of W, then re-symmetrizes,
/// clamps negatives to 0 and resets the diagonal to 1 to restore the
/// SimilarityGraph invariants.
SimilarityGraph low_rank_project(const SimilarityGraph& W, int m);

/// Free parameters consumed by graph estimation: N^2/2 for full kernels,
/// m*N for low rank, 0 for a known graph.
long long count_graph_parameters(GraphMethod method, Eigen::Index n, int m = 0);

/// Persistence: "SGN1" weight matrix plus a JSON sidecar (<path>.json)
/// with the estimation method, kernel parameters and source-data hash.
void save_graph(const std::string& path, const SimilarityGraph& g, std::uint64_t source_hash);
SimilarityGraph load_graph(const std::string& path);

}  // namespace sgn
