#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sgn/graph.hpp"

namespace sgn {

struct Partition {
    std::vector<int> assignment;  // cluster id per node, ids in {0..num_clusters-1}
    int num_clusters = 0;

    Eigen::Index size() const { return static_cast<Eigen::Index>(assignment.size()); }
};

enum class PoolMode { Max, Average };

std::string pool_mode_name(PoolMode m);
PoolMode pool_mode_from_name(const std::string& name);

/// Receptive fields for one pooling layer: output node o pools over the
/// members of cluster o plus the members of its nearest-neighbor cluster
/// (by coarsened weight), giving the 2x overlap of "pool size 2k, stride k".
struct PoolingMap {
    std::vector<std::vector<int>> receptive_fields;
    PoolMode mode = PoolMode::Max;
    int stride = 0;
    int pool_size = 0;
    int input_size = 0;

    int output_size() const { return static_cast<int>(receptive_fields.size()); }
};

struct HierarchyLevel {
    Partition partition;    // partition of the PREVIOUS level's nodes
    SimilarityGraph graph;  // coarsened graph on this level's clusters
};

/// Nested partitions fine to coarse. Level 0 is the identity partition on
/// the original graph; each stride adds one coarser level.
struct ClusterHierarchy {
    std::vector<HierarchyLevel> levels;
    std::vector<int> strides;
    std::uint64_t seed = 0;

    Eigen::Index level_size(std::size_t level) const { return levels[level].graph.size(); }
};

/// Normalized spectral clustering: rows of the first M Laplacian eigenvectors
/// as node coordinates, row-normalized, then seeded k-means (farthest-point
/// initialization). Empty clusters are repaired by splitting the largest
/// cluster at its farthest member.
Partition spectral_cluster(const SimilarityGraph& W, int M, std::uint64_t seed);

/// W'_{ab} = sum of W_ij over i in a, j in b. Self-loops accumulate on the
/// diagonal, so the coarsened graph keeps total weight.
SimilarityGraph coarsen_graph(const SimilarityGraph& W, const Partition& p);

/// Level l has ceil(M_{l-1} / strides[l]) clusters, obtained by spectrally
/// clustering the previous level's coarsened graph.
ClusterHierarchy build_hierarchy(const SimilarityGraph& W, const std::vector<int>& strides,
                                 std::uint64_t seed);

/// Pooling map for the transition from `level` to `level + 1`.
PoolingMap build_pooling_map(const ClusterHierarchy& h, std::size_t level, PoolMode mode);

/// Persistence: <prefix>.json (assignments, strides, seed) plus one binary
/// coarsened weight matrix per level.
void save_hierarchy(const std::string& path_prefix, const ClusterHierarchy& h);
ClusterHierarchy load_hierarchy(const std::string& path_prefix);

}  // namespace sgn
