#pragma once

#include <Eigen/Dense>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "sgn/clustering.hpp"
#include "sgn/spectral.hpp"

namespace sgn {

/// Batch of node signals: S samples x F feature maps x N nodes, stored as a
/// (S*F) x N matrix where row s*F + f is the signal x_{sf}.
struct Tensor3 {
    Eigen::MatrixXd data;
    int S = 0, F = 0, N = 0;

    Tensor3() = default;
    Tensor3(int s, int f, int n) : data(Eigen::MatrixXd::Zero(s * f, n)), S(s), F(f), N(n) {}

    Eigen::Index row(int s, int f) const { return static_cast<Eigen::Index>(s) * F + f; }
};

/// Named trainable tensor with its gradient, owned by a layer.
struct Param {
    std::string name;
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;
};

class Layer {
public:
    virtual ~Layer() = default;
    /// Caches whatever backward needs; dropout draws from the supplied rng.
    virtual Tensor3 forward(const Tensor3& x, bool training, std::mt19937_64& rng) = 0;
    /// Accumulates parameter gradients and returns the input gradient.
    virtual Tensor3 backward(const Tensor3& grad_y) = 0;
    virtual std::vector<Param*> params() { return {}; }
    virtual std::string describe() const = 0;
};

/// Spectral graph convolution. Multipliers w_{f'f} = K * wt_{f'f} are
/// interpolated from N0 subsampled weights; the forward map is
/// y_{sf'} = U^T(sum_f (U x_{sf}) .* w_{f'f}) + bias_{f'}.
class GraphConvLayer final : public Layer {
public:
    GraphConvLayer(std::shared_ptr<const SpectralBasis> basis,
                   std::shared_ptr<const SplineKernel> kernel, int in_maps, int out_maps,
                   bool with_bias, std::mt19937_64& init_rng);

    Tensor3 forward(const Tensor3& x, bool training, std::mt19937_64& rng) override;
    Tensor3 backward(const Tensor3& grad_y) override;
    std::vector<Param*> params() override;
    std::string describe() const override;

    int in_maps() const { return in_maps_; }
    int out_maps() const { return out_maps_; }
    /// Subsampled weights, row f'*F + f holds wt_{f'f}. Exposed for tests.
    Param& weights() { return wt_; }
    Param& bias() { return bias_; }

private:
    std::shared_ptr<const SpectralBasis> basis_;
    std::shared_ptr<const SplineKernel> kernel_;
    int in_maps_, out_maps_;
    bool with_bias_;
    Param wt_;    // (F'*F) x N0
    Param bias_;  // F' x 1
    Eigen::MatrixXd xhat_;  // cached spectral input, (S*F) x N
    int cached_s_ = 0;
};

class GraphPoolLayer final : public Layer {
public:
    explicit GraphPoolLayer(PoolingMap map);
    Tensor3 forward(const Tensor3& x, bool training, std::mt19937_64& rng) override;
    Tensor3 backward(const Tensor3& grad_y) override;
    std::string describe() const override;
    const PoolingMap& map() const { return map_; }

private:
    PoolingMap map_;
    Eigen::MatrixXi argmax_;  // (S*F) x M, valid in max mode after forward
    int cached_s_ = 0, cached_f_ = 0;
};

/// Dense layer y = W x + b on the flattened (F*N)-vector of each sample.
class FullyConnectedLayer final : public Layer {
public:
    FullyConnectedLayer(int in_dim, int out_dim, std::mt19937_64& init_rng);
    Tensor3 forward(const Tensor3& x, bool training, std::mt19937_64& rng) override;
    Tensor3 backward(const Tensor3& grad_y) override;
    std::vector<Param*> params() override;
    std::string describe() const override;
    Param& weights() { return w_; }
    Param& bias() { return b_; }

private:
    int in_dim_, out_dim_;
    Param w_;  // out x in
    Param b_;  // out x 1
    Eigen::MatrixXd xflat_;  // cached S x in
    int in_f_ = 0, in_n_ = 0;
};

class ReluLayer final : public Layer {
public:
    Tensor3 forward(const Tensor3& x, bool training, std::mt19937_64& rng) override;
    Tensor3 backward(const Tensor3& grad_y) override;
    std::string describe() const override { return "ReLU"; }

private:
    Eigen::MatrixXd mask_;
    int s_ = 0, f_ = 0, n_ = 0;
};

/// Inverted dropout: units zeroed with probability p during training,
/// survivors scaled by 1/(1-p); identity in evaluation mode.
class DropoutLayer final : public Layer {
public:
    explicit DropoutLayer(double rate);
    Tensor3 forward(const Tensor3& x, bool training, std::mt19937_64& rng) override;
    Tensor3 backward(const Tensor3& grad_y) override;
    std::string describe() const override;

private:
    double rate_;
    Eigen::MatrixXd mask_;
    bool trained_pass_ = false;
    int s_ = 0, f_ = 0, n_ = 0;
};

// ---- losses and metrics ----------------------------------------------------

/// Mean negative log-softmax of the true class; labels in {1..C}.
/// Returns (loss, gradient w.r.t. logits).
std::pair<double, Eigen::MatrixXd> softmax_cross_entropy(const Eigen::MatrixXd& logits,
                                                         const std::vector<int>& labels);

/// sqrt(mean((pred - target)^2)); zero loss yields a zero gradient.
std::pair<double, Eigen::VectorXd> rmse_loss(const Eigen::VectorXd& pred,
                                             const Eigen::VectorXd& target);

double metric_accuracy(const Eigen::MatrixXd& logits, const std::vector<int>& labels);

/// Squared Pearson correlation. Throws on zero target variance.
double metric_r2(const Eigen::VectorXd& pred, const Eigen::VectorXd& target);

// ---- network ---------------------------------------------------------------

/// Per-level spectral artifacts a network is built against. `bases[l]` is the
/// eigenbasis of hierarchy level l; missing levels are computed on demand by
/// the builder. Pure fully-connected networks need neither.
struct GraphArtifacts {
    std::shared_ptr<const ClusterHierarchy> hierarchy;
    std::vector<std::shared_ptr<const SpectralBasis>> bases;
};

struct NetworkOptions {
    int n0 = 60;                 // subsampled weights per multiplier (capped at level size)
    PoolMode pooling = PoolMode::Max;
    double dropout = 0.0;        // applied after each hidden fully-connected layer
    bool bias = true;            // graph-conv bias; off for strict spec-free mode
};

class Network {
public:
    Tensor3 forward(const Tensor3& x, bool training, std::mt19937_64& rng);
    Tensor3 backward(const Tensor3& grad_y);
    std::vector<Param*> params();
    long long parameter_count() const;
    void zero_grads();

    /// JSON manifest plus one binary blob per parameter tensor.
    void save(const std::string& dir) const;
    void load_params(const std::string& dir);

    std::string architecture;
    int input_nodes = 0;
    int outputs = 0;
    std::vector<std::unique_ptr<Layer>> layers;
};

/// Parses "GC<k>" / "P<k>" / "FC<k>" tokens separated by '-', builds the
/// layer stack (ReLU after each GC and each hidden FC, dropout per options)
/// and appends the output layer for `outputs` units. Pooling tokens must
/// match the hierarchy strides in order.
Network build_network(const std::string& architecture, int input_nodes, int outputs,
                      const GraphArtifacts& artifacts, const NetworkOptions& options,
                      std::mt19937_64& init_rng);

}  // namespace sgn
