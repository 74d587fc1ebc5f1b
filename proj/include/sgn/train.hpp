#pragma once

#include <string>
#include <vector>

#include "sgn/nn.hpp"

namespace sgn {

/// AdaGrad with per-parameter accumulated squared gradients:
/// acc += g^2; theta -= lr * g / (sqrt(acc) + eps).
class AdaGrad {
public:
    explicit AdaGrad(double learning_rate, double epsilon = 1e-8)
        : lr_(learning_rate), eps_(epsilon) {
        require(learning_rate > 0.0, "learning rate must be positive");
    }

    void step(const std::vector<Param*>& params);

    double learning_rate() const { return lr_; }
    std::vector<Eigen::MatrixXd>& accumulators() { return acc_; }

private:
    double lr_;
    double eps_;
    std::vector<Eigen::MatrixXd> acc_;  // sized lazily to match params
};

struct TrainConfig {
    std::string architecture;
    double learning_rate = 0.01;
    int epochs = 0;
    int batch_size = 128;
    PoolMode pooling = PoolMode::Max;
    int n0 = 60;
    double dropout = 0.0;
    std::uint64_t seed = 0;
    bool bias = true;
    /// epochs at which to drop a checkpoint (final epoch always written when
    /// checkpoint_dir is set)
    std::vector<int> checkpoint_epochs;
    std::string checkpoint_dir;
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_metric = 0.0;
    double wall_seconds = 0.0;
};

struct FitResult {
    Network net;
    std::vector<EpochRecord> history;
};

/// Single-threaded seeded training loop: deterministic shuffling,
/// minibatch forward/backward, AdaGrad updates, per-epoch validation.
/// Aborts with NumericalError on a NaN loss.
FitResult fit(const TrainConfig& config, const LabeledDataset& train,
              const LabeledDataset& valid, const GraphArtifacts& artifacts);

/// Continues a run from a checkpoint directory (parameters, optimizer
/// accumulators and rng state), reproducing the uninterrupted trajectory.
FitResult fit_resume(const TrainConfig& config, const LabeledDataset& train,
                     const LabeledDataset& valid, const GraphArtifacts& artifacts,
                     const std::string& checkpoint);

/// Fully-connected proxy for supervised graph estimation: trains an FC net
/// on z-scored features and exposes its first-layer weights W1 (N x M1).
struct FCProxy {
    Network net;
    Eigen::MatrixXd w1;
};

FCProxy train_fc_proxy(const LabeledDataset& train, const LabeledDataset& valid,
                       const TrainConfig& config);

struct EvalReport {
    double loss = 0.0;
    double metric = 0.0;  // accuracy or R^2 depending on the task
    long long p_net = 0;
};

/// Dropout disabled; deterministic.
EvalReport evaluate(Network& net, const LabeledDataset& ds);

long long count_net_parameters(const Network& net);

/// Converts a dataset row block into a Tensor3 batch with one feature map.
Tensor3 to_batch(const LabeledDataset& ds, const std::vector<Eigen::Index>& rows);

void write_history_csv(const std::string& path, const std::vector<EpochRecord>& history);

}  // namespace sgn
