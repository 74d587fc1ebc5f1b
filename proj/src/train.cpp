#include "sgn/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace sgn {

void AdaGrad::step(const std::vector<Param*>& params) {
    if (acc_.empty()) {
        acc_.reserve(params.size());
        for (Param* p : params)
            acc_.push_back(Eigen::MatrixXd::Zero(p->value.rows(), p->value.cols()));
    }
    require(acc_.size() == params.size(), "optimizer state does not match parameter list");
    for (std::size_t i = 0; i < params.size(); ++i) {
        Param* p = params[i];
        require(acc_[i].rows() == p->grad.rows() && acc_[i].cols() == p->grad.cols(),
                "gradient shape mismatch for " + p->name);
        acc_[i] += p->grad.cwiseProduct(p->grad);
        p->value -= lr_ * p->grad.cwiseQuotient((acc_[i].cwiseSqrt().array() + eps_).matrix());
    }
}

Tensor3 to_batch(const LabeledDataset& ds, const std::vector<Eigen::Index>& rows) {
    Tensor3 x(static_cast<int>(rows.size()), 1, static_cast<int>(ds.features.features()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        x.data.row(static_cast<Eigen::Index>(i)) = ds.features.values.row(rows[i]);
    return x;
}

namespace {

// Fisher-Yates with raw engine draws, so shuffles do not depend on the
// standard library's shuffle implementation.
void shuffle_indices(std::vector<Eigen::Index>& idx, std::mt19937_64& rng) {
    for (std::size_t i = idx.size(); i > 1; --i)
        std::swap(idx[i - 1], idx[rng() % i]);
}

struct BatchLoss {
    double loss = 0.0;
    Tensor3 grad;
};

BatchLoss compute_loss(const Tensor3& out, const LabeledDataset& ds,
                       const std::vector<Eigen::Index>& rows) {
    BatchLoss r;
    r.grad = Tensor3(out.S, 1, out.N);
    if (ds.task == Task::Classification) {
        std::vector<int> labels(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) labels[i] = ds.label(rows[i]);
        auto [loss, grad] = softmax_cross_entropy(out.data, labels);
        r.loss = loss;
        r.grad.data = grad;
    } else {
        Eigen::VectorXd target(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t i = 0; i < rows.size(); ++i)
            target[static_cast<Eigen::Index>(i)] = ds.targets[rows[i]];
        auto [loss, grad] = rmse_loss(out.data.col(0), target);
        r.loss = loss;
        r.grad.data.col(0) = grad;
    }
    return r;
}

std::string layer_norms(Network& net) {
    std::ostringstream os;
    for (Param* p : net.params()) os << " " << p->name << "=" << p->value.norm();
    return os.str();
}

void save_training_state(const std::string& dir, const Network& net, const AdaGrad& opt,
                         const std::mt19937_64& rng, int epoch) {
    namespace fs = std::filesystem;
    net.save(dir);
    auto& accs = const_cast<AdaGrad&>(opt).accumulators();
    for (std::size_t i = 0; i < accs.size(); ++i) {
        char file[32];
        std::snprintf(file, sizeof file, "opt_acc_%03zu.bin", i);
        save_matrix_binary((fs::path(dir) / file).string(), accs[i]);
    }
    std::ofstream out((fs::path(dir) / "state.json").string());
    require(out.good(), "cannot write training state in " + dir);
    std::ostringstream rs;
    rs << rng;
    nlohmann::json j;
    j["epoch"] = epoch;
    j["num_accumulators"] = accs.size();
    j["rng_state"] = rs.str();
    out << j.dump(2) << "\n";
}

FitResult fit_impl(const TrainConfig& config, const LabeledDataset& train,
                   const LabeledDataset& valid, const GraphArtifacts& artifacts,
                   const std::string& resume_dir) {
    require(config.batch_size >= 1, "batch size must be positive");
    require(train.size() >= 1, "empty training set");
    const int outputs = train.task == Task::Classification ? train.num_classes : 1;
    require(outputs >= 1, "classification dataset needs num_classes");

    NetworkOptions opt;
    opt.n0 = config.n0;
    opt.pooling = config.pooling;
    opt.dropout = config.dropout;
    opt.bias = config.bias;

    std::mt19937_64 rng(config.seed);
    FitResult result;
    result.net = build_network(config.architecture, static_cast<int>(train.features.features()),
                               outputs, artifacts, opt, rng);
    AdaGrad optimizer(config.learning_rate);
    int start_epoch = 0;

    if (!resume_dir.empty()) {
        namespace fs = std::filesystem;
        result.net.load_params(resume_dir);
        std::ifstream in((fs::path(resume_dir) / "state.json").string());
        require(in.good(), "cannot open training state in " + resume_dir);
        nlohmann::json j;
        in >> j;
        start_epoch = j["epoch"].get<int>();
        std::istringstream rs(j["rng_state"].get<std::string>());
        rs >> rng;
        auto& accs = optimizer.accumulators();
        for (std::size_t i = 0; i < j["num_accumulators"].get<std::size_t>(); ++i) {
            char file[32];
            std::snprintf(file, sizeof file, "opt_acc_%03zu.bin", i);
            accs.push_back(load_matrix_binary((fs::path(resume_dir) / file).string()));
        }
    }

    std::vector<Eigen::Index> order(static_cast<std::size_t>(train.size()));

    const auto t0 = std::chrono::steady_clock::now();
    for (int epoch = start_epoch + 1; epoch <= config.epochs; ++epoch) {
        // restart from the identity permutation so each epoch's order depends
        // only on the rng state, which checkpoints capture
        std::iota(order.begin(), order.end(), 0);
        shuffle_indices(order, rng);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(config.batch_size)) {
            std::vector<Eigen::Index> rows(
                order.begin() + static_cast<std::ptrdiff_t>(start),
                order.begin() + static_cast<std::ptrdiff_t>(
                                    std::min(start + static_cast<std::size_t>(config.batch_size),
                                             order.size())));
            Tensor3 out = result.net.forward(to_batch(train, rows), true, rng);
            BatchLoss bl = compute_loss(out, train, rows);
            if (!std::isfinite(bl.loss))
                throw NumericalError("NaN loss at epoch " + std::to_string(epoch) +
                                     "; layer norms:" + layer_norms(result.net));
            loss_sum += bl.loss * static_cast<double>(rows.size());
            result.net.zero_grads();
            result.net.backward(bl.grad);
            optimizer.step(result.net.params());
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(train.size());
        rec.val_metric = valid.size() > 0 ? evaluate(result.net, valid).metric : 0.0;
        rec.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.history.push_back(rec);

        if (!config.checkpoint_dir.empty()) {
            const bool listed = std::find(config.checkpoint_epochs.begin(),
                                          config.checkpoint_epochs.end(),
                                          epoch) != config.checkpoint_epochs.end();
            if (listed || epoch == config.epochs) {
                const std::string dir =
                    config.checkpoint_dir + "/epoch_" + std::to_string(epoch);
                save_training_state(dir, result.net, optimizer, rng, epoch);
            }
        }
    }
    return result;
}

}  // namespace

FitResult fit(const TrainConfig& config, const LabeledDataset& train,
              const LabeledDataset& valid, const GraphArtifacts& artifacts) {
    return fit_impl(config, train, valid, artifacts, "");
}

FitResult fit_resume(const TrainConfig& config, const LabeledDataset& train,
                     const LabeledDataset& valid, const GraphArtifacts& artifacts,
                     const std::string& checkpoint) {
    return fit_impl(config, train, valid, artifacts, checkpoint);
}

FCProxy train_fc_proxy(const LabeledDataset& train, const LabeledDataset& valid,
                       const TrainConfig& config) {
    for (char c : config.architecture)
        require(c != 'G' && c != 'P',
                "proxy architecture must be fully connected, got " + config.architecture);
    GraphArtifacts none;
    FitResult r = fit(config, train, valid, none);
    FCProxy proxy;
    // first trainable layer is the FC whose weights define feature similarity
    auto* first = dynamic_cast<FullyConnectedLayer*>(r.net.layers.front().get());
    require(first != nullptr, "proxy network has no leading fully connected layer");
    proxy.w1 = first->weights().value.transpose();  // N x M1
    proxy.net = std::move(r.net);
    return proxy;
}

EvalReport evaluate(Network& net, const LabeledDataset& ds) {
    require(ds.size() >= 1, "empty evaluation set");
    std::mt19937_64 rng(0);  // unused: dropout is inactive outside training
    std::vector<Eigen::Index> rows(static_cast<std::size_t>(ds.size()));
    std::iota(rows.begin(), rows.end(), 0);
    Tensor3 out = net.forward(to_batch(ds, rows), false, rng);
    EvalReport rep;
    rep.p_net = net.parameter_count();
    if (ds.task == Task::Classification) {
        std::vector<int> labels(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) labels[i] = ds.label(rows[i]);
        rep.loss = softmax_cross_entropy(out.data, labels).first;
        rep.metric = metric_accuracy(out.data, labels);
    } else {
        rep.loss = rmse_loss(out.data.col(0), ds.targets).first;
        rep.metric = metric_r2(out.data.col(0), ds.targets);
    }
    return rep;
}

long long count_net_parameters(const Network& net) { return net.parameter_count(); }

void write_history_csv(const std::string& path, const std::vector<EpochRecord>& history) {
    std::ofstream out(path);
    require(out.good(), "cannot write history: " + path);
    out << "epoch,train_loss,val_metric,wall_seconds\n";
    char buf[128];
    for (const EpochRecord& r : history) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.6f\n", r.epoch, r.train_loss,
                      r.val_metric, r.wall_seconds);
        out << buf;
    }
}

}  // namespace sgn
