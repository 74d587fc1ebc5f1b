#include "sgn/nn.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <regex>

#include <json.hpp>

namespace sgn {

namespace {

/// Uniform double in [0,1) built directly from the engine output so results
/// do not depend on the standard library's distribution implementation.
double unit_uniform(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

double symmetric_uniform(std::mt19937_64& rng, double a) {
    return (2.0 * unit_uniform(rng) - 1.0) * a;
}

void check_shape(const Tensor3& x, int f, int n, const std::string& who) {
    if (x.F != f || x.N != n)
        throw ValidationError(who + ": expected " + std::to_string(f) + "x" + std::to_string(n) +
                              " feature maps x nodes, got " + std::to_string(x.F) + "x" +
                              std::to_string(x.N));
}

}  // namespace

// ---- GraphConvLayer --------------------------------------------------------

GraphConvLayer::GraphConvLayer(std::shared_ptr<const SpectralBasis> basis,
                               std::shared_ptr<const SplineKernel> kernel, int in_maps,
                               int out_maps, bool with_bias, std::mt19937_64& init_rng)
    : basis_(std::move(basis)),
      kernel_(std::move(kernel)),
      in_maps_(in_maps),
      out_maps_(out_maps),
      with_bias_(with_bias) {
    require(in_maps_ >= 1 && out_maps_ >= 1, "graph conv needs positive feature map counts");
    require(basis_ && kernel_, "graph conv needs a basis and a spline kernel");
    require(kernel_->K.rows() == basis_->size(), "spline kernel size does not match basis");
    const int n0 = kernel_->n0;
    wt_.name = "gc_weights";
    wt_.value.resize(static_cast<Eigen::Index>(out_maps_) * in_maps_, n0);
    const double a = 1.0 / std::sqrt(static_cast<double>(in_maps_) * n0);
    for (Eigen::Index i = 0; i < wt_.value.rows(); ++i)
        for (Eigen::Index j = 0; j < wt_.value.cols(); ++j)
            wt_.value(i, j) = symmetric_uniform(init_rng, a);
    wt_.grad = Eigen::MatrixXd::Zero(wt_.value.rows(), wt_.value.cols());
    bias_.name = "gc_bias";
    bias_.value = Eigen::MatrixXd::Zero(out_maps_, 1);
    bias_.grad = Eigen::MatrixXd::Zero(out_maps_, 1);
}

Tensor3 GraphConvLayer::forward(const Tensor3& x, bool, std::mt19937_64&) {
    const int n = static_cast<int>(basis_->size());
    check_shape(x, in_maps_, n, "graph_conv_forward");
    cached_s_ = x.S;
    const Eigen::MatrixXd& u = basis_->U;
    const Eigen::MatrixXd multipliers = wt_.value * kernel_->K.transpose();  // (F'F) x N
    xhat_ = x.data * u.transpose();  // row sf holds (U x_sf)^T

    Tensor3 y(x.S, out_maps_, n);
    Eigen::RowVectorXd acc(n);
    for (int s = 0; s < x.S; ++s) {
        for (int fp = 0; fp < out_maps_; ++fp) {
            acc.setZero();
            for (int f = 0; f < in_maps_; ++f)
                acc += xhat_.row(x.row(s, f))
                           .cwiseProduct(multipliers.row(static_cast<Eigen::Index>(fp) * in_maps_ + f));
            y.data.row(y.row(s, fp)) = acc * u;
            if (with_bias_) y.data.row(y.row(s, fp)).array() += bias_.value(fp, 0);
        }
    }
    return y;
}

Tensor3 GraphConvLayer::backward(const Tensor3& grad_y) {
    const int n = static_cast<int>(basis_->size());
    check_shape(grad_y, out_maps_, n, "graph_conv_backward");
    require(grad_y.S == cached_s_, "graph_conv_backward: batch size changed since forward");
    const Eigen::MatrixXd& u = basis_->U;
    const Eigen::MatrixXd multipliers = wt_.value * kernel_->K.transpose();
    const Eigen::MatrixXd ghat = grad_y.data * u.transpose();

    Eigen::MatrixXd grad_mult =
        Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(out_maps_) * in_maps_, n);
    Tensor3 grad_x(grad_y.S, in_maps_, n);
    Eigen::RowVectorXd acc(n);
    for (int s = 0; s < grad_y.S; ++s) {
        for (int f = 0; f < in_maps_; ++f) {
            acc.setZero();
            for (int fp = 0; fp < out_maps_; ++fp) {
                const Eigen::Index wrow = static_cast<Eigen::Index>(fp) * in_maps_ + f;
                const auto g = ghat.row(grad_y.row(s, fp));
                acc += g.cwiseProduct(multipliers.row(wrow));
                grad_mult.row(wrow) += g.cwiseProduct(xhat_.row(grad_x.row(s, f)));
            }
            grad_x.data.row(grad_x.row(s, f)) = acc * u;
        }
    }
    wt_.grad += grad_mult * kernel_->K;
    if (with_bias_)
        for (int fp = 0; fp < out_maps_; ++fp)
            for (int s = 0; s < grad_y.S; ++s)
                bias_.grad(fp, 0) += grad_y.data.row(grad_y.row(s, fp)).sum();
    return grad_x;
}

std::vector<Param*> GraphConvLayer::params() {
    if (with_bias_) return {&wt_, &bias_};
    return {&wt_};
}

std::string GraphConvLayer::describe() const {
    return "GC" + std::to_string(out_maps_) + " (N=" + std::to_string(basis_->size()) +
           ", N0=" + std::to_string(kernel_->n0) + ")";
}

// ---- GraphPoolLayer --------------------------------------------------------

GraphPoolLayer::GraphPoolLayer(PoolingMap map) : map_(std::move(map)) {}

Tensor3 GraphPoolLayer::forward(const Tensor3& x, bool, std::mt19937_64&) {
    check_shape(x, x.F, map_.input_size, "graph_pool_forward");
    const int m = map_.output_size();
    cached_s_ = x.S;
    cached_f_ = x.F;
    Tensor3 y(x.S, x.F, m);
    if (map_.mode == PoolMode::Max) argmax_.resize(x.data.rows(), m);
    for (Eigen::Index r = 0; r < x.data.rows(); ++r) {
        for (int o = 0; o < m; ++o) {
            const auto& field = map_.receptive_fields[static_cast<std::size_t>(o)];
            if (map_.mode == PoolMode::Max) {
                int best = field[0];
                double best_v = x.data(r, field[0]);
                for (int idx : field)
                    if (x.data(r, idx) > best_v) {  // ties keep the lowest index
                        best_v = x.data(r, idx);
                        best = idx;
                    }
                y.data(r, o) = best_v;
                argmax_(r, o) = best;
            } else {
                double sum = 0.0;
                for (int idx : field) sum += x.data(r, idx);
                y.data(r, o) = sum / static_cast<double>(field.size());
            }
        }
    }
    return y;
}

Tensor3 GraphPoolLayer::backward(const Tensor3& grad_y) {
    check_shape(grad_y, cached_f_, map_.output_size(), "graph_pool_backward");
    if (map_.mode == PoolMode::Max && argmax_.rows() != grad_y.data.rows())
        throw ValidationError("graph_pool_backward: no argmax record for this batch");
    Tensor3 grad_x(grad_y.S, grad_y.F, map_.input_size);
    for (Eigen::Index r = 0; r < grad_y.data.rows(); ++r) {
        for (int o = 0; o < map_.output_size(); ++o) {
            if (map_.mode == PoolMode::Max) {
                grad_x.data(r, argmax_(r, o)) += grad_y.data(r, o);
            } else {
                const auto& field = map_.receptive_fields[static_cast<std::size_t>(o)];
                const double share = grad_y.data(r, o) / static_cast<double>(field.size());
                for (int idx : field) grad_x.data(r, idx) += share;
            }
        }
    }
    return grad_x;
}

std::string GraphPoolLayer::describe() const {
    return "P" + std::to_string(map_.stride) + " (" + pool_mode_name(map_.mode) + ", " +
           std::to_string(map_.input_size) + "->" + std::to_string(map_.output_size()) + ")";
}

// ---- FullyConnectedLayer ---------------------------------------------------

FullyConnectedLayer::FullyConnectedLayer(int in_dim, int out_dim, std::mt19937_64& init_rng)
    : in_dim_(in_dim), out_dim_(out_dim) {
    require(in_dim_ >= 1 && out_dim_ >= 1, "fully connected layer needs positive dimensions");
    w_.name = "fc_weights";
    w_.value.resize(out_dim_, in_dim_);
    const double a = 1.0 / std::sqrt(static_cast<double>(in_dim_));
    for (Eigen::Index i = 0; i < w_.value.rows(); ++i)
        for (Eigen::Index j = 0; j < w_.value.cols(); ++j)
            w_.value(i, j) = symmetric_uniform(init_rng, a);
    w_.grad = Eigen::MatrixXd::Zero(out_dim_, in_dim_);
    b_.name = "fc_bias";
    b_.value = Eigen::MatrixXd::Zero(out_dim_, 1);
    b_.grad = Eigen::MatrixXd::Zero(out_dim_, 1);
}

Tensor3 FullyConnectedLayer::forward(const Tensor3& x, bool, std::mt19937_64&) {
    if (x.F * x.N != in_dim_)
        throw ValidationError("fully_connected: flattened input dim " +
                              std::to_string(x.F * x.N) + " != " + std::to_string(in_dim_));
    in_f_ = x.F;
    in_n_ = x.N;
    xflat_.resize(x.S, in_dim_);
    for (int s = 0; s < x.S; ++s)
        for (int f = 0; f < x.F; ++f)
            xflat_.block(s, static_cast<Eigen::Index>(f) * x.N, 1, x.N) =
                x.data.row(x.row(s, f));
    Tensor3 y(x.S, 1, out_dim_);
    y.data = xflat_ * w_.value.transpose();
    y.data.rowwise() += b_.value.col(0).transpose();
    return y;
}

Tensor3 FullyConnectedLayer::backward(const Tensor3& grad_y) {
    check_shape(grad_y, 1, out_dim_, "fully_connected backward");
    w_.grad += grad_y.data.transpose() * xflat_;
    b_.grad.col(0) += grad_y.data.colwise().sum().transpose();
    Eigen::MatrixXd gflat = grad_y.data * w_.value;
    Tensor3 grad_x(grad_y.S, in_f_, in_n_);
    for (int s = 0; s < grad_y.S; ++s)
        for (int f = 0; f < in_f_; ++f)
            grad_x.data.row(grad_x.row(s, f)) =
                gflat.block(s, static_cast<Eigen::Index>(f) * in_n_, 1, in_n_);
    return grad_x;
}

std::vector<Param*> FullyConnectedLayer::params() { return {&w_, &b_}; }

std::string FullyConnectedLayer::describe() const {
    return "FC" + std::to_string(out_dim_) + " (in=" + std::to_string(in_dim_) + ")";
}

// ---- ReluLayer -------------------------------------------------------------

Tensor3 ReluLayer::forward(const Tensor3& x, bool, std::mt19937_64&) {
    s_ = x.S;
    f_ = x.F;
    n_ = x.N;
    mask_ = (x.data.array() > 0.0).cast<double>();
    Tensor3 y = x;
    y.data = x.data.cwiseMax(0.0);
    return y;
}

Tensor3 ReluLayer::backward(const Tensor3& grad_y) {
    check_shape(grad_y, f_, n_, "relu backward");
    Tensor3 grad_x = grad_y;
    grad_x.data = grad_y.data.cwiseProduct(mask_);
    return grad_x;
}

// ---- DropoutLayer ----------------------------------------------------------

DropoutLayer::DropoutLayer(double rate) : rate_(rate) {
    require(rate_ >= 0.0 && rate_ < 1.0, "dropout rate must lie in [0, 1)");
}

Tensor3 DropoutLayer::forward(const Tensor3& x, bool training, std::mt19937_64& rng) {
    s_ = x.S;
    f_ = x.F;
    n_ = x.N;
    if (!training || rate_ == 0.0) {
        trained_pass_ = false;
        return x;
    }
    trained_pass_ = true;
    const double keep = 1.0 - rate_;
    mask_.resize(x.data.rows(), x.data.cols());
    for (Eigen::Index i = 0; i < mask_.rows(); ++i)
        for (Eigen::Index j = 0; j < mask_.cols(); ++j)
            mask_(i, j) = unit_uniform(rng) < rate_ ? 0.0 : 1.0 / keep;
    Tensor3 y = x;
    y.data = x.data.cwiseProduct(mask_);
    return y;
}

Tensor3 DropoutLayer::backward(const Tensor3& grad_y) {
    check_shape(grad_y, f_, n_, "dropout backward");
    if (!trained_pass_) return grad_y;
    Tensor3 grad_x = grad_y;
    grad_x.data = grad_y.data.cwiseProduct(mask_);
    return grad_x;
}

std::string DropoutLayer::describe() const { return "Dropout(" + std::to_string(rate_) + ")"; }

// ---- losses and metrics ----------------------------------------------------

std::pair<double, Eigen::MatrixXd> softmax_cross_entropy(const Eigen::MatrixXd& logits,
                                                         const std::vector<int>& labels) {
    const Eigen::Index s = logits.rows();
    const Eigen::Index c = logits.cols();
    require(static_cast<Eigen::Index>(labels.size()) == s, "labels length != batch size");
    Eigen::MatrixXd grad(s, c);
    double loss = 0.0;
    for (Eigen::Index i = 0; i < s; ++i) {
        const int y = labels[static_cast<std::size_t>(i)];
        require(y >= 1 && y <= c, "label " + std::to_string(y) + " out of range [1, " +
                                      std::to_string(c) + "]");
        const double mx = logits.row(i).maxCoeff();
        Eigen::RowVectorXd e = (logits.row(i).array() - mx).exp();
        const double z = e.sum();
        loss += -(logits(i, y - 1) - mx - std::log(z));
        grad.row(i) = e / z;
        grad(i, y - 1) -= 1.0;
    }
    loss /= static_cast<double>(s);
    grad /= static_cast<double>(s);
    return {loss, grad};
}

std::pair<double, Eigen::VectorXd> rmse_loss(const Eigen::VectorXd& pred,
                                             const Eigen::VectorXd& target) {
    require(pred.size() == target.size(), "rmse_loss: length mismatch");
    const Eigen::Index s = pred.size();
    Eigen::VectorXd diff = pred - target;
    const double loss = std::sqrt(diff.squaredNorm() / static_cast<double>(s));
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(s);
    if (loss > 0.0) grad = diff / (static_cast<double>(s) * loss);
    return {loss, grad};
}

double metric_accuracy(const Eigen::MatrixXd& logits, const std::vector<int>& labels) {
    const Eigen::Index s = logits.rows();
    require(static_cast<Eigen::Index>(labels.size()) == s, "labels length != batch size");
    Eigen::Index hits = 0;
    for (Eigen::Index i = 0; i < s; ++i) {
        int best = 0;
        for (Eigen::Index j = 1; j < logits.cols(); ++j)
            if (logits(i, j) > logits(i, best)) best = static_cast<int>(j);
        if (best + 1 == labels[static_cast<std::size_t>(i)]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(s);
}

double metric_r2(const Eigen::VectorXd& pred, const Eigen::VectorXd& target) {
    require(pred.size() == target.size() && pred.size() >= 2, "metric_r2: bad input lengths");
    const double n = static_cast<double>(pred.size());
    Eigen::VectorXd p = pred.array() - pred.mean();
    Eigen::VectorXd t = target.array() - target.mean();
    const double vt = t.squaredNorm() / n;
    if (vt <= 0.0) throw NumericalError("metric_r2 undefined: target has zero variance");
    const double vp = p.squaredNorm() / n;
    if (vp <= 0.0) return 0.0;  // constant prediction carries no correlation
    const double cov = p.dot(t) / n;
    return (cov * cov) / (vp * vt);
}

// ---- network ---------------------------------------------------------------

Tensor3 Network::forward(const Tensor3& x, bool training, std::mt19937_64& rng) {
    Tensor3 h = x;
    for (auto& layer : layers) h = layer->forward(h, training, rng);
    return h;
}

Tensor3 Network::backward(const Tensor3& grad_y) {
    Tensor3 g = grad_y;
    for (auto it = layers.rbegin(); it != layers.rend(); ++it) g = (*it)->backward(g);
    return g;
}

std::vector<Param*> Network::params() {
    std::vector<Param*> all;
    for (auto& layer : layers)
        for (Param* p : layer->params()) all.push_back(p);
    return all;
}

long long Network::parameter_count() const {
    long long total = 0;
    for (const auto& layer : layers)
        for (Param* p : const_cast<Layer&>(*layer).params())
            total += static_cast<long long>(p->value.size());
    return total;
}

void Network::zero_grads() {
    for (Param* p : params()) p->grad.setZero();
}

void Network::save(const std::string& dir) const {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::json manifest;
    manifest["architecture"] = architecture;
    manifest["input_nodes"] = input_nodes;
    manifest["outputs"] = outputs;
    manifest["params"] = nlohmann::json::array();
    auto& self = const_cast<Network&>(*this);
    int idx = 0;
    for (Param* p : self.params()) {
        char file[32];
        std::snprintf(file, sizeof file, "param_%03d.bin", idx);
        nlohmann::json entry;
        entry["name"] = p->name;
        entry["rows"] = p->value.rows();
        entry["cols"] = p->value.cols();
        entry["file"] = file;
        manifest["params"].push_back(entry);
        save_matrix_binary((fs::path(dir) / file).string(), p->value);
        ++idx;
    }
    std::ofstream out((fs::path(dir) / "manifest.json").string());
    require(out.good(), "cannot write checkpoint manifest in " + dir);
    out << manifest.dump(2) << "\n";
}

void Network::load_params(const std::string& dir) {
    namespace fs = std::filesystem;
    std::ifstream in((fs::path(dir) / "manifest.json").string());
    require(in.good(), "cannot open checkpoint manifest in " + dir);
    nlohmann::json manifest;
    in >> manifest;
    auto all = params();
    require(manifest["params"].size() == all.size(),
            "checkpoint has " + std::to_string(manifest["params"].size()) +
                " parameter tensors, network expects " + std::to_string(all.size()));
    for (std::size_t i = 0; i < all.size(); ++i) {
        const auto& entry = manifest["params"][i];
        Eigen::MatrixXd v =
            load_matrix_binary((fs::path(dir) / entry["file"].get<std::string>()).string());
        require(v.rows() == all[i]->value.rows() && v.cols() == all[i]->value.cols(),
                "checkpoint tensor " + std::to_string(i) + " shape mismatch");
        all[i]->value = std::move(v);
    }
}

Network build_network(const std::string& architecture, int input_nodes, int outputs,
                      const GraphArtifacts& artifacts, const NetworkOptions& options,
                      std::mt19937_64& init_rng) {
    require(input_nodes >= 1 && outputs >= 1, "network needs positive input/output sizes");
    Network net;
    net.architecture = architecture;
    net.input_nodes = input_nodes;
    net.outputs = outputs;

    // lazily computed bases per hierarchy level
    std::vector<std::shared_ptr<const SpectralBasis>> bases = artifacts.bases;
    auto basis_at = [&](std::size_t level) -> std::shared_ptr<const SpectralBasis> {
        if (level < bases.size() && bases[level]) return bases[level];
        require(artifacts.hierarchy && level < artifacts.hierarchy->levels.size(),
                "no spectral basis available for graph level " + std::to_string(level));
        auto b = std::make_shared<SpectralBasis>(
            eigendecompose(normalized_laplacian(artifacts.hierarchy->levels[level].graph)));
        if (bases.size() <= level) bases.resize(level + 1);
        bases[level] = b;
        return b;
    };

    int cur_f = 1;
    int cur_n = input_nodes;
    std::size_t pool_index = 0;
    bool flattened = false;

    std::regex tok_re(R"(^(GC|P|FC)(\d+)$)");
    std::stringstream ss(architecture);
    std::string tok;
    bool any = false;
    while (std::getline(ss, tok, '-')) {
        any = true;
        std::smatch m;
        if (!std::regex_match(tok, m, tok_re))
            throw ValidationError("architecture parse error at token '" + tok + "'");
        const std::string kind = m[1];
        const int k = std::stoi(m[2]);
        require(k >= 1, "architecture token '" + tok + "' needs a positive size");

        if (kind == "GC") {
            require(!flattened, "graph convolution cannot follow a fully connected layer");
            auto basis = basis_at(pool_index);
            require(static_cast<int>(basis->size()) == cur_n,
                    "basis size " + std::to_string(basis->size()) +
                        " does not match node count " + std::to_string(cur_n));
            const int n0 = std::min(options.n0, cur_n);
            require(n0 >= 2, "subsampled weight count must be >= 2");
            auto kernel = std::make_shared<SplineKernel>(build_spline_kernel(cur_n, n0));
            net.layers.push_back(std::make_unique<GraphConvLayer>(basis, kernel, cur_f, k,
                                                                  options.bias, init_rng));
            net.layers.push_back(std::make_unique<ReluLayer>());
            cur_f = k;
        } else if (kind == "P") {
            require(!flattened, "pooling cannot follow a fully connected layer");
            require(artifacts.hierarchy != nullptr,
                    "architecture has pooling but no hierarchy was given");
            require(pool_index < artifacts.hierarchy->strides.size(),
                    "architecture has more pooling layers than the hierarchy");
            require(artifacts.hierarchy->strides[pool_index] == k,
                    "pooling token P" + std::to_string(k) + " does not match hierarchy stride " +
                        std::to_string(artifacts.hierarchy->strides[pool_index]));
            PoolingMap map = build_pooling_map(*artifacts.hierarchy, pool_index, options.pooling);
            require(map.input_size == cur_n, "pooling input size mismatch");
            cur_n = map.output_size();
            net.layers.push_back(std::make_unique<GraphPoolLayer>(std::move(map)));
            ++pool_index;
        } else {  // FC hidden layer
            net.layers.push_back(
                std::make_unique<FullyConnectedLayer>(cur_f * cur_n, k, init_rng));
            net.layers.push_back(std::make_unique<ReluLayer>());
            if (options.dropout > 0.0)
                net.layers.push_back(std::make_unique<DropoutLayer>(options.dropout));
            flattened = true;
            cur_f = 1;
            cur_n = k;
        }
    }
    require(any, "empty architecture string");
    net.layers.push_back(std::make_unique<FullyConnectedLayer>(cur_f * cur_n, outputs, init_rng));
    return net;
}

}  // namespace sgn
