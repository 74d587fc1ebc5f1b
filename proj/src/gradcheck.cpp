#include "sgn/gradcheck.hpp"

#include <cmath>
#include <memory>

#include "sgn/graph.hpp"

namespace sgn {

SimilarityGraph random_geometric_graph(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto uni = [&rng]() {
        return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
    };
    FeatureMatrix pts;
    pts.values.resize(3, n);  // 3 samples x n features: distances between columns
    for (Eigen::Index i = 0; i < pts.values.rows(); ++i)
        for (Eigen::Index j = 0; j < pts.values.cols(); ++j) pts.values(i, j) = uni();
    DistanceMatrix d = pairwise_sq_distances(pts);
    return gaussian_kernel(d, median_heuristic_sigma(d));
}

namespace {

constexpr double kStep = 1e-5;
constexpr double kTol = 1e-6;

double uni(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0) * 2.0 - 1.0;
}

void randomize(Eigen::MatrixXd& m, std::mt19937_64& rng) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = uni(rng);
}

double rel_err(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& numeric) {
    double scale = std::max({analytic.norm(), numeric.norm(), 1e-12});
    return (analytic - numeric).norm() / scale;
}

/// Checks one tensor of a network against central differences of
/// loss = sum(R .* forward(x)).
struct NetProbe {
    Network* net;
    Tensor3 x;
    Eigen::MatrixXd r;  // same shape as the output data
    std::mt19937_64 rng{0};

    double loss() {
        Tensor3 out = net->forward(x, true, rng);
        return out.data.cwiseProduct(r).sum();
    }

    Eigen::MatrixXd numeric_grad(Eigen::MatrixXd& target) {
        Eigen::MatrixXd g(target.rows(), target.cols());
        for (Eigen::Index i = 0; i < target.rows(); ++i)
            for (Eigen::Index j = 0; j < target.cols(); ++j) {
                const double saved = target(i, j);
                target(i, j) = saved + kStep;
                const double up = loss();
                target(i, j) = saved - kStep;
                const double down = loss();
                target(i, j) = saved;
                g(i, j) = (up - down) / (2.0 * kStep);
            }
        return g;
    }
};

void check_network(std::vector<GradCheckResult>& out, const std::string& prefix, Network& net,
                   const Tensor3& x, std::mt19937_64& rng, double corrupt_eps = 0.0) {
    NetProbe probe{&net, x, {}, std::mt19937_64(0)};
    Tensor3 ref = net.forward(probe.x, true, probe.rng);
    probe.r.resize(ref.data.rows(), ref.data.cols());
    randomize(probe.r, rng);

    net.zero_grads();
    net.forward(probe.x, true, probe.rng);
    Tensor3 grad_out(ref.S, ref.F, ref.N);
    grad_out.data = probe.r;
    Tensor3 grad_in = net.backward(grad_out);

    std::vector<Param*> params = net.params();
    std::vector<Eigen::MatrixXd> analytic;
    analytic.reserve(params.size());
    for (Param* p : params) analytic.push_back(p->grad);
    Eigen::MatrixXd analytic_in = grad_in.data;
    if (corrupt_eps != 0.0 && !analytic.empty()) analytic[0].array() += corrupt_eps;

    for (std::size_t i = 0; i < params.size(); ++i) {
        Eigen::MatrixXd numeric = probe.numeric_grad(params[i]->value);
        GradCheckResult r;
        r.name = prefix + " grad_" + params[i]->name;
        r.rel_error = rel_err(analytic[i], numeric);
        r.pass = r.rel_error < kTol;
        out.push_back(r);
    }
    Eigen::MatrixXd numeric_in = probe.numeric_grad(probe.x.data);
    GradCheckResult r;
    r.name = prefix + " grad_input";
    r.rel_error = rel_err(analytic_in, numeric_in);
    r.pass = r.rel_error < kTol;
    out.push_back(r);
}

}  // namespace

std::vector<GradCheckResult> run_gradient_checks(std::uint64_t seed, bool corrupt) {
    std::vector<GradCheckResult> out;
    std::mt19937_64 rng(seed);

    // shared small instance: N=16, F=2, F'=3, N0=5, S=4
    const int n = 16, f_in = 2, f_out = 3, n0 = 5, s = 4;
    SimilarityGraph w = random_geometric_graph(n, seed + 1);
    auto basis = std::make_shared<SpectralBasis>(eigendecompose(normalized_laplacian(w)));
    auto kernel = std::make_shared<SplineKernel>(build_spline_kernel(n, n0));

    {
        Network net;
        net.layers.push_back(
            std::make_unique<GraphConvLayer>(basis, kernel, f_in, f_out, true, rng));
        Tensor3 x(s, f_in, n);
        randomize(x.data, rng);
        check_network(out, "graph_conv", net, x, rng, corrupt ? 1e-3 : 0.0);
    }
    {
        ClusterHierarchy h = build_hierarchy(w, {4}, seed + 2);
        for (PoolMode mode : {PoolMode::Average, PoolMode::Max}) {
            Network net;
            net.layers.push_back(
                std::make_unique<GraphPoolLayer>(build_pooling_map(h, 0, mode)));
            Tensor3 x(s, f_in, n);
            randomize(x.data, rng);
            check_network(out, "graph_pool_" + pool_mode_name(mode), net, x, rng);
        }
    }
    {
        Network net;
        net.layers.push_back(std::make_unique<FullyConnectedLayer>(f_in * n, 7, rng));
        Tensor3 x(s, f_in, n);
        randomize(x.data, rng);
        check_network(out, "fully_connected", net, x, rng);
    }
    {
        Network net;
        net.layers.push_back(std::make_unique<ReluLayer>());
        Tensor3 x(s, f_in, n);
        randomize(x.data, rng);
        x.data.array() += (x.data.array().sign() * 0.05);  // keep entries away from 0
        check_network(out, "relu", net, x, rng);
    }
    {
        // composite spectral network end to end
        ClusterHierarchy h = build_hierarchy(w, {4}, seed + 3);
        GraphArtifacts art;
        art.hierarchy = std::make_shared<ClusterHierarchy>(h);
        art.bases = {basis};
        NetworkOptions opt;
        opt.n0 = n0;
        opt.pooling = PoolMode::Average;
        Network net = build_network("GC3-P4-FC6", n, 2, art, opt, rng);
        Tensor3 x(s, 1, n);
        randomize(x.data, rng);
        check_network(out, "composite GC-P-FC", net, x, rng);
    }
    {
        // softmax cross entropy against finite differences of the loss value
        const int c = 5;
        Eigen::MatrixXd logits(s, c);
        randomize(logits, rng);
        std::vector<int> labels(s);
        for (int i = 0; i < s; ++i) labels[i] = static_cast<int>(rng() % c) + 1;
        Eigen::MatrixXd analytic = softmax_cross_entropy(logits, labels).second;
        Eigen::MatrixXd numeric(s, c);
        for (int i = 0; i < s; ++i)
            for (int j = 0; j < c; ++j) {
                const double saved = logits(i, j);
                logits(i, j) = saved + kStep;
                const double up = softmax_cross_entropy(logits, labels).first;
                logits(i, j) = saved - kStep;
                const double down = softmax_cross_entropy(logits, labels).first;
                logits(i, j) = saved;
                numeric(i, j) = (up - down) / (2.0 * kStep);
            }
        GradCheckResult r{"softmax_cross_entropy grad_logits", rel_err(analytic, numeric), false};
        r.pass = r.rel_error < kTol;
        out.push_back(r);
    }
    {
        Eigen::MatrixXd pm(s, 1), tm(s, 1);
        randomize(pm, rng);
        randomize(tm, rng);
        Eigen::VectorXd pred = pm.col(0), target = tm.col(0);
        Eigen::VectorXd analytic = rmse_loss(pred, target).second;
        Eigen::VectorXd numeric(s);
        for (int i = 0; i < s; ++i) {
            const double saved = pred[i];
            pred[i] = saved + kStep;
            const double up = rmse_loss(pred, target).first;
            pred[i] = saved - kStep;
            const double down = rmse_loss(pred, target).first;
            pred[i] = saved;
            numeric[i] = (up - down) / (2.0 * kStep);
        }
        GradCheckResult r{"rmse_loss grad_pred", rel_err(analytic, numeric), false};
        r.pass = r.rel_error < kTol;
        out.push_back(r);
    }
    return out;
}

bool all_passed(const std::vector<GradCheckResult>& results) {
    for (const auto& r : results)
        if (!r.pass) return false;
    return !results.empty();
}

}  // namespace sgn
