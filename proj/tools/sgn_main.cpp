// Command-line front end for the spectral graph network pipeline:
//   estimate-graph -> build-hierarchy -> build-basis -> train -> evaluate
// Stages communicate only through files in the --out directory, so expensive
// eigendecompositions are computed once and reused across architecture sweeps.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "sgn/clustering.hpp"
#include "sgn/data.hpp"
#include "sgn/gradcheck.hpp"
#include "sgn/graph.hpp"
#include "sgn/spectral.hpp"
#include "sgn/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunConfig {
    json raw;

    // data
    std::string features_path;
    sgn::MatrixFormat format = sgn::MatrixFormat::Csv;
    std::string labels_path;
    sgn::Task task = sgn::Task::Regression;
    int classes = 0;
    std::vector<std::string> normalize;
    double validation_fraction = 0.1;
    std::uint64_t split_seed = 0;

    // graph
    sgn::GraphMethod method = sgn::GraphMethod::Rbf;
    double sigma = 0.0;  // 0 = median heuristic
    int knn_k = 7;
    int rank_m = 0;
    std::string known_path;
    sgn::TrainConfig proxy;

    // hierarchy
    std::vector<int> strides;
    std::uint64_t hierarchy_seed = 0;

    sgn::TrainConfig train;
};

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    sgn::require(in.good(), "cannot open config: " + path);
    RunConfig cfg;
    in >> cfg.raw;

    const json& d = cfg.raw.at("data");
    cfg.features_path = d.at("features").get<std::string>();
    const std::string fmt = d.value("format", "csv");
    if (fmt == "csv")
        cfg.format = sgn::MatrixFormat::Csv;
    else if (fmt == "binary")
        cfg.format = sgn::MatrixFormat::Binary;
    else
        throw sgn::ValidationError("unknown data format '" + fmt + "' (valid: csv, binary)");
    cfg.labels_path = d.value("labels", "");
    const std::string task = d.value("task", "regression");
    if (task == "classification")
        cfg.task = sgn::Task::Classification;
    else if (task == "regression")
        cfg.task = sgn::Task::Regression;
    else
        throw sgn::ValidationError("unknown task '" + task + "'");
    cfg.classes = d.value("classes", 0);
    if (cfg.task == sgn::Task::Classification)
        sgn::require(cfg.classes >= 2, "classification config needs data.classes >= 2");
    cfg.normalize = d.value("normalize", std::vector<std::string>{});
    cfg.validation_fraction = d.value("validation_fraction", 0.1);
    cfg.split_seed = d.value("split_seed", std::uint64_t{0});

    if (cfg.raw.contains("graph")) {
        const json& g = cfg.raw["graph"];
        cfg.method = sgn::graph_method_from_name(g.value("method", "rbf"));
        cfg.sigma = g.value("sigma", 0.0);
        cfg.knn_k = g.value("knn_k", 7);
        cfg.rank_m = g.value("m", 0);
        cfg.known_path = g.value("known_path", "");
        if (cfg.method == sgn::GraphMethod::SupervisedLowRank)
            sgn::require(cfg.rank_m >= 1, "graph.method supervised-lowrank requires graph.m");
        if (cfg.method == sgn::GraphMethod::Known)
            sgn::require(!cfg.known_path.empty(), "graph.method known requires graph.known_path");
        const json p = g.value("proxy", json::object());
        cfg.proxy.architecture = p.value("architecture", "FC64");
        cfg.proxy.learning_rate = p.value("learning_rate", 0.01);
        cfg.proxy.epochs = p.value("epochs", 30);
        cfg.proxy.batch_size = p.value("batch_size", 128);
        cfg.proxy.dropout = p.value("dropout", 0.5);
        cfg.proxy.seed = p.value("seed", std::uint64_t{0});
    }

    if (cfg.raw.contains("hierarchy")) {
        cfg.strides = cfg.raw["hierarchy"].value("strides", std::vector<int>{});
        cfg.hierarchy_seed = cfg.raw["hierarchy"].value("seed", std::uint64_t{0});
    }

    if (cfg.raw.contains("train")) {
        const json& t = cfg.raw["train"];
        cfg.train.architecture = t.value("architecture", "");
        cfg.train.learning_rate = t.value("learning_rate", 0.01);
        cfg.train.epochs = t.value("epochs", 0);
        cfg.train.batch_size = t.value("batch_size", 128);
        cfg.train.pooling = sgn::pool_mode_from_name(t.value("pooling", "max"));
        cfg.train.n0 = t.value("n0", 60);
        cfg.train.dropout = t.value("dropout", 0.0);
        cfg.train.seed = t.value("seed", std::uint64_t{0});
        cfg.train.bias = t.value("bias", true);
        cfg.train.checkpoint_epochs = t.value("checkpoint_epochs", std::vector<int>{});
    }
    return cfg;
}

sgn::LabeledDataset load_dataset(const RunConfig& cfg, bool need_labels) {
    sgn::LabeledDataset ds;
    ds.features = sgn::load_matrix(cfg.features_path, cfg.format);
    for (const std::string& step : cfg.normalize) {
        if (step == "log")
            ds.features = sgn::log_normalize(ds.features);
        else if (step == "zscore")
            ds.features = sgn::zscore_normalize(ds.features).normalized;
        else
            throw sgn::ValidationError("unknown normalization step '" + step +
                                       "' (valid: log, zscore)");
    }
    ds.task = cfg.task;
    ds.num_classes = cfg.classes;
    if (!cfg.labels_path.empty()) {
        ds.targets = sgn::load_targets(cfg.labels_path);
        sgn::require(ds.targets.size() == ds.features.samples(),
                     "targets length does not match feature rows");
        if (ds.task == sgn::Task::Classification)
            for (Eigen::Index i = 0; i < ds.targets.size(); ++i)
                sgn::require(ds.label(i) >= 1 && ds.label(i) <= cfg.classes,
                             "label out of range at row " + std::to_string(i));
    } else {
        sgn::require(!need_labels, "this command requires data.labels");
        ds.targets = Eigen::VectorXd::Zero(ds.features.samples());
    }
    return ds;
}

std::string graph_path(const std::string& out) { return (fs::path(out) / "graph.bin").string(); }
std::string hierarchy_prefix(const std::string& out) {
    return (fs::path(out) / "hierarchy").string();
}
std::string basis_prefix(const std::string& out, std::size_t level) {
    return (fs::path(out) / ("basis_level" + std::to_string(level))).string();
}

int cmd_estimate_graph(const RunConfig& cfg, const std::string& out) {
    fs::create_directories(out);
    const bool supervised = cfg.method == sgn::GraphMethod::Supervised ||
                            cfg.method == sgn::GraphMethod::SupervisedLowRank;
    sgn::LabeledDataset ds = load_dataset(cfg, supervised);
    sgn::SimilarityGraph graph;

    switch (cfg.method) {
        case sgn::GraphMethod::Rbf: {
            sgn::DistanceMatrix d = sgn::pairwise_sq_distances(ds.features);
            const double sigma = cfg.sigma > 0 ? cfg.sigma : sgn::median_heuristic_sigma(d);
            graph = sgn::gaussian_kernel(d, sigma);
            break;
        }
        case sgn::GraphMethod::RbfLocal: {
            sgn::DistanceMatrix d = sgn::pairwise_sq_distances(ds.features);
            graph = sgn::self_tuning_kernel(d, cfg.knn_k);
            break;
        }
        case sgn::GraphMethod::Supervised:
        case sgn::GraphMethod::SupervisedLowRank: {
            // proxy network sees z-scored features regardless of the pipeline
            sgn::LabeledDataset zs = ds;
            zs.features = sgn::zscore_normalize(ds.features).normalized;
            auto [tr, va] = sgn::split(zs, {cfg.validation_fraction, cfg.split_seed});
            sgn::FCProxy proxy = sgn::train_fc_proxy(tr, va, cfg.proxy);
            sgn::DistanceMatrix d = sgn::supervised_distance(proxy.w1);
            const double sigma = cfg.sigma > 0 ? cfg.sigma : sgn::median_heuristic_sigma(d);
            graph = sgn::gaussian_kernel(d, sigma);
            graph.sigma_info.method = cfg.method;
            if (cfg.method == sgn::GraphMethod::SupervisedLowRank)
                graph = sgn::low_rank_project(graph, cfg.rank_m);
            break;
        }
        case sgn::GraphMethod::Known: {
            graph.weights = sgn::load_matrix_binary(cfg.known_path);
            graph.sigma_info.method = sgn::GraphMethod::Known;
            break;
        }
    }
    sgn::validate_similarity_graph(graph);
    sgn::save_graph(graph_path(out), graph, sgn::matrix_hash(ds.features.values));
    std::cout << "graph: N=" << graph.size() << " method=" << graph_method_name(cfg.method)
              << " P_graph="
              << sgn::count_graph_parameters(cfg.method, graph.size(), cfg.rank_m) << "\n";
    return 0;
}

int cmd_build_hierarchy(const RunConfig& cfg, const std::string& out) {
    sgn::SimilarityGraph graph = sgn::load_graph(graph_path(out));
    sgn::ClusterHierarchy h = sgn::build_hierarchy(graph, cfg.strides, cfg.hierarchy_seed);
    sgn::save_hierarchy(hierarchy_prefix(out), h);
    std::cout << "hierarchy:";
    for (std::size_t l = 0; l < h.levels.size(); ++l) std::cout << " " << h.level_size(l);
    std::cout << "\n";
    return 0;
}

int cmd_build_basis(const RunConfig&, const std::string& out) {
    sgn::SimilarityGraph graph = sgn::load_graph(graph_path(out));
    const std::uint64_t ghash = sgn::matrix_hash(graph.weights);
    if (fs::exists(hierarchy_prefix(out) + ".json")) {
        sgn::ClusterHierarchy h = sgn::load_hierarchy(hierarchy_prefix(out));
        for (std::size_t l = 0; l < h.levels.size(); ++l) {
            sgn::SpectralBasis b =
                sgn::eigendecompose(sgn::normalized_laplacian(h.levels[l].graph));
            sgn::save_basis(basis_prefix(out, l), b, ghash);
        }
        std::cout << "bases for " << h.levels.size() << " levels\n";
    } else {
        sgn::SpectralBasis b = sgn::eigendecompose(sgn::normalized_laplacian(graph));
        sgn::save_basis(basis_prefix(out, 0), b, ghash);
        std::cout << "basis for level 0\n";
    }
    return 0;
}

sgn::GraphArtifacts load_artifacts(const RunConfig& cfg, const std::string& out) {
    sgn::GraphArtifacts art;
    const bool spectral = cfg.train.architecture.find("GC") != std::string::npos ||
                          cfg.train.architecture.find('P') != std::string::npos;
    if (!spectral) return art;
    if (fs::exists(hierarchy_prefix(out) + ".json")) {
        art.hierarchy =
            std::make_shared<sgn::ClusterHierarchy>(sgn::load_hierarchy(hierarchy_prefix(out)));
    } else {
        sgn::SimilarityGraph graph = sgn::load_graph(graph_path(out));
        auto h = std::make_shared<sgn::ClusterHierarchy>(
            sgn::build_hierarchy(graph, cfg.strides, cfg.hierarchy_seed));
        sgn::save_hierarchy(hierarchy_prefix(out), *h);
        art.hierarchy = h;
    }
    for (std::size_t l = 0; l < art.hierarchy->levels.size(); ++l) {
        if (fs::exists(basis_prefix(out, l) + ".json"))
            art.bases.push_back(
                std::make_shared<sgn::SpectralBasis>(sgn::load_basis(basis_prefix(out, l))));
        else
            art.bases.push_back(nullptr);  // builder computes on demand
    }
    return art;
}

int cmd_train(const RunConfig& cfg, const std::string& out, const std::string& resume) {
    sgn::require(!cfg.train.architecture.empty(), "config has no train.architecture");
    sgn::LabeledDataset ds = load_dataset(cfg, true);
    auto [tr, va] = sgn::split(ds, {cfg.validation_fraction, cfg.split_seed});
    sgn::GraphArtifacts art = load_artifacts(cfg, out);

    const std::string run_dir = (fs::path(out) / "run").string();
    fs::create_directories(run_dir);
    sgn::TrainConfig tc = cfg.train;
    tc.checkpoint_dir = (fs::path(run_dir) / "checkpoints").string();

    sgn::FitResult r = resume.empty() ? sgn::fit(tc, tr, va, art)
                                      : sgn::fit_resume(tc, tr, va, art, resume);
    sgn::write_history_csv((fs::path(run_dir) / "history.csv").string(), r.history);
    {
        std::ofstream cc((fs::path(run_dir) / "config.json").string());
        cc << cfg.raw.dump(2) << "\n";
    }
    sgn::EvalReport rep = sgn::evaluate(r.net, va);
    std::cout << "final val_metric=" << rep.metric << " val_loss=" << rep.loss
              << " P_net=" << rep.p_net << "\n";
    return 0;
}

int cmd_evaluate(const RunConfig& cfg, const std::string& out, std::string checkpoint) {
    sgn::LabeledDataset ds = load_dataset(cfg, true);
    auto [tr, va] = sgn::split(ds, {cfg.validation_fraction, cfg.split_seed});
    sgn::GraphArtifacts art = load_artifacts(cfg, out);

    if (checkpoint.empty()) {
        const fs::path dir = fs::path(out) / "run" / "checkpoints";
        sgn::require(fs::exists(dir), "no checkpoints under " + dir.string());
        int best = -1;
        for (const auto& e : fs::directory_iterator(dir)) {
            const std::string name = e.path().filename().string();
            if (name.rfind("epoch_", 0) == 0) best = std::max(best, std::stoi(name.substr(6)));
        }
        sgn::require(best >= 0, "no epoch checkpoints under " + dir.string());
        checkpoint = (dir / ("epoch_" + std::to_string(best))).string();
    }

    sgn::NetworkOptions opt;
    opt.n0 = cfg.train.n0;
    opt.pooling = cfg.train.pooling;
    opt.dropout = cfg.train.dropout;
    opt.bias = cfg.train.bias;
    std::mt19937_64 rng(cfg.train.seed);
    const int outputs = cfg.task == sgn::Task::Classification ? cfg.classes : 1;
    sgn::Network net =
        sgn::build_network(cfg.train.architecture, static_cast<int>(ds.features.features()),
                           outputs, art, opt, rng);
    net.load_params(checkpoint);
    sgn::EvalReport rep = sgn::evaluate(net, va);
    json j;
    j["checkpoint"] = checkpoint;
    j["metric"] = rep.metric;
    j["loss"] = rep.loss;
    j["p_net"] = rep.p_net;
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_gradcheck(std::uint64_t seed, bool corrupt) {
    auto results = sgn::run_gradient_checks(seed, corrupt);
    bool ok = true;
    for (const auto& r : results) {
        std::printf("%-42s rel_err=%.3e  %s\n", r.name.c_str(), r.rel_error,
                    r.pass ? "ok" : "FAIL");
        ok = ok && r.pass;
    }
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"spectral networks on graph-structured data"};
    app.require_subcommand(1);

    std::string config_path, out_dir = ".", resume, checkpoint;
    std::uint64_t seed = 0;
    bool seed_given = false, corrupt = false;

    auto add_common = [&](CLI::App* cmd, bool needs_config = true) {
        if (needs_config) cmd->add_option("--config", config_path, "run config JSON")->required();
        cmd->add_option("--out", out_dir, "artifact directory");
        cmd->add_option("--seed", seed, "seed override")->each([&](const std::string&) {
            seed_given = true;
        });
    };

    auto* eg = app.add_subcommand("estimate-graph", "estimate the similarity graph W");
    add_common(eg);
    auto* bh = app.add_subcommand("build-hierarchy", "multi-resolution clustering for pooling");
    add_common(bh);
    auto* bb = app.add_subcommand("build-basis", "Laplacian eigenbases per hierarchy level");
    add_common(bb);
    auto* tr = app.add_subcommand("train", "train a network per the config");
    add_common(tr);
    tr->add_option("--resume", resume, "checkpoint directory to resume from");
    auto* ev = app.add_subcommand("evaluate", "evaluate a checkpoint on the validation split");
    add_common(ev);
    ev->add_option("--checkpoint", checkpoint, "checkpoint directory (default: latest)");
    auto* gc = app.add_subcommand("gradcheck", "finite-difference verification of all gradients");
    gc->add_option("--seed", seed, "seed for the random instances");
    gc->add_flag("--corrupt", corrupt, "deliberately corrupt one gradient (harness self-test)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gc->parsed()) return cmd_gradcheck(seed, corrupt);
        RunConfig cfg = load_config(config_path);
        if (seed_given) {
            cfg.train.seed = seed;
            cfg.proxy.seed = seed;
            cfg.hierarchy_seed = seed;
            cfg.split_seed = seed;
        }
        if (eg->parsed()) return cmd_estimate_graph(cfg, out_dir);
        if (bh->parsed()) return cmd_build_hierarchy(cfg, out_dir);
        if (bb->parsed()) return cmd_build_basis(cfg, out_dir);
        if (tr->parsed()) return cmd_train(cfg, out_dir, resume);
        if (ev->parsed()) return cmd_evaluate(cfg, out_dir, checkpoint);
    } catch (const sgn::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 2;
    } catch (const sgn::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
