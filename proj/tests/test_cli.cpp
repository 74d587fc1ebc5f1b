#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <json.hpp>

#include "sgn/data.hpp"
#include "sgn/graph.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string g_bin;  // path to the sgn executable, from argv[1]

int run(const std::string& args, const std::string& log) {
    const std::string cmd = g_bin + " " + args + " > " + log + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// deterministic toy classification set: L samples x N features, 2 classes
void write_toy_data(const fs::path& dir, int l, int n) {
    std::mt19937_64 rng(77);
    std::ofstream feat(dir / "features.csv");
    std::ofstream lab(dir / "labels.txt");
    for (int i = 0; i < l; ++i) {
        const int label = 1 + static_cast<int>(rng() % 2);
        for (int j = 0; j < n; ++j) {
            const double base = label == 1 ? -1.0 : 1.0;
            const double v = base + static_cast<double>(rng() % 1000) / 1000.0;
            feat << v << (j + 1 < n ? "," : "\n");
        }
        lab << label << "\n";
    }
}

json base_config(const fs::path& dir, int classes = 2) {
    json cfg;
    cfg["data"]["features"] = (dir / "features.csv").string();
    cfg["data"]["labels"] = (dir / "labels.txt").string();
    cfg["data"]["task"] = "classification";
    cfg["data"]["classes"] = classes;
    cfg["data"]["validation_fraction"] = 0.2;
    cfg["data"]["split_seed"] = 1;
    cfg["graph"]["method"] = "rbf";
    cfg["hierarchy"]["strides"] = {2};
    cfg["hierarchy"]["seed"] = 3;
    return cfg;
}

std::string write_config(const fs::path& dir, const json& cfg, const std::string& name = "config.json") {
    const std::string path = (dir / name).string();
    std::ofstream out(path);
    out << cfg.dump(2) << "\n";
    return path;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

}  // namespace

TEST_CASE("estimate-graph writes a valid graph") {
    fs::path dir = fresh_dir("sgn_cli_eg");
    write_toy_data(dir, 30, 8);
    const std::string cfg = write_config(dir, base_config(dir));
    const int rc = run("estimate-graph --config " + cfg + " --out " + q(dir),
                       (dir / "log.txt").string());
    CHECK(rc == 0);
    REQUIRE(fs::exists(dir / "graph.bin"));
    sgn::SimilarityGraph g = sgn::load_graph((dir / "graph.bin").string());
    CHECK(g.size() == 8);
    CHECK_NOTHROW(sgn::validate_similarity_graph(g));
    CHECK(slurp((dir / "log.txt").string()).find("P_graph=32") != std::string::npos);
}

TEST_CASE("supervised-lowrank without m fails with exit 1") {
    fs::path dir = fresh_dir("sgn_cli_lr");
    write_toy_data(dir, 30, 8);
    json cfg = base_config(dir);
    cfg["graph"]["method"] = "supervised-lowrank";
    const std::string path = write_config(dir, cfg);
    const int rc = run("estimate-graph --config " + path + " --out " + q(dir),
                       (dir / "log.txt").string());
    CHECK(rc == 1);
    CHECK(slurp((dir / "log.txt").string()).find("graph.m") != std::string::npos);
}

TEST_CASE("known graph with asymmetric weights fails with exit 1") {
    fs::path dir = fresh_dir("sgn_cli_known");
    write_toy_data(dir, 30, 4);
    Eigen::MatrixXd w = Eigen::MatrixXd::Identity(4, 4);
    w(0, 1) = 0.5;  // no matching (1,0) entry
    sgn::save_matrix_binary((dir / "w.bin").string(), w);
    json cfg = base_config(dir);
    cfg["graph"]["method"] = "known";
    cfg["graph"]["known_path"] = (dir / "w.bin").string();
    const std::string path = write_config(dir, cfg);
    const int rc = run("estimate-graph --config " + path + " --out " + q(dir),
                       (dir / "log.txt").string());
    CHECK(rc == 1);
}

TEST_CASE("bad architecture token fails naming the token") {
    fs::path dir = fresh_dir("sgn_cli_arch");
    write_toy_data(dir, 30, 8);
    json cfg = base_config(dir);
    cfg["train"]["architecture"] = "FC4-Q4";
    cfg["train"]["epochs"] = 1;
    const std::string path = write_config(dir, cfg);
    const int rc = run("train --config " + path + " --out " + q(dir),
                       (dir / "log.txt").string());
    CHECK(rc == 1);
    CHECK(slurp((dir / "log.txt").string()).find("Q4") != std::string::npos);
}

TEST_CASE("full pipeline trains and writes history") {
    fs::path dir = fresh_dir("sgn_cli_train");
    write_toy_data(dir, 40, 8);
    json cfg = base_config(dir);
    cfg["train"]["architecture"] = "GC2-P2-FC4";
    cfg["train"]["epochs"] = 3;
    cfg["train"]["batch_size"] = 8;
    cfg["train"]["n0"] = 4;
    cfg["train"]["seed"] = 5;
    const std::string path = write_config(dir, cfg);

    CHECK(run("estimate-graph --config " + path + " --out " + q(dir),
              (dir / "l1.txt").string()) == 0);
    CHECK(run("build-hierarchy --config " + path + " --out " + q(dir),
              (dir / "l2.txt").string()) == 0);
    CHECK(run("build-basis --config " + path + " --out " + q(dir),
              (dir / "l3.txt").string()) == 0);
    CHECK(fs::exists(dir / "hierarchy.json"));
    CHECK(fs::exists(dir / "basis_level0.json"));
    CHECK(fs::exists(dir / "basis_level1.json"));
    CHECK(run("train --config " + path + " --out " + q(dir), (dir / "l4.txt").string()) == 0);

    const std::string hist = slurp((dir / "run" / "history.csv").string());
    CHECK(hist.rfind("epoch,train_loss,val_metric,wall_seconds", 0) == 0);
    CHECK(hist.find("\n3,") != std::string::npos);
    CHECK(fs::exists(dir / "run" / "checkpoints" / "epoch_3" / "manifest.json"));

    // evaluate the latest checkpoint
    CHECK(run("evaluate --config " + path + " --out " + q(dir), (dir / "l5.txt").string()) == 0);
    CHECK(slurp((dir / "l5.txt").string()).find("\"metric\"") != std::string::npos);
}

TEST_CASE("resume reproduces the uninterrupted run bit for bit") {
    auto prepare = [](const fs::path& dir, int epochs) {
        write_toy_data(dir, 40, 8);
        json cfg = base_config(dir);
        cfg["data"]["features"] = (dir / "features.csv").string();
        cfg["data"]["labels"] = (dir / "labels.txt").string();
        cfg["train"]["architecture"] = "GC2-P2-FC4";
        cfg["train"]["epochs"] = epochs;
        cfg["train"]["batch_size"] = 8;
        cfg["train"]["n0"] = 4;
        cfg["train"]["seed"] = 9;
        return cfg;
    };

    fs::path a = fresh_dir("sgn_cli_resume_a");
    json cfg_a = prepare(a, 6);
    const std::string path_a = write_config(a, cfg_a);
    CHECK(run("estimate-graph --config " + path_a + " --out " + q(a), (a / "l.txt").string()) == 0);
    CHECK(run("train --config " + path_a + " --out " + q(a), (a / "l.txt").string()) == 0);

    fs::path b = fresh_dir("sgn_cli_resume_b");
    json cfg_b3 = prepare(b, 3);
    const std::string path_b3 = write_config(b, cfg_b3, "config3.json");
    CHECK(run("estimate-graph --config " + path_b3 + " --out " + q(b), (b / "l.txt").string()) == 0);
    CHECK(run("train --config " + path_b3 + " --out " + q(b), (b / "l.txt").string()) == 0);
    json cfg_b6 = prepare(b, 6);
    const std::string path_b6 = write_config(b, cfg_b6, "config6.json");
    const std::string ckpt = (b / "run" / "checkpoints" / "epoch_3").string();
    CHECK(run("train --config " + path_b6 + " --out " + q(b) + " --resume \"" + ckpt + "\"",
              (b / "l.txt").string()) == 0);

    // final checkpoints must match byte for byte
    const fs::path fa = a / "run" / "checkpoints" / "epoch_6";
    const fs::path fb = b / "run" / "checkpoints" / "epoch_6";
    REQUIRE(fs::exists(fa));
    REQUIRE(fs::exists(fb));
    int compared = 0;
    for (const auto& e : fs::directory_iterator(fa)) {
        const std::string name = e.path().filename().string();
        if (name.rfind("param_", 0) == 0 || name.rfind("opt_acc_", 0) == 0) {
            CHECK(slurp(e.path().string()) == slurp((fb / name).string()));
            ++compared;
        }
    }
    CHECK(compared >= 4);
}

TEST_CASE("repeated runs with one config are identical") {
    auto run_once = [](const std::string& tag) {
        fs::path dir = fresh_dir("sgn_cli_det_" + tag);
        write_toy_data(dir, 40, 8);
        json cfg = base_config(dir);
        cfg["train"]["architecture"] = "GC2-P2-FC4";
        cfg["train"]["epochs"] = 4;
        cfg["train"]["batch_size"] = 8;
        cfg["train"]["n0"] = 4;
        const std::string path = write_config(dir, cfg);
        CHECK(run("estimate-graph --config " + path + " --out " + q(dir),
                  (dir / "l.txt").string()) == 0);
        CHECK(run("train --config " + path + " --out " + q(dir), (dir / "l.txt").string()) == 0);
        return dir;
    };
    fs::path a = run_once("a");
    fs::path b = run_once("b");

    // history matches except the wall-clock column
    std::istringstream ha(slurp((a / "run" / "history.csv").string()));
    std::istringstream hb(slurp((b / "run" / "history.csv").string()));
    std::string la, lb;
    while (std::getline(ha, la) && std::getline(hb, lb)) {
        const auto cut = [](const std::string& s) { return s.substr(0, s.rfind(',')); };
        CHECK(cut(la) == cut(lb));
    }
    const fs::path ck = fs::path("run") / "checkpoints" / "epoch_4" / "param_000.bin";
    CHECK(slurp((a / ck).string()) == slurp((b / ck).string()));
}

TEST_CASE("gradcheck exits 0 and --corrupt exits 1") {
    fs::path dir = fresh_dir("sgn_cli_gc");
    CHECK(run("gradcheck --seed 3", (dir / "ok.txt").string()) == 0);
    const int rc = run("gradcheck --seed 3 --corrupt", (dir / "bad.txt").string());
    CHECK(rc == 1);
    CHECK(slurp((dir / "bad.txt").string()).find("FAIL") != std::string::npos);
}

int main(int argc, char** argv) {
    if (argc < 2) {
        std::fprintf(stderr, "usage: test_cli <path-to-sgn-binary> [doctest args]\n");
        return 1;
    }
    g_bin = argv[1];
    doctest::Context ctx;
    ctx.applyCommandLine(argc - 1, argv + 1);
    return ctx.run();
}
