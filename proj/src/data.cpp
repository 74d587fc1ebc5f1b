#include "sgn/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace sgn {

std::uint64_t matrix_hash(const Eigen::MatrixXd& m) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const void* p, std::size_t n) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 1099511628211ull;
        }
    };
    std::uint64_t rows = static_cast<std::uint64_t>(m.rows());
    std::uint64_t cols = static_cast<std::uint64_t>(m.cols());
    mix(&rows, sizeof rows);
    mix(&cols, sizeof cols);
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            double v = m(i, j);
            mix(&v, sizeof v);
        }
    return h;
}

namespace {

bool parse_double(const std::string& tok, double& out) {
    try {
        std::size_t pos = 0;
        out = std::stod(tok, &pos);
        while (pos < tok.size() && std::isspace(static_cast<unsigned char>(tok[pos]))) ++pos;
        return pos == tok.size();
    } catch (const std::exception&) {
        return false;
    }
}

FeatureMatrix load_csv(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open file: " + path);

    std::vector<std::vector<double>> rows;
    std::optional<std::vector<std::string>> header;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;

        std::vector<std::string> toks;
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) toks.push_back(tok);
        if (!line.empty() && line.back() == ',') toks.push_back("");

        std::vector<double> vals(toks.size());
        bool numeric = true;
        for (std::size_t c = 0; c < toks.size(); ++c) {
            if (!parse_double(toks[c], vals[c])) {
                if (lineno == 1 && rows.empty()) {
                    numeric = false;
                    break;
                }
                throw ValidationError("parse error at line " + std::to_string(lineno) +
                                      ", column " + std::to_string(c + 1) + ": '" + toks[c] + "'");
            }
            if (!std::isfinite(vals[c]))
                throw ValidationError("non-finite entry at line " + std::to_string(lineno) +
                                      ", column " + std::to_string(c + 1));
        }
        if (!numeric) {
            header = toks;
            continue;
        }
        if (!rows.empty() && vals.size() != rows.front().size())
            throw ValidationError("inconsistent column count at line " + std::to_string(lineno) +
                                  ": got " + std::to_string(vals.size()) + ", expected " +
                                  std::to_string(rows.front().size()));
        rows.push_back(std::move(vals));
    }
    require(!rows.empty(), "parse error: no data rows in " + path);

    FeatureMatrix X;
    X.values.resize(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c)
            X.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    X.feature_names = std::move(header);
    return X;
}

constexpr char kMagic[4] = {'S', 'G', 'N', '1'};

}  // namespace

void save_matrix_binary(const std::string& path, const Eigen::MatrixXd& m) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "cannot write file: " + path);
    out.write(kMagic, 4);
    std::uint64_t rows = static_cast<std::uint64_t>(m.rows());
    std::uint64_t cols = static_cast<std::uint64_t>(m.cols());
    out.write(reinterpret_cast<const char*>(&rows), 8);
    out.write(reinterpret_cast<const char*>(&cols), 8);
    // row-major on disk
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            double v = m(i, j);
            out.write(reinterpret_cast<const char*>(&v), 8);
        }
    require(out.good(), "write failed: " + path);
}

Eigen::MatrixXd load_matrix_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "cannot open file: " + path);
    char magic[4];
    in.read(magic, 4);
    require(in.gcount() == 4 && std::memcmp(magic, kMagic, 4) == 0,
            "bad magic bytes in " + path + " (expected SGN1)");
    std::uint64_t rows = 0, cols = 0;
    in.read(reinterpret_cast<char*>(&rows), 8);
    in.read(reinterpret_cast<char*>(&cols), 8);
    require(in.good() && rows >= 1 && cols >= 1, "bad header in " + path);
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::uint64_t i = 0; i < rows; ++i)
        for (std::uint64_t j = 0; j < cols; ++j) {
            double v;
            in.read(reinterpret_cast<char*>(&v), 8);
            require(in.gcount() == 8, "truncated payload in " + path);
            require(std::isfinite(v), "non-finite entry at row " + std::to_string(i) +
                                          ", col " + std::to_string(j) + " of " + path);
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
        }
    return m;
}

FeatureMatrix load_matrix(const std::string& path, MatrixFormat format) {
    if (format == MatrixFormat::Csv) return load_csv(path);
    FeatureMatrix X;
    X.values = load_matrix_binary(path);
    return X;
}

FeatureMatrix log_normalize(const FeatureMatrix& X) {
    require((X.values.array() >= 0.0).all(), "log_normalize requires nonnegative entries");
    FeatureMatrix out;
    out.values = X.values.array().log1p();
    out.feature_names = X.feature_names;
    return out;
}

ZScoreResult zscore_normalize(const FeatureMatrix& X) {
    const Eigen::Index L = X.samples();
    require(L >= 2, "zscore_normalize needs at least 2 samples");
    ZScoreResult r;
    r.means = X.values.colwise().mean();
    Eigen::MatrixXd centered = X.values.rowwise() - r.means.transpose();
    r.stds = (centered.array().square().colwise().sum() / static_cast<double>(L)).sqrt();
    r.normalized.values = centered;
    for (Eigen::Index j = 0; j < X.features(); ++j) {
        if (r.stds[j] > 0.0)
            r.normalized.values.col(j) /= r.stds[j];
        else
            r.stds[j] = 0.0;  // constant column: centered only
    }
    r.normalized.feature_names = X.feature_names;
    return r;
}

LabeledDataset take_rows(const LabeledDataset& ds, const std::vector<Eigen::Index>& rows) {
    LabeledDataset out;
    out.task = ds.task;
    out.num_classes = ds.num_classes;
    out.features.feature_names = ds.features.feature_names;
    out.features.values.resize(static_cast<Eigen::Index>(rows.size()), ds.features.features());
    out.targets.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.features.values.row(static_cast<Eigen::Index>(i)) = ds.features.values.row(rows[i]);
        out.targets[static_cast<Eigen::Index>(i)] = ds.targets[rows[i]];
    }
    return out;
}

std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& ds, const SplitSpec& spec) {
    const Eigen::Index L = ds.size();
    require(L >= 2, "split needs at least 2 samples");
    require(spec.validation_fraction > 0.0 && spec.validation_fraction < 1.0,
            "validation_fraction must lie in (0,1)");
    // round-down convention, clamped so neither side is empty
    Eigen::Index n_valid = static_cast<Eigen::Index>(
        std::floor(static_cast<double>(L) * spec.validation_fraction));
    n_valid = std::clamp<Eigen::Index>(n_valid, 1, L - 1);

    std::vector<Eigen::Index> idx(static_cast<std::size_t>(L));
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(spec.seed);
    std::shuffle(idx.begin(), idx.end(), rng);

    std::vector<Eigen::Index> valid_idx(idx.begin(), idx.begin() + n_valid);
    std::vector<Eigen::Index> train_idx(idx.begin() + n_valid, idx.end());
    return {take_rows(ds, train_idx), take_rows(ds, valid_idx)};
}

Eigen::VectorXd load_targets(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open file: " + path);
    std::vector<double> vals;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        double v;
        if (!parse_double(line, v) || !std::isfinite(v))
            throw ValidationError("bad target at line " + std::to_string(lineno) + ": '" + line + "'");
        vals.push_back(v);
    }
    require(!vals.empty(), "no targets in " + path);
    return Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

}  // namespace sgn
