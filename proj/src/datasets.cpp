#include "robustgp/datasets.hpp"

#include "robustgp/errors.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>
#include <vector>

namespace robustgp {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

std::string trim(std::string s) {
    const auto ws = [](unsigned char c) { return std::isspace(c); };
    s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), ws));
    s.erase(std::find_if_not(s.rbegin(), s.rend(), ws).base(), s.end());
    return s;
}

}  // namespace

Dataset parse_csv_dataset(std::istream& in, const std::string& source) {
    std::string line;
    if (!std::getline(in, line)) throw InputError(source + ": empty file");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    const auto header = split_line(line);
    if (header.size() < 2) throw InputError(source + ": need at least one input column and a target column");
    const std::size_t cols = header.size();

    std::vector<double> values;
    long row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        const auto cells = split_line(line);
        if (cells.size() != cols) {
            throw InputError(source + ":" + std::to_string(row) + ": expected " + std::to_string(cols) +
                             " columns, found " + std::to_string(cells.size()));
        }
        for (const auto& raw : cells) {
            const std::string c = trim(raw);
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(c.data(), c.data() + c.size(), v);
            if (ec != std::errc() || ptr != c.data() + c.size() || c.empty() || !std::isfinite(v)) {
                throw InputError(source + ":" + std::to_string(row) + ": non-numeric cell '" + c + "'");
            }
            values.push_back(v);
        }
    }
    const auto n = static_cast<Index>(values.size() / cols);
    const auto d = static_cast<Index>(cols - 1);
    Dataset data(MatrixXd(n, d), VectorXd(n));
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < d; ++j) data.X(i, j) = values[static_cast<std::size_t>(i) * cols + j];
        data.y(i) = values[static_cast<std::size_t>(i) * cols + d];
    }
    return data;
}

Dataset load_csv_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot read dataset '" + path + "'");
    return parse_csv_dataset(in, path);
}

void write_csv_dataset(std::ostream& out, const Dataset& data) {
    for (Index j = 0; j < data.dim(); ++j) out << 'x' << (j + 1) << ',';
    out << "y\n";
    out.precision(17);
    for (Index i = 0; i < data.size(); ++i) {
        for (Index j = 0; j < data.dim(); ++j) out << data.X(i, j) << ',';
        out << data.y(i) << '\n';
    }
}

Standardizer Standardizer::fit(const MatrixXd& values) {
    if (values.rows() < 1) throw InputError("cannot standardize an empty sample");
    Standardizer s;
    s.mean = values.colwise().mean().transpose();
    s.scale = VectorXd::Ones(values.cols());
    if (values.rows() > 1) {
        for (Index j = 0; j < values.cols(); ++j) {
            const double var = (values.col(j).array() - s.mean(j)).square().sum() / static_cast<double>(values.rows() - 1);
            if (var > 0.0) s.scale(j) = std::sqrt(var);
        }
    }
    return s;
}

MatrixXd Standardizer::apply(const MatrixXd& values) const {
    return (values.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
}

MatrixXd Standardizer::invert(const MatrixXd& values) const {
    return (values.array().rowwise() * scale.transpose().array()).rowwise() + mean.transpose().array();
}

TrainTestSplit random_split(const Dataset& data, Index n_train, Index n_test, std::mt19937_64& rng) {
    if (n_train < 1 || n_train >= data.size()) {
        throw InputError("train size " + std::to_string(n_train) + " must lie in [1, " +
                         std::to_string(data.size() - 1) + "]");
    }
    std::vector<Index> perm(static_cast<std::size_t>(data.size()));
    std::iota(perm.begin(), perm.end(), Index{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    const Index n_te = std::min(n_test, data.size() - n_train);
    const auto take = [&](Index offset, Index count) {
        Dataset out(MatrixXd(count, data.dim()), VectorXd(count));
        for (Index i = 0; i < count; ++i) {
            const Index k = perm[static_cast<std::size_t>(offset + i)];
            out.X.row(i) = data.X.row(k);
            out.y(i) = data.y(k);
        }
        return out;
    };
    return {take(0, n_train), take(n_train, n_te)};
}

void standardize_split(TrainTestSplit& split, bool inputs) {
    const auto ys = Standardizer::fit(split.train.y);
    split.train.y = ys.apply(split.train.y);
    split.test.y = ys.apply(split.test.y);
    if (inputs) {
        const auto xs = Standardizer::fit(split.train.X);
        split.train.X = xs.apply(split.train.X);
        split.test.X = xs.apply(split.test.X);
    }
}

Dataset synthetic_gp_dataset(const KernelSpec& spec, Index points, double half_width, std::uint64_t seed) {
    if (points < 1) throw InputError("synthetic dataset needs at least one point");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-half_width, half_width);
    MatrixXd X(points, spec.hyper.dim());
    for (Index i = 0; i < X.rows(); ++i)
        for (Index j = 0; j < X.cols(); ++j) X(i, j) = u(rng);
    VectorXd y = sample_prior_function(spec, X, rng());
    std::normal_distribution<double> noise(0.0, std::sqrt(spec.hyper.noise_variance));
    for (Index i = 0; i < points; ++i) y(i) += noise(rng);
    return Dataset(std::move(X), std::move(y));
}

}  // namespace robustgp
