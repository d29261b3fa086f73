#pragma once

#include "robustgp/gp_core.hpp"

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <utility>

namespace robustgp {

/// Reads a comma-separated file with a header row and columns x1..xd, y.
/// Throws InputError on unreadable files, ragged rows or non-numeric cells.
[[nodiscard]] Dataset load_csv_dataset(const std::string& path);
[[nodiscard]] Dataset parse_csv_dataset(std::istream& in, const std::string& source = "<stream>");
void write_csv_dataset(std::ostream& out, const Dataset& data);

/// Affine map z = (v - mean) / scale fitted per column.
struct Standardizer {
    VectorXd mean;
    VectorXd scale;

    /// Columns with zero spread keep scale 1.
    [[nodiscard]] static Standardizer fit(const MatrixXd& values);
    [[nodiscard]] MatrixXd apply(const MatrixXd& values) const;
    [[nodiscard]] MatrixXd invert(const MatrixXd& values) const;
};

struct TrainTestSplit {
    Dataset train;
    Dataset test;
};

/// Random split into n_train training rows and up to n_test of the remaining rows.
/// Throws InputError if n_train is not smaller than the dataset.
[[nodiscard]] TrainTestSplit random_split(const Dataset& data, Index n_train, Index n_test, std::mt19937_64& rng);

/// Standardizes targets (and optionally inputs) of both splits with statistics of the training split.
void standardize_split(TrainTestSplit& split, bool inputs);

/// Uniform inputs on [-half_width, half_width]^dim with targets drawn from a
/// zero-mean GP plus Gaussian noise of the kernel's noise variance.
[[nodiscard]] Dataset synthetic_gp_dataset(const KernelSpec& spec, Index points, double half_width,
                                           std::uint64_t seed);

}  // namespace robustgp
