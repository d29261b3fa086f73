#pragma once

#include "robustgp/gp_core.hpp"
#include "robustgp/kernels.hpp"

#include <random>

namespace testutil {

using robustgp::Dataset;
using robustgp::HyperVector;
using robustgp::Index;
using robustgp::MatrixXd;
using robustgp::VectorXd;

inline HyperVector hyper(std::initializer_list<double> ls, double sf2, double sn2) {
    VectorXd l(static_cast<Index>(ls.size()));
    Index i = 0;
    for (double v : ls) l(i++) = v;
    return HyperVector(l, sf2, sn2);
}

inline MatrixXd uniform_matrix(Index rows, Index cols, double lo, double hi, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(lo, hi);
    MatrixXd m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) m(i, j) = u(rng);
    return m;
}

inline Dataset random_dataset(Index n, Index d, std::mt19937_64& rng) {
    std::normal_distribution<double> z;
    VectorXd y(n);
    for (Index i = 0; i < n; ++i) y(i) = z(rng);
    return Dataset(uniform_matrix(n, d, -2.0, 2.0, rng), y);
}

// Targets drawn from a GP with the given hyperparameters, plus matching noise.
inline Dataset gp_dataset(const robustgp::KernelSpec& spec, Index n, double half_width, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    MatrixXd X = uniform_matrix(n, spec.hyper.dim(), -half_width, half_width, rng);
    VectorXd y = robustgp::sample_prior_function(spec, X, seed ^ 0xabcdefULL);
    std::normal_distribution<double> noise(0.0, std::sqrt(spec.hyper.noise_variance));
    for (Index i = 0; i < n; ++i) y(i) += noise(rng);
    return Dataset(std::move(X), std::move(y));
}

}  // namespace testutil
