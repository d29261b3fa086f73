#pragma once

#include "robustgp/kernels.hpp"

#include <cstdint>
#include <optional>

namespace robustgp {

/// Training inputs (one row per point) and scalar targets.
struct Dataset {
    MatrixXd X;
    VectorXd y;

    Dataset() = default;
    Dataset(MatrixXd inputs, VectorXd targets) : X(std::move(inputs)), y(std::move(targets)) {}

    [[nodiscard]] Index size() const noexcept { return X.rows(); }
    [[nodiscard]] Index dim() const noexcept { return X.cols(); }
    void validate() const;
};

/// Zero-mean GP posterior conditioned on a dataset at fixed hyperparameters.
/// Immutable after construction; predictions are safe to call concurrently.
class GPModel {
public:
    /// Factorizes K + noise_variance * I (with jitter fallback) and caches
    /// alpha = (K + noise_variance * I)^-1 y.
    static GPModel fit(KernelSpec spec, Dataset data);

    [[nodiscard]] double mean(const Eigen::Ref<const VectorXd>& xstar) const;
    /// Posterior variance of the latent function, clamped to [0, signal_variance].
    /// Round-off negatives down to -1e-8 * signal_variance clamp to zero; anything
    /// more negative throws NumericalError.
    [[nodiscard]] double variance(const Eigen::Ref<const VectorXd>& xstar) const;
    [[nodiscard]] double stddev(const Eigen::Ref<const VectorXd>& xstar) const;

    [[nodiscard]] const KernelSpec& spec() const noexcept { return spec_; }
    [[nodiscard]] const Dataset& data() const noexcept { return data_; }
    [[nodiscard]] double jitter() const noexcept { return jitter_; }
    [[nodiscard]] Index input_dim() const noexcept { return spec_.hyper.dim(); }

    /// Log marginal likelihood of the cached targets.
    [[nodiscard]] double log_marginal_likelihood() const;

private:
    GPModel() = default;

    KernelSpec spec_;
    Dataset data_;
    Eigen::LLT<MatrixXd> factor_;
    VectorXd alpha_;
    double jitter_ = 0.0;
};

/// log N(y | 0, K + noise_variance * I). Requires at least one point.
[[nodiscard]] double log_marginal_likelihood(const KernelSpec& spec, const Dataset& data);

struct MlOptions {
    int restarts = 10;
    std::uint64_t seed = 0;
    /// Replaces the first restart's random start when set.
    std::optional<HyperVector> initial;
    int max_iterations = 2000;
};

/// Multi-start Nelder-Mead ascent of the log marginal likelihood in
/// log-hyperparameter space, confined to `box`. Coordinates with a degenerate
/// interval stay fixed. The result is never worse than any start point.
[[nodiscard]] HyperVector maximize_log_marginal_likelihood(const Dataset& data, KernelFamily family,
                                                           const HyperBox& box, const MlOptions& options = {});

/// One exact draw from N(0, gram_matrix(spec, grid) + jitter).
[[nodiscard]] VectorXd sample_prior_function(const KernelSpec& spec, const Eigen::Ref<const MatrixXd>& grid,
                                             std::uint64_t seed);

}  // namespace robustgp
