#pragma once

#include "robustgp/gp_core.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <variant>
#include <vector>

namespace robustgp {

/// Uniform hyperprior on raw (not log) hyperparameters.
struct UniformBoxPrior {
    HyperBox box;
};

/// Independent Gaussian over the packed log hyperparameters with diagonal
/// precision; log density is -1/2 sum_i precision_i (z_i - mean_i)^2 up to a constant.
struct GaussianLogPrior {
    VectorXd mean;
    VectorXd precision;

    void validate() const;
};

using HyperPrior = std::variant<UniformBoxPrior, GaussianLogPrior>;

/// Packed size (d + 2) the prior is defined over.
[[nodiscard]] Index prior_packed_size(const HyperPrior& prior);

/// Log prior density: -sum log(width) over non-degenerate box axes (or -inf
/// outside the box); the unnormalized quadratic for GaussianLog.
[[nodiscard]] double log_prior_density(const HyperPrior& prior, const HyperVector& theta);

/// Log marginal likelihood plus log prior. Empty data contributes a constant
/// zero likelihood term. Factorization failures evaluate to -inf.
[[nodiscard]] double log_unnormalized_posterior(const Dataset& data, KernelFamily family, const HyperPrior& prior,
                                                const HyperVector& theta);

/// Unnormalized log density of the posterior with respect to the raw
/// hyperparameters (Lebesgue measure on theta).
[[nodiscard]] double log_posterior_raw(const Dataset& data, KernelFamily family, const HyperPrior& prior,
                                       const HyperVector& theta);

struct SamplerConfig {
    int chains = 4;
    int steps = 5000;
    int burn_in = 1000;
    int thinning = 2;
    std::uint64_t seed = 0;
    double target_acceptance = 0.25;
    /// Packed coordinates to sample; empty means all of them.
    std::vector<Index> free_coordinates;
    /// Values for the pinned coordinates (required when free_coordinates is set).
    std::optional<HyperVector> anchor;

    void validate() const;
};

struct AdaptiveMetropolisResult {
    std::vector<VectorXd> states;
    std::vector<double> log_densities;
    double acceptance_rate = 0.0;
};

using LogDensity = std::function<double(const VectorXd&)>;
using InitialDraw = std::function<VectorXd(std::mt19937_64&)>;

/// Random-walk Metropolis with a diagonal Gaussian proposal. During burn-in
/// the global step size follows a Robbins-Monro recursion toward the target
/// acceptance and halfway through the per-axis scales are reset to the
/// chain's running standard deviation; both freeze after burn-in. Chains are
/// seeded from (seed, chain index). Throws NumericalError if a chain never
/// accepts a proposal.
[[nodiscard]] AdaptiveMetropolisResult adaptive_metropolis(const LogDensity& log_density, const InitialDraw& initial,
                                                           const VectorXd& initial_scales, const SamplerConfig& cfg);

struct PosteriorSampleSet {
    std::vector<HyperVector> samples;
    std::vector<double> log_posts;
    double acceptance_rate = 0.0;
    int chains = 0;
    int burn_in = 0;
    int thinning = 1;

    [[nodiscard]] std::size_t size() const noexcept { return samples.size(); }
    [[nodiscard]] bool empty() const noexcept { return samples.empty(); }
    /// Every other sample, starting at `offset` (0 or 1).
    [[nodiscard]] PosteriorSampleSet alternate(int offset) const;
    /// At most `max_count` samples taken at an even stride.
    [[nodiscard]] PosteriorSampleSet strided(std::size_t max_count) const;

    /// One row per sample: l1..ld, signal_variance, noise_variance, log_posterior.
    void write_csv(std::ostream& out) const;
};

/// Samples p(theta | data) in log-hyperparameter space.
[[nodiscard]] PosteriorSampleSet sample_posterior(const Dataset& data, KernelFamily family, const HyperPrior& prior,
                                                  const SamplerConfig& cfg = {});

/// Gaussian approximation over the packed log hyperparameters.
struct LaplacePosterior {
    VectorXd mean;
    MatrixXd covariance;
};

/// Central finite-difference Hessian of f at z.
[[nodiscard]] MatrixXd finite_difference_hessian(const LogDensity& f, const VectorXd& z, double step = 1e-3);

/// Covariance = (-hessian)^-1. Throws NumericalError if hessian is not negative definite.
[[nodiscard]] LaplacePosterior laplace_from_hessian(const VectorXd& mean, const MatrixXd& hessian);

/// Laplace approximation around theta0 in log space. The Hessian covers the
/// smooth part of the log posterior (the uniform prior contributes nothing).
[[nodiscard]] LaplacePosterior laplace_approximation(const Dataset& data, KernelFamily family,
                                                     const HyperPrior& prior, const HyperVector& theta0);

/// h_p = 10 * largest non-negative eigenvalue of the likelihood Hessian,
/// floored at 1e-6 and doubled until hessian - h_p I is negative definite.
[[nodiscard]] double empirical_bayes_precision(const MatrixXd& lml_hessian);

/// Quadratic log-space prior centred at theta0 with precision h_p * I.
[[nodiscard]] GaussianLogPrior empirical_bayes_prior(const Dataset& data, KernelFamily family,
                                                     const HyperVector& theta0);

/// Fraction of samples inside [lo, hi] (all packed coordinates).
[[nodiscard]] double posterior_mass_in_box(const PosteriorSampleSet& samples, const HyperVector& lo,
                                           const HyperVector& hi);

/// Density over one raw hyperparameter on a sorted grid, normalized by the trapezoid rule.
struct QuadratureDensity {
    VectorXd grid;
    VectorXd density;

    /// Integral of the piecewise-linear density over [a, b] clipped to the grid.
    [[nodiscard]] double mass(double a, double b) const;
    [[nodiscard]] double cdf(double x) const;
};

/// Posterior slice along packed coordinate `coordinate`, the others pinned at theta0.
[[nodiscard]] QuadratureDensity quadrature_posterior_1d(const Dataset& data, KernelFamily family,
                                                        const HyperPrior& prior, const HyperVector& theta0,
                                                        Index coordinate, const VectorXd& grid);

/// Same normalization for an arbitrary log density evaluated on the grid.
[[nodiscard]] QuadratureDensity normalize_on_grid(const VectorXd& grid, const VectorXd& log_density);

}  // namespace robustgp
