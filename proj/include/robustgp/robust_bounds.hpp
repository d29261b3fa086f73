#pragma once

#include "robustgp/hyper_posterior.hpp"

#include <functional>
#include <utility>

namespace robustgp {

/// Componentwise hyperparameter box (theta', theta'') with its certified mass.
struct BoundingPair {
    HyperVector lower;
    HyperVector upper;
    double delta = 0.05;
    double achieved_mass = 0.0;
    double gamma = 1.0;
};

/// sqrt(prod_i upper_i / lower_i) over the lengthscales.
[[nodiscard]] double gamma_of(const HyperVector& lower, const HyperVector& upper);
[[nodiscard]] double gamma_of(const BoundingPair& pair);

/// Approximates the narrowest box containing theta0 with at least 1 - delta of
/// the sample mass. Starts from the bounding box of all samples and theta0,
/// then repeatedly peels the face whose next few samples buy the largest
/// reduction of the width norm per sample lost, stopping before the mass
/// would drop under 1 - delta. The peel order does not depend on delta, so a
/// smaller delta always yields a box containing the one for a larger delta.
///
/// Throws InputError if delta is outside (0,1) or there are fewer than
/// 50 / delta samples.
[[nodiscard]] BoundingPair find_bounding_pair(const PosteriorSampleSet& samples, const HyperVector& theta0,
                                              double delta);

/// Per-axis central intervals at level (1 - delta)^(1/p) of a Laplace
/// posterior, p being the number of axes with positive variance, mapped back
/// from log space. Zero-variance axes collapse to the mean.
[[nodiscard]] BoundingPair sidak_box(const LaplacePosterior& laplace, double delta);

/// gamma^2 * (beta_max_sqrt + 2 ||y|| / sigma_n)^2.
[[nodiscard]] double beta_bar_theoretical(double gamma, double beta_max_sqrt, const VectorXd& y, double sigma_n);

/// 2 * gamma * ||y|| * sigma_env / sigma_n.
[[nodiscard]] double mean_discrepancy_bound(double gamma, const VectorXd& y, double sigma_n, double sigma_env_at_x);

enum class BetaMode { Theoretical, Practical };

/// Pointwise scaling function beta^(1/2)(theta). The default is the constant sqrt(2).
using BetaSqrtFunction = std::function<double(const HyperVector&)>;

struct BetaSetting {
    BetaMode mode = BetaMode::Practical;
    /// Practical mode: the bound multiplies the envelope std by sqrt(beta).
    double beta = 4.0;
    /// Theoretical mode: max of beta^(1/2) over the box. Ignored when
    /// beta_sqrt_function is set, in which case the max is taken over the
    /// box corners.
    double beta_max_sqrt = std::sqrt(2.0);
    BetaSqrtFunction beta_sqrt_function;
};

/// Hyperparameters of the envelope GP: lower lengthscales, upper signal and noise variance.
[[nodiscard]] HyperVector envelope_hyper(const BoundingPair& pair);

/// Robust uniform error bound: working mean at theta0, envelope std scaled by sqrt(beta_bar).
class RobustBound {
public:
    static RobustBound build(const Dataset& data, KernelFamily family, const HyperVector& theta0,
                             const BoundingPair& pair, const BetaSetting& beta);
    RobustBound(GPModel working, GPModel envelope, double beta_bar, BetaMode mode);

    [[nodiscard]] std::pair<double, double> interval(const Eigen::Ref<const VectorXd>& xstar) const;
    [[nodiscard]] double half_width(const Eigen::Ref<const VectorXd>& xstar) const;

    [[nodiscard]] const GPModel& working_model() const noexcept { return working_; }
    [[nodiscard]] const GPModel& envelope_model() const noexcept { return envelope_; }
    [[nodiscard]] double beta_bar() const noexcept { return beta_bar_; }
    [[nodiscard]] BetaMode mode() const noexcept { return mode_; }

private:
    GPModel working_;
    GPModel envelope_;
    double beta_bar_;
    BetaMode mode_;
};

}  // namespace robustgp
