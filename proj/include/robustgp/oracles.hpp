#pragma once

#include "robustgp/gp_core.hpp"
#include "robustgp/hyper_posterior.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

/// Brute-force reference computations and randomized property checks.
/// Nothing here reuses the factorization paths of gp_core.
namespace robustgp::oracles {

/// Outcome of a randomized check. `worst_violation` is the largest amount by
/// which the checked inequality was broken (negative means slack everywhere).
struct CheckReport {
    std::string name;
    long trials = 0;
    double worst_violation = 0.0;
    double tolerance = 0.0;
    bool passed = true;
    std::vector<std::uint64_t> seeds;
    /// Soft checks are reported but never gate a run.
    bool soft = false;

    void record(double violation);
    void finalize();
};

/// Columns: name, trials, worst_violation, tolerance, passed, soft, seeds.
void write_checks_csv(std::ostream& out, const std::vector<CheckReport>& reports);

/// Kernel evaluated from its closed form, independent of the kernels module.
[[nodiscard]] double reference_kernel(KernelFamily family, const HyperVector& hyper, const VectorXd& a,
                                      const VectorXd& b);

/// (mean, variance) via an explicit dense inverse of K + noise_variance * I.
/// Requires N <= 50; throws NumericalError if the matrix is singular.
[[nodiscard]] std::pair<double, double> direct_posterior(const KernelSpec& spec, const Dataset& data,
                                                         const VectorXd& xstar);

/// log N(y | 0, covariance) through an explicit determinant and inverse.
/// Requires N <= 30; throws NumericalError if the covariance is not positive definite.
[[nodiscard]] double direct_mvn_loglik(const VectorXd& y, const MatrixXd& covariance);

/// Covariance of the targets under a kernel spec, built from reference_kernel.
[[nodiscard]] MatrixXd reference_target_covariance(const KernelSpec& spec, const Dataset& data);

/// sigma_theta(x) - gamma sigma_theta'(x) over random datasets, lengthscale
/// triples theta' <= theta <= theta'' and 100 test inputs per trial
/// (d <= 3, N <= 20). With force_gamma_one the factor is replaced by 1 and
/// the report is soft.
[[nodiscard]] CheckReport variance_dominance_check(long trials, KernelFamily family, std::uint64_t seed,
                                                   bool force_gamma_one = false);

/// |mu_0(x) - mu(x)|^2 - 4 gamma^2 sigma'^2(x) ||y||^2 / sigma_n^2 at 200 inputs per trial.
[[nodiscard]] CheckReport mean_difference_check(long trials, std::uint64_t seed);

/// Schur-complement gap s(K2) - s(K1) with s(K) = K_nn - k^T K~^-1 k, K1 = K2 + PSD.
[[nodiscard]] CheckReport covariance_inequality_check(long trials, std::uint64_t seed, Index size = 6);

/// s(K) for the last row/column partition, by dense inverse.
[[nodiscard]] double schur_complement_last(const MatrixXd& K);

/// gp_core predictions and LML against the dense references on random problems
/// with N <= 30. Violations are relative errors.
[[nodiscard]] CheckReport posterior_equivalence_check(long trials, std::uint64_t seed);
[[nodiscard]] CheckReport lml_equivalence_check(long trials, std::uint64_t seed);

/// Narrowest grid-aligned interval [g_i, g_j] containing theta0 with mass at
/// least 1 - delta. Throws InputError when no interval qualifies.
[[nodiscard]] std::pair<double, double> grid_bounding_pair_1d(const QuadratureDensity& density, double theta0,
                                                              double delta);

/// Kolmogorov-Smirnov distance between an empirical sample and a CDF.
[[nodiscard]] double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf);

/// Every hard check at the given trial counts plus the soft gamma = 1 run.
[[nodiscard]] std::vector<CheckReport> run_all_checks(std::uint64_t seed, double trial_scale = 1.0);

}  // namespace robustgp::oracles
