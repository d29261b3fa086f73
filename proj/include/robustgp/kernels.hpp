#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <string>
#include <string_view>

namespace robustgp {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Full hyperparameter point: ARD lengthscales plus signal and noise variance.
///
/// Optimizers and samplers work on the packed log representation
/// `[log l_1, ..., log l_d, log signal_variance, log noise_variance]`.
struct HyperVector {
    VectorXd lengthscales;
    double signal_variance = 1.0;
    double noise_variance = 1.0;

    HyperVector() = default;
    HyperVector(VectorXd ls, double sf2, double sn2)
        : lengthscales(std::move(ls)), signal_variance(sf2), noise_variance(sn2) {}

    [[nodiscard]] Index dim() const noexcept { return lengthscales.size(); }
    /// Number of packed coordinates, d + 2.
    [[nodiscard]] Index packed_size() const noexcept { return lengthscales.size() + 2; }

    [[nodiscard]] VectorXd packed() const;
    [[nodiscard]] VectorXd to_log() const;
    [[nodiscard]] static HyperVector from_packed(const Eigen::Ref<const VectorXd>& raw);
    [[nodiscard]] static HyperVector from_log(const Eigen::Ref<const VectorXd>& log_theta);

    /// Throws InputError unless every entry is finite and strictly positive.
    void validate() const;

    /// Componentwise `*this <= other` over all packed coordinates.
    [[nodiscard]] bool all_le(const HyperVector& other) const;
};

/// Componentwise closed box of hyperparameters, lower <= upper.
struct HyperBox {
    HyperVector lower;
    HyperVector upper;

    /// Same lengthscale interval on every input dimension.
    [[nodiscard]] static HyperBox uniform(Index dim, double ls_lo, double ls_hi, double sf2_lo, double sf2_hi,
                                          double sn2_lo, double sn2_hi);

    [[nodiscard]] bool contains(const HyperVector& theta) const;
    void validate() const;
};

enum class KernelFamily { SquaredExponential, Matern52 };

[[nodiscard]] KernelFamily parse_kernel_family(std::string_view name);
[[nodiscard]] std::string to_string(KernelFamily family);

struct KernelSpec {
    KernelFamily family = KernelFamily::SquaredExponential;
    HyperVector hyper;
};

/// Unit-variance kernel profile as a function of the scaled distance r >= 0.
/// Both families are non-increasing in r.
[[nodiscard]] double kernel_profile(KernelFamily family, double r) noexcept;

/// signal_variance * profile(|| (x - x2) ./ lengthscales ||).
[[nodiscard]] double kernel_eval(const KernelSpec& spec, const Eigen::Ref<const VectorXd>& x,
                                 const Eigen::Ref<const VectorXd>& x2);

/// Gram matrix over the rows of X.
[[nodiscard]] MatrixXd gram_matrix(const KernelSpec& spec, const Eigen::Ref<const MatrixXd>& X);

/// Cross-covariance between the rows of X and a single point.
[[nodiscard]] VectorXd cross_vector(const KernelSpec& spec, const Eigen::Ref<const MatrixXd>& X,
                                    const Eigen::Ref<const VectorXd>& xstar);

struct JitteredCholesky {
    Eigen::LLT<MatrixXd> llt;
    double jitter = 0.0;
};

/// Cholesky of a symmetric matrix. On failure a diagonal jitter starting at
/// 1e-10 * scale is added and doubled up to 1e-4 * scale; past that a
/// FactorizationError carrying the last jitter is thrown.
[[nodiscard]] JitteredCholesky factorize_with_jitter(const MatrixXd& A, double scale);

}  // namespace robustgp
