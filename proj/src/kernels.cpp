#include "robustgp/kernels.hpp"

#include "robustgp/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace robustgp {

VectorXd HyperVector::packed() const {
    VectorXd out(packed_size());
    out.head(dim()) = lengthscales;
    out(dim()) = signal_variance;
    out(dim() + 1) = noise_variance;
    return out;
}

VectorXd HyperVector::to_log() const { return packed().array().log().matrix(); }

HyperVector HyperVector::from_packed(const Eigen::Ref<const VectorXd>& raw) {
    if (raw.size() < 3) {
        throw InputError("packed hyperparameter vector needs at least 3 entries");
    }
    const Index d = raw.size() - 2;
    return HyperVector(raw.head(d), raw(d), raw(d + 1));
}

HyperVector HyperVector::from_log(const Eigen::Ref<const VectorXd>& log_theta) {
    return from_packed(log_theta.array().exp().matrix());
}

void HyperVector::validate() const {
    if (lengthscales.size() == 0) {
        throw InputError("hyperparameters need at least one lengthscale");
    }
    const auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
    for (Index i = 0; i < lengthscales.size(); ++i) {
        if (!positive(lengthscales(i))) {
            throw InputError("lengthscales must be finite and strictly positive");
        }
    }
    if (!positive(signal_variance)) throw InputError("signal variance must be strictly positive");
    if (!positive(noise_variance)) throw InputError("noise variance must be strictly positive");
}

bool HyperVector::all_le(const HyperVector& other) const {
    if (dim() != other.dim()) return false;
    return (packed().array() <= other.packed().array()).all();
}

HyperBox HyperBox::uniform(Index dim, double ls_lo, double ls_hi, double sf2_lo, double sf2_hi, double sn2_lo,
                           double sn2_hi) {
    HyperBox box{HyperVector(VectorXd::Constant(dim, ls_lo), sf2_lo, sn2_lo),
                 HyperVector(VectorXd::Constant(dim, ls_hi), sf2_hi, sn2_hi)};
    box.validate();
    return box;
}

bool HyperBox::contains(const HyperVector& theta) const { return lower.all_le(theta) && theta.all_le(upper); }

void HyperBox::validate() const {
    lower.validate();
    upper.validate();
    if (lower.dim() != upper.dim()) throw InputError("hyperparameter box bounds differ in dimension");
    if (!lower.all_le(upper)) throw InputError("hyperparameter box requires lower <= upper");
}

KernelFamily parse_kernel_family(std::string_view name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "se" || lower == "squared_exponential" || lower == "rbf" || lower == "gaussian") {
        return KernelFamily::SquaredExponential;
    }
    if (lower == "matern52" || lower == "matern") return KernelFamily::Matern52;
    throw InputError("unknown kernel family '" + std::string(name) + "'");
}

std::string to_string(KernelFamily family) {
    return family == KernelFamily::SquaredExponential ? "se" : "matern52";
}

double kernel_profile(KernelFamily family, double r) noexcept {
    switch (family) {
        case KernelFamily::SquaredExponential:
            return std::exp(-0.5 * r * r);
        case KernelFamily::Matern52: {
            const double s = std::sqrt(5.0) * r;
            return (1.0 + s + s * s / 3.0) * std::exp(-s);
        }
    }
    return 0.0;
}

namespace {

double scaled_distance(const VectorXd& lengthscales, const Eigen::Ref<const VectorXd>& x,
                       const Eigen::Ref<const VectorXd>& x2) {
    return ((x - x2).array() / lengthscales.array()).matrix().norm();
}

void check_dim(const KernelSpec& spec, Index d) {
    if (d != spec.hyper.dim()) {
        throw InputError("input dimension " + std::to_string(d) + " does not match " +
                         std::to_string(spec.hyper.dim()) + " lengthscales");
    }
}

}  // namespace

double kernel_eval(const KernelSpec& spec, const Eigen::Ref<const VectorXd>& x, const Eigen::Ref<const VectorXd>& x2) {
    check_dim(spec, x.size());
    check_dim(spec, x2.size());
    return spec.hyper.signal_variance *
           kernel_profile(spec.family, scaled_distance(spec.hyper.lengthscales, x, x2));
}

MatrixXd gram_matrix(const KernelSpec& spec, const Eigen::Ref<const MatrixXd>& X) {
    if (X.rows() > 0) check_dim(spec, X.cols());
    const Index n = X.rows();
    const double sf2 = spec.hyper.signal_variance;
    MatrixXd K(n, n);
    for (Index i = 0; i < n; ++i) {
        K(i, i) = sf2;
        for (Index j = 0; j < i; ++j) {
            const double r = scaled_distance(spec.hyper.lengthscales, X.row(i).transpose(), X.row(j).transpose());
            K(i, j) = K(j, i) = sf2 * kernel_profile(spec.family, r);
        }
    }
    return K;
}

VectorXd cross_vector(const KernelSpec& spec, const Eigen::Ref<const MatrixXd>& X,
                      const Eigen::Ref<const VectorXd>& xstar) {
    check_dim(spec, xstar.size());
    if (X.rows() > 0) check_dim(spec, X.cols());
    VectorXd k(X.rows());
    for (Index i = 0; i < X.rows(); ++i) {
        const double r = scaled_distance(spec.hyper.lengthscales, X.row(i).transpose(), xstar);
        k(i) = spec.hyper.signal_variance * kernel_profile(spec.family, r);
    }
    return k;
}

JitteredCholesky factorize_with_jitter(const MatrixXd& A, double scale) {
    constexpr double kFirst = 1e-10;
    constexpr double kLast = 1e-4;
    JitteredCholesky out;
    out.llt.compute(A);
    if (out.llt.info() == Eigen::Success) return out;

    double jitter = kFirst * scale;
    MatrixXd work = A;
    while (jitter <= kLast * scale * (1.0 + 1e-12)) {
        work.diagonal() = A.diagonal().array() + jitter;
        out.llt.compute(work);
        if (out.llt.info() == Eigen::Success) {
            out.jitter = jitter;
            return out;
        }
        jitter *= 2.0;
    }
    throw FactorizationError("Cholesky factorization failed after maximum jitter", jitter / 2.0);
}

}  // namespace robustgp
