#include "robustgp/gp_core.hpp"

#include "nelder_mead.hpp"
#include "robustgp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

namespace robustgp {

void Dataset::validate() const {
    if (X.rows() != y.size()) {
        throw InputError("dataset has " + std::to_string(X.rows()) + " input rows but " + std::to_string(y.size()) +
                         " targets");
    }
    if (!X.allFinite() || !y.allFinite()) throw InputError("dataset contains non-finite values");
}

GPModel GPModel::fit(KernelSpec spec, Dataset data) {
    spec.hyper.validate();
    data.validate();
    if (data.size() > 0 && data.dim() != spec.hyper.dim()) {
        throw InputError("dataset dimension does not match the number of lengthscales");
    }
    GPModel model;
    model.spec_ = std::move(spec);
    model.data_ = std::move(data);
    if (model.data_.size() == 0) return model;

    MatrixXd K = gram_matrix(model.spec_, model.data_.X);
    K.diagonal().array() += model.spec_.hyper.noise_variance;
    auto chol = factorize_with_jitter(K, model.spec_.hyper.signal_variance);
    model.factor_ = std::move(chol.llt);
    model.jitter_ = chol.jitter;
    model.alpha_ = model.factor_.solve(model.data_.y);
    return model;
}

double GPModel::mean(const Eigen::Ref<const VectorXd>& xstar) const {
    if (xstar.size() != input_dim()) throw InputError("test point dimension mismatch");
    if (data_.size() == 0) return 0.0;
    return cross_vector(spec_, data_.X, xstar).dot(alpha_);
}

double GPModel::variance(const Eigen::Ref<const VectorXd>& xstar) const {
    if (xstar.size() != input_dim()) throw InputError("test point dimension mismatch");
    const double sf2 = spec_.hyper.signal_variance;
    if (data_.size() == 0) return sf2;
    const VectorXd k = cross_vector(spec_, data_.X, xstar);
    const VectorXd v = factor_.matrixL().solve(k);
    const double var = sf2 - v.squaredNorm();
    if (var < -1e-8 * sf2) {
        throw NumericalError("posterior variance " + std::to_string(var) + " is negative beyond round-off");
    }
    return std::clamp(var, 0.0, sf2);
}

double GPModel::stddev(const Eigen::Ref<const VectorXd>& xstar) const { return std::sqrt(variance(xstar)); }

double GPModel::log_marginal_likelihood() const {
    const Index n = data_.size();
    if (n == 0) throw InputError("log marginal likelihood needs at least one data point");
    const double log_det = 2.0 * factor_.matrixLLT().diagonal().array().log().sum();
    return -0.5 * data_.y.dot(alpha_) - 0.5 * log_det - 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
}

double log_marginal_likelihood(const KernelSpec& spec, const Dataset& data) {
    if (data.size() == 0) throw InputError("log marginal likelihood needs at least one data point");
    return GPModel::fit(spec, data).log_marginal_likelihood();
}

HyperVector maximize_log_marginal_likelihood(const Dataset& data, KernelFamily family, const HyperBox& box,
                                             const MlOptions& options) {
    box.validate();
    data.validate();
    if (data.size() == 0) throw InputError("cannot fit hyperparameters without data");
    if (data.dim() != box.lower.dim()) throw InputError("prior box dimension does not match the dataset");

    const VectorXd lo = box.lower.to_log();
    const VectorXd hi = box.upper.to_log();
    std::vector<Index> free;
    for (Index i = 0; i < lo.size(); ++i) {
        if (hi(i) > lo(i)) free.push_back(i);
    }
    if (free.empty()) return box.lower;

    const auto lml_at = [&](const VectorXd& log_theta) {
        try {
            return log_marginal_likelihood(KernelSpec{family, HyperVector::from_log(log_theta)}, data);
        } catch (const NumericalError&) {
            return -std::numeric_limits<double>::infinity();
        }
    };
    const auto embed = [&](const VectorXd& z, VectorXd& full) {
        for (size_t k = 0; k < free.size(); ++k) full(free[k]) = z(static_cast<Index>(k));
    };

    std::mt19937_64 rng(options.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    VectorXd best_log = lo;
    double best_value = -std::numeric_limits<double>::infinity();
    const int restarts = std::max(1, options.restarts);
    const auto nfree = static_cast<Index>(free.size());

    for (int r = 0; r < restarts; ++r) {
        VectorXd start_full = lo;
        if (r == 0 && options.initial) {
            start_full = options.initial->to_log().cwiseMax(lo).cwiseMin(hi);
        } else {
            for (Index i : free) start_full(i) = lo(i) + unit(rng) * (hi(i) - lo(i));
        }
        VectorXd z0(nfree);
        VectorXd step(nfree);
        VectorXd zlo(nfree);
        VectorXd zhi(nfree);
        for (Index k = 0; k < nfree; ++k) {
            const Index i = free[static_cast<size_t>(k)];
            z0(k) = start_full(i);
            zlo(k) = lo(i);
            zhi(k) = hi(i);
            step(k) = std::min(0.5, 0.1 * (hi(i) - lo(i)));
        }

        VectorXd scratch = start_full;
        const auto objective = [&](const VectorXd& z) {
            const VectorXd clamped = z.cwiseMax(zlo).cwiseMin(zhi);
            embed(clamped, scratch);
            return -lml_at(scratch) + 1e3 * (z - clamped).squaredNorm();
        };
        const double start_value = lml_at(start_full);
        if (start_value > best_value) {
            best_value = start_value;
            best_log = start_full;
        }
        const auto res = detail::minimize_simplex(objective, z0, step, options.max_iterations, 1e-7);
        VectorXd candidate = start_full;
        embed(res.x.cwiseMax(zlo).cwiseMin(zhi), candidate);
        const double value = lml_at(candidate);
        if (value > best_value) {
            best_value = value;
            best_log = candidate;
        }
    }
    return HyperVector::from_log(best_log);
}

VectorXd sample_prior_function(const KernelSpec& spec, const Eigen::Ref<const MatrixXd>& grid, std::uint64_t seed) {
    spec.hyper.validate();
    if (grid.rows() < 1) throw InputError("prior sample needs at least one grid point");
    const MatrixXd K = gram_matrix(spec, grid);
    const auto chol = factorize_with_jitter(K, spec.hyper.signal_variance);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    VectorXd z(grid.rows());
    for (Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
    return chol.llt.matrixL() * z;
}

}  // namespace robustgp
