#include "robustgp/hyper_posterior.hpp"

#include "robustgp/errors.hpp"

#include <spdlog/spdlog.h>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace robustgp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};

double likelihood_term(const Dataset& data, KernelFamily family, const HyperVector& theta) {
    if (data.size() == 0) return 0.0;
    try {
        return log_marginal_likelihood(KernelSpec{family, theta}, data);
    } catch (const NumericalError& e) {
        spdlog::debug("rejecting hyperparameters: {}", e.what());
        return kNegInf;
    }
}

double gaussian_quadratic(const GaussianLogPrior& g, const VectorXd& z) {
    return -0.5 * (g.precision.array() * (z - g.mean).array().square()).sum();
}

}  // namespace

void GaussianLogPrior::validate() const {
    if (mean.size() != precision.size() || mean.size() < 3) {
        throw InputError("Gaussian log prior needs matching mean and precision of size d + 2");
    }
    if (!(precision.array() > 0.0).all() || !precision.allFinite()) {
        throw InputError("Gaussian log prior precision must be strictly positive");
    }
}

Index prior_packed_size(const HyperPrior& prior) {
    return std::visit(Overloaded{[](const UniformBoxPrior& u) { return u.box.lower.packed_size(); },
                                 [](const GaussianLogPrior& g) { return g.mean.size(); }},
                      prior);
}

double log_prior_density(const HyperPrior& prior, const HyperVector& theta) {
    return std::visit(Overloaded{[&](const UniformBoxPrior& u) {
                                     if (!u.box.contains(theta)) return kNegInf;
                                     const VectorXd w = u.box.upper.packed() - u.box.lower.packed();
                                     double lp = 0.0;
                                     for (Index i = 0; i < w.size(); ++i) {
                                         if (w(i) > 0.0) lp -= std::log(w(i));
                                     }
                                     return lp;
                                 },
                                 [&](const GaussianLogPrior& g) { return gaussian_quadratic(g, theta.to_log()); }},
                      prior);
}

double log_unnormalized_posterior(const Dataset& data, KernelFamily family, const HyperPrior& prior,
                                  const HyperVector& theta) {
    const double lp = log_prior_density(prior, theta);
    if (!std::isfinite(lp)) return kNegInf;
    return lp + likelihood_term(data, family, theta);
}

double log_posterior_raw(const Dataset& data, KernelFamily family, const HyperPrior& prior,
                         const HyperVector& theta) {
    double lp = log_prior_density(prior, theta);
    if (!std::isfinite(lp)) return kNegInf;
    if (std::holds_alternative<GaussianLogPrior>(prior)) {
        // Change of variables from log space to raw space.
        lp -= theta.packed().array().log().sum();
    }
    return lp + likelihood_term(data, family, theta);
}

void SamplerConfig::validate() const {
    if (chains < 1) throw InputError("sampler needs at least one chain");
    if (steps <= burn_in || burn_in < 0) throw InputError("sampler steps must exceed burn-in");
    if (thinning < 1) throw InputError("thinning must be at least 1");
    if (!(target_acceptance > 0.0 && target_acceptance < 1.0)) throw InputError("target acceptance must be in (0,1)");
    if (!free_coordinates.empty() && !anchor) throw InputError("pinned coordinates need an anchor point");
}

AdaptiveMetropolisResult adaptive_metropolis(const LogDensity& log_density, const InitialDraw& initial,
                                             const VectorXd& initial_scales, const SamplerConfig& cfg) {
    cfg.validate();
    const Index p = initial_scales.size();
    if (p == 0) throw InputError("sampler needs at least one free coordinate");

    AdaptiveMetropolisResult out;
    long accepted_total = 0;
    long proposed_total = 0;

    for (int c = 0; c < cfg.chains; ++c) {
        std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed & 0xffffffffu),
                          static_cast<std::uint32_t>(cfg.seed >> 32), static_cast<std::uint32_t>(c)};
        std::mt19937_64 rng(seq);
        std::normal_distribution<double> normal(0.0, 1.0);
        std::uniform_real_distribution<double> unit(0.0, 1.0);

        VectorXd z;
        double lp = kNegInf;
        for (int attempt = 0; attempt < 1000 && !std::isfinite(lp); ++attempt) {
            z = initial(rng);
            lp = log_density(z);
        }
        if (!std::isfinite(lp)) throw NumericalError("no initial point with finite posterior density");

        VectorXd scales = initial_scales;
        double log_step = 0.0;
        VectorXd run_mean = VectorXd::Zero(p);
        VectorXd run_m2 = VectorXd::Zero(p);
        long run_n = 0;
        long chain_accepts = 0;
        const int quarter = cfg.burn_in / 4;
        const int rescale_at = cfg.burn_in / 2;

        for (int t = 0; t < cfg.steps; ++t) {
            VectorXd proposal(p);
            const double step = std::exp(log_step);
            for (Index i = 0; i < p; ++i) proposal(i) = z(i) + step * scales(i) * normal(rng);
            const double lp_new = log_density(proposal);
            const double log_ratio = lp_new - lp;
            const double accept_prob = std::isfinite(lp_new) ? std::min(1.0, std::exp(log_ratio)) : 0.0;
            const bool accept = unit(rng) < accept_prob;
            if (accept) {
                z = proposal;
                lp = lp_new;
                ++chain_accepts;
            }

            if (t < cfg.burn_in) {
                log_step += (accept_prob - cfg.target_acceptance) / std::pow(static_cast<double>(t + 1), 0.6);
                log_step = std::clamp(log_step, -20.0, 5.0);
                if (t >= quarter) {
                    ++run_n;
                    const VectorXd delta = z - run_mean;
                    run_mean += delta / static_cast<double>(run_n);
                    run_m2 += delta.cwiseProduct(z - run_mean);
                }
                if (t == rescale_at && run_n > 10) {
                    for (Index i = 0; i < p; ++i) {
                        const double sd = std::sqrt(run_m2(i) / static_cast<double>(run_n - 1));
                        if (sd > 1e-12) scales(i) = sd;
                    }
                    log_step = std::log(2.38 / std::sqrt(static_cast<double>(p)));
                }
            } else {
                ++proposed_total;
                if (accept) ++accepted_total;
                if ((t - cfg.burn_in) % cfg.thinning == 0) {
                    out.states.push_back(z);
                    out.log_densities.push_back(lp);
                }
            }
        }
        if (chain_accepts == 0) {
            throw NumericalError("chain " + std::to_string(c) +
                                 " rejected every proposal; reduce the initial step size or check the prior");
        }
    }
    out.acceptance_rate =
        proposed_total > 0 ? static_cast<double>(accepted_total) / static_cast<double>(proposed_total) : 0.0;
    return out;
}

PosteriorSampleSet PosteriorSampleSet::alternate(int offset) const {
    PosteriorSampleSet out = *this;
    out.samples.clear();
    out.log_posts.clear();
    for (std::size_t i = static_cast<std::size_t>(offset); i < samples.size(); i += 2) {
        out.samples.push_back(samples[i]);
        out.log_posts.push_back(log_posts[i]);
    }
    return out;
}

PosteriorSampleSet PosteriorSampleSet::strided(std::size_t max_count) const {
    if (samples.size() <= max_count || max_count == 0) return *this;
    PosteriorSampleSet out = *this;
    out.samples.clear();
    out.log_posts.clear();
    const double stride = static_cast<double>(samples.size()) / static_cast<double>(max_count);
    for (std::size_t k = 0; k < max_count; ++k) {
        const auto i = static_cast<std::size_t>(static_cast<double>(k) * stride);
        out.samples.push_back(samples[i]);
        out.log_posts.push_back(log_posts[i]);
    }
    return out;
}

void PosteriorSampleSet::write_csv(std::ostream& out) const {
    const Index d = samples.empty() ? 0 : samples.front().dim();
    for (Index i = 0; i < d; ++i) out << 'l' << (i + 1) << ',';
    out << "signal_variance,noise_variance,log_posterior\n";
    out.precision(17);
    for (std::size_t k = 0; k < samples.size(); ++k) {
        const VectorXd v = samples[k].packed();
        for (Index i = 0; i < v.size(); ++i) out << v(i) << ',';
        out << log_posts[k] << '\n';
    }
}

PosteriorSampleSet sample_posterior(const Dataset& data, KernelFamily family, const HyperPrior& prior,
                                    const SamplerConfig& cfg) {
    cfg.validate();
    data.validate();
    const Index packed = prior_packed_size(prior);
    if (data.size() > 0 && data.dim() + 2 != packed) throw InputError("prior dimension does not match the dataset");
    if (const auto* g = std::get_if<GaussianLogPrior>(&prior)) g->validate();
    if (const auto* u = std::get_if<UniformBoxPrior>(&prior)) u->box.validate();

    std::vector<Index> free = cfg.free_coordinates;
    if (free.empty()) {
        for (Index i = 0; i < packed; ++i) free.push_back(i);
    }
    // Pinned axes keep their raw values bit-for-bit (no log/exp round trip).
    VectorXd anchor_raw = cfg.anchor ? cfg.anchor->packed() : VectorXd::Ones(packed);
    if (anchor_raw.size() != packed) throw InputError("sampler anchor has the wrong dimension");

    VectorXd lo(packed);
    VectorXd hi(packed);
    VectorXd base_scale(packed);
    if (const auto* u = std::get_if<UniformBoxPrior>(&prior)) {
        lo = u->box.lower.to_log();
        hi = u->box.upper.to_log();
        base_scale = 0.1 * (hi - lo);
        // Degenerate axes cannot move; pin them at their single value.
        std::erase_if(free, [&](Index i) {
            if (hi(i) > lo(i)) return false;
            anchor_raw(i) = u->box.lower.packed()(i);
            return true;
        });
    } else {
        const auto& g = std::get<GaussianLogPrior>(prior);
        lo = g.mean;
        hi = g.mean;
        base_scale = g.precision.cwiseInverse().cwiseSqrt();
    }
    for (Index i : free) {
        if (i < 0 || i >= packed) throw InputError("free coordinate index out of range");
    }
    if (free.empty()) throw InputError("no free hyperparameter to sample");

    const auto nfree = static_cast<Index>(free.size());
    const auto embed = [&](const VectorXd& zf) {
        VectorXd raw = anchor_raw;
        for (Index k = 0; k < nfree; ++k) raw(free[static_cast<std::size_t>(k)]) = std::exp(zf(k));
        return HyperVector::from_packed(raw);
    };
    const LogDensity target = [&](const VectorXd& zf) {
        const double lp = log_posterior_raw(data, family, prior, embed(zf));
        // Jacobian of theta = exp(z) on the sampled axes.
        return std::isfinite(lp) ? lp + zf.sum() : kNegInf;
    };

    const bool uniform = std::holds_alternative<UniformBoxPrior>(prior);
    VectorXd scales(nfree);
    for (Index k = 0; k < nfree; ++k) scales(k) = base_scale(free[static_cast<std::size_t>(k)]);
    const InitialDraw draw = [&](std::mt19937_64& rng) {
        VectorXd zf(nfree);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::normal_distribution<double> normal(0.0, 1.0);
        for (Index k = 0; k < nfree; ++k) {
            const Index i = free[static_cast<std::size_t>(k)];
            zf(k) = uniform ? lo(i) + unit(rng) * (hi(i) - lo(i)) : lo(i) + base_scale(i) * normal(rng);
        }
        return zf;
    };

    const auto chain = adaptive_metropolis(target, draw, scales, cfg);

    PosteriorSampleSet out;
    out.acceptance_rate = chain.acceptance_rate;
    out.chains = cfg.chains;
    out.burn_in = cfg.burn_in;
    out.thinning = cfg.thinning;
    out.samples.reserve(chain.states.size());
    for (std::size_t k = 0; k < chain.states.size(); ++k) {
        const HyperVector theta = embed(chain.states[k]);
        out.log_posts.push_back(log_unnormalized_posterior(data, family, prior, theta));
        out.samples.push_back(theta);
    }
    return out;
}

MatrixXd finite_difference_hessian(const LogDensity& f, const VectorXd& z, double step) {
    const Index p = z.size();
    MatrixXd H(p, p);
    const double f0 = f(z);
    for (Index i = 0; i < p; ++i) {
        VectorXd zp = z;
        VectorXd zm = z;
        zp(i) += step;
        zm(i) -= step;
        H(i, i) = (f(zp) - 2.0 * f0 + f(zm)) / (step * step);
        for (Index j = 0; j < i; ++j) {
            VectorXd a = z, b = z, c = z, d = z;
            a(i) += step, a(j) += step;
            b(i) += step, b(j) -= step;
            c(i) -= step, c(j) += step;
            d(i) -= step, d(j) -= step;
            H(i, j) = H(j, i) = (f(a) - f(b) - f(c) + f(d)) / (4.0 * step * step);
        }
    }
    return H;
}

LaplacePosterior laplace_from_hessian(const VectorXd& mean, const MatrixXd& hessian) {
    if (!hessian.allFinite()) throw NumericalError("log posterior Hessian is not finite");
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(hessian);
    if (eig.eigenvalues().maxCoeff() >= 0.0) {
        throw NumericalError("log posterior Hessian is not negative definite; use empirical_bayes_prior to "
                             "construct a data-dependent quadratic prior");
    }
    const MatrixXd neg = -hessian;
    return LaplacePosterior{mean, neg.llt().solve(MatrixXd::Identity(mean.size(), mean.size()))};
}

LaplacePosterior laplace_approximation(const Dataset& data, KernelFamily family, const HyperPrior& prior,
                                       const HyperVector& theta0) {
    theta0.validate();
    const VectorXd z0 = theta0.to_log();
    const auto* gauss = std::get_if<GaussianLogPrior>(&prior);
    const LogDensity smooth = [&](const VectorXd& z) {
        double v = likelihood_term(data, family, HyperVector::from_log(z));
        if (gauss) v += gaussian_quadratic(*gauss, z);
        return v;
    };
    return laplace_from_hessian(z0, finite_difference_hessian(smooth, z0));
}

double empirical_bayes_precision(const MatrixXd& lml_hessian) {
    constexpr double kFloor = 1e-6;
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(lml_hessian);
    const double largest = eig.eigenvalues().maxCoeff();
    double hp = 10.0 * std::max(largest, 0.0);
    if (hp <= 0.0) hp = kFloor;
    const MatrixXd I = MatrixXd::Identity(lml_hessian.rows(), lml_hessian.cols());
    while (Eigen::SelfAdjointEigenSolver<MatrixXd>(lml_hessian - hp * I).eigenvalues().maxCoeff() >= 0.0) {
        spdlog::info("empirical Bayes precision {} leaves the posterior Hessian indefinite; doubling", hp);
        hp *= 2.0;
    }
    return hp;
}

GaussianLogPrior empirical_bayes_prior(const Dataset& data, KernelFamily family, const HyperVector& theta0) {
    theta0.validate();
    const VectorXd z0 = theta0.to_log();
    const LogDensity lml = [&](const VectorXd& z) { return likelihood_term(data, family, HyperVector::from_log(z)); };
    const double hp = empirical_bayes_precision(finite_difference_hessian(lml, z0));
    return GaussianLogPrior{z0, VectorXd::Constant(z0.size(), hp)};
}

double posterior_mass_in_box(const PosteriorSampleSet& samples, const HyperVector& lo, const HyperVector& hi) {
    if (samples.empty()) throw InputError("posterior mass needs a non-empty sample set");
    if (!lo.all_le(hi)) throw InputError("mass box requires lo <= hi");
    const VectorXd a = lo.packed();
    const VectorXd b = hi.packed();
    std::size_t inside = 0;
    for (const auto& s : samples.samples) {
        const VectorXd v = s.packed();
        if ((v.array() >= a.array()).all() && (v.array() <= b.array()).all()) ++inside;
    }
    return static_cast<double>(inside) / static_cast<double>(samples.size());
}

QuadratureDensity normalize_on_grid(const VectorXd& grid, const VectorXd& log_density) {
    if (grid.size() < 2) throw InputError("quadrature grid needs at least two points");
    if (grid.size() != log_density.size()) throw InputError("grid and density sizes differ");
    for (Index i = 1; i < grid.size(); ++i) {
        if (!(grid(i) > grid(i - 1))) throw InputError("quadrature grid must be strictly increasing");
    }
    const double peak = log_density.maxCoeff();
    if (!std::isfinite(peak)) throw NumericalError("posterior density vanishes on the whole grid");
    VectorXd dens = (log_density.array() - peak).exp().matrix();
    double total = 0.0;
    for (Index i = 1; i < grid.size(); ++i) total += 0.5 * (dens(i) + dens(i - 1)) * (grid(i) - grid(i - 1));
    dens /= total;
    return QuadratureDensity{grid, dens};
}

double QuadratureDensity::cdf(double x) const {
    const Index n = grid.size();
    if (x <= grid(0)) return 0.0;
    double acc = 0.0;
    for (Index i = 1; i < n; ++i) {
        const double a = grid(i - 1);
        const double b = grid(i);
        if (x >= b) {
            acc += 0.5 * (density(i - 1) + density(i)) * (b - a);
            continue;
        }
        const double t = (x - a) / (b - a);
        const double fx = density(i - 1) + t * (density(i) - density(i - 1));
        return acc + 0.5 * (density(i - 1) + fx) * (x - a);
    }
    return acc;
}

double QuadratureDensity::mass(double a, double b) const {
    if (b < a) return 0.0;
    return cdf(b) - cdf(a);
}

QuadratureDensity quadrature_posterior_1d(const Dataset& data, KernelFamily family, const HyperPrior& prior,
                                          const HyperVector& theta0, Index coordinate, const VectorXd& grid) {
    if (grid.size() < 2) throw InputError("quadrature grid needs at least two points");
    const VectorXd base = theta0.packed();
    if (coordinate < 0 || coordinate >= base.size()) throw InputError("quadrature coordinate out of range");
    VectorXd logd(grid.size());
    for (Index i = 0; i < grid.size(); ++i) {
        VectorXd v = base;
        v(coordinate) = grid(i);
        logd(i) = grid(i) > 0.0 ? log_posterior_raw(data, family, prior, HyperVector::from_packed(v)) : kNegInf;
    }
    return normalize_on_grid(grid, logd);
}

}  // namespace robustgp
