#include "robustgp/oracles.hpp"

#include "robustgp/errors.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>

namespace robustgp::oracles {

void CheckReport::record(double violation) {
    worst_violation = trials == 0 ? violation : std::max(worst_violation, violation);
    ++trials;
}

void CheckReport::finalize() { passed = std::isfinite(worst_violation) && worst_violation <= tolerance; }

void write_checks_csv(std::ostream& out, const std::vector<CheckReport>& reports) {
    out << "name,trials,worst_violation,tolerance,passed,soft,seeds\n";
    out.precision(10);
    for (const auto& r : reports) {
        out << r.name << ',' << r.trials << ',' << r.worst_violation << ',' << r.tolerance << ','
            << (r.passed ? "true" : "false") << ',' << (r.soft ? "true" : "false") << ',';
        for (std::size_t i = 0; i < r.seeds.size(); ++i) out << (i ? ";" : "") << r.seeds[i];
        out << '\n';
    }
}

double reference_kernel(KernelFamily family, const HyperVector& hyper, const VectorXd& a, const VectorXd& b) {
    double r2 = 0.0;
    for (Index i = 0; i < a.size(); ++i) {
        const double s = (a(i) - b(i)) / hyper.lengthscales(i);
        r2 += s * s;
    }
    if (family == KernelFamily::SquaredExponential) return hyper.signal_variance * std::exp(-0.5 * r2);
    const double s5r = std::sqrt(5.0 * r2);
    return hyper.signal_variance * (1.0 + s5r + 5.0 * r2 / 3.0) * std::exp(-s5r);
}

namespace {

MatrixXd reference_gram(const KernelSpec& spec, const MatrixXd& X) {
    const Index n = X.rows();
    MatrixXd K(n, n);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
            K(i, j) = reference_kernel(spec.family, spec.hyper, X.row(i).transpose(), X.row(j).transpose());
        }
    }
    return K;
}

MatrixXd dense_inverse(const MatrixXd& A) {
    Eigen::FullPivLU<MatrixXd> lu(A);
    if (!lu.isInvertible()) throw NumericalError("matrix is singular");
    return lu.inverse();
}

double log_uniform(std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
    return std::exp(u(rng));
}

MatrixXd uniform_matrix(std::mt19937_64& rng, Index rows, Index cols, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    MatrixXd M(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) M(i, j) = u(rng);
    return M;
}

std::mt19937_64 trial_rng(std::uint64_t seed, long trial) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(trial)};
    return std::mt19937_64(seq);
}

// Three sorted log-uniform draws per input dimension: lower, middle, upper.
struct LengthscaleTriple {
    VectorXd lower, middle, upper;
};

LengthscaleTriple draw_triple(std::mt19937_64& rng, Index d) {
    LengthscaleTriple t{VectorXd(d), VectorXd(d), VectorXd(d)};
    for (Index i = 0; i < d; ++i) {
        std::array<double, 3> v{log_uniform(rng, 0.1, 10.0), log_uniform(rng, 0.1, 10.0),
                                log_uniform(rng, 0.1, 10.0)};
        std::sort(v.begin(), v.end());
        t.lower(i) = v[0];
        t.middle(i) = v[1];
        t.upper(i) = v[2];
    }
    return t;
}

double relative_error(double a, double b, double scale) { return std::abs(a - b) / std::max(std::abs(b), scale); }

}  // namespace

MatrixXd reference_target_covariance(const KernelSpec& spec, const Dataset& data) {
    MatrixXd K = reference_gram(spec, data.X);
    K.diagonal().array() += spec.hyper.noise_variance;
    return K;
}

std::pair<double, double> direct_posterior(const KernelSpec& spec, const Dataset& data, const VectorXd& xstar) {
    const Index n = data.size();
    if (n > 50) throw InputError("direct posterior is limited to 50 points");
    const double prior = reference_kernel(spec.family, spec.hyper, xstar, xstar);
    if (n == 0) return {0.0, prior};
    const MatrixXd inv = dense_inverse(reference_target_covariance(spec, data));
    VectorXd k(n);
    for (Index i = 0; i < n; ++i) k(i) = reference_kernel(spec.family, spec.hyper, data.X.row(i).transpose(), xstar);
    const VectorXd w = inv * k;
    return {w.dot(data.y), prior - w.dot(k)};
}

double direct_mvn_loglik(const VectorXd& y, const MatrixXd& covariance) {
    const Index n = y.size();
    if (n > 30) throw InputError("direct likelihood is limited to 30 points");
    if (covariance.rows() != n || covariance.cols() != n) throw InputError("covariance does not match targets");
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(covariance, Eigen::EigenvaluesOnly);
    if (n > 0 && !(eig.eigenvalues().minCoeff() > 0.0)) throw NumericalError("covariance is not positive definite");
    const MatrixXd inv = dense_inverse(covariance);
    const double det = covariance.fullPivLu().determinant();
    return -0.5 * y.dot(inv * y) - 0.5 * std::log(det) - 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
}

double schur_complement_last(const MatrixXd& K) {
    const Index n = K.rows();
    if (n < 2 || K.cols() != n) throw InputError("need a square matrix of size >= 2");
    const MatrixXd inv = dense_inverse(K.topLeftCorner(n - 1, n - 1));
    const VectorXd k = K.col(n - 1).head(n - 1);
    return K(n - 1, n - 1) - k.dot(inv * k);
}

CheckReport variance_dominance_check(long trials, KernelFamily family, std::uint64_t seed, bool force_gamma_one) {
    CheckReport report;
    report.name = std::string("variance_dominance_") + to_string(family) + (force_gamma_one ? "_gamma1" : "");
    report.tolerance = 1e-8;
    report.soft = force_gamma_one;
    report.seeds = {seed};
    report.worst_violation = -std::numeric_limits<double>::infinity();
    for (long t = 0; t < trials; ++t) {
        auto rng = trial_rng(seed, t);
        const Index d = std::uniform_int_distribution<Index>(1, 3)(rng);
        const Index n = std::uniform_int_distribution<Index>(1, 20)(rng);
        const auto ls = draw_triple(rng, d);
        const double sf2 = log_uniform(rng, 0.1, 10.0);
        const double sn2 = log_uniform(rng, 1e-3, 1.0);
        Dataset data(uniform_matrix(rng, n, d, -2.0, 2.0), VectorXd::Zero(n));
        const double gamma = force_gamma_one ? 1.0 : std::sqrt((ls.upper.array() / ls.lower.array()).prod());

        const auto mid = GPModel::fit(KernelSpec{family, HyperVector(ls.middle, sf2, sn2)}, data);
        const auto low = GPModel::fit(KernelSpec{family, HyperVector(ls.lower, sf2, sn2)}, data);
        const MatrixXd xs = uniform_matrix(rng, 100, d, -3.0, 3.0);
        double worst = -std::numeric_limits<double>::infinity();
        for (Index i = 0; i < xs.rows(); ++i) {
            const VectorXd x = xs.row(i).transpose();
            worst = std::max(worst, mid.stddev(x) - gamma * low.stddev(x));
        }
        report.record(worst);
    }
    report.finalize();
    return report;
}

CheckReport mean_difference_check(long trials, std::uint64_t seed) {
    CheckReport report;
    report.name = "mean_difference";
    report.tolerance = 1e-8;
    report.seeds = {seed};
    report.worst_violation = -std::numeric_limits<double>::infinity();
    std::normal_distribution<double> normal(0.0, 1.0);
    for (long t = 0; t < trials; ++t) {
        auto rng = trial_rng(seed, t);
        const Index d = std::uniform_int_distribution<Index>(1, 3)(rng);
        const Index n = std::uniform_int_distribution<Index>(1, 20)(rng);
        const auto family = std::bernoulli_distribution(0.5)(rng) ? KernelFamily::SquaredExponential
                                                                   : KernelFamily::Matern52;
        VectorXd lo(d), hi(d), a(d), b(d);
        for (Index i = 0; i < d; ++i) {
            std::array<double, 4> v{};
            for (auto& e : v) e = log_uniform(rng, 0.1, 10.0);
            std::sort(v.begin(), v.end());
            lo(i) = v[0];
            hi(i) = v[3];
            const bool swap = std::bernoulli_distribution(0.5)(rng);
            a(i) = swap ? v[2] : v[1];
            b(i) = swap ? v[1] : v[2];
        }
        const double sf2 = log_uniform(rng, 0.1, 10.0);
        const double sn2 = log_uniform(rng, 1e-3, 1.0);
        VectorXd y(n);
        for (Index i = 0; i < n; ++i) y(i) = normal(rng);
        Dataset data(uniform_matrix(rng, n, d, -2.0, 2.0), y);
        const double gamma = std::sqrt((hi.array() / lo.array()).prod());

        const auto m0 = GPModel::fit(KernelSpec{family, HyperVector(a, sf2, sn2)}, data);
        const auto m1 = GPModel::fit(KernelSpec{family, HyperVector(b, sf2, sn2)}, data);
        const auto env = GPModel::fit(KernelSpec{family, HyperVector(lo, sf2, sn2)}, data);
        const MatrixXd xs = uniform_matrix(rng, 200, d, -3.0, 3.0);
        const double factor = 4.0 * gamma * gamma * y.squaredNorm() / sn2;
        double worst = -std::numeric_limits<double>::infinity();
        for (Index i = 0; i < xs.rows(); ++i) {
            const VectorXd x = xs.row(i).transpose();
            const double diff = m0.mean(x) - m1.mean(x);
            worst = std::max(worst, diff * diff - factor * env.variance(x));
        }
        report.record(worst);
    }
    report.finalize();
    return report;
}

CheckReport covariance_inequality_check(long trials, std::uint64_t seed, Index size) {
    CheckReport report;
    report.name = "covariance_inequality";
    report.tolerance = 1e-10;
    report.seeds = {seed};
    report.worst_violation = -std::numeric_limits<double>::infinity();
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto gaussian = [&](std::mt19937_64& rng) {
        MatrixXd M(size, size);
        for (Index i = 0; i < size; ++i)
            for (Index j = 0; j < size; ++j) M(i, j) = normal(rng);
        return M;
    };
    for (long t = 0; t < trials; ++t) {
        auto rng = trial_rng(seed, t);
        const MatrixXd A = gaussian(rng);
        const MatrixXd B = gaussian(rng) * log_uniform(rng, 1e-3, 1.0);
        MatrixXd K2 = A * A.transpose();
        K2.diagonal().array() += 0.1;
        const MatrixXd K1 = K2 + B * B.transpose();
        report.record(schur_complement_last(K2) - schur_complement_last(K1));
    }
    report.finalize();
    return report;
}

namespace {

struct RandomProblem {
    KernelSpec spec;
    Dataset data;
};

RandomProblem random_problem(std::mt19937_64& rng, Index max_n) {
    const Index d = std::uniform_int_distribution<Index>(1, 3)(rng);
    const Index n = std::uniform_int_distribution<Index>(1, max_n)(rng);
    VectorXd ls(d);
    for (Index i = 0; i < d; ++i) ls(i) = log_uniform(rng, 0.2, 5.0);
    const auto family =
        std::bernoulli_distribution(0.5)(rng) ? KernelFamily::SquaredExponential : KernelFamily::Matern52;
    HyperVector hyper(ls, log_uniform(rng, 0.1, 10.0), log_uniform(rng, 1e-2, 1.0));
    std::normal_distribution<double> normal(0.0, 1.0);
    VectorXd y(n);
    for (Index i = 0; i < n; ++i) y(i) = normal(rng);
    return {KernelSpec{family, hyper}, Dataset(uniform_matrix(rng, n, d, -2.0, 2.0), y)};
}

}  // namespace

CheckReport posterior_equivalence_check(long trials, std::uint64_t seed) {
    CheckReport report;
    report.name = "posterior_equivalence";
    report.tolerance = 1e-8;
    report.seeds = {seed};
    report.worst_violation = 0.0;
    for (long t = 0; t < trials; ++t) {
        auto rng = trial_rng(seed, t);
        const auto problem = random_problem(rng, 30);
        const auto model = GPModel::fit(problem.spec, problem.data);
        const MatrixXd xs = uniform_matrix(rng, 20, problem.data.dim(), -3.0, 3.0);
        const double sf2 = problem.spec.hyper.signal_variance;
        const double yscale = problem.data.y.cwiseAbs().maxCoeff();
        double worst = 0.0;
        for (Index i = 0; i < xs.rows(); ++i) {
            const VectorXd x = xs.row(i).transpose();
            const auto [mean, var] = direct_posterior(problem.spec, problem.data, x);
            worst = std::max(worst, relative_error(model.mean(x), mean, yscale));
            worst = std::max(worst, relative_error(model.variance(x), std::max(var, 0.0), sf2));
        }
        report.record(worst);
    }
    report.finalize();
    return report;
}

CheckReport lml_equivalence_check(long trials, std::uint64_t seed) {
    CheckReport report;
    report.name = "lml_equivalence";
    report.tolerance = 1e-8;
    report.seeds = {seed};
    report.worst_violation = 0.0;
    for (long t = 0; t < trials; ++t) {
        auto rng = trial_rng(seed, t);
        const auto problem = random_problem(rng, 30);
        const double expected =
            direct_mvn_loglik(problem.data.y, reference_target_covariance(problem.spec, problem.data));
        const double actual = log_marginal_likelihood(problem.spec, problem.data);
        report.record(relative_error(actual, expected, 1.0));
    }
    report.finalize();
    return report;
}

std::pair<double, double> grid_bounding_pair_1d(const QuadratureDensity& density, double theta0, double delta) {
    const VectorXd& g = density.grid;
    const Index m = g.size();
    if (m < 2) throw InputError("grid needs at least two points");
    if (theta0 < g(0) || theta0 > g(m - 1)) throw InputError("theta0 lies outside the grid");
    if (delta < 0.0 || delta >= 1.0) throw InputError("delta must lie in [0,1)");

    VectorXd cum(m);
    cum(0) = 0.0;
    for (Index i = 1; i < m; ++i) {
        cum(i) = cum(i - 1) + 0.5 * (density.density(i) + density.density(i - 1)) * (g(i) - g(i - 1));
    }
    const double total = cum(m - 1);
    const double need = (1.0 - delta) * total - 1e-12 * total;

    // Lower end runs over grid points <= theta0, upper end over points >= theta0.
    Index last_lo = 0;
    while (last_lo + 1 < m && g(last_lo + 1) <= theta0) ++last_lo;
    Index first_hi = m - 1;
    while (first_hi > 0 && g(first_hi - 1) >= theta0) --first_hi;

    double best = std::numeric_limits<double>::infinity();
    std::pair<double, double> result;
    Index j = first_hi;
    for (Index i = 0; i <= last_lo; ++i) {
        while (j < m && cum(j) - cum(i) < need) ++j;
        if (j == m) break;
        const double width = g(j) - g(i);
        if (width < best) {
            best = width;
            result = {g(i), g(j)};
        }
    }
    if (!std::isfinite(best)) throw InputError("no grid interval reaches the requested mass");
    return result;
}

double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf) {
    if (samples.empty()) throw InputError("KS statistic needs samples");
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double f = cdf(samples[i]);
        d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
    }
    return d;
}

std::vector<CheckReport> run_all_checks(std::uint64_t seed, double trial_scale) {
    const auto scaled = [&](long n) { return std::max(1L, std::lround(static_cast<double>(n) * trial_scale)); };
    return {
        variance_dominance_check(scaled(1000), KernelFamily::SquaredExponential, seed),
        variance_dominance_check(scaled(1000), KernelFamily::Matern52, seed + 1),
        variance_dominance_check(scaled(1000), KernelFamily::SquaredExponential, seed + 2, true),
        covariance_inequality_check(scaled(1000), seed + 3),
        mean_difference_check(scaled(500), seed + 4),
        posterior_equivalence_check(scaled(200), seed + 5),
        lml_equivalence_check(scaled(200), seed + 6),
    };
}

}  // namespace robustgp::oracles
