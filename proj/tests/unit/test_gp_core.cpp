#include "helpers.hpp"

#include "robustgp/errors.hpp"
#include "robustgp/gp_core.hpp"
#include "robustgp/oracles.hpp"

#include <doctest.h>

#include <Eigen/LU>

#include <cmath>
#include <numbers>
#include <numeric>

using namespace robustgp;
using testutil::hyper;

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

TEST_SUITE("gp_core") {

TEST_CASE("empty dataset gives prior predictions") {
    const auto m = GPModel::fit({KernelFamily::SquaredExponential, hyper({1.0, 2.0}, 1.7, 0.1)},
                                Dataset(MatrixXd(0, 2), VectorXd(0)));
    VectorXd x(2);
    x << 0.3, -4.0;
    CHECK(m.mean(x) == 0.0);
    CHECK(m.variance(x) == doctest::Approx(1.7));
    CHECK_THROWS_AS((void)m.log_marginal_likelihood(), InputError);
}

TEST_CASE("single observation scalar case") {
    MatrixXd X(1, 1);
    X << 0.4;
    VectorXd y(1);
    y << 1.0;
    const auto m = GPModel::fit({KernelFamily::SquaredExponential, hyper({1.0}, 1.0, 1.0)}, Dataset(X, y));
    CHECK(m.mean(X.row(0).transpose()) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(m.variance(X.row(0).transpose()) == doctest::Approx(0.5).epsilon(1e-14));

    y << 0.0;
    const double lml = log_marginal_likelihood({KernelFamily::SquaredExponential, hyper({1.0}, 1.0, 1.0)},
                                               Dataset(X, y));
    CHECK(lml == doctest::Approx(-0.5 * std::log(2.0) - 0.5 * kLog2Pi).epsilon(1e-14));
}

TEST_CASE("zero targets") {
    std::mt19937_64 rng(5);
    Dataset data = testutil::random_dataset(7, 2, rng);
    data.y.setZero();
    const KernelSpec spec{KernelFamily::Matern52, hyper({0.8, 1.1}, 1.3, 0.2)};
    const auto m = GPModel::fit(spec, data);
    for (int t = 0; t < 20; ++t) CHECK(m.mean(testutil::uniform_matrix(2, 1, -3, 3, rng).col(0)) == 0.0);
    MatrixXd C = gram_matrix(spec, data.X);
    C.diagonal().array() += 0.2;
    const double expected = -0.5 * std::log(C.determinant()) - 0.5 * 7 * kLog2Pi;
    CHECK(m.log_marginal_likelihood() == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("matches the dense oracle on random problems") {
    std::mt19937_64 rng(21);
    for (int t = 0; t < 30; ++t) {
        const Dataset data = testutil::random_dataset(8, 2, rng);
        const KernelSpec spec{t % 2 ? KernelFamily::Matern52 : KernelFamily::SquaredExponential,
                              hyper({0.5 + t * 0.05, 1.2}, 1.5, 0.05)};
        const auto m = GPModel::fit(spec, data);
        for (int k = 0; k < 10; ++k) {
            const VectorXd x = testutil::uniform_matrix(2, 1, -3, 3, rng).col(0);
            const auto [mu, var] = oracles::direct_posterior(spec, data, x);
            CHECK(rel_err(m.mean(x), mu) < 1e-8);
            CHECK(std::abs(m.variance(x) - var) < 1e-8 * 1.5);
        }
        const Dataset six(data.X.topRows(6), data.y.head(6));
        const double direct = oracles::direct_mvn_loglik(six.y, oracles::reference_target_covariance(spec, six));
        CHECK(rel_err(log_marginal_likelihood(spec, six), direct) < 1e-8);
    }
}

TEST_CASE("near-noiseless interpolation shrinks the variance at training inputs") {
    std::mt19937_64 rng(2);
    const Dataset data = testutil::random_dataset(6, 1, rng);
    const auto m = GPModel::fit({KernelFamily::SquaredExponential, hyper({0.5}, 1.0, 1e-9)}, data);
    for (Index i = 0; i < data.size(); ++i) CHECK(m.variance(data.X.row(i).transpose()) <= 1e-6);
}

TEST_CASE("variance stays within [0, sf2]") {
    std::mt19937_64 rng(9);
    for (int t = 0; t < 20; ++t) {
        const Dataset data = testutil::random_dataset(15, 3, rng);
        const auto m = GPModel::fit({KernelFamily::SquaredExponential, hyper({0.3, 0.3, 0.3}, 2.0, 1e-6)}, data);
        for (int k = 0; k < 50; ++k) {
            const double v = m.variance(testutil::uniform_matrix(3, 1, -2, 2, rng).col(0));
            CHECK(v >= 0.0);
            CHECK(v <= 2.0);
        }
    }
}

TEST_CASE("adding a training point never increases the variance") {
    std::mt19937_64 rng(31);
    for (int t = 0; t < 50; ++t) {
        const Dataset full = testutil::random_dataset(10, 2, rng);
        const Dataset part(full.X.topRows(9), full.y.head(9));
        const KernelSpec spec{KernelFamily::SquaredExponential, hyper({0.6, 1.4}, 1.0, 0.01)};
        const auto a = GPModel::fit(spec, part);
        const auto b = GPModel::fit(spec, full);
        for (int k = 0; k < 40; ++k) {
            const VectorXd x = testutil::uniform_matrix(2, 1, -3, 3, rng).col(0);
            CHECK(b.variance(x) <= a.variance(x) + 1e-8);
        }
    }
}

TEST_CASE("LML is invariant to a joint permutation of the rows") {
    std::mt19937_64 rng(13);
    for (int t = 0; t < 20; ++t) {
        const Dataset data = testutil::random_dataset(12, 2, rng);
        std::vector<Index> perm(12);
        std::iota(perm.begin(), perm.end(), Index{0});
        std::shuffle(perm.begin(), perm.end(), rng);
        Dataset shuffled = data;
        for (Index i = 0; i < 12; ++i) {
            shuffled.X.row(i) = data.X.row(perm[static_cast<std::size_t>(i)]);
            shuffled.y(i) = data.y(perm[static_cast<std::size_t>(i)]);
        }
        const KernelSpec spec{KernelFamily::Matern52, hyper({0.9, 0.4}, 1.1, 0.3)};
        CHECK(log_marginal_likelihood(spec, shuffled) ==
              doctest::Approx(log_marginal_likelihood(spec, data)).epsilon(1e-10));
    }
}

TEST_CASE("LML finite differences are consistent across step sizes") {
    std::mt19937_64 rng(4);
    const Dataset data = testutil::random_dataset(10, 2, rng);
    const HyperVector h = hyper({0.7, 1.3}, 1.2, 0.2);
    const VectorXd z = h.to_log();
    const auto f = [&](const VectorXd& v) {
        return log_marginal_likelihood({KernelFamily::SquaredExponential, HyperVector::from_log(v)}, data);
    };
    for (Index i = 0; i < z.size(); ++i) {
        const auto diff = [&](double step) {
            VectorXd p = z, m = z;
            p(i) += step;
            m(i) -= step;
            return (f(p) - f(m)) / (2.0 * step);
        };
        const double d4 = diff(1e-4), d5 = diff(1e-5), d3 = diff(1e-3);
        CHECK(std::abs(d4 - d5) <= 1e-5 * std::max(1.0, std::abs(d4)));
        // Central differences are second order: the 1e-3 vs 1e-4 gap shrinks about 100x.
        const double richardson = d4 + (d4 - d3) / 99.0;
        CHECK(std::abs(richardson - d5) <= 1e-5 * std::max(1.0, std::abs(d5)));
    }
}

TEST_CASE("prior samples have the right moments") {
    const KernelSpec spec{KernelFamily::SquaredExponential, hyper({1.0}, 2.0, 0.1)};
    MatrixXd grid(3, 1);
    grid << 0.0, 0.5, 1.5;
    const MatrixXd K = gram_matrix(spec, grid);
    MatrixXd acc = MatrixXd::Zero(3, 3);
    const int draws = 10000;
    for (int s = 0; s < draws; ++s) {
        const VectorXd f = sample_prior_function(spec, grid, static_cast<std::uint64_t>(s));
        acc += f * f.transpose();
    }
    acc /= draws;
    for (Index i = 0; i < 3; ++i)
        for (Index j = 0; j < 3; ++j) CHECK(std::abs(acc(i, j) - K(i, j)) <= 0.05 * K(i, j));

    const VectorXd a = sample_prior_function(spec, grid, 42), b = sample_prior_function(spec, grid, 42);
    CHECK(a == b);
}

TEST_CASE("ML fit recovers the lengthscale") {
    int hits = 0;
    const int seeds = 10;
    const HyperBox box = HyperBox::uniform(1, 0.05, 20.0, 0.1, 10.0, 1e-3, 1.0);
    for (int s = 0; s < seeds; ++s) {
        const KernelSpec truth{KernelFamily::SquaredExponential, hyper({1.0}, 1.0, 0.01)};
        const Dataset data = testutil::gp_dataset(truth, 100, 5.0, 100 + s);
        MlOptions opt;
        opt.seed = s;
        opt.restarts = 5;
        const HyperVector fit = maximize_log_marginal_likelihood(data, KernelFamily::SquaredExponential, box, opt);
        CHECK(box.contains(fit));
        if (fit.lengthscales(0) > 0.5 && fit.lengthscales(0) < 2.0) ++hits;
    }
    CHECK(hits >= 8);
}

TEST_CASE("ML fit stays at a supplied optimum and respects degenerate boxes") {
    const KernelSpec truth{KernelFamily::SquaredExponential, hyper({0.8}, 1.0, 0.05)};
    const Dataset data = testutil::gp_dataset(truth, 40, 4.0, 7);
    const HyperBox box = HyperBox::uniform(1, 0.05, 20.0, 0.1, 10.0, 1e-3, 1.0);
    MlOptions opt;
    opt.restarts = 8;
    const HyperVector best = maximize_log_marginal_likelihood(data, KernelFamily::SquaredExponential, box, opt);
    MlOptions again;
    again.restarts = 1;
    again.initial = best;
    const HyperVector refit = maximize_log_marginal_likelihood(data, KernelFamily::SquaredExponential, box, again);
    CHECK((refit.to_log() - best.to_log()).cwiseAbs().maxCoeff() < 1e-3);
    const double lbest = log_marginal_likelihood({KernelFamily::SquaredExponential, best}, data);
    CHECK(log_marginal_likelihood({KernelFamily::SquaredExponential, refit}, data) >= lbest - 1e-9);

    const HyperBox point = HyperBox::uniform(1, 0.7, 0.7, 1.3, 1.3, 0.02, 0.02);
    const HyperVector fixed = maximize_log_marginal_likelihood(data, KernelFamily::SquaredExponential, point);
    CHECK(fixed.lengthscales(0) == 0.7);
    CHECK(fixed.signal_variance == 1.3);
    CHECK(fixed.noise_variance == 0.02);
}

TEST_CASE("malformed data") {
    CHECK_THROWS_AS(Dataset(MatrixXd(3, 1), VectorXd(2)).validate(), InputError);
    const KernelSpec spec{KernelFamily::SquaredExponential, hyper({1.0}, 1.0, 0.1)};
    CHECK_THROWS_AS((void)GPModel::fit(spec, Dataset(MatrixXd::Zero(3, 2), VectorXd::Zero(3))), InputError);
    const auto m = GPModel::fit(spec, Dataset(MatrixXd::Zero(2, 1), VectorXd::Zero(2)));
    CHECK_THROWS_AS((void)m.mean(VectorXd::Zero(2)), InputError);
}

}  // TEST_SUITE
