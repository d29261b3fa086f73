#include "helpers.hpp"

#include "robustgp/errors.hpp"
#include "robustgp/oracles.hpp"

#include <doctest.h>

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

using namespace robustgp;
using namespace robustgp::oracles;
using testutil::hyper;

TEST_SUITE("oracles") {

TEST_CASE("reference kernel agrees with the library kernel") {
    std::mt19937_64 rng(1);
    for (auto fam : {KernelFamily::SquaredExponential, KernelFamily::Matern52}) {
        for (int t = 0; t < 100; ++t) {
            const HyperVector h = hyper({0.3 + t * 0.02, 1.1}, 0.5 + 0.01 * t, 0.1);
            const MatrixXd P = testutil::uniform_matrix(2, 2, -2, 2, rng);
            const VectorXd a = P.row(0).transpose(), b = P.row(1).transpose();
            CHECK(reference_kernel(fam, h, a, b) == doctest::Approx(kernel_eval({fam, h}, a, b)).epsilon(1e-13));
        }
    }
}

TEST_CASE("direct posterior edge cases") {
    const KernelSpec spec{KernelFamily::SquaredExponential, hyper({1.0}, 2.5, 0.1)};
    const auto [m0, v0] = direct_posterior(spec, Dataset(MatrixXd(0, 1), VectorXd(0)), VectorXd::Zero(1));
    CHECK(m0 == 0.0);
    CHECK(v0 == doctest::Approx(2.5));

    MatrixXd X(3, 1);
    X << 0.5, 0.5, -1.0;
    VectorXd y(3);
    y << 1.0, 1.4, -0.3;
    const Dataset dup(X, y);
    const auto [ma, va] = direct_posterior(spec, dup, X.row(0).transpose());
    const auto [mb, vb] = direct_posterior(spec, dup, X.row(1).transpose());
    CHECK(std::isfinite(ma));
    CHECK(ma == mb);
    CHECK(va == vb);
    const auto model = GPModel::fit(spec, dup);
    CHECK(model.mean(X.row(0).transpose()) == doctest::Approx(ma).epsilon(1e-10));

    Dataset big(MatrixXd::Zero(51, 1), VectorXd::Zero(51));
    CHECK_THROWS_AS((void)direct_posterior(spec, big, VectorXd::Zero(1)), InputError);
}

TEST_CASE("direct MVN log likelihood") {
    const MatrixXd c = MatrixXd::Constant(1, 1, 2.0);
    CHECK(direct_mvn_loglik(VectorXd::Zero(1), c) ==
          doctest::Approx(-0.5 * std::log(2.0) - 0.5 * std::log(2.0 * std::numbers::pi)));
    MatrixXd cov(2, 2);
    cov << 2.0, 0.5, 0.5, 1.0;
    const double expected = -0.5 * std::log(cov.determinant()) - std::log(2.0 * std::numbers::pi);
    CHECK(direct_mvn_loglik(VectorXd::Zero(2), cov) == doctest::Approx(expected));
    CHECK_THROWS_AS((void)direct_mvn_loglik(VectorXd::Zero(2), -cov), NumericalError);
}

TEST_CASE("Schur complement checks") {
    std::mt19937_64 rng(2);
    const MatrixXd A = testutil::uniform_matrix(5, 5, -1, 1, rng);
    const MatrixXd K = A * A.transpose() + 0.1 * MatrixXd::Identity(5, 5);
    CHECK(schur_complement_last(K) - schur_complement_last(K) == 0.0);
    const double gap = schur_complement_last(K) - schur_complement_last(K + MatrixXd::Identity(5, 5));
    CHECK(gap <= 0.0);
    MatrixXd D = MatrixXd::Identity(2, 2) * 3.0;
    D(0, 1) = D(1, 0) = 1.0;
    CHECK(schur_complement_last(D) == doctest::Approx(3.0 - 1.0 / 3.0));
}

TEST_CASE("randomized checks pass and are deterministic") {
    const auto a = variance_dominance_check(50, KernelFamily::SquaredExponential, 1);
    const auto b = variance_dominance_check(50, KernelFamily::SquaredExponential, 1);
    CHECK(a.passed);
    CHECK(a.worst_violation == b.worst_violation);
    CHECK(a.seeds == b.seeds);
    CHECK(a.trials == 50);
    CHECK(variance_dominance_check(50, KernelFamily::Matern52, 2).passed);
    const auto soft = variance_dominance_check(20, KernelFamily::SquaredExponential, 3, true);
    CHECK(soft.soft);
    CHECK(mean_difference_check(50, 4).passed);
    CHECK(covariance_inequality_check(100, 5).passed);
    CHECK(posterior_equivalence_check(30, 6).passed);
    CHECK(lml_equivalence_check(30, 7).passed);
}

TEST_CASE("check report bookkeeping") {
    CheckReport r;
    r.name = "demo";
    r.tolerance = 1e-8;
    r.record(-1.0);
    r.record(-0.5);
    r.finalize();
    CHECK(r.trials == 2);
    CHECK(r.worst_violation == -0.5);
    CHECK(r.passed);
    r.record(1e-6);
    r.finalize();
    CHECK_FALSE(r.passed);
    std::ostringstream out;
    write_checks_csv(out, {r});
    CHECK(out.str().rfind("name,trials,worst_violation,tolerance,passed,soft,seeds\n", 0) == 0);
}

TEST_CASE("grid bounding pair") {
    const VectorXd g = VectorXd::LinSpaced(401, -4.0, 4.0);
    const VectorXd logd = (-0.5 * g.array().square()).matrix();
    const auto q = normalize_on_grid(g, logd);
    const auto [lo, hi] = grid_bounding_pair_1d(q, 0.0, 0.05);
    const double cell = g(1) - g(0);
    CHECK(std::abs(lo + hi) <= cell + 1e-12);
    CHECK(hi == doctest::Approx(1.96).epsilon(0.02));
    CHECK(q.mass(lo, hi) >= 0.95);
    const auto [flo, fhi] = grid_bounding_pair_1d(q, 1.0, 0.0);
    CHECK(flo == -4.0);
    CHECK(fhi == 4.0);
    // theta0 far in the tail drags the interval along.
    const auto [tlo, thi] = grid_bounding_pair_1d(q, 3.0, 0.05);
    CHECK(thi >= 3.0);
    CHECK(tlo <= -1.5);
    CHECK_THROWS_AS((void)grid_bounding_pair_1d(q, 5.0, 0.05), InputError);
}

TEST_CASE("KS statistic") {
    std::vector<double> u;
    for (int i = 0; i < 1000; ++i) u.push_back((i + 0.5) / 1000.0);
    const auto cdf = [](double x) { return std::clamp(x, 0.0, 1.0); };
    CHECK(ks_statistic(u, cdf) <= 0.0005 + 1e-12);
    std::vector<double> shifted;
    for (double v : u) shifted.push_back(v * 0.5);
    CHECK(ks_statistic(shifted, cdf) == doctest::Approx(0.5).epsilon(1e-2));
}

}  // TEST_SUITE
