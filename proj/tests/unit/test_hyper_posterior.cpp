#include "helpers.hpp"

#include "robustgp/errors.hpp"
#include "robustgp/hyper_posterior.hpp"
#include "robustgp/oracles.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

using namespace robustgp;
using testutil::hyper;

namespace {

const KernelFamily kSE = KernelFamily::SquaredExponential;

Dataset slice_dataset(Index n, std::uint64_t seed) {
    return testutil::gp_dataset({kSE, hyper({1.0}, 1.0, 0.05)}, n, 4.0, seed);
}

VectorXd linspace(double a, double b, Index n) { return VectorXd::LinSpaced(n, a, b); }

}  // namespace

TEST_SUITE("hyper_posterior") {

TEST_CASE("uniform prior support and flat-prior differences") {
    std::mt19937_64 rng(1);
    const Dataset data = testutil::random_dataset(8, 2, rng);
    const HyperPrior prior = UniformBoxPrior{HyperBox::uniform(2, 0.1, 10, 0.1, 10, 0.01, 1)};
    CHECK(log_unnormalized_posterior(data, kSE, prior, hyper({20.0, 1.0}, 1.0, 0.1)) ==
          -std::numeric_limits<double>::infinity());
    const HyperVector a = hyper({0.5, 2.0}, 1.0, 0.1), b = hyper({1.5, 0.7}, 3.0, 0.5);
    const double dpost =
        log_unnormalized_posterior(data, kSE, prior, a) - log_unnormalized_posterior(data, kSE, prior, b);
    const double dlml = log_marginal_likelihood({kSE, a}, data) - log_marginal_likelihood({kSE, b}, data);
    CHECK(dpost == doctest::Approx(dlml).epsilon(1e-12));
}

TEST_CASE("Gaussian log prior at its mean adds nothing") {
    std::mt19937_64 rng(2);
    const Dataset data = testutil::random_dataset(6, 1, rng);
    const HyperVector mean = hyper({0.8}, 1.2, 0.1);
    const GaussianLogPrior g{mean.to_log(), VectorXd::Constant(3, 2.0)};
    CHECK(log_unnormalized_posterior(data, kSE, g, mean) ==
          doctest::Approx(log_marginal_likelihood({kSE, mean}, data)).epsilon(1e-14));
    CHECK_THROWS_AS((GaussianLogPrior{VectorXd::Zero(3), VectorXd::Zero(3)}.validate()), InputError);
}

TEST_CASE("sampler is deterministic and respects the box") {
    const Dataset data = slice_dataset(10, 3);
    const HyperBox box = HyperBox::uniform(1, 0.1, 5, 0.1, 5, 0.001, 1);
    SamplerConfig cfg;
    cfg.chains = 2;
    cfg.steps = 1200;
    cfg.burn_in = 200;
    cfg.seed = 99;
    const auto a = sample_posterior(data, kSE, UniformBoxPrior{box}, cfg);
    const auto b = sample_posterior(data, kSE, UniformBoxPrior{box}, cfg);
    REQUIRE(a.size() == 1000);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.samples[i].packed() == b.samples[i].packed());
    CHECK(a.acceptance_rate >= 0.0);
    CHECK(a.acceptance_rate <= 1.0);
    for (const auto& s : a.samples) CHECK(box.contains(s));
}

TEST_CASE("sampler recovers a Gaussian target") {
    const VectorXd mean = (VectorXd(3) << 0.2, -0.5, 1.0).finished();
    const VectorXd prec = (VectorXd(3) << 1.0, 4.0, 0.25).finished();
    SamplerConfig cfg;
    cfg.chains = 4;
    cfg.steps = 6000;
    cfg.burn_in = 1000;
    cfg.thinning = 2;
    cfg.seed = 5;
    const auto set = sample_posterior(Dataset(MatrixXd(0, 1), VectorXd(0)), kSE, GaussianLogPrior{mean, prec}, cfg);
    REQUIRE(set.size() == 10000);
    VectorXd m = VectorXd::Zero(3);
    for (const auto& s : set.samples) m += s.to_log();
    m /= static_cast<double>(set.size());
    VectorXd var = VectorXd::Zero(3);
    for (const auto& s : set.samples) var += (s.to_log() - m).cwiseAbs2();
    var /= static_cast<double>(set.size() - 1);
    for (Index i = 0; i < 3; ++i) {
        CHECK(std::abs(m(i) - mean(i)) < 0.1 / std::sqrt(prec(i)));
        CHECK(std::abs(var(i) * prec(i) - 1.0) < 0.15);
    }
}

TEST_CASE("Laplace approximation") {
    const VectorXd mean = (VectorXd(3) << 0.0, 0.3, -1.0).finished();
    const VectorXd prec = (VectorXd(3) << 2.0, 0.5, 8.0).finished();
    const auto lap = laplace_approximation(Dataset(MatrixXd(0, 1), VectorXd(0)), kSE, GaussianLogPrior{mean, prec},
                                           HyperVector::from_log(mean));
    for (Index i = 0; i < 3; ++i) {
        CHECK(lap.covariance(i, i) * prec(i) == doctest::Approx(1.0).epsilon(1e-4));
        CHECK(lap.mean(i) == doctest::Approx(mean(i)));
    }
    MatrixXd h = -MatrixXd::Identity(2, 2);
    h(1, 1) = 0.5;
    CHECK_THROWS_AS((void)laplace_from_hessian(VectorXd::Zero(2), h), NumericalError);
}

TEST_CASE("Laplace slice interval agrees with quadrature") {
    const Dataset data = slice_dataset(150, 8);
    const HyperBox box = HyperBox::uniform(1, 0.05, 10, 0.05, 10, 1e-3, 1);
    const HyperPrior prior = UniformBoxPrior{box};
    MlOptions opt;
    opt.restarts = 5;
    const HyperVector theta0 = maximize_log_marginal_likelihood(data, kSE, box, opt);
    const auto lap = laplace_approximation(data, kSE, prior, theta0);
    // Conditional of the lengthscale given the others: precision entry of the inverse covariance.
    const double cond_sd = 1.0 / std::sqrt(lap.covariance.inverse()(0, 0));
    const double lo_l = std::exp(lap.mean(0) - 1.959964 * cond_sd), hi_l = std::exp(lap.mean(0) + 1.959964 * cond_sd);
    const double l0 = theta0.lengthscales(0);
    const auto q = quadrature_posterior_1d(data, kSE, prior, theta0, 0, linspace(0.2 * l0, 3.0 * l0, 1500));
    double lo_q = 0.0, hi_q = 0.0;
    for (Index i = 0; i < q.grid.size(); ++i) {
        if (lo_q == 0.0 && q.cdf(q.grid(i)) >= 0.025) lo_q = q.grid(i);
        if (hi_q == 0.0 && q.cdf(q.grid(i)) >= 0.975) hi_q = q.grid(i);
    }
    const double wq = hi_q - lo_q;
    CHECK(std::abs(lo_l - lo_q) <= 0.2 * wq);
    CHECK(std::abs(hi_l - hi_q) <= 0.2 * wq);
}

TEST_CASE("empirical Bayes precision rule") {
    MatrixXd h = MatrixXd::Zero(3, 3);
    h.diagonal() << 2.0, -1.0, -3.0;
    CHECK(empirical_bayes_precision(h) == doctest::Approx(20.0));
    h.diagonal() << -1.0, -2.0, -5.0;
    CHECK(empirical_bayes_precision(h) == doctest::Approx(1e-6));

    const Dataset data = slice_dataset(5, 4);
    const HyperVector theta0 = hyper({3.0}, 1.0, 0.5);
    const auto prior = empirical_bayes_prior(data, kSE, theta0);
    const auto f = [&](const VectorXd& z) {
        return log_unnormalized_posterior(data, kSE, prior, HyperVector::from_log(z));
    };
    const MatrixXd H = finite_difference_hessian(f, theta0.to_log());
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(0.5 * (H + H.transpose()));
    CHECK(eig.eigenvalues().maxCoeff() < 0.0);
}

TEST_CASE("posterior mass in a box") {
    const Dataset data = slice_dataset(10, 3);
    const HyperBox box = HyperBox::uniform(1, 0.1, 5, 0.1, 5, 0.001, 1);
    SamplerConfig cfg;
    cfg.chains = 2;
    cfg.steps = 700;
    cfg.burn_in = 200;
    const auto set = sample_posterior(data, kSE, UniformBoxPrior{box}, cfg);
    CHECK(posterior_mass_in_box(set, box.lower, box.upper) == 1.0);
    const HyperVector p = hyper({1.0}, 1.0, 0.1);
    CHECK(posterior_mass_in_box(set, p, p) == 0.0);
    CHECK_THROWS_AS((void)posterior_mass_in_box(PosteriorSampleSet{}, p, p), InputError);
}

TEST_CASE("quadrature normalization") {
    const VectorXd g = linspace(1.0, 3.0, 201);
    const auto flat = normalize_on_grid(g, VectorXd::Zero(201));
    CHECK((flat.density.array() - 0.5).abs().maxCoeff() < 1e-12);
    CHECK(flat.mass(1.0, 3.0) == doctest::Approx(1.0));
    CHECK(flat.cdf(2.0) == doctest::Approx(0.5));

    const auto logd = [](const VectorXd& x) { return (-0.5 * (x.array() - 2.0).square() / 0.04).matrix().eval(); };
    const VectorXd g2 = linspace(1.0, 3.0, 401);
    const auto coarse = normalize_on_grid(g, logd(g));
    const auto fine = normalize_on_grid(g2, logd(g2));
    for (double a : {1.5, 1.9, 2.05})
        for (double w : {0.1, 0.3, 0.6}) CHECK(std::abs(coarse.mass(a, a + w) - fine.mass(a, a + w)) < 1e-3);
}

TEST_CASE("quadrature mode sits at the likelihood maximizer") {
    const Dataset data = slice_dataset(5, 12);
    const HyperVector theta0 = hyper({1.0}, 1.0, 0.05);
    const HyperPrior prior = UniformBoxPrior{HyperBox::uniform(1, 0.05, 10, 0.1, 10, 1e-3, 1)};
    const VectorXd grid = linspace(0.1, 6.0, 600);
    const auto q = quadrature_posterior_1d(data, kSE, prior, theta0, 0, grid);
    Index arg_q = 0, arg_l = 0;
    q.density.maxCoeff(&arg_q);
    double best = -std::numeric_limits<double>::infinity();
    for (Index i = 0; i < grid.size(); ++i) {
        HyperVector h = theta0;
        h.lengthscales(0) = grid(i);
        const double l = log_marginal_likelihood({kSE, h}, data);
        if (l > best) best = l, arg_l = i;
    }
    CHECK(std::abs(arg_q - arg_l) <= 1);
}

TEST_CASE("sampled slice matches quadrature") {
    const Dataset data = slice_dataset(20, 6);
    const HyperBox box = HyperBox::uniform(1, 0.05, 10, 0.1, 10, 1e-3, 1);
    const HyperVector theta0 = hyper({1.0}, 1.0, 0.05);
    SamplerConfig cfg;
    cfg.chains = 4;
    cfg.steps = 6000;
    cfg.burn_in = 1000;
    cfg.thinning = 2;
    cfg.seed = 8;
    cfg.free_coordinates = {0};
    cfg.anchor = theta0;
    const auto set = sample_posterior(data, kSE, UniformBoxPrior{box}, cfg);
    std::vector<double> ls;
    for (const auto& s : set.samples) {
        ls.push_back(s.lengthscales(0));
        CHECK(s.signal_variance == theta0.signal_variance);
    }
    const auto q = quadrature_posterior_1d(data, kSE, UniformBoxPrior{box}, theta0, 0, linspace(0.05, 10, 8000));
    CHECK(oracles::ks_statistic(ls, [&](double x) { return q.cdf(x); }) < 0.05);

    const double a = 0.8, b = 1.3;
    HyperVector lo = theta0, hi = theta0;
    lo.lengthscales(0) = a;
    hi.lengthscales(0) = b;
    CHECK(std::abs(posterior_mass_in_box(set, lo, hi) - q.mass(a, b)) < 0.02);
}

TEST_CASE("relabeling input columns relabels the lengthscale marginals") {
    const Dataset data = testutil::gp_dataset({kSE, hyper({0.7, 2.5}, 1.0, 0.05)}, 25, 3.0, 77);
    Dataset swapped = data;
    swapped.X.col(0) = data.X.col(1);
    swapped.X.col(1) = data.X.col(0);
    const HyperBox box = HyperBox::uniform(2, 0.1, 10, 0.1, 10, 1e-3, 1);
    SamplerConfig cfg;
    cfg.chains = 4;
    cfg.steps = 10000;
    cfg.burn_in = 1000;
    cfg.thinning = 3;
    cfg.seed = 1;
    const auto a = sample_posterior(data, kSE, UniformBoxPrior{box}, cfg);
    const auto b = sample_posterior(swapped, kSE, UniformBoxPrior{box}, cfg);
    for (Index j = 0; j < 2; ++j) {
        std::vector<double> xa, xb;
        for (const auto& s : a.samples) xa.push_back(s.lengthscales(j));
        for (const auto& s : b.samples) xb.push_back(s.lengthscales(1 - j));
        std::sort(xb.begin(), xb.end());
        const auto ecdf = [&](double x) {
            return static_cast<double>(std::upper_bound(xb.begin(), xb.end(), x) - xb.begin()) /
                   static_cast<double>(xb.size());
        };
        CHECK(oracles::ks_statistic(xa, ecdf) < 0.1);
    }
}

TEST_CASE("sample set helpers") {
    PosteriorSampleSet set;
    for (int i = 0; i < 10; ++i) {
        set.samples.push_back(hyper({1.0 + i}, 1.0, 0.1));
        set.log_posts.push_back(-i);
    }
    CHECK(set.alternate(0).size() == 5);
    CHECK(set.alternate(1).samples.front().lengthscales(0) == 2.0);
    CHECK(set.strided(3).size() <= 3);
    CHECK(set.strided(100).size() == 10);
    std::ostringstream out;
    set.write_csv(out);
    const std::string text = out.str();
    CHECK(std::count(text.begin(), text.end(), '\n') == 11);
}

TEST_CASE("sampler configuration errors") {
    SamplerConfig cfg;
    cfg.burn_in = cfg.steps;
    CHECK_THROWS_AS(cfg.validate(), InputError);
    SamplerConfig pinned;
    pinned.free_coordinates = {0};
    CHECK_THROWS_AS(pinned.validate(), InputError);
}

}  // TEST_SUITE
