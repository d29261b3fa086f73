#include "robustgp/config.hpp"
#include "robustgp/errors.hpp"

#include <doctest.h>

#include <cmath>

using namespace robustgp;

TEST_SUITE("config") {

TEST_CASE("defaults are valid") {
    for (auto kind : {ExperimentKind::SampleStudy, ExperimentKind::ViolationBenchmark, ExperimentKind::ControlRun}) {
        const auto cfg = default_config(kind);
        CHECK_NOTHROW(cfg.validate());
        CHECK(cfg.delta == 0.05);
        CHECK(cfg.beta.beta_sqrt() == doctest::Approx(2.0));
    }
    CHECK(default_config(ExperimentKind::ViolationBenchmark).prior.preset == "bstn");
    CHECK(default_config(ExperimentKind::ControlRun).control.training_points == 10);
    CHECK(default_config(ExperimentKind::ControlRun).control.controller.xi_des == 1.0);
}

TEST_CASE("prior presets") {
    const auto b = prior_preset("bstn");
    CHECK(b.lengthscale.lo == 0.1);
    CHECK(b.lengthscale.hi == 100.0);
    CHECK(b.signal_variance.hi == 50.0);
    CHECK(b.noise_variance.lo == 0.1);
    const auto w = prior_preset("wine");
    CHECK(w.noise_variance.hi == 1.0);
    const auto c = prior_preset("control");
    CHECK(c.lengthscale.lo == 1e-15);
    CHECK(c.lengthscale.hi == 1e-2);
    CHECK(prior_preset("ml").lengthscale.hi == 5e12);
    CHECK(prior_preset("srcs").noise_variance.hi == 80.0);
    CHECK_THROWS_AS((void)prior_preset("nope"), ConfigError);
    const auto box = b.box(3);
    CHECK(box.lower.dim() == 3);
    CHECK(box.upper.lengthscales(2) == 100.0);
}

TEST_CASE("overrides") {
    const auto cfg = parse_config(R"({
        "experiment": "benchmark",
        "kernel": "matern52",
        "prior": {"preset": "wine", "noise_variance": [0.01, 0.5]},
        "delta": 0.1,
        "beta": {"mode": "theoretical", "beta_max_sqrt": 1.5},
        "repetitions": 7,
        "train_sizes": [20, 40],
        "seed": 123,
        "sampler": {"chains": 2, "steps": 2000, "burn_in": 400}
    })",
                                  ExperimentKind::ViolationBenchmark);
    CHECK(cfg.kernel == KernelFamily::Matern52);
    CHECK(cfg.prior.noise_variance.hi == 0.5);
    CHECK(cfg.prior.lengthscale.hi == 10.0);
    CHECK(cfg.delta == 0.1);
    CHECK(cfg.beta.mode == BetaMode::Theoretical);
    CHECK(cfg.beta.beta_max_sqrt == 1.5);
    CHECK(cfg.repetitions == 7);
    CHECK(cfg.train_sizes.size() == 2);
    CHECK(cfg.seed == 123);
    CHECK(cfg.sampler.chains == 2);

    const auto s = parse_config(R"({"beta": {"sqrt": 3}, "prior": "srcs"})", ExperimentKind::SampleStudy);
    CHECK(s.beta.beta == doctest::Approx(9.0));
    CHECK(s.prior.preset == "srcs");

    const auto c = parse_config(R"({"control": {"runs": 3, "xi_des": 0.5, "excitation": {"amplitude": 2}}})",
                                ExperimentKind::ControlRun);
    CHECK(c.control.runs == 3);
    CHECK(c.control.controller.xi_des == 0.5);
    CHECK(c.control.excitation.amplitude == 2.0);
}

TEST_CASE("round trip through JSON") {
    auto cfg = default_config(ExperimentKind::ControlRun);
    cfg.seed = 77;
    cfg.control.runs = 4;
    const auto back = parse_config(config_to_json(cfg), ExperimentKind::ControlRun);
    CHECK(back.seed == 77);
    CHECK(back.control.runs == 4);
    CHECK(config_to_json(back) == config_to_json(cfg));
}

TEST_CASE("configuration errors") {
    const auto bad = [](const char* text, ExperimentKind kind = ExperimentKind::SampleStudy) {
        CHECK_THROWS_AS((void)parse_config(text, kind).validate(), ConfigError);
    };
    bad("{not json");
    bad(R"({"unknown_key": 1})");
    bad(R"({"sampler": {"chainz": 2}})");
    bad(R"({"experiment": "control"})");
    bad(R"({"delta": 1.5})");
    bad(R"({"delta": 0})");
    bad(R"({"repetitions": 0})");
    bad(R"({"kernel": "periodic"})");
    bad(R"({"beta": {"mode": "sometimes"}})");
    bad(R"({"prior": {"lengthscale": [5, 1]}})");
    bad(R"({"prior": {"lengthscale": [1]}})");
    bad(R"({"delta": "small"})");
    // 2 x 500 kept samples cannot certify delta = 0.01.
    bad(R"({"delta": 0.01, "sampler": {"chains": 2, "steps": 700, "burn_in": 200, "thinning": 1}})");
    bad(R"({"train_sizes": []})");
    CHECK_THROWS_AS((void)load_config("/nonexistent/config.json", ExperimentKind::SampleStudy), ConfigError);
}

TEST_CASE("experiment names") {
    CHECK(parse_experiment_kind("sample_study") == ExperimentKind::SampleStudy);
    CHECK(parse_experiment_kind("benchmark") == ExperimentKind::ViolationBenchmark);
    CHECK(parse_experiment_kind("control") == ExperimentKind::ControlRun);
    CHECK_THROWS_AS((void)parse_experiment_kind("other"), ConfigError);
}

}  // TEST_SUITE
