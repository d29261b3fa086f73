#pragma once

#include "robustgp/backstepping.hpp"
#include "robustgp/hyper_posterior.hpp"
#include "robustgp/robust_bounds.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace robustgp {

enum class ExperimentKind { SampleStudy, ViolationBenchmark, ControlRun };

[[nodiscard]] ExperimentKind parse_experiment_kind(std::string_view name);
[[nodiscard]] std::string to_string(ExperimentKind kind);

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

/// Uniform hyperprior bounds; the lengthscale interval is shared by all input dimensions.
struct PriorSpec {
    std::string preset;  // empty when given explicitly
    Interval lengthscale;
    Interval signal_variance;
    Interval noise_variance;

    [[nodiscard]] HyperBox box(Index dim) const;
    void validate() const;
};

/// Named boxes: bstn, ml, wine, srcs, control, sample_study.
[[nodiscard]] PriorSpec prior_preset(std::string_view name);

struct BetaSpec {
    BetaMode mode = BetaMode::Practical;
    double beta = 4.0;
    double beta_max_sqrt = std::sqrt(2.0);

    [[nodiscard]] BetaSetting setting() const;
    [[nodiscard]] double beta_sqrt() const { return std::sqrt(beta); }
};

struct SampleStudySpec {
    double domain_lo = -5.0;
    double domain_hi = 5.0;
    Index grid_points = 200;
    /// Observation noise; defaults to the drawn noise variance.
    std::optional<double> noise_std;
};

/// GP-generated regression data used when no dataset file is given.
struct SyntheticSpec {
    Index dim = 2;
    Index points = 600;
    double half_width = 3.0;
    double lengthscale = 1.0;
    double signal_variance = 1.0;
    double noise_variance = 0.1;
};

struct ControlSpec {
    Index training_points = 10;
    double noise_std = 0.01;
    int runs = 20;
    double x0_std = 0.5;
    double duration = 10.0;
    double dt = 1e-3;
    control::ControllerConfig controller;
    control::Excitation excitation;
    std::size_t full_bayes_components = 40;
    bool write_trajectories = true;
    long summary_stride = 10;
};

struct ExperimentConfig {
    ExperimentKind experiment = ExperimentKind::SampleStudy;
    std::string dataset_path;
    KernelFamily kernel = KernelFamily::SquaredExponential;
    PriorSpec prior;
    double delta = 0.05;
    BetaSpec beta;
    int repetitions = 100;
    std::vector<Index> train_sizes;
    Index test_size = 500;
    bool standardize_inputs = true;
    std::uint64_t seed = 0;
    SamplerConfig sampler;
    int ml_restarts = 10;
    std::size_t full_bayes_components = 200;
    SampleStudySpec sample_study;
    SyntheticSpec synthetic;
    ControlSpec control;

    /// Throws ConfigError on any inconsistency.
    void validate() const;
};

/// Defaults for one experiment family.
[[nodiscard]] ExperimentConfig default_config(ExperimentKind kind);

/// Overlays a JSON document on the defaults for `kind`. Unknown keys and a
/// mismatching "experiment" field are ConfigErrors.
[[nodiscard]] ExperimentConfig parse_config(std::string_view json_text, ExperimentKind kind);
[[nodiscard]] ExperimentConfig load_config(const std::string& path, ExperimentKind kind);

/// Fully resolved configuration as pretty-printed JSON.
[[nodiscard]] std::string config_to_json(const ExperimentConfig& cfg);

}  // namespace robustgp
