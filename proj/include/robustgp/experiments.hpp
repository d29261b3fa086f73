#pragma once

#include "robustgp/backstepping.hpp"
#include "robustgp/config.hpp"
#include "robustgp/robust_bounds.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace robustgp {

enum class Method { Vanilla, Robust, FullBayes };

[[nodiscard]] std::string to_string(Method method);
inline constexpr Method kAllMethods[] = {Method::Vanilla, Method::Robust, Method::FullBayes};

struct ResultRow {
    Method method = Method::Vanilla;
    Index train_size = 0;
    int repetition = 0;
    std::uint64_t seed = 0;
    double violation_rate = 0.0;
    /// Largest |y - mu| - beta^(1/2) sigma over the test points.
    double max_excess = 0.0;
    double wall_time = 0.0;
};

/// Fraction of test points with |y - mean| - beta_sqrt * sigma > 0.
/// Throws InputError on an empty test set or mismatched lengths.
[[nodiscard]] double violation_rate(const VectorXd& means, const VectorXd& sigmas, double beta_sqrt,
                                    const VectorXd& ytest);

/// Mixture of GP posteriors, one per hyperparameter sample.
class FullyBayesianGP {
public:
    /// Components whose fit fails are skipped (and logged). Throws
    /// NumericalError if none survive, InputError if `samples` is empty.
    static FullyBayesianGP build(const PosteriorSampleSet& samples, KernelFamily family, const Dataset& data);
    explicit FullyBayesianGP(std::vector<GPModel> components);

    /// Mixture mean and variance (law of total variance).
    [[nodiscard]] std::pair<double, double> predict(const Eigen::Ref<const VectorXd>& xstar) const;
    [[nodiscard]] std::size_t components() const noexcept { return components_.size(); }
    [[nodiscard]] std::size_t skipped() const noexcept { return skipped_; }

private:
    std::vector<GPModel> components_;
    std::size_t skipped_ = 0;
};

[[nodiscard]] std::pair<double, double> fully_bayesian_predict(const PosteriorSampleSet& samples,
                                                               KernelFamily family, const Dataset& data,
                                                               const Eigen::Ref<const VectorXd>& xstar);

/// Bounding pair together with where it came from.
struct BoundingPairRecord {
    std::string label;
    Index train_size = 0;
    int repetition = 0;
    HyperVector theta0;
    BoundingPair pair;
};

/// Per-repetition artifacts of one bound construction.
struct BoundArtifacts {
    HyperVector theta0;
    PosteriorSampleSet samples;
    BoundingPair pair;
};

/// ML fit, posterior sampling and bounding pair for one dataset under the configured prior.
[[nodiscard]] BoundArtifacts construct_bound(const Dataset& train, const ExperimentConfig& cfg, std::uint64_t seed);

/// Grid predictions of all three methods for the first repetition of the sample study.
struct PredictionTrace {
    Index train_size = 0;
    VectorXd grid;
    VectorXd truth;
    Dataset train;
    std::map<Method, std::pair<VectorXd, VectorXd>> lower_upper;
};

struct StudyResult {
    std::vector<ResultRow> rows;
    std::vector<BoundingPairRecord> pairs;
    std::vector<PredictionTrace> traces;
};

/// Function drawn from the prior GP on a 1-D grid; noisy subsets of sizes
/// train_sizes; all three bounds scored against the noise-free function.
[[nodiscard]] StudyResult run_sample_study(const ExperimentConfig& cfg);

/// Random train/test splits of a CSV dataset (or a synthetic GP dataset when
/// no path is configured), scored against the noisy test targets.
[[nodiscard]] StudyResult run_violation_benchmark(const ExperimentConfig& cfg);

/// Mean of `rows` violation rates per (method, train size).
[[nodiscard]] std::map<std::pair<Method, Index>, double> mean_violation_rates(const std::vector<ResultRow>& rows);

struct ControlRunRecord {
    Method method = Method::Vanilla;
    int run = 0;
    VectorXd x0;
    /// Max error norm over t > duration / 2; +inf after divergence.
    double post_transient_max_error = 0.0;
    bool diverged = false;
    double wall_time = 0.0;
    control::Trajectory trajectory;
};

struct ControlSummaryRow {
    Method method = Method::Vanilla;
    double time = 0.0;
    double median = 0.0;
    double p10 = 0.0;
    double p90 = 0.0;
};

struct ControlResult {
    std::vector<ControlRunRecord> runs;
    std::vector<ControlSummaryRow> summary;
    std::vector<BoundingPairRecord> pairs;
    std::vector<Dataset> training_data;
    std::vector<double> beta_bars;

    /// Median over runs of the post-transient max error for one method.
    [[nodiscard]] double median_post_transient(Method method) const;
};

/// Manipulator scenario: per-subsystem GPs from a short sinusoidal excitation,
/// then closed-loop runs from random initial states under robust, vanilla and
/// fully Bayesian gains.
[[nodiscard]] ControlResult run_control_experiment(const ExperimentConfig& cfg);

/// Empirical quantile with linear interpolation; q in [0,1].
[[nodiscard]] double quantile(std::vector<double> values, double q);

void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows);
void write_bounding_pairs_csv(std::ostream& out, const std::vector<BoundingPairRecord>& records);
void write_trace_csv(std::ostream& out, const PredictionTrace& trace);
void write_control_results_csv(std::ostream& out, const ControlResult& result);
void write_control_summary_csv(std::ostream& out, const ControlResult& result);

}  // namespace robustgp
