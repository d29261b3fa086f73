#pragma once

#include "robustgp/gp_core.hpp"
#include "robustgp/errors.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

namespace robustgp::control {

/// Scalar function of the full state; subsystem i reads only x_1..x_i.
using StateFunction = std::function<double(const VectorXd&)>;

/// dx_i/dt = f_i(x_1..x_i) + g_i(x_1..x_i) x_{i+1}, with x_{m+1} = u.
struct StrictFeedbackSystem {
    std::vector<StateFunction> drift;  // ground truth f_i, simulator only
    std::vector<StateFunction> gain;   // known g_i

    [[nodiscard]] Index order() const noexcept { return static_cast<Index>(drift.size()); }
    [[nodiscard]] VectorXd dynamics(const VectorXd& x, double u) const;
};

struct ManipulatorParams {
    double D = 1.0;
    double B = 1.0;
    double G = 10.0;
    double M = 0.05;
    double H = 0.5;
    double Z = 10.0;
};

/// One-link manipulator with motor dynamics, state (angle, rate, torque):
///   x1' = x2
///   x2' = (-B x2 - G sin x1) / D + x3 / D
///   x3' = -M - H x3 - Z x2 + u
[[nodiscard]] StrictFeedbackSystem manipulator_system(const ManipulatorParams& params = {});

/// Learned model of one drift term: posterior mean and the variance used for gains.
struct SubsystemModel {
    StateFunction mean;
    StateFunction variance;
    double beta_bar = 4.0;
};

/// Wraps GP models over the first `order` states (order = model input dimension).
[[nodiscard]] SubsystemModel subsystem_from_gp(GPModel mean_model, GPModel variance_model, double beta_bar);

/// Desired trajectory for x_1 and its time derivative.
struct Reference {
    std::function<double(double)> value;
    std::function<double(double)> rate;

    [[nodiscard]] static Reference zero();
    [[nodiscard]] static Reference sinusoid(double amplitude, double angular_frequency);
};

struct ControllerConfig {
    double xi_des = 1.0;
    double filter_bandwidth = 100.0;
    double gain_floor = 1e-3;

    void validate() const;
};

/// Command-filtered backstepping with the state-dependent gain
///   C(x) = sqrt(sum_j beta_bar_j var_j(x)) / xi_des
/// applied to every subsystem. Virtual commands are
///   c_2     = (-mu_1 + r_1' - C e_1) / g_1
///   c_{i+1} = (-mu_i + r_i' - C e_i - g_{i-1} e_{i-1}) / g_i
///   u       = (-mu_m + r_m' - C e_m - g_{m-1} e_{m-1}) / g_m
/// where r_i (i >= 2) is a first-order low-pass of c_i and r_i' = w (c_i - r_i).
/// With this choice the error dynamics are e' = df - (C I + S) e with S skew.
class BacksteppingController {
public:
    BacksteppingController(std::vector<SubsystemModel> models, ControllerConfig cfg,
                           Reference reference = Reference::zero());

    struct Output {
        double u = 0.0;
        double gain = 0.0;
        VectorXd commands;  // c_2..c_m stored at index 1..m-1; index 0 is r_1
        VectorXd errors;    // e_1..e_m
    };

    /// Raw gain formula (no floor).
    [[nodiscard]] double adaptive_gain(const VectorXd& x) const;

    /// Control law at the current filter state. Throws NumericalError if |g_i| < 1e-9.
    [[nodiscard]] Output evaluate(const StrictFeedbackSystem& system, const VectorXd& x, double t) const;

    /// Initializes each filter at its command so the filtered rates start at zero.
    void reset(const StrictFeedbackSystem& system, const VectorXd& x0, double t0);
    /// Exact first-order filter update over dt with commands held.
    void advance(const Output& out, double dt);

    [[nodiscard]] const VectorXd& filter_states() const noexcept { return filters_; }
    void set_filter_states(VectorXd filters) { filters_ = std::move(filters); }
    [[nodiscard]] const ControllerConfig& config() const noexcept { return cfg_; }
    [[nodiscard]] Index order() const noexcept { return static_cast<Index>(models_.size()); }

private:
    Output run(const StrictFeedbackSystem& system, const VectorXd& x, double t, bool initialize);

    std::vector<SubsystemModel> models_;
    ControllerConfig cfg_;
    Reference reference_;
    VectorXd filters_;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<VectorXd> states;
    std::vector<double> inputs;
    std::vector<double> error_norms;

    [[nodiscard]] std::size_t size() const noexcept { return times.size(); }
    /// Columns: time, x1..xm, u, error_norm.
    void write_csv(std::ostream& out) const;
};

/// Thrown when the state norm exceeds 1e6; carries the trajectory up to that point.
class DivergenceError : public NumericalError {
public:
    DivergenceError(const std::string& what, Trajectory partial)
        : NumericalError(what), partial_(std::move(partial)) {}
    [[nodiscard]] const Trajectory& partial() const noexcept { return partial_; }

private:
    Trajectory partial_;
};

/// Closed loop: RK4 on the plant with u held constant over each step.
[[nodiscard]] Trajectory simulate(const StrictFeedbackSystem& system, BacksteppingController& controller,
                                  const VectorXd& x0, double duration, double dt);

/// Open loop under a time-varying input u(t); error_norms hold ||x||.
[[nodiscard]] Trajectory simulate_open_loop(const StrictFeedbackSystem& system,
                                            const std::function<double(double)>& input, const VectorXd& x0,
                                            double duration, double dt);

struct Excitation {
    double amplitude = 1.0;
    double frequency = 0.5;  // Hz: u(t) = amplitude * sin(2 pi frequency t)
    double horizon = 10.0;
    double dt = 1e-3;
};

/// Simulates the open-loop system from rest under a sinusoid, takes N states
/// at times horizon * (k + 1/2) / N, and records y = f_i(x) + noise for each
/// subsystem i (inputs are the first i states).
[[nodiscard]] std::vector<Dataset> collect_training_data(const StrictFeedbackSystem& system,
                                                         const Excitation& excitation, Index n_points,
                                                         double noise_std, std::uint64_t seed);

}  // namespace robustgp::control
