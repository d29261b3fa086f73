#include "robustgp/backstepping.hpp"

#include "robustgp/ode.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <random>

namespace robustgp::control {

VectorXd StrictFeedbackSystem::dynamics(const VectorXd& x, double u) const {
    const Index m = order();
    VectorXd dx(m);
    for (Index i = 0; i < m; ++i) {
        const double next = i + 1 < m ? x(i + 1) : u;
        dx(i) = drift[static_cast<std::size_t>(i)](x) + gain[static_cast<std::size_t>(i)](x) * next;
    }
    return dx;
}

StrictFeedbackSystem manipulator_system(const ManipulatorParams& p) {
    StrictFeedbackSystem sys;
    sys.drift = {
        [](const VectorXd&) { return 0.0; },
        [p](const VectorXd& x) { return (-p.B * x(1) - p.G * std::sin(x(0))) / p.D; },
        [p](const VectorXd& x) { return -p.M - p.H * x(2) - p.Z * x(1); },
    };
    sys.gain = {
        [](const VectorXd&) { return 1.0; },
        [p](const VectorXd&) { return 1.0 / p.D; },
        [](const VectorXd&) { return 1.0; },
    };
    return sys;
}

SubsystemModel subsystem_from_gp(GPModel mean_model, GPModel variance_model, double beta_bar) {
    const Index order = mean_model.input_dim();
    if (variance_model.input_dim() != order) throw InputError("mean and variance models differ in input dimension");
    SubsystemModel model;
    model.mean = [gp = std::move(mean_model), order](const VectorXd& x) { return gp.mean(x.head(order)); };
    model.variance = [gp = std::move(variance_model), order](const VectorXd& x) {
        return gp.variance(x.head(order));
    };
    model.beta_bar = beta_bar;
    return model;
}

Reference Reference::zero() {
    return Reference{[](double) { return 0.0; }, [](double) { return 0.0; }};
}

Reference Reference::sinusoid(double amplitude, double angular_frequency) {
    return Reference{[=](double t) { return amplitude * std::sin(angular_frequency * t); },
                     [=](double t) { return amplitude * angular_frequency * std::cos(angular_frequency * t); }};
}

void ControllerConfig::validate() const {
    if (!(xi_des > 0.0)) throw InputError("desired error bound must be positive");
    if (!(filter_bandwidth > 0.0)) throw InputError("command filter bandwidth must be positive");
    if (gain_floor < 0.0) throw InputError("gain floor must be non-negative");
}

BacksteppingController::BacksteppingController(std::vector<SubsystemModel> models, ControllerConfig cfg,
                                               Reference reference)
    : models_(std::move(models)), cfg_(cfg), reference_(std::move(reference)) {
    cfg_.validate();
    if (models_.empty()) throw InputError("controller needs at least one subsystem model");
    filters_ = VectorXd::Zero(static_cast<Index>(models_.size()));
}

double BacksteppingController::adaptive_gain(const VectorXd& x) const {
    double acc = 0.0;
    for (const auto& m : models_) acc += m.beta_bar * m.variance(x);
    return std::sqrt(std::max(acc, 0.0)) / cfg_.xi_des;
}

BacksteppingController::Output BacksteppingController::evaluate(const StrictFeedbackSystem& system,
                                                                const VectorXd& x, double t) const {
    return const_cast<BacksteppingController*>(this)->run(system, x, t, false);
}

void BacksteppingController::reset(const StrictFeedbackSystem& system, const VectorXd& x0, double t0) {
    run(system, x0, t0, true);
}

BacksteppingController::Output BacksteppingController::run(const StrictFeedbackSystem& system, const VectorXd& x,
                                                           double t, bool initialize) {
    const Index m = order();
    if (system.order() != m || x.size() != m) throw InputError("controller, system and state orders differ");

    Output out;
    out.gain = std::max(adaptive_gain(x), cfg_.gain_floor);
    out.commands = VectorXd::Zero(m);
    out.errors = VectorXd::Zero(m);
    out.commands(0) = reference_.value(t);

    const auto g = [&](Index i) {
        const double v = system.gain[static_cast<std::size_t>(i)](x);
        if (std::abs(v) < 1e-9) {
            throw NumericalError("input gain g_" + std::to_string(i + 1) + " is singular at the current state");
        }
        return v;
    };

    double ref = reference_.value(t);
    double ref_rate = reference_.rate(t);
    double coupling = 0.0;  // g_{i-1} e_{i-1}
    double u = 0.0;
    for (Index i = 0; i < m; ++i) {
        const double e = x(i) - ref;
        out.errors(i) = e;
        const double gi = g(i);
        const double cmd = (-models_[static_cast<std::size_t>(i)].mean(x) + ref_rate - out.gain * e - coupling) / gi;
        coupling = gi * e;
        if (i + 1 == m) {
            u = cmd;
            break;
        }
        out.commands(i + 1) = cmd;
        if (initialize) filters_(i + 1) = cmd;
        ref = filters_(i + 1);
        ref_rate = cfg_.filter_bandwidth * (cmd - ref);
    }
    out.u = u;
    return out;
}

void BacksteppingController::advance(const Output& out, double dt) {
    const double blend = 1.0 - std::exp(-cfg_.filter_bandwidth * dt);
    for (Index i = 1; i < order(); ++i) filters_(i) += blend * (out.commands(i) - filters_(i));
}

void Trajectory::write_csv(std::ostream& out) const {
    const Index m = states.empty() ? 0 : states.front().size();
    out << "time";
    for (Index i = 0; i < m; ++i) out << ",x" << (i + 1);
    out << ",u,error_norm\n";
    out.precision(12);
    for (std::size_t k = 0; k < times.size(); ++k) {
        out << times[k];
        for (Index i = 0; i < m; ++i) out << ',' << states[k](i);
        out << ',' << inputs[k] << ',' << error_norms[k] << '\n';
    }
}

namespace {

constexpr double kDivergence = 1e6;

long step_count(double duration, double dt) {
    if (!(dt > 0.0)) throw InputError("time step must be positive");
    if (!(duration >= 0.0)) throw InputError("duration must be non-negative");
    return std::lround(duration / dt);
}

}  // namespace

Trajectory simulate(const StrictFeedbackSystem& system, BacksteppingController& controller, const VectorXd& x0,
                    double duration, double dt) {
    const long steps = step_count(duration, dt);
    Trajectory traj;
    traj.times.reserve(static_cast<std::size_t>(steps + 1));
    controller.reset(system, x0, 0.0);

    VectorXd x = x0;
    for (long s = 0; s <= steps; ++s) {
        const double t = static_cast<double>(s) * dt;
        const auto out = controller.evaluate(system, x, t);
        traj.times.push_back(t);
        traj.states.push_back(x);
        traj.inputs.push_back(out.u);
        traj.error_norms.push_back(out.errors.norm());
        if (s == steps) break;

        const double u = out.u;
        x = rk4_step([&](double, const VectorXd& state) { return system.dynamics(state, u); }, t, x, dt);
        controller.advance(out, dt);
        if (!x.allFinite() || x.norm() > kDivergence) {
            throw DivergenceError("closed-loop state diverged at t = " + std::to_string(t + dt), std::move(traj));
        }
    }
    return traj;
}

Trajectory simulate_open_loop(const StrictFeedbackSystem& system, const std::function<double(double)>& input,
                              const VectorXd& x0, double duration, double dt) {
    const long steps = step_count(duration, dt);
    Trajectory traj;
    VectorXd x = x0;
    for (long s = 0; s <= steps; ++s) {
        const double t = static_cast<double>(s) * dt;
        traj.times.push_back(t);
        traj.states.push_back(x);
        traj.inputs.push_back(input(t));
        traj.error_norms.push_back(x.norm());
        if (s == steps) break;
        x = rk4_step([&](double tau, const VectorXd& state) { return system.dynamics(state, input(tau)); }, t, x, dt);
        if (!x.allFinite() || x.norm() > kDivergence) {
            throw DivergenceError("open-loop state diverged at t = " + std::to_string(t + dt), std::move(traj));
        }
    }
    return traj;
}

std::vector<Dataset> collect_training_data(const StrictFeedbackSystem& system, const Excitation& excitation,
                                           Index n_points, double noise_std, std::uint64_t seed) {
    if (n_points < 1) throw InputError("need at least one training point");
    if (noise_std < 0.0) throw InputError("noise standard deviation must be non-negative");
    const Index m = system.order();
    const double omega = 2.0 * std::numbers::pi * excitation.frequency;
    const auto traj = simulate_open_loop(
        system, [&](double t) { return excitation.amplitude * std::sin(omega * t); }, VectorXd::Zero(m),
        excitation.horizon, excitation.dt);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<Dataset> out;
    for (Index i = 0; i < m; ++i) out.emplace_back(MatrixXd(n_points, i + 1), VectorXd(n_points));

    for (Index k = 0; k < n_points; ++k) {
        const double t = excitation.horizon * (static_cast<double>(k) + 0.5) / static_cast<double>(n_points);
        const auto idx = static_cast<std::size_t>(
            std::clamp(std::lround(t / excitation.dt), 0L, static_cast<long>(traj.times.size() - 1)));
        const VectorXd& x = traj.states[idx];
        for (Index i = 0; i < m; ++i) {
            auto& ds = out[static_cast<std::size_t>(i)];
            ds.X.row(k) = x.head(i + 1).transpose();
            const double eps = noise_std > 0.0 ? noise_std * noise(rng) : 0.0;
            ds.y(k) = system.drift[static_cast<std::size_t>(i)](x) + eps;
        }
    }
    return out;
}

}  // namespace robustgp::control
