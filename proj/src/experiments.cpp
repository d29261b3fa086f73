#include "robustgp/experiments.hpp"

#include "robustgp/datasets.hpp"
#include "robustgp/errors.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <ostream>
#include <random>

namespace robustgp {

std::string to_string(Method method) {
    switch (method) {
        case Method::Vanilla: return "vanilla";
        case Method::Robust: return "robust";
        case Method::FullBayes: return "full_bayes";
    }
    return "unknown";
}

double violation_rate(const VectorXd& means, const VectorXd& sigmas, double beta_sqrt, const VectorXd& ytest) {
    if (ytest.size() == 0) throw InputError("violation rate needs at least one test point");
    if (means.size() != ytest.size() || sigmas.size() != ytest.size()) {
        throw InputError("means, sigmas and targets must have equal lengths");
    }
    Index violations = 0;
    for (Index i = 0; i < ytest.size(); ++i) {
        if (std::abs(ytest(i) - means(i)) - beta_sqrt * sigmas(i) > 0.0) ++violations;
    }
    return static_cast<double>(violations) / static_cast<double>(ytest.size());
}

FullyBayesianGP::FullyBayesianGP(std::vector<GPModel> components) : components_(std::move(components)) {
    if (components_.empty()) throw InputError("mixture needs at least one component");
}

FullyBayesianGP FullyBayesianGP::build(const PosteriorSampleSet& samples, KernelFamily family, const Dataset& data) {
    if (samples.empty()) throw InputError("fully Bayesian prediction needs posterior samples");
    std::vector<GPModel> models;
    models.reserve(samples.size());
    std::size_t skipped = 0;
    for (const auto& theta : samples.samples) {
        try {
            models.push_back(GPModel::fit(KernelSpec{family, theta}, data));
        } catch (const NumericalError& e) {
            ++skipped;
            spdlog::warn("skipping mixture component: {}", e.what());
        }
    }
    if (models.empty()) throw NumericalError("every mixture component failed to fit");
    FullyBayesianGP out(std::move(models));
    out.skipped_ = skipped;
    return out;
}

std::pair<double, double> FullyBayesianGP::predict(const Eigen::Ref<const VectorXd>& xstar) const {
    double m1 = 0.0;
    double m2 = 0.0;
    for (const auto& gp : components_) {
        const double mu = gp.mean(xstar);
        m1 += mu;
        m2 += gp.variance(xstar) + mu * mu;
    }
    const auto n = static_cast<double>(components_.size());
    m1 /= n;
    m2 /= n;
    return {m1, std::max(m2 - m1 * m1, 0.0)};
}

std::pair<double, double> fully_bayesian_predict(const PosteriorSampleSet& samples, KernelFamily family,
                                                 const Dataset& data, const Eigen::Ref<const VectorXd>& xstar) {
    return FullyBayesianGP::build(samples, family, data).predict(xstar);
}

BoundArtifacts construct_bound(const Dataset& train, const ExperimentConfig& cfg, std::uint64_t seed) {
    const HyperBox box = cfg.prior.box(train.dim());
    MlOptions ml;
    ml.restarts = cfg.ml_restarts;
    ml.seed = seed;
    BoundArtifacts out;
    out.theta0 = maximize_log_marginal_likelihood(train, cfg.kernel, box, ml);
    SamplerConfig sampler = cfg.sampler;
    sampler.seed = seed + 0x9E3779B97F4A7C15ull;
    out.samples = sample_posterior(train, cfg.kernel, UniformBoxPrior{box}, sampler);
    out.pair = find_bounding_pair(out.samples, out.theta0, cfg.delta);
    return out;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Predictions {
    VectorXd mean;
    VectorXd sigma;
    double beta_sqrt = 0.0;
};

// Scores the three methods on one train/test pair and appends rows.
struct Scorer {
    const ExperimentConfig& cfg;
    StudyResult& result;

    std::map<Method, Predictions> score(const Dataset& train, const MatrixXd& xtest, const VectorXd& ytest,
                                        Index train_size, int rep, std::uint64_t seed, const std::string& label) {
        const auto t_bound = Clock::now();
        const auto art = construct_bound(train, cfg, seed);
        const double bound_time = seconds_since(t_bound);
        result.pairs.push_back({label, train_size, rep, art.theta0, art.pair});

        const Index m = xtest.rows();
        std::map<Method, Predictions> preds;
        std::map<Method, double> times;

        auto t = Clock::now();
        const auto working = GPModel::fit(KernelSpec{cfg.kernel, art.theta0}, train);
        Predictions& v = preds[Method::Vanilla];
        v.mean.resize(m);
        v.sigma.resize(m);
        v.beta_sqrt = cfg.beta.beta_sqrt();
        for (Index i = 0; i < m; ++i) {
            v.mean(i) = working.mean(xtest.row(i).transpose());
            v.sigma(i) = working.stddev(xtest.row(i).transpose());
        }
        times[Method::Vanilla] = seconds_since(t);

        t = Clock::now();
        const auto bound = RobustBound::build(train, cfg.kernel, art.theta0, art.pair, cfg.beta.setting());
        Predictions& r = preds[Method::Robust];
        r.mean.resize(m);
        r.sigma.resize(m);
        r.beta_sqrt = std::sqrt(bound.beta_bar());
        for (Index i = 0; i < m; ++i) {
            r.mean(i) = bound.working_model().mean(xtest.row(i).transpose());
            r.sigma(i) = bound.envelope_model().stddev(xtest.row(i).transpose());
        }
        times[Method::Robust] = seconds_since(t) + bound_time;

        t = Clock::now();
        const auto mixture =
            FullyBayesianGP::build(art.samples.strided(cfg.full_bayes_components), cfg.kernel, train);
        Predictions& f = preds[Method::FullBayes];
        f.mean.resize(m);
        f.sigma.resize(m);
        f.beta_sqrt = cfg.beta.beta_sqrt();
        for (Index i = 0; i < m; ++i) {
            const auto [mu, var] = mixture.predict(xtest.row(i).transpose());
            f.mean(i) = mu;
            f.sigma(i) = std::sqrt(var);
        }
        times[Method::FullBayes] = seconds_since(t) + bound_time;

        for (Method method : kAllMethods) {
            const auto& p = preds[method];
            ResultRow row;
            row.method = method;
            row.train_size = train_size;
            row.repetition = rep;
            row.seed = seed;
            row.violation_rate = violation_rate(p.mean, p.sigma, p.beta_sqrt, ytest);
            row.max_excess = ((ytest - p.mean).cwiseAbs() - p.beta_sqrt * p.sigma).maxCoeff();
            row.wall_time = times[method];
            result.rows.push_back(row);
        }
        return preds;
    }
};

}  // namespace

StudyResult run_sample_study(const ExperimentConfig& cfg) {
    if (cfg.experiment != ExperimentKind::SampleStudy) throw ConfigError("not a sample study config");
    cfg.validate();
    const auto& s = cfg.sample_study;
    const VectorXd grid = VectorXd::LinSpaced(s.grid_points, s.domain_lo, s.domain_hi);
    const MatrixXd X = grid;
    const HyperBox box = cfg.prior.box(1);
    const VectorXd lo = box.lower.packed();
    const VectorXd hi = box.upper.packed();

    StudyResult result;
    Scorer scorer{cfg, result};
    for (int rep = 0; rep < cfg.repetitions; ++rep) {
        const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(rep);
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        VectorXd packed(lo.size());
        for (Index i = 0; i < packed.size(); ++i) packed(i) = lo(i) + unit(rng) * (hi(i) - lo(i));
        const HyperVector truth = HyperVector::from_packed(packed);
        const VectorXd f = sample_prior_function(KernelSpec{cfg.kernel, truth}, X, rng());

        const double noise_std = s.noise_std.value_or(std::sqrt(truth.noise_variance));
        std::normal_distribution<double> normal(0.0, 1.0);
        VectorXd noisy(s.grid_points);
        for (Index i = 0; i < noisy.size(); ++i) noisy(i) = f(i) + noise_std * normal(rng);
        std::vector<Index> order(static_cast<std::size_t>(s.grid_points));
        std::iota(order.begin(), order.end(), Index{0});
        std::shuffle(order.begin(), order.end(), rng);

        for (Index n : cfg.train_sizes) {
            Dataset train(MatrixXd(n, 1), VectorXd(n));
            for (Index i = 0; i < n; ++i) {
                const Index k = order[static_cast<std::size_t>(i)];
                train.X(i, 0) = grid(k);
                train.y(i) = noisy(k);
            }
            const auto preds = scorer.score(train, X, f, n, rep, seed, "N" + std::to_string(n));
            if (rep == 0) {
                PredictionTrace trace{n, grid, f, train, {}};
                for (const auto& [method, p] : preds) {
                    const VectorXd half = p.beta_sqrt * p.sigma;
                    trace.lower_upper[method] = {p.mean - half, p.mean + half};
                }
                result.traces.push_back(std::move(trace));
            }
        }
        spdlog::info("sample study repetition {}/{} done", rep + 1, cfg.repetitions);
    }
    return result;
}

StudyResult run_violation_benchmark(const ExperimentConfig& cfg) {
    if (cfg.experiment != ExperimentKind::ViolationBenchmark) throw ConfigError("not a benchmark config");
    cfg.validate();
    Dataset data;
    if (!cfg.dataset_path.empty()) {
        try {
            data = load_csv_dataset(cfg.dataset_path);
        } catch (const InputError& e) {
            throw ConfigError(e.what());
        }
    } else {
        const auto& syn = cfg.synthetic;
        const KernelSpec truth{cfg.kernel, HyperVector(VectorXd::Constant(syn.dim, syn.lengthscale),
                                                       syn.signal_variance, syn.noise_variance)};
        data = synthetic_gp_dataset(truth, syn.points, syn.half_width, cfg.seed);
    }
    for (Index n : cfg.train_sizes) {
        if (n >= data.size()) {
            throw ConfigError("train size " + std::to_string(n) + " leaves no test points in a dataset of " +
                              std::to_string(data.size()));
        }
    }
    spdlog::info("benchmark dataset: {} points, {} inputs", data.size(), data.dim());

    StudyResult result;
    Scorer scorer{cfg, result};
    for (int rep = 0; rep < cfg.repetitions; ++rep) {
        const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(rep);
        std::mt19937_64 rng(seed);
        for (Index n : cfg.train_sizes) {
            auto split = random_split(data, n, cfg.test_size, rng);
            standardize_split(split, cfg.standardize_inputs);
            (void)scorer.score(split.train, split.test.X, split.test.y, n, rep, seed, "N" + std::to_string(n));
        }
        spdlog::info("benchmark repetition {}/{} done", rep + 1, cfg.repetitions);
    }
    return result;
}

std::map<std::pair<Method, Index>, double> mean_violation_rates(const std::vector<ResultRow>& rows) {
    std::map<std::pair<Method, Index>, std::pair<double, int>> acc;
    for (const auto& r : rows) {
        auto& a = acc[{r.method, r.train_size}];
        a.first += r.violation_rate;
        ++a.second;
    }
    std::map<std::pair<Method, Index>, double> out;
    for (const auto& [key, a] : acc) out[key] = a.first / a.second;
    return out;
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw InputError("quantile of an empty sample");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double w = pos - static_cast<double>(lo);
    if (w == 0.0 || values[lo] == values[hi]) return values[lo];
    if (!std::isfinite(values[hi])) return values[hi];
    return values[lo] + w * (values[hi] - values[lo]);
}

double ControlResult::median_post_transient(Method method) const {
    std::vector<double> v;
    for (const auto& r : runs) {
        if (r.method == method) v.push_back(r.post_transient_max_error);
    }
    return quantile(v, 0.5);
}

ControlResult run_control_experiment(const ExperimentConfig& cfg) {
    if (cfg.experiment != ExperimentKind::ControlRun) throw ConfigError("not a control config");
    cfg.validate();
    const auto& c = cfg.control;
    const auto system = control::manipulator_system();
    const Index m = system.order();

    ControlResult result;
    result.training_data = control::collect_training_data(system, c.excitation, c.training_points, c.noise_std, cfg.seed);

    std::map<Method, std::vector<control::SubsystemModel>> models;
    for (Index i = 0; i < m; ++i) {
        const Dataset& data = result.training_data[static_cast<std::size_t>(i)];
        const std::uint64_t seed = cfg.seed + 1000u * static_cast<std::uint64_t>(i + 1);
        const auto art = construct_bound(data, cfg, seed);
        result.pairs.push_back({"subsystem" + std::to_string(i + 1), c.training_points, 0, art.theta0, art.pair});
        auto bound = RobustBound::build(data, cfg.kernel, art.theta0, art.pair, cfg.beta.setting());
        result.beta_bars.push_back(bound.beta_bar());
        spdlog::info("subsystem {}: gamma {:.4g}, beta_bar {:.4g}, mass {:.3f}", i + 1, art.pair.gamma,
                     bound.beta_bar(), art.pair.achieved_mass);

        models[Method::Robust].push_back(
            control::subsystem_from_gp(bound.working_model(), bound.envelope_model(), bound.beta_bar()));
        models[Method::Vanilla].push_back(
            control::subsystem_from_gp(bound.working_model(), bound.working_model(), cfg.beta.beta));

        auto mixture = std::make_shared<FullyBayesianGP>(
            FullyBayesianGP::build(art.samples.strided(c.full_bayes_components), cfg.kernel, data));
        const Index order = i + 1;
        control::SubsystemModel fb;
        fb.mean = [mixture, order](const VectorXd& x) { return mixture->predict(x.head(order)).first; };
        fb.variance = [mixture, order](const VectorXd& x) { return mixture->predict(x.head(order)).second; };
        fb.beta_bar = cfg.beta.beta;
        models[Method::FullBayes].push_back(std::move(fb));
    }

    const double transient = 0.5 * c.duration;
    for (int run = 0; run < c.runs; ++run) {
        std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                          static_cast<std::uint32_t>(run), 0x5eedu};
        std::mt19937_64 rng(seq);
        std::normal_distribution<double> normal(0.0, c.x0_std);
        VectorXd x0(m);
        for (Index i = 0; i < m; ++i) x0(i) = normal(rng);

        for (Method method : kAllMethods) {
            ControlRunRecord rec;
            rec.method = method;
            rec.run = run;
            rec.x0 = x0;
            const auto start = Clock::now();
            control::BacksteppingController controller(models[method], c.controller);
            try {
                rec.trajectory = control::simulate(system, controller, x0, c.duration, c.dt);
            } catch (const control::DivergenceError& e) {
                rec.trajectory = e.partial();
                rec.diverged = true;
                spdlog::warn("{} run {} diverged: {}", to_string(method), run, e.what());
            }
            rec.wall_time = seconds_since(start);
            double worst = 0.0;
            for (std::size_t k = 0; k < rec.trajectory.size(); ++k) {
                if (rec.trajectory.times[k] > transient) worst = std::max(worst, rec.trajectory.error_norms[k]);
            }
            rec.post_transient_max_error = rec.diverged ? std::numeric_limits<double>::infinity() : worst;
            result.runs.push_back(std::move(rec));
        }
        spdlog::info("control run {}/{} done", run + 1, c.runs);
    }

    const long steps = std::lround(c.duration / c.dt);
    for (Method method : kAllMethods) {
        for (long s = 0; s <= steps; s += c.summary_stride) {
            std::vector<double> values;
            for (const auto& r : result.runs) {
                if (r.method != method) continue;
                const auto k = static_cast<std::size_t>(s);
                values.push_back(k < r.trajectory.size() ? r.trajectory.error_norms[k]
                                                         : std::numeric_limits<double>::infinity());
            }
            result.summary.push_back({method, static_cast<double>(s) * c.dt, quantile(values, 0.5),
                                      quantile(values, 0.1), quantile(values, 0.9)});
        }
    }
    return result;
}

void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
    out << "method,train_size,repetition,seed,violation_rate,max_excess,wall_time\n";
    out.precision(10);
    for (const auto& r : rows) {
        out << to_string(r.method) << ',' << r.train_size << ',' << r.repetition << ',' << r.seed << ','
            << r.violation_rate << ',' << r.max_excess << ',' << r.wall_time << '\n';
    }
}

void write_bounding_pairs_csv(std::ostream& out, const std::vector<BoundingPairRecord>& records) {
    out << "label,train_size,repetition,coordinate,lower,upper,theta0,gamma,achieved_mass,delta\n";
    out.precision(10);
    for (const auto& r : records) {
        const VectorXd lo = r.pair.lower.packed();
        const VectorXd hi = r.pair.upper.packed();
        const VectorXd th = r.theta0.packed();
        const Index d = r.theta0.dim();
        for (Index i = 0; i < lo.size(); ++i) {
            const std::string name = i < d ? "lengthscale" + std::to_string(i + 1)
                                     : i == d ? std::string("signal_variance")
                                              : std::string("noise_variance");
            out << r.label << ',' << r.train_size << ',' << r.repetition << ',' << name << ',' << lo(i) << ','
                << hi(i) << ',' << th(i) << ',' << r.pair.gamma << ',' << r.pair.achieved_mass << ','
                << r.pair.delta << '\n';
        }
    }
}

void write_trace_csv(std::ostream& out, const PredictionTrace& trace) {
    out << "x,f,is_train";
    for (Method m : kAllMethods) out << ',' << to_string(m) << "_lower," << to_string(m) << "_upper";
    out << '\n';
    out.precision(10);
    for (Index i = 0; i < trace.grid.size(); ++i) {
        bool is_train = false;
        for (Index k = 0; k < trace.train.size(); ++k) is_train = is_train || trace.train.X(k, 0) == trace.grid(i);
        out << trace.grid(i) << ',' << trace.truth(i) << ',' << (is_train ? 1 : 0);
        for (Method m : kAllMethods) {
            const auto& [lo, hi] = trace.lower_upper.at(m);
            out << ',' << lo(i) << ',' << hi(i);
        }
        out << '\n';
    }
}

void write_control_results_csv(std::ostream& out, const ControlResult& result) {
    out << "method,run,x0_1,x0_2,x0_3,post_transient_max_error,diverged,wall_time\n";
    out.precision(10);
    for (const auto& r : result.runs) {
        out << to_string(r.method) << ',' << r.run;
        for (Index i = 0; i < r.x0.size(); ++i) out << ',' << r.x0(i);
        out << ',' << r.post_transient_max_error << ',' << (r.diverged ? "true" : "false") << ',' << r.wall_time
            << '\n';
    }
}

void write_control_summary_csv(std::ostream& out, const ControlResult& result) {
    out << "method,time,median,p10,p90\n";
    out.precision(10);
    for (const auto& s : result.summary) {
        out << to_string(s.method) << ',' << s.time << ',' << s.median << ',' << s.p10 << ',' << s.p90 << '\n';
    }
}

}  // namespace robustgp
