#include "robustgp/config.hpp"

#include "robustgp/errors.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace robustgp {

using nlohmann::json;

ExperimentKind parse_experiment_kind(std::string_view name) {
    if (name == "sample_study" || name == "sample-study") return ExperimentKind::SampleStudy;
    if (name == "benchmark" || name == "violation_benchmark") return ExperimentKind::ViolationBenchmark;
    if (name == "control" || name == "control_run") return ExperimentKind::ControlRun;
    throw ConfigError("unknown experiment '" + std::string(name) + "'");
}

std::string to_string(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::SampleStudy: return "sample_study";
        case ExperimentKind::ViolationBenchmark: return "benchmark";
        case ExperimentKind::ControlRun: return "control";
    }
    return "unknown";
}

HyperBox PriorSpec::box(Index dim) const {
    return HyperBox::uniform(dim, lengthscale.lo, lengthscale.hi, signal_variance.lo, signal_variance.hi,
                             noise_variance.lo, noise_variance.hi);
}

void PriorSpec::validate() const {
    for (const auto& [name, iv] : {std::pair{"lengthscale", lengthscale}, std::pair{"signal_variance", signal_variance},
                                   std::pair{"noise_variance", noise_variance}}) {
        if (!(iv.lo > 0.0) || !(iv.hi >= iv.lo) || !std::isfinite(iv.hi)) {
            throw ConfigError(std::string("prior interval for ") + name + " must satisfy 0 < lo <= hi < inf");
        }
    }
}

PriorSpec prior_preset(std::string_view name) {
    // Interval order: lengthscale, signal variance, noise variance.
    const auto make = [&](Interval ls, Interval sf2, Interval sn2) { return PriorSpec{std::string(name), ls, sf2, sn2}; };
    if (name == "bstn") return make({1e-1, 1e2}, {1.0, 50.0}, {1e-1, 1e2});
    if (name == "ml") return make({1e-10, 5e12}, {1e-10, 1e5}, {1e-5, 1e2});
    if (name == "wine") return make({1e-2, 10.0}, {1e-2, 1e2}, {1e-2, 1.0});
    if (name == "srcs") return make({1e-1, 50.0}, {1e-1, 1e3}, {1e-2, 80.0});
    if (name == "control") return make({1e-15, 1e-2}, {1e-6, 10.0}, {1e-5, 1e-1});
    if (name == "sample_study") return make({0.5, 5.0}, {0.5, 2.0}, {1e-3, 1e-2});
    throw ConfigError("unknown prior preset '" + std::string(name) + "'");
}

BetaSetting BetaSpec::setting() const {
    BetaSetting s;
    s.mode = mode;
    s.beta = beta;
    s.beta_max_sqrt = beta_max_sqrt;
    return s;
}

void ExperimentConfig::validate() const {
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0,1)");
    if (repetitions < 1) throw ConfigError("repetitions must be at least 1");
    if (!(beta.beta > 0.0)) throw ConfigError("beta must be positive");
    if (!(beta.beta_max_sqrt > 0.0)) throw ConfigError("beta_max_sqrt must be positive");
    if (ml_restarts < 1) throw ConfigError("ml_restarts must be at least 1");
    if (full_bayes_components < 1) throw ConfigError("full_bayes_components must be at least 1");
    prior.validate();
    try {
        sampler.validate();
    } catch (const InputError& e) {
        throw ConfigError(std::string("sampler: ") + e.what());
    }
    const auto kept = static_cast<double>(sampler.chains) *
                      std::floor(static_cast<double>(sampler.steps - sampler.burn_in) / sampler.thinning);
    if (kept < 50.0 / delta) {
        throw ConfigError("sampler keeps " + std::to_string(static_cast<long>(kept)) +
                          " samples but the bounding pair needs at least 50/delta");
    }
    if (experiment != ExperimentKind::ControlRun) {
        if (train_sizes.empty()) throw ConfigError("train_sizes must not be empty");
        for (Index n : train_sizes) {
            if (n < 1) throw ConfigError("train sizes must be positive");
        }
    }
    if (experiment == ExperimentKind::SampleStudy) {
        const auto& s = sample_study;
        if (!(s.domain_hi > s.domain_lo)) throw ConfigError("sample study domain is empty");
        if (s.grid_points < 2) throw ConfigError("sample study grid needs at least two points");
        for (Index n : train_sizes) {
            if (n > s.grid_points) throw ConfigError("train size exceeds the sample study grid");
        }
        if (s.noise_std && *s.noise_std < 0.0) throw ConfigError("noise_std must be non-negative");
    }
    if (experiment == ExperimentKind::ViolationBenchmark) {
        if (test_size < 1) throw ConfigError("test_size must be positive");
        const auto& s = synthetic;
        if (dataset_path.empty() && (s.dim < 1 || s.points < 2 || !(s.half_width > 0.0) || !(s.lengthscale > 0.0) ||
                                     !(s.signal_variance > 0.0) || !(s.noise_variance >= 0.0))) {
            throw ConfigError("invalid synthetic dataset settings");
        }
    }
    if (experiment == ExperimentKind::ControlRun) {
        const auto& c = control;
        if (c.training_points < 1) throw ConfigError("control training_points must be positive");
        if (c.runs < 1) throw ConfigError("control runs must be positive");
        if (!(c.noise_std >= 0.0) || !(c.x0_std >= 0.0)) throw ConfigError("control noise/x0 std must be >= 0");
        if (!(c.dt > 0.0) || !(c.duration > 0.0)) throw ConfigError("control duration and dt must be positive");
        if (c.summary_stride < 1) throw ConfigError("summary_stride must be positive");
        if (c.full_bayes_components < 1) throw ConfigError("control full_bayes_components must be positive");
        if (!(c.excitation.dt > 0.0) || !(c.excitation.horizon > 0.0)) throw ConfigError("invalid excitation");
        try {
            c.controller.validate();
        } catch (const InputError& e) {
            throw ConfigError(std::string("controller: ") + e.what());
        }
    }
}

ExperimentConfig default_config(ExperimentKind kind) {
    ExperimentConfig cfg;
    cfg.experiment = kind;
    cfg.sampler.chains = 4;
    cfg.sampler.steps = 2500;
    cfg.sampler.burn_in = 500;
    cfg.sampler.thinning = 2;
    switch (kind) {
        case ExperimentKind::SampleStudy:
            cfg.prior = prior_preset("sample_study");
            cfg.repetitions = 100;
            cfg.train_sizes = {2, 4, 6};
            break;
        case ExperimentKind::ViolationBenchmark:
            cfg.prior = prior_preset("bstn");
            cfg.repetitions = 100;
            cfg.train_sizes = {50};
            break;
        case ExperimentKind::ControlRun:
            cfg.prior = prior_preset("control");
            cfg.repetitions = 1;
            break;
    }
    return cfg;
}

namespace {

// Reads known keys out of an object and rejects anything left over.
class Reader {
public:
    Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw ConfigError(where_ + " must be an object");
    }
    void done() const {
        for (const auto& [key, _] : j_.items()) {
            if (!seen_.count(key)) throw ConfigError("unknown key '" + key + "' in " + where_);
        }
    }
    Reader(const Reader&) = delete;
    Reader& operator=(const Reader&) = delete;

    const json* find(const std::string& key) {
        seen_.insert(key);
        const auto it = j_.find(key);
        return it == j_.end() || it->is_null() ? nullptr : &*it;
    }

    template <class T>
    void get(const std::string& key, T& out) {
        if (const json* v = find(key)) {
            try {
                out = v->get<T>();
            } catch (const json::exception& e) {
                throw ConfigError(where_ + "." + key + ": " + e.what());
            }
        }
    }

    std::string path(const std::string& key) const { return where_ + "." + key; }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

Interval read_interval(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 2) throw ConfigError(where + " must be a [lo, hi] pair");
    try {
        return {j[0].get<double>(), j[1].get<double>()};
    } catch (const json::exception& e) {
        throw ConfigError(where + ": " + e.what());
    }
}

void read_prior(const json& j, PriorSpec& prior) {
    if (j.is_string()) {
        prior = prior_preset(j.get<std::string>());
        return;
    }
    Reader r(j, "prior");
    if (const json* p = r.find("preset")) {
        std::string name = p->get<std::string>();
        if (const auto cut = name.find("+custom"); cut != std::string::npos) name.resize(cut);
        if (!name.empty()) prior = prior_preset(name);
    }
    bool custom = false;
    const auto read_bound = [&](const char* key, Interval& dst) {
        const json* v = r.find(key);
        if (!v) return;
        const Interval got = read_interval(*v, r.path(key));
        if (got.lo != dst.lo || got.hi != dst.hi) custom = true;
        dst = got;
    };
    read_bound("lengthscale", prior.lengthscale);
    read_bound("signal_variance", prior.signal_variance);
    read_bound("noise_variance", prior.noise_variance);
    if (custom && !prior.preset.empty()) prior.preset += "+custom";
    r.done();
}

void read_beta(const json& j, BetaSpec& beta) {
    Reader r(j, "beta");
    if (const json* m = r.find("mode")) {
        const auto s = m->get<std::string>();
        if (s == "practical") {
            beta.mode = BetaMode::Practical;
        } else if (s == "theoretical") {
            beta.mode = BetaMode::Theoretical;
        } else {
            throw ConfigError("beta.mode must be 'practical' or 'theoretical'");
        }
    }
    r.get("value", beta.beta);
    if (const json* v = r.find("sqrt")) beta.beta = v->get<double>() * v->get<double>();
    r.get("beta_max_sqrt", beta.beta_max_sqrt);
    r.done();
}

void read_sampler(const json& j, SamplerConfig& s) {
    Reader r(j, "sampler");
    r.get("chains", s.chains);
    r.get("steps", s.steps);
    r.get("burn_in", s.burn_in);
    r.get("thinning", s.thinning);
    r.get("target_acceptance", s.target_acceptance);
    r.done();
}

void read_control(const json& j, ControlSpec& c) {
    Reader r(j, "control");
    r.get("training_points", c.training_points);
    r.get("noise_std", c.noise_std);
    r.get("runs", c.runs);
    r.get("x0_std", c.x0_std);
    r.get("duration", c.duration);
    r.get("dt", c.dt);
    r.get("xi_des", c.controller.xi_des);
    r.get("filter_bandwidth", c.controller.filter_bandwidth);
    r.get("gain_floor", c.controller.gain_floor);
    r.get("full_bayes_components", c.full_bayes_components);
    r.get("write_trajectories", c.write_trajectories);
    r.get("summary_stride", c.summary_stride);
    if (const json* e = r.find("excitation")) {
        Reader er(*e, "control.excitation");
        er.get("amplitude", c.excitation.amplitude);
        er.get("frequency", c.excitation.frequency);
        er.get("horizon", c.excitation.horizon);
        er.get("dt", c.excitation.dt);
        er.done();
    }
    r.done();
}

}  // namespace

ExperimentConfig parse_config(std::string_view json_text, ExperimentKind kind) {
    json j;
    try {
        j = json::parse(json_text.begin(), json_text.end(), nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    ExperimentConfig cfg = default_config(kind);
    try {
        Reader r(j, "config");
        if (const json* e = r.find("experiment")) {
            if (parse_experiment_kind(e->get<std::string>()) != kind) {
                throw ConfigError("config describes experiment '" + e->get<std::string>() +
                                  "' but subcommand runs '" + to_string(kind) + "'");
            }
        }
        r.get("dataset_path", cfg.dataset_path);
        if (const json* k = r.find("kernel")) {
            try {
                cfg.kernel = parse_kernel_family(k->get<std::string>());
            } catch (const InputError& e) {
                throw ConfigError(e.what());
            }
        }
        if (const json* p = r.find("prior")) read_prior(*p, cfg.prior);
        r.get("delta", cfg.delta);
        if (const json* b = r.find("beta")) read_beta(*b, cfg.beta);
        r.get("repetitions", cfg.repetitions);
        r.get("train_sizes", cfg.train_sizes);
        r.get("test_size", cfg.test_size);
        r.get("standardize_inputs", cfg.standardize_inputs);
        r.get("seed", cfg.seed);
        r.get("ml_restarts", cfg.ml_restarts);
        r.get("full_bayes_components", cfg.full_bayes_components);
        if (const json* s = r.find("sampler")) read_sampler(*s, cfg.sampler);
        if (const json* s = r.find("sample_study")) {
            Reader sr(*s, "sample_study");
            sr.get("domain_lo", cfg.sample_study.domain_lo);
            sr.get("domain_hi", cfg.sample_study.domain_hi);
            sr.get("grid_points", cfg.sample_study.grid_points);
            if (const json* n = sr.find("noise_std")) cfg.sample_study.noise_std = n->get<double>();
            sr.done();
        }
        if (const json* s = r.find("synthetic")) {
            Reader sr(*s, "synthetic");
            sr.get("dim", cfg.synthetic.dim);
            sr.get("points", cfg.synthetic.points);
            sr.get("half_width", cfg.synthetic.half_width);
            sr.get("lengthscale", cfg.synthetic.lengthscale);
            sr.get("signal_variance", cfg.synthetic.signal_variance);
            sr.get("noise_variance", cfg.synthetic.noise_variance);
            sr.done();
        }
        if (const json* c = r.find("control")) read_control(*c, cfg.control);
        r.done();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return cfg;
}

ExperimentConfig load_config(const std::string& path, ExperimentKind kind) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str(), kind);
}

std::string config_to_json(const ExperimentConfig& cfg) {
    const auto pair = [](const Interval& iv) { return json::array({iv.lo, iv.hi}); };
    json j;
    j["experiment"] = to_string(cfg.experiment);
    j["dataset_path"] = cfg.dataset_path;
    j["kernel"] = to_string(cfg.kernel);
    j["prior"] = {{"preset", cfg.prior.preset},
                  {"lengthscale", pair(cfg.prior.lengthscale)},
                  {"signal_variance", pair(cfg.prior.signal_variance)},
                  {"noise_variance", pair(cfg.prior.noise_variance)}};
    j["delta"] = cfg.delta;
    j["beta"] = {{"mode", cfg.beta.mode == BetaMode::Practical ? "practical" : "theoretical"},
                 {"value", cfg.beta.beta},
                 {"beta_max_sqrt", cfg.beta.beta_max_sqrt}};
    j["repetitions"] = cfg.repetitions;
    j["train_sizes"] = cfg.train_sizes;
    j["test_size"] = cfg.test_size;
    j["standardize_inputs"] = cfg.standardize_inputs;
    j["seed"] = cfg.seed;
    j["ml_restarts"] = cfg.ml_restarts;
    j["full_bayes_components"] = cfg.full_bayes_components;
    j["sampler"] = {{"chains", cfg.sampler.chains},
                    {"steps", cfg.sampler.steps},
                    {"burn_in", cfg.sampler.burn_in},
                    {"thinning", cfg.sampler.thinning},
                    {"target_acceptance", cfg.sampler.target_acceptance}};
    j["sample_study"] = {{"domain_lo", cfg.sample_study.domain_lo},
                         {"domain_hi", cfg.sample_study.domain_hi},
                         {"grid_points", cfg.sample_study.grid_points}};
    if (cfg.sample_study.noise_std) j["sample_study"]["noise_std"] = *cfg.sample_study.noise_std;
    j["synthetic"] = {{"dim", cfg.synthetic.dim},
                      {"points", cfg.synthetic.points},
                      {"half_width", cfg.synthetic.half_width},
                      {"lengthscale", cfg.synthetic.lengthscale},
                      {"signal_variance", cfg.synthetic.signal_variance},
                      {"noise_variance", cfg.synthetic.noise_variance}};
    const auto& c = cfg.control;
    j["control"] = {{"training_points", c.training_points},
                    {"noise_std", c.noise_std},
                    {"runs", c.runs},
                    {"x0_std", c.x0_std},
                    {"duration", c.duration},
                    {"dt", c.dt},
                    {"xi_des", c.controller.xi_des},
                    {"filter_bandwidth", c.controller.filter_bandwidth},
                    {"gain_floor", c.controller.gain_floor},
                    {"full_bayes_components", c.full_bayes_components},
                    {"write_trajectories", c.write_trajectories},
                    {"summary_stride", c.summary_stride},
                    {"excitation",
                     {{"amplitude", c.excitation.amplitude},
                      {"frequency", c.excitation.frequency},
                      {"horizon", c.excitation.horizon},
                      {"dt", c.excitation.dt}}}};
    return j.dump(2);
}

}  // namespace robustgp
