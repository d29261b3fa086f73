// Command-line driver for the sample study, violation benchmark, control
// scenario and the oracle check suite.

#include "robustgp/config.hpp"
#include "robustgp/datasets.hpp"
#include "robustgp/errors.hpp"
#include "robustgp/experiments.hpp"
#include "robustgp/oracles.hpp"
#include "robustgp/version.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace robustgp;

namespace {

enum ExitCode : int { kOk = 0, kConfigError = 1, kNumericalError = 2 };

struct Options {
    std::string config_path;
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed;
    std::optional<int> reps;
    std::string log_level = "info";
};

std::ofstream open_output(const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    return out;
}

std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream ss;
    ss << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return ss.str();
}

void write_manifest(const fs::path& dir, const std::string& command, const std::string& config_json,
                    const nlohmann::json& summary, double wall_time, const std::vector<std::string>& argv) {
    nlohmann::json m;
    m["command"] = command;
    m["argv"] = argv;
    m["started_at"] = utc_timestamp();
    m["wall_time_seconds"] = wall_time;
    m["config"] = config_json.empty() ? nlohmann::json() : nlohmann::json::parse(config_json);
    for (const auto& [name, version] : build_info()) m["versions"][name] = version;
    m["summary"] = summary;
    open_output(dir / "run_manifest.json") << m.dump(2) << '\n';
}

ExperimentConfig resolve_config(const Options& opt, ExperimentKind kind) {
    ExperimentConfig cfg = opt.config_path.empty() ? default_config(kind) : load_config(opt.config_path, kind);
    if (opt.seed) cfg.seed = *opt.seed;
    if (opt.reps) {
        if (kind == ExperimentKind::ControlRun) {
            cfg.control.runs = *opt.reps;
        } else {
            cfg.repetitions = *opt.reps;
        }
    }
    cfg.validate();
    return cfg;
}

nlohmann::json rate_summary(const std::vector<ResultRow>& rows) {
    nlohmann::json s = nlohmann::json::array();
    for (const auto& [key, rate] : mean_violation_rates(rows)) {
        s.push_back({{"method", to_string(key.first)}, {"train_size", key.second}, {"mean_violation_rate", rate}});
        std::cout << to_string(key.first) << " N=" << key.second << " mean violation rate " << rate << '\n';
    }
    return s;
}

nlohmann::json run_study(const Options& opt, ExperimentKind kind, const fs::path& dir, std::string& config_json) {
    const auto cfg = resolve_config(opt, kind);
    config_json = config_to_json(cfg);
    const auto result = kind == ExperimentKind::SampleStudy ? run_sample_study(cfg) : run_violation_benchmark(cfg);
    auto results = open_output(dir / "results.csv");
    write_results_csv(results, result.rows);
    auto pairs = open_output(dir / "bounding_pairs.csv");
    write_bounding_pairs_csv(pairs, result.pairs);
    if (!result.traces.empty()) {
        fs::create_directories(dir / "predictions");
        for (const auto& trace : result.traces) {
            auto out = open_output(dir / "predictions" / ("N" + std::to_string(trace.train_size) + "_rep0.csv"));
            write_trace_csv(out, trace);
        }
    }
    return rate_summary(result.rows);
}

nlohmann::json run_control(const Options& opt, const fs::path& dir, std::string& config_json) {
    const auto cfg = resolve_config(opt, ExperimentKind::ControlRun);
    config_json = config_to_json(cfg);
    const auto result = run_control_experiment(cfg);
    auto results = open_output(dir / "results.csv");
    write_control_results_csv(results, result);
    auto summary = open_output(dir / "control_summary.csv");
    write_control_summary_csv(summary, result);
    auto pairs = open_output(dir / "bounding_pairs.csv");
    write_bounding_pairs_csv(pairs, result.pairs);
    fs::create_directories(dir / "trajectories");
    if (cfg.control.write_trajectories) {
        for (const auto& run : result.runs) {
            auto out = open_output(dir / "trajectories" /
                                   (to_string(run.method) + "_run" + std::to_string(run.run) + ".csv"));
            run.trajectory.write_csv(out);
        }
    }
    for (std::size_t i = 0; i < result.training_data.size(); ++i) {
        auto out = open_output(dir / ("training_subsystem" + std::to_string(i + 1) + ".csv"));
        write_csv_dataset(out, result.training_data[i]);
    }
    nlohmann::json s;
    for (Method m : kAllMethods) {
        const double med = result.median_post_transient(m);
        s[to_string(m)] = {{"median_post_transient_max_error", med}};
        std::cout << to_string(m) << " median post-transient max error " << med << '\n';
    }
    s["beta_bars"] = result.beta_bars;
    return s;
}

nlohmann::json run_oracle(const Options& opt, const fs::path& dir, bool& failed) {
    const std::uint64_t seed = opt.seed.value_or(0);
    const double scale = opt.reps ? static_cast<double>(*opt.reps) / 1000.0 : 1.0;
    const auto reports = oracles::run_all_checks(seed, scale);
    auto out = open_output(dir / "checks.csv");
    oracles::write_checks_csv(out, reports);
    nlohmann::json s = nlohmann::json::array();
    for (const auto& r : reports) {
        std::cout << (r.passed ? "PASS " : (r.soft ? "SOFT " : "FAIL ")) << r.name << " trials=" << r.trials
                  << " worst=" << r.worst_violation << " tol=" << r.tolerance << '\n';
        if (!r.passed && !r.soft) failed = true;
        s.push_back({{"name", r.name}, {"passed", r.passed}, {"worst_violation", r.worst_violation}});
    }
    return s;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Robust GP uniform error bounds under unknown hyperparameters"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kVersion));

    Options opt;
    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config_path, "JSON experiment configuration")->check(CLI::ExistingFile);
        sub->add_option("--out", opt.out_dir, "Output directory")->capture_default_str();
        sub->add_option("--seed", opt.seed, "Master seed (overrides the config)");
        sub->add_option("--reps", opt.reps, "Repetitions (control: runs; oracle: trials of the largest check)")
            ->check(CLI::PositiveNumber);
        sub->add_option("--log-level", opt.log_level, "trace, debug, info, warn, error, off")->capture_default_str();
    };
    auto* sample = app.add_subcommand("sample-study", "GP sample study on a 1-D grid");
    auto* bench = app.add_subcommand("benchmark", "Violation-rate benchmark on a CSV or synthetic dataset");
    auto* ctrl = app.add_subcommand("control", "Manipulator backstepping control runs");
    auto* oracle = app.add_subcommand("oracle", "Brute-force oracle and property checks");
    for (auto* sub : {sample, bench, ctrl, oracle}) add_common(sub);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }
    spdlog::set_level(spdlog::level::from_str(opt.log_level));

    const std::vector<std::string> args(argv, argv + argc);
    const auto start = std::chrono::steady_clock::now();
    try {
        const fs::path dir(opt.out_dir);
        fs::create_directories(dir);
        std::string config_json;
        nlohmann::json summary;
        bool failed = false;
        std::string command;
        if (sample->parsed()) {
            command = "sample-study";
            summary = run_study(opt, ExperimentKind::SampleStudy, dir, config_json);
        } else if (bench->parsed()) {
            command = "benchmark";
            summary = run_study(opt, ExperimentKind::ViolationBenchmark, dir, config_json);
        } else if (ctrl->parsed()) {
            command = "control";
            summary = run_control(opt, dir, config_json);
        } else {
            command = "oracle";
            summary = run_oracle(opt, dir, failed);
        }
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        write_manifest(dir, command, config_json, summary, wall, args);
        return failed ? kNumericalError : kOk;
    } catch (const ConfigError& e) {
        spdlog::error("configuration error: {}", e.what());
        return kConfigError;
    } catch (const InputError& e) {
        spdlog::error("invalid input: {}", e.what());
        return kConfigError;
    } catch (const NumericalError& e) {
        spdlog::error("numerical failure: {}", e.what());
        return kNumericalError;
    } catch (const fs::filesystem_error& e) {
        spdlog::error("filesystem error: {}", e.what());
        return kConfigError;
    }
}
