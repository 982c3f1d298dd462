// cnsk: runs one experiment per process and writes report.json, per-series
// CSV, binary attachments and manifest.json into the output directory.
//
// Exit codes: 0 pass (or inconclusive without --strict), 1 failed criterion,
// 2 config or parameter error, 3 runtime failure.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "cnsk/cnsk.hpp"

namespace fs = std::filesystem;
using cnsk::json;

namespace {

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

class Manifest {
public:
    Manifest(fs::path dir, json body) : dir_(std::move(dir)), body_(std::move(body)) {
        body_["files"] = json::array({"manifest.json"});
    }

    void add_files(const std::vector<std::string>& names) {
        for (const auto& n : names) body_["files"].push_back(n);
    }

    void set(const std::string& key, json value) { body_[key] = std::move(value); }

    void write() const {
        fs::create_directories(dir_);
        std::ofstream os(dir_ / "manifest.json", std::ios::binary);
        if (!os) throw cnsk::SimulationError("cannot write " + (dir_ / "manifest.json").string());
        os << body_.dump(2) << '\n';
    }

private:
    fs::path dir_;
    json body_;
};

void print_summary(const cnsk::ExperimentReport& r) {
    std::cout << std::setprecision(6);
    for (const auto& s : r.series) {
        std::cout << std::left << std::setw(28) << s.series.quantity << " slope " << std::setw(10)
                  << s.series.fit.slope << " r2 " << std::setw(10) << s.series.fit.r2;
        if (s.theory) std::cout << " theory " << std::setw(8) << s.theory->exponent.str() << ' ' << to_string(s.theory->bound);
        std::cout << "  " << to_string(s.verdict) << '\n';
    }
    for (const auto& c : r.checks)
        std::cout << std::left << std::setw(28) << c.name << " value " << std::setw(12) << c.value << ' '
                  << c.criterion << "  " << to_string(c.verdict) << '\n';
    std::cout << "overall " << to_string(r.overall()) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Linearized and nonlinear decay experiments for the compressible Navier-Stokes-Korteweg system"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    std::uint64_t seed = 0;
    int threads = 0;
    bool dry_run = false, strict = false;
    app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    auto* out_opt = app.add_option("--out", out_dir, "Output directory (run.out)");
    auto* seed_opt = app.add_option("--seed", seed, "Random seed (run.seed)");
    auto* threads_opt =
        app.add_option("--threads", threads, "Worker threads, 0 = all cores (run.threads)")->check(CLI::NonNegativeNumber);
    app.add_flag("--dry-run", dry_run, "Validate the config and write the manifest only");
    auto* strict_opt = app.add_flag("--strict", strict, "Treat INCONCLUSIVE as failure (run.strict)");

    for (const char* name : {"linear-decay", "nonlinear", "kernel", "highband", "modecheck"})
        app.add_subcommand(name)->fallthrough();
    app.get_subcommand("linear-decay")->description("Low-band linear decay rates against the theory table");
    app.get_subcommand("nonlinear")->description("Nonlinear small-data run with a paired linear run");
    app.get_subcommand("kernel")->description("Green-matrix kernel sup-norm series and shell profile");
    app.get_subcommand("highband")->description("High-band smoothing ratio and exponential tail");
    app.get_subcommand("modecheck")->description("Random-mode comparison of the semigroup with the ODE oracle");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    json cfg = json::object();
    cnsk::RunOptions opt;
    std::function<cnsk::ExperimentReport()> experiment;
    try {
        if (!config_path.empty()) cfg = cnsk::load_config(config_path);
        if (*out_opt) cnsk::set_config_value(cfg, "run.out", out_dir);
        if (*seed_opt) cnsk::set_config_value(cfg, "run.seed", seed);
        if (*threads_opt) cnsk::set_config_value(cfg, "run.threads", threads);
        if (*strict_opt) cnsk::set_config_value(cfg, "run.strict", strict);
        for (const auto& f : cnsk::unknown_config_fields(cfg)) std::cerr << "warning: unknown config field '" << f << "'\n";

        const cnsk::ConfigView view(cfg);
        opt = cnsk::run_options_from(view);
        if (command == "linear-decay") {
            experiment = [c = cnsk::linear_config_from(view)] { return cnsk::linear_decay_experiment(c); };
        } else if (command == "nonlinear") {
            experiment = [c = cnsk::nonlinear_config_from(view)] { return cnsk::nonlinear_decay_experiment(c); };
        } else if (command == "kernel") {
            experiment = [c = cnsk::kernel_config_from(view)] { return cnsk::kernel_experiment(c); };
        } else if (command == "highband") {
            experiment = [c = cnsk::highband_config_from(view)] { return cnsk::high_band_experiment(c); };
        } else {
            experiment = [c = cnsk::modecheck_config_from(view)] { return cnsk::mode_check_experiment(c); };
        }
    } catch (const cnsk::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "parameter error: " << e.what() << '\n';
        return 2;
    }

    cnsk::set_config_value(cfg, "run.out", opt.out);
    cnsk::set_config_value(cfg, "run.seed", opt.seed);
    cnsk::set_config_value(cfg, "run.threads", opt.resolved_threads());
    cnsk::set_config_value(cfg, "run.strict", opt.strict);

    const fs::path dir = opt.out;
    Manifest manifest(dir, {{"command", command},
                            {"config_path", config_path.empty() ? json() : json(fs::absolute(config_path).string())},
                            {"output_directory", fs::absolute(dir).string()},
                            {"seed", opt.seed},
                            {"timestamp", utc_timestamp()},
                            {"code_version", cnsk::kVersion},
                            {"status", dry_run ? "dry-run" : "running"}});
    try {
        manifest.write();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    if (dry_run) {
        std::cout << "dry run: manifest written to " << (dir / "manifest.json").string() << '\n';
        return 0;
    }

    cnsk::set_fft_threads(opt.resolved_threads());
#ifdef _OPENMP
    omp_set_num_threads(opt.resolved_threads());
#endif

    int code = 0;
    const auto start = std::chrono::steady_clock::now();
    try {
        const cnsk::ExperimentReport report = experiment();
        manifest.add_files(cnsk::write_report(report, dir, cfg));
        print_summary(report);
        if (command == "modecheck")
            std::cout << "max relative error vs ODE oracle: " << std::scientific << report.check("oracle_max_rel_error").value
                      << '\n';
        const cnsk::Verdict v = report.overall();
        code = v == cnsk::Verdict::Fail || (opt.strict && v == cnsk::Verdict::Inconclusive) ? 1 : 0;
        manifest.set("verdict", to_string(v));
        manifest.set("status", "finished");
    } catch (const std::invalid_argument& e) {
        std::cerr << "parameter error: " << e.what() << '\n';
        manifest.set("status", "error");
        manifest.set("error", e.what());
        code = 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        manifest.set("status", "error");
        manifest.set("error", e.what());
        code = 3;
    }
    manifest.set("exit_code", code);
    manifest.set("elapsed_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    try {
        manifest.write();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return code;
}
