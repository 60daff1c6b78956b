// aashgp: command-line driver for adaptive active-subspace reliability runs.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "aashgp/baselines.hpp"
#include "aashgp/config.hpp"
#include "aashgp/error.hpp"
#include "aashgp/learner.hpp"
#include "aashgp/report.hpp"

namespace fs = std::filesystem;
using namespace aashgp;

namespace {

struct Common {
    std::string config_path;
    std::string out;
    std::optional<std::uint64_t> seed;
    bool quiet = false;
    std::optional<int> max_iterations;  // run only
    std::optional<long long> samples;  // mcs only
    bool line_search = false;          // form only
};

config::RunConfig load(const Common& c) {
    config::RunConfig cfg = config::load_config(c.config_path);
    if (c.seed) config::override_seed(cfg, *c.seed);
    if (c.max_iterations) {
        cfg.learner.max_iterations = *c.max_iterations;
        cfg.learner.validate(cfg.model.dimension);
    }
    return cfg;
}

fs::path out_dir(const Common& c, const config::RunConfig& cfg, const char* kind) {
    fs::path dir = c.out.empty() ? cfg.output.directory / kind : fs::path(c.out);
    fs::create_directories(dir);
    return dir;
}

double elapsed(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void write_run_outputs(const fs::path& dir, const config::RunConfig& cfg, const learner::RunRecord& rec,
                       double seconds) {
    const auto j = report::run_report(cfg, rec, seconds);
    if (cfg.output.json) {
        report::write_json(dir / "report.json", j);
        report::write_json(dir / "config.json", cfg.document);
    }
    if (cfg.output.csv) {
        report::write_history_csv(dir / "history.csv", rec);
        report::write_features_csv(dir / "features.csv", rec, cfg.model.threshold);
        report::write_spectrum_csv(dir / "spectrum.csv", rec);
        report::write_trials_csv(dir / "dimension_trials.csv", rec);
    }
}

int cmd_run(const Common& c) {
    const config::RunConfig cfg = load(c);
    const auto model = config::build_model(cfg);
    const fs::path dir = out_dir(c, cfg, "aashgp");
    learner::IterationCallback progress;
    if (!c.quiet) {
        progress = [](const learner::IterationRecord& r) {
            std::fprintf(stderr, "iter %4d  pf %.6e  eps1 %-11.4g eps2 %-11.4g d_r %2ld  n_s %4ld  %.2fs\n",
                         r.iteration, r.pf, r.eps1, r.eps2, static_cast<long>(r.d_r), static_cast<long>(r.n_s),
                         r.seconds);
        };
    }
    const auto t0 = std::chrono::steady_clock::now();
    learner::RunRecord rec;
    try {
        rec = learner::run(*model, cfg.rv, cfg.model.threshold, cfg.learner, progress);
    } catch (const learner::RunAborted& e) {
        write_run_outputs(dir, cfg, e.record, elapsed(t0));
        throw;
    }
    write_run_outputs(dir, cfg, rec, elapsed(t0));
    if (!c.quiet) {
        std::printf("pf %.6e  beta_g %.4f  n_s %ld  n_g %ld  d_r %ld  status %s\n", rec.pf, rec.beta_g,
                    static_cast<long>(rec.n_s), static_cast<long>(rec.n_g), static_cast<long>(rec.projection.d_r),
                    learner::to_string(rec.status));
    }
    return learner::exit_code(rec.status);
}

int cmd_mcs(const Common& c) {
    const config::RunConfig cfg = load(c);
    const auto model = config::build_model(cfg);
    const fs::path dir = out_dir(c, cfg, "mcs");
    const auto t0 = std::chrono::steady_clock::now();
    const Eigen::Index n = c.samples ? static_cast<Eigen::Index>(*c.samples) : cfg.baselines.mcs_n;
    if (n < 1) throw ConfigError("mcs: --samples must be >= 1");
    const auto r = baselines::mcs(*model, cfg.rv, cfg.model.threshold, n, cfg.mcs_seed());
    report::write_json(dir / "report.json", report::mcs_report(cfg, r, elapsed(t0)));
    if (!c.quiet) {
        std::printf("pf %.6e  n %ld  failures %ld  cov %.4g\n", r.pf, static_cast<long>(r.n),
                    static_cast<long>(r.failures), r.cov);
    }
    return 0;
}

int cmd_form(const Common& c) {
    const config::RunConfig cfg = load(c);
    if (!cfg.baselines.form) throw ConfigError(c.config_path + ": baselines.form is false");
    const auto model = config::build_model(cfg);
    const fs::path dir = out_dir(c, cfg, "form");
    const auto t0 = std::chrono::steady_clock::now();
    baselines::FormOptions opt;
    opt.max_iterations = cfg.baselines.form_max_iterations;
    opt.tolerance = cfg.baselines.form_tolerance;
    opt.line_search = c.line_search;
    const auto r = baselines::form_hlrf(*model, cfg.rv, cfg.model.threshold, opt);
    report::write_json(dir / "report.json", report::form_report(cfg, r, elapsed(t0)));
    if (!c.quiet) {
        std::printf("beta %.6f  pf %.6e  iterations %d  converged %s\n", r.beta, r.pf, r.iterations,
                    r.converged ? "yes" : "no");
    }
    return r.converged ? 0 : 2;
}

report::json load_report(const fs::path& dir) {
    const fs::path file = fs::is_directory(dir) ? dir / "report.json" : dir;
    if (!fs::exists(file)) throw Error("no report found at " + file.string());
    report::json j = report::read_json(file);
    const auto problems = report::validate_report(j);
    if (!problems.empty()) throw Error(file.string() + ": " + problems.front());
    return j;
}

int cmd_report(const std::vector<std::string>& runs, const std::string& reference, const std::string& out,
               bool quiet) {
    if (reference.empty()) throw ConfigError("report: --reference is required");
    const report::json ref = load_report(reference);
    std::vector<report::json> reports;
    std::vector<std::string> sources;
    for (const auto& r : runs) {
        reports.push_back(load_report(r));
        sources.push_back(fs::path(r).filename().string());
    }
    const auto rows = report::compare(reports, sources, ref);
    const std::string md = report::comparison_markdown(rows);
    if (!out.empty()) {
        fs::create_directories(out);
        report::write_comparison_csv(fs::path(out) / "comparison.csv", rows);
        std::ofstream(fs::path(out) / "comparison.md") << md;
    }
    if (!quiet) std::cout << md;
    return 0;
}

void add_common(CLI::App* sub, Common& c, bool with_seed) {
    sub->add_option("--config", c.config_path, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", c.out, "Output directory (default: output.directory/<command>)");
    if (with_seed) sub->add_option("--seed", c.seed, "Override learner and MCS seeds");
    sub->add_flag("--quiet", c.quiet, "Suppress progress output");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adaptive active-subspace / heteroscedastic GP reliability analysis"};
    app.require_subcommand(1);

    Common run_opts, mcs_opts, form_opts;
    auto* run = app.add_subcommand("run", "Adaptive learning run (or global DoE)");
    add_common(run, run_opts, true);
    run->add_option("--max-iterations", run_opts.max_iterations, "Override learner.max_iterations");
    auto* mcs = app.add_subcommand("mcs", "Crude Monte Carlo reference");
    add_common(mcs, mcs_opts, true);
    mcs->add_option("--samples", mcs_opts.samples, "Override baselines.mcs_n");
    auto* form = app.add_subcommand("form", "FORM (HL-RF) baseline");
    add_common(form, form_opts, false);
    form->add_flag("--line-search", form_opts.line_search, "Damp HL-RF steps with an Armijo search (iHL-RF)");

    std::vector<std::string> runs;
    std::string reference, report_out;
    bool report_quiet = false;
    auto* rep = app.add_subcommand("report", "Comparison table against a reference run");
    rep->add_option("runs", runs, "Run directories or report.json files")->required();
    rep->add_option("--reference", reference, "Reference run directory or report.json");
    rep->add_option("--out", report_out, "Directory for comparison.csv and comparison.md");
    rep->add_flag("--quiet", report_quiet, "Do not print the table");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (*run) return cmd_run(run_opts);
        if (*mcs) return cmd_mcs(mcs_opts);
        if (*form) return cmd_form(form_opts);
        if (*rep) return cmd_report(runs, reference, report_out, report_quiet);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
