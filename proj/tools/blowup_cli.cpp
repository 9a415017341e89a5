// Command-line runner for the experiments and acceptance presets.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "blowup/experiment.hpp"

using namespace blowup;
using namespace blowup::experiment;

namespace {

struct Options {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::string preset;
    std::size_t jobs = 1;
};

void add_common(CLI::App* sub, Options& o) {
    sub->add_option("--config", o.config, "experiment file (JSON)");
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--seed", o.seed, "base seed");
    sub->add_option("--preset", o.preset, "preset or criterion (c1 .. c12)");
    sub->add_option("--jobs", o.jobs, "worker threads for sweeps")->check(CLI::PositiveNumber);
}

std::string default_out(const std::string& experiment) {
    const char* root = std::getenv(kOutRootEnv);
    return (std::filesystem::path(root && *root ? root : "runs") / experiment).string();
}

ExperimentConfig resolve(const Options& o, const std::string& fallback) {
    ExperimentConfig cfg;
    bool named = false;
    if (!o.config.empty()) {
        cfg = load_config(o.config);
        named = true;
    }
    if (!o.preset.empty()) {
        criteria_for(o.preset);
        cfg.experiment = o.preset;
    } else if (!named) {
        cfg.experiment = fallback;
    }
    if (o.seed) cfg.seed = *o.seed;
    if (!o.out.empty()) cfg.out_dir = o.out;
    else if (cfg.out_dir.empty()) cfg.out_dir = default_out(cfg.experiment);
    return cfg;
}

void print_result(const CriterionResult& r) {
    const char* tag = r.pass() ? "PASS" : (r.abort_code ? "ABORT" : "FAIL");
    if (r.id > 0) std::printf("c%02d %-5s %s: %s (%.1f s)\n", r.id, tag, r.title.c_str(), r.summary.c_str(), r.seconds);
    else std::printf("%-5s %s: %s (%.1f s)\n", tag, r.title.c_str(), r.summary.c_str(), r.seconds);
    for (const auto& v : r.verdicts)
        if (!v.pass) std::printf("      failed %s: margin %s, tolerance %s%s%s\n", v.lemma.c_str(),
                                 format_double(v.margin).c_str(), format_double(v.tolerance).c_str(),
                                 v.note.empty() ? "" : ", ", v.note.c_str());
}

int run_experiment(const ExperimentConfig& cfg) {
    auto rep = run(cfg);
    for (const auto& r : rep.results) print_result(r);
    std::printf("report: %s (exit %d)\n", (std::filesystem::path(cfg.out_dir) / "report.json").string().c_str(),
                rep.exit_code);
    return rep.exit_code;
}

int run_sweep(const ExperimentConfig& cfg, std::size_t jobs) {
    auto rep = sweep(cfg, jobs);
    std::fputs(rep.csv().c_str(), stdout);
    std::printf("%zu runs, exit %d\n", rep.rows.size(), rep.exit_code);
    return rep.exit_code;
}

int summarize(const std::string& dir) {
    auto reports = read_reports(dir);
    if (reports.empty()) throw ConfigError("no report.json under '" + dir + "'");
    int code = kExitPass;
    for (const auto& rep : reports) {
        std::printf("%s  %s  exit %d  %.1f s\n", rep.at("config").at("experiment").get<std::string>().c_str(),
                    rep.value("tool_version", std::string("?")).c_str(), rep.at("exit_code").get<int>(),
                    rep.at("wall_clock").get<double>());
        for (const auto& r : rep.at("results")) {
            const int id = r.at("criterion").get<int>();
            const std::string label = id > 0 ? "c" + std::string(id < 10 ? "0" : "") + std::to_string(id)
                                             : r.at("title").get<std::string>();
            std::printf("  %s %s %s\n", label.c_str(), r.at("pass").get<bool>() ? "PASS" : "FAIL",
                        r.at("summary").get<std::string>().c_str());
        }
        const int c = rep.at("exit_code").get<int>();
        if (c == kExitResolution || (c == kExitBootstrap && code != kExitResolution) ||
            (c == kExitFail && code == kExitPass))
            code = c;
    }
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"blow-up experiments: cascade lemmas, 1D solver runs, axisymmetric kernels"};
    app.require_subcommand(1);
    Options o;
    std::string report_dir;

    auto* cascade = app.add_subcommand("cascade", "cascade oracle and lemma suites (criteria 1-4)");
    auto* solve1d = app.add_subcommand("solve1d", "decomposed 1D run from the solver section");
    auto* axis = app.add_subcommand("axisym", "axisymmetric kernels, HW-1 and closure (criteria 10-12)");
    auto* lemmas = app.add_subcommand("lemmas", "lemma suites (criteria 2-4 and 12)");
    auto* sw = app.add_subcommand("sweep", "independent runs over the sweep section of a config");
    auto* report = app.add_subcommand("report", "summarize report.json files in a run directory");
    for (auto* s : {cascade, solve1d, axis, lemmas, sw}) add_common(s, o);
    report->add_option("dir", report_dir, "run directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    try {
        if (*report) return summarize(report_dir);
        if (*sw) {
            auto cfg = resolve(o, "solve1d");
            if (cfg.sweep.is_null()) throw ConfigError("sweep needs a config with a sweep section");
            return run_sweep(cfg, o.jobs);
        }
        std::string fallback = "cascade-lemmas";
        if (*solve1d) fallback = "solve1d";
        else if (*axis) fallback = "axisym";
        else if (*lemmas) fallback = "lemmas";
        return run_experiment(resolve(o, fallback));
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_code_for(e);
    }
}
