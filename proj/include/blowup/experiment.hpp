#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "blowup/axisym.hpp"
#include "blowup/core.hpp"

namespace blowup::experiment {

inline constexpr const char* kToolVersion = "blowup 0.1.0";
/// Default output root when --out is not given.
inline constexpr const char* kOutRootEnv = "BLOWUP_OUT_ROOT";

enum ExitCode : int {
    kExitPass = 0,
    kExitFail = 1,
    kExitBootstrap = 2,
    kExitResolution = 3,
    kExitConfig = 64,
};

/// ConfigError -> 64, BootstrapViolation -> 2, ResolutionError -> 3, anything else -> 1.
int exit_code_for(const std::exception& e);

struct CascadeBlock {
    double A = 1.1;            // closed-form oracle
    std::size_t n_levels = 15;
    std::size_t trials = 200;  // int-le and int-ge suites
    std::size_t monotone_trials = 100;
    double A_max = 1.2;
    double b_max = 1.4;        // int-le draws b in [1, b_max]
    double b_min = 0.6;        // int-ge draws b in [b_min, 1]
    std::size_t n_max = 12;

    static CascadeBlock from_json(const json& j);
    [[nodiscard]] json to_json() const;
};

struct SolverBlock {
    double a = 1.0;
    std::size_t n = 4;
    double A = 1.05;
    double r = 0.2;
    double eps = 0.05;
    std::size_t particles = 401;
    std::size_t n_log = 101;
    std::optional<double> t_end;  // default: minus the bootstrap window
    std::size_t rate_n = 20;      // levels of the blow-up-rate run
    std::size_t clm_points = 1 << 14;

    static SolverBlock from_json(const json& j);
    [[nodiscard]] json to_json() const;
};

struct AxisymBlock {
    double hw1_d = 0.1;
    double hw1_Z = 10.0;
    std::size_t hw1_seeds = 50;
    int hw1_decades = 6;  // K = 1, 1e-1, ..., 1e-decades
    std::size_t odd_profiles = 20;
    std::size_t tle_trials = 200;
    axisym::AxisymConfig closure;

    static AxisymBlock from_json(const json& j);
    [[nodiscard]] json to_json() const;
};

/// Parsed experiment file. Every section is optional; unknown keys anywhere are rejected.
struct ExperimentConfig {
    std::string experiment = "all";
    std::uint64_t seed = 0;
    std::string out_dir;  // empty: nothing is written
    CascadeBlock cascade;
    SolverBlock solver;
    AxisymBlock axisym;
    std::map<std::string, double> tolerances;  // overrides, keys from tolerance_keys()
    json sweep = nullptr;

    static ExperimentConfig from_json(const json& j);
    [[nodiscard]] json to_json() const;
    /// Tolerance `key`, overridden or the default.
    [[nodiscard]] double tol(const std::string& key) const;
};

/// Reads and validates a config file; ConfigError on unreadable or malformed input.
ExperimentConfig load_config(const std::string& path);

/// Known tolerance keys and their defaults.
const std::map<std::string, double>& tolerance_keys();

/// Experiments: a preset name expands to the acceptance criteria it covers.
const std::map<std::string, std::vector<int>>& presets();
/// Criteria behind a name: a preset, "cN", or "solve1d" (empty: the custom 1D run).
std::vector<int> criteria_for(const std::string& experiment);

struct Artifact {
    std::string name;  // relative path below the run directory
    std::string content;
};

struct CriterionResult {
    int id = 0;
    std::string title;
    std::vector<Verdict> verdicts;
    std::vector<Artifact> artifacts;
    std::string summary;  // measured values in one line
    double seconds = 0.0;
    int abort_code = 0;  // 2 or 3 when a run stopped early for that reason

    [[nodiscard]] bool pass() const { return abort_code == 0 && !verdicts.empty() && all_pass(verdicts); }
};
void to_json(json& j, const CriterionResult& r);

/// One verdict per line: lemma, seed, pass, margin, tolerance, params. Runtime verdicts are
/// left out so the file is reproducible.
std::string verdicts_csv(const std::vector<Verdict>& verdicts);

/// Runs criteria and the custom 1D experiment, sharing the n = 4 decomposed run between
/// criteria 7 and 9.
class Session {
public:
    explicit Session(ExperimentConfig cfg);
    ~Session();
    Session(const Session&) = delete;
    Session& operator=(const Session&) = delete;

    CriterionResult criterion(int id);
    /// Decomposed run with the solver block: mechanism, energy and rate verdicts.
    CriterionResult solve1d();

    [[nodiscard]] const ExperimentConfig& config() const { return cfg_; }

private:
    struct Cache;
    ExperimentConfig cfg_;
    std::unique_ptr<Cache> cache_;
};

struct ExperimentReport {
    json config;
    std::vector<CriterionResult> results;
    double wall_clock = 0.0;
    std::vector<std::string> manifest;
    std::string tool_version = kToolVersion;
    int exit_code = kExitPass;

    [[nodiscard]] json to_json() const;
};

/// Worst code over the results: 3 and 2 pass through, then 1 for any failed verdict.
int aggregate_exit(const std::vector<CriterionResult>& results);

/// Executes cfg.experiment; writes report.json, config.json and the CSVs below cfg.out_dir.
ExperimentReport run(const ExperimentConfig& cfg);
/// Writes the artifacts, config.json and report.json of `rep` below `out_dir`; fills the manifest.
void write_outputs(ExperimentReport& rep, const std::string& out_dir);

struct SweepRow {
    std::size_t index = 0;
    json point;  // the overrides of this run
    std::size_t verdicts = 0;
    std::size_t failed = 0;
    double min_margin = 0.0;
    int exit_code = 0;
    std::string note;
};

struct SweepReport {
    std::vector<SweepRow> rows;
    std::vector<ExperimentReport> runs;
    int exit_code = kExitPass;
    [[nodiscard]] std::string csv() const;
    [[nodiscard]] json to_json() const;
};

/// Parameter sets of cfg.sweep: {"grid": {"solver.A": [..], ...}} (Cartesian, keys in sorted
/// order) or {"points": [{"solver.A": 1.02}, ...]}.
std::vector<json> sweep_points(const ExperimentConfig& cfg);
/// Applies dotted overrides ("solver.A") to a copy of the config.
ExperimentConfig with_overrides(const ExperimentConfig& cfg, const json& point);

/// Independent runs on `jobs` workers, each in out_dir/run_NNNN; one CSV row per run.
SweepReport sweep(const ExperimentConfig& cfg, std::size_t jobs);

/// Reads report.json files below `dir` (the directory itself or run_* subdirectories).
std::vector<json> read_reports(const std::string& dir);

}  // namespace blowup::experiment
