#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "blowup/experiment.hpp"

using namespace blowup;
using namespace blowup::experiment;

namespace {

ExperimentConfig small_cascade() {
    ExperimentConfig c;
    c.experiment = "cascade-lemmas";
    c.cascade.trials = 12;
    c.cascade.monotone_trials = 6;
    return c;
}

std::string find(const CriterionResult& r, const std::string& suffix) {
    for (const auto& a : r.artifacts)
        if (a.name.size() >= suffix.size() && a.name.compare(a.name.size() - suffix.size(), suffix.size(), suffix) == 0)
            return a.content;
    return {};
}

}  // namespace

TEST_CASE("config: round trip, defaults and rejection of unknown keys") {
    auto c = small_cascade();
    c.seed = 17;
    c.tolerances["c1.rel"] = 1e-7;
    c.solver.t_end = -0.05;
    auto back = ExperimentConfig::from_json(c.to_json());
    CHECK(back.to_json() == c.to_json());
    CHECK(back.tol("c1.rel") == 1e-7);
    CHECK(back.tol("c2.quad") == 1e-9);

    for (const char* bad : {R"({"bogus": 1})", R"({"cascade": {"levels": 3}})", R"({"solver": {"A": 2.5}})",
                            R"({"axisym": {"closure": {"D": 0.1}}})", R"({"tolerances": {"c99.x": 1}})",
                            R"({"tolerances": {"c1.rel": -1}})", R"({"experiment": "c13"})",
                            R"({"seed": "seven"})", R"({"sweep": {"grid": {"solver.A": 1.02}}})",
                            R"({"sweep": {"points": [{"solver.bogus": 1}]}})"}) {
        CAPTURE(bad);
        CHECK_THROWS_AS(ExperimentConfig::from_json(json::parse(bad)), ConfigError);
    }
    CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("presets name the criteria they cover") {
    CHECK(criteria_for("cascade-lemmas") == std::vector<int>{1, 2, 3, 4});
    CHECK(criteria_for("degregorio-n4") == std::vector<int>{7, 9});
    CHECK(criteria_for("c12") == std::vector<int>{12});
    CHECK(criteria_for("solve1d").empty());
    CHECK(criteria_for("all").size() == 12);
    CHECK_THROWS_AS(criteria_for("c0"), ConfigError);
    CHECK_THROWS_AS(criteria_for("c1x"), ConfigError);
}

TEST_CASE("exit codes follow the error taxonomy") {
    CHECK(exit_code_for(ConfigError("x")) == 64);
    CHECK(exit_code_for(BootstrapViolation("x")) == 2);
    CHECK(exit_code_for(ResolutionError("x")) == 3);
    CHECK(exit_code_for(NumericalError("x")) == 1);

    CriterionResult ok;
    Verdict v;
    v.pass = true;
    ok.verdicts = {v};
    CriterionResult bad = ok;
    bad.verdicts[0].pass = false;
    CriterionResult boot = ok;
    boot.abort_code = 2;
    CriterionResult res = ok;
    res.abort_code = 3;
    CHECK(aggregate_exit({}) == 0);
    CHECK(aggregate_exit({ok}) == 0);
    CHECK(aggregate_exit({ok, bad}) == 1);
    CHECK(aggregate_exit({bad, boot}) == 2);
    CHECK(aggregate_exit({boot, res, bad}) == 3);
    CHECK_FALSE(CriterionResult{}.pass());  // no verdicts is not a pass
}

TEST_CASE("cascade preset: every criterion reports, artifacts are reproducible, seeds matter") {
    auto cfg = small_cascade();
    Session a(cfg), b(cfg);
    for (int id = 1; id <= 4; ++id) {
        auto ra = a.criterion(id), rb = b.criterion(id);
        CAPTURE(id);
        CHECK(ra.pass());
        CHECK_FALSE(ra.verdicts.empty());
        for (const auto& v : ra.verdicts) CHECK(v.tolerance >= 0.0);
        REQUIRE(ra.artifacts.size() == rb.artifacts.size());
        for (std::size_t k = 0; k < ra.artifacts.size(); ++k) {
            CHECK(ra.artifacts[k].name == rb.artifacts[k].name);
            CHECK(ra.artifacts[k].content == rb.artifacts[k].content);
        }
    }
    auto other = cfg;
    other.seed = 5;
    Session c(other);
    CHECK(find(c.criterion(2), "trials.csv") != find(a.criterion(2), "trials.csv"));
}

TEST_CASE("verdict CSV leaves out wall-clock verdicts and quotes parameters") {
    Verdict v;
    v.lemma = "x";
    v.params = {{"a", 1}};
    v.pass = true;
    Verdict t = v;
    t.lemma = "runtime";
    auto csv = verdicts_csv({v, t});
    CHECK(csv == "lemma,seed,pass,margin,tolerance,params\nx,0,1,0,0,\"{\"\"a\"\":1}\"\n");
}

TEST_CASE("sweep points: Cartesian grid, listed points, overrides") {
    auto cfg = small_cascade();
    cfg.sweep = json::parse(R"({"grid": {"solver.r": [0.15, 0.2], "solver.A": [1.02, 1.05, 1.1]}})");
    auto pts = sweep_points(cfg);
    REQUIRE(pts.size() == 6);
    CHECK(pts[0] == json::parse(R"({"solver.A": 1.02, "solver.r": 0.15})"));
    CHECK(pts[1] == json::parse(R"({"solver.A": 1.02, "solver.r": 0.2})"));
    CHECK(pts[5] == json::parse(R"({"solver.A": 1.1, "solver.r": 0.2})"));
    auto o = with_overrides(cfg, pts[3]);
    CHECK(o.solver.A == 1.05);
    CHECK(o.solver.r == 0.2);
    CHECK(o.sweep.is_null());
    CHECK_THROWS_AS(with_overrides(cfg, json::parse(R"({"nosuch.x": 1})")), ConfigError);
    CHECK_THROWS_AS(with_overrides(cfg, json::parse(R"({"out_dir": "x"})")), ConfigError);

    cfg.sweep = json::parse(R"({"points": [{"cascade.trials": 3}, {"seed": 4}]})");
    pts = sweep_points(cfg);
    REQUIRE(pts.size() == 2);
    CHECK(with_overrides(cfg, pts[1]).seed == 4);
}

TEST_CASE("sweep: empty list passes, a single point equals the plain run, repeats are identical") {
    const auto root = std::filesystem::temp_directory_path() / "blowup_experiment_sweep";
    std::filesystem::remove_all(root);
    auto cfg = small_cascade();
    cfg.experiment = "c4";
    cfg.sweep = json::parse(R"({"points": []})");
    cfg.out_dir = (root / "empty").string();
    auto empty = sweep(cfg, 2);
    CHECK(empty.rows.empty());
    CHECK(empty.exit_code == 0);
    CHECK(std::filesystem::exists(root / "empty" / "sweep.csv"));

    cfg.sweep = json::parse(R"({"points": [{"cascade.monotone_trials": 4}]})");
    cfg.out_dir = (root / "one").string();
    auto one = sweep(cfg, 1);
    REQUIRE(one.rows.size() == 1);
    auto plain_cfg = with_overrides(cfg, one.rows[0].point);
    plain_cfg.out_dir.clear();
    auto plain = run(plain_cfg);
    CHECK(one.exit_code == plain.exit_code);
    REQUIRE(one.runs[0].results.size() == 1);
    CHECK(one.runs[0].results[0].artifacts[0].content == plain.results[0].artifacts[0].content);

    cfg.sweep = json::parse(R"({"grid": {"cascade.monotone_trials": [2, 3, 4]}})");
    cfg.out_dir = (root / "rep1").string();
    auto r1 = sweep(cfg, 3);
    cfg.out_dir = (root / "rep2").string();
    auto r2 = sweep(cfg, 1);
    CHECK(r1.csv() == r2.csv());
    CHECK(r1.rows.size() == 3);
    CHECK(std::filesystem::exists(root / "rep1" / "run_0002" / "c04" / "trials.csv"));
    CHECK(read_reports((root / "rep1").string()).size() == 3);
    std::filesystem::remove_all(root);
}

TEST_CASE("run writes the manifest it reports") {
    const auto root = std::filesystem::temp_directory_path() / "blowup_experiment_run";
    std::filesystem::remove_all(root);
    auto cfg = small_cascade();
    cfg.experiment = "c1";
    cfg.out_dir = root.string();
    auto rep = run(cfg);
    CHECK(rep.exit_code == 0);
    for (const auto& name : rep.manifest) CHECK(std::filesystem::exists(root / name));
    auto j = rep.to_json();
    CHECK(j["tool_version"] == kToolVersion);
    CHECK(j["results"][0]["verdicts"].size() >= 1);
    auto back = read_reports(root.string());
    REQUIRE(back.size() == 1);
    CHECK(back[0]["exit_code"] == 0);
    CHECK(back[0]["config"] == cfg.to_json());
    std::filesystem::remove_all(root);
}
