// Acceptance run: one line per criterion, then a byte comparison of a second pass (criterion 13).
// Usage: acceptance [OUT_DIR]

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "blowup/experiment.hpp"

using namespace blowup;
using namespace blowup::experiment;

namespace {

std::vector<CriterionResult> pass_over(const ExperimentConfig& cfg, bool print) {
    Session session(cfg);
    std::vector<CriterionResult> out;
    for (int id = 1; id <= 12; ++id) {
        CriterionResult r;
        try {
            r = session.criterion(id);
        } catch (const std::exception& e) {
            r.id = id;
            r.title = "criterion " + std::to_string(id);
            r.summary = std::string("error: ") + e.what();
            r.abort_code = exit_code_for(e);
        }
        if (print) {
            std::printf("criterion %2d: %s  %s: %s (%.1f s)\n", id, r.pass() ? "PASS" : "FAIL", r.title.c_str(),
                        r.summary.c_str(), r.seconds);
            for (const auto& v : r.verdicts)
                if (!v.pass)
                    std::printf("              failed %s: margin %s, tolerance %s\n", v.lemma.c_str(),
                                format_double(v.margin).c_str(), format_double(v.tolerance).c_str());
            std::fflush(stdout);
        }
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    ExperimentConfig cfg;
    cfg.experiment = "all";
    if (argc > 1) cfg.out_dir = argv[1];

    const auto t0 = std::chrono::steady_clock::now();
    ExperimentReport rep;
    rep.config = cfg.to_json();
    rep.results = pass_over(cfg, true);
    rep.exit_code = aggregate_exit(rep.results);
    rep.wall_clock = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    // criterion 13: same config and seed, every artifact byte for byte
    auto again = pass_over(cfg, false);
    std::size_t compared = 0, differing = 0;
    std::string first_diff;
    for (std::size_t i = 0; i < rep.results.size(); ++i) {
        const auto& a = rep.results[i].artifacts;
        const auto& b = again[i].artifacts;
        if (a.size() != b.size()) {
            ++differing;
            if (first_diff.empty()) first_diff = "artifact list of criterion " + std::to_string(i + 1);
            continue;
        }
        for (std::size_t k = 0; k < a.size(); ++k) {
            ++compared;
            if (a[k].name != b[k].name || a[k].content != b[k].content) {
                ++differing;
                if (first_diff.empty()) first_diff = a[k].name;
            }
        }
    }
    const bool det = differing == 0 && compared > 0;
    std::printf("criterion 13: %s  determinism: %zu CSV/JSON artifacts compared, %zu differ%s%s\n",
                det ? "PASS" : "FAIL", compared, differing, first_diff.empty() ? "" : ", first ",
                first_diff.c_str());

    std::size_t passed = det ? 1 : 0;
    for (const auto& r : rep.results) passed += r.pass() ? 1 : 0;
    std::printf("%zu of 13 criteria pass\n", passed);

    if (!cfg.out_dir.empty()) write_outputs(rep, cfg.out_dir);
    return passed == 13 ? 0 : 1;
}
