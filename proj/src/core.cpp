#include "blowup/core.hpp"

#include <algorithm>
#include <array>
#include <charconv>

namespace blowup {

double Field1D::sup_abs() const {
    double m = 0.0;
    for (double v : values) m = std::max(m, std::abs(v));
    return m;
}

void Field1D::validate() const {
    if (values.size() < 16) throw PreconditionError("Field1D needs at least 16 samples");
    if (!(x_max > x_min)) throw PreconditionError("Field1D interval is empty");
    for (double v : values)
        if (!std::isfinite(v)) throw PreconditionError("Field1D contains non-finite values");
}

void to_json(json& j, const Verdict& v) {
    j = json{{"lemma", v.lemma},         {"params", v.params}, {"seed", v.seed},
             {"margin", v.margin},       {"tolerance", v.tolerance},
             {"pass", v.pass}};
    if (!v.note.empty()) j["note"] = v.note;
}

bool all_pass(const std::vector<Verdict>& verdicts) {
    return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.pass; });
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc()) return "nan";
    return std::string(buf.data(), ptr);
}

}  // namespace blowup
