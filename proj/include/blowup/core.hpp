#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace blowup {

using json = nlohmann::json;

inline constexpr double kPi = 3.141592653589793238462643383279502884;

// Error taxonomy. Each category maps onto one CLI exit code (see experiment.hpp).

/// A parameter lies outside the domain where the construction is defined.
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// An input violates an operation's stated precondition.
class PreconditionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical procedure could not deliver its result (no root, step underflow, ...).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A grid is too coarse for the data it is asked to carry.
class ResolutionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A run left the bootstrap window (support escaped, or a profile drifted too far).
class BootstrapViolation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or unknown configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Uniformly sampled scalar field on [x_min, x_max], endpoints included.
struct Field1D {
    double x_min = 0.0;
    double x_max = 1.0;
    std::vector<double> values;
    std::optional<double> time;

    Field1D() = default;
    Field1D(double lo, double hi, std::vector<double> v, std::optional<double> t = {})
        : x_min(lo), x_max(hi), values(std::move(v)), time(t) {}

    /// Samples `f` at `n` uniform points.
    template <class F>
    static Field1D sample(double lo, double hi, std::size_t n, F&& f) {
        Field1D out(lo, hi, std::vector<double>(n));
        for (std::size_t i = 0; i < n; ++i) out.values[i] = f(out.x(i));
        return out;
    }

    [[nodiscard]] std::size_t size() const { return values.size(); }
    [[nodiscard]] double dx() const { return (x_max - x_min) / static_cast<double>(values.size() - 1); }
    [[nodiscard]] double x(std::size_t i) const { return x_min + static_cast<double>(i) * dx(); }
    [[nodiscard]] double sup_abs() const;

    /// Throws PreconditionError unless the field has >= 16 finite samples on a proper interval.
    void validate() const;
};

/// Outcome of a single numerical check, always carrying the tolerance it was judged against.
struct Verdict {
    std::string lemma;
    json params = json::object();
    std::uint64_t seed = 0;
    double margin = 0.0;  // positive = satisfied with room to spare
    double tolerance = 0.0;
    bool pass = false;
    std::string note;
};

void to_json(json& j, const Verdict& v);

/// Aggregate pass over a list of verdicts; an empty list passes.
bool all_pass(const std::vector<Verdict>& verdicts);

/// Shortest round-trip decimal representation of a double.
std::string format_double(double v);

}  // namespace blowup
