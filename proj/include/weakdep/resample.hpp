#pragma once

// Subsampling planner and the subsampled-mean statistic.

#include "weakdep/dependence.hpp"
#include "weakdep/error.hpp"
#include "weakdep/json_io.hpp"
#include "weakdep/rational.hpp"
#include "weakdep/stats.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>

namespace weakdep {

/// Open lower bound on the subsampling exponent m.
struct SubsampleBound {
    DependenceKind kind = DependenceKind::Lambda;
    std::optional<Rational> exponent;  ///< envelope exponent e; empty for exponential envelopes
    Rational bound{0};                 ///< admissible iff m > bound
    std::string binding;

    bool admits(double m) const { return m > to_double(bound); }
};

/// Solves -e m + (1-m)/2 < 0 (theta) or -e m + 3(1-m)/2 < 0 (lambda) exactly.
inline SubsampleBound plan_subsample_mean(DependenceKind kind, std::optional<Rational> e) {
    SubsampleBound b;
    b.kind = kind;
    b.exponent = e;
    if (!e) {
        b.bound = Rational(0);
        b.binding = "exponential envelope: every m > 0";
        return b;
    }
    require(*e > Rational(0), "plan_subsample_mean: exponent e must be positive");
    if (kind == DependenceKind::Theta) {
        b.bound = Rational(1) / (Rational(1) + Rational(2) * *e);
        b.binding = "theta_{m_n} sqrt(k_n) -> 0";
    } else {
        b.bound = Rational(3) / (Rational(3) + Rational(2) * *e);
        b.binding = "lambda_{m_n} k_n^{3/2} -> 0";
    }
    return b;
}

inline SubsampleBound plan_subsample_mean(const DecayProfile& profile) {
    const auto e = profile.dominant_power_exponent();
    return plan_subsample_mean(profile.kind, e ? std::optional<Rational>(rational_from_double(*e)) : std::nullopt);
}

struct SubsamplePlan {
    std::int64_t n = 0;
    double m_exponent = 0.0;
    std::int64_t m_n = 1;
    std::int64_t k_n = 0;
    bool feasible = false;
    std::string binding;
    Rational bound{0};
};

/// m_n = max(1, round(n^m)), k_n = floor(n / m_n); feasible iff m exceeds the planner bound.
inline SubsamplePlan make_subsample_plan(std::int64_t n, double m, const SubsampleBound& bound) {
    require(n >= 1, "make_subsample_plan: n must be >= 1");
    require(m >= 0.0 && m < 1.0, "make_subsample_plan: m must lie in [0,1)");
    SubsamplePlan p;
    p.n = n;
    p.m_exponent = m;
    p.m_n = std::max<std::int64_t>(1, std::llround(std::pow(static_cast<double>(n), m)));
    p.k_n = n / p.m_n;
    p.feasible = bound.admits(m) && p.k_n >= 1;
    p.binding = bound.binding;
    p.bound = bound.bound;
    return p;
}

/// S = k^{-1/2} sum_{i=1}^{k} X_{i m_n}, k = floor(len / m_n).
inline double subsampled_mean(std::span<const double> path, std::int64_t m_n) {
    require(m_n >= 1, "subsampled_mean: m_n must be >= 1");
    require(static_cast<std::size_t>(m_n) <= path.size(), "subsampled_mean: m_n exceeds the path length");
    const std::size_t k = path.size() / static_cast<std::size_t>(m_n);
    CompensatedSum s;
    for (std::size_t i = 1; i <= k; ++i) s.add(path[i * static_cast<std::size_t>(m_n) - 1]);
    return s.value() / std::sqrt(static_cast<double>(k));
}

inline Json to_json(const SubsampleBound& b) {
    Json j;
    j["kind"] = to_string(b.kind);
    j["exponent"] = b.exponent ? Json(to_string(*b.exponent)) : Json(nullptr);
    j["m_lower_bound"] = to_string(b.bound);
    j["m_lower_bound_value"] = to_double(b.bound);
    j["binding"] = b.binding;
    return j;
}

inline Json to_json(const SubsamplePlan& p) {
    return Json{{"n", p.n},         {"m_exponent", p.m_exponent}, {"m_n", p.m_n},
                {"k_n", p.k_n},     {"feasible", p.feasible},     {"binding", p.binding},
                {"m_lower_bound", to_string(p.bound)}};
}

}  // namespace weakdep
