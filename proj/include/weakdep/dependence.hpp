#pragma once

// Theoretical decay profiles eps_r of the weak-dependence coefficients and the
// psi covariance bounds.

#include "weakdep/error.hpp"
#include "weakdep/json_io.hpp"
#include "weakdep/process_spec.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace weakdep {

enum class DependenceKind { Theta, Lambda };

inline std::string to_string(DependenceKind k) { return k == DependenceKind::Theta ? "theta" : "lambda"; }

inline DependenceKind parse_dependence_kind(const std::string& s) {
    if (s == "theta") return DependenceKind::Theta;
    if (s == "lambda") return DependenceKind::Lambda;
    throw SpecError("dependence kind must be 'theta' or 'lambda', got '" + s + "'");
}

/// eps_r = r^-exponent
struct PowerEnvelope {
    double exponent = 1.0;
};
/// eps_r = exp(-c sqrt r)
struct ExpSqrtEnvelope {
    double c = 1.0;
};
/// eps_r = (r / log r)^d, d < 0, r clamped to >= 3
struct PowerLogEnvelope {
    double d = -1.0;
};
/// eps_r = sup_{i >= r} |gamma(i)| for a finitely supported covariance
struct TabulatedEnvelope {
    std::vector<double> cov;
};
/// eps_r = min_{1 <= p <= r} { a^{r/p} + sum_{|j| > p} a_j }
struct InfiniteMemoryEnvelope {
    CoefficientSeq a;
    LagDomain domain = LagDomain::from_one();
};

struct DecayProfile;

/// Sum of the component profiles.
struct SumEnvelope {
    std::vector<std::shared_ptr<const DecayProfile>> parts;
};

using Envelope = std::variant<PowerEnvelope, ExpSqrtEnvelope, PowerLogEnvelope, TabulatedEnvelope,
                              InfiniteMemoryEnvelope, SumEnvelope>;

double infinite_memory_theta(const CoefficientSeq& a, std::int64_t r, LagDomain domain = LagDomain::from_one());

struct DecayProfile {
    DependenceKind kind = DependenceKind::Lambda;
    double constant = 1.0;
    Envelope envelope = PowerEnvelope{};

    /// eps_r for r >= 1 (r < 1 is clamped to 1).
    double operator()(std::int64_t r) const {
        r = std::max<std::int64_t>(r, 1);
        const double x = static_cast<double>(r);
        struct V {
            std::int64_t r;
            double x;
            double operator()(const PowerEnvelope& e) const { return std::pow(x, -e.exponent); }
            double operator()(const ExpSqrtEnvelope& e) const { return std::exp(-e.c * std::sqrt(x)); }
            double operator()(const PowerLogEnvelope& e) const {
                const double y = std::max(x, 3.0);
                return std::pow(y / std::log(y), e.d);
            }
            double operator()(const TabulatedEnvelope& e) const {
                double s = 0.0;
                for (std::size_t i = static_cast<std::size_t>(r); i < e.cov.size(); ++i) s = std::max(s, std::fabs(e.cov[i]));
                return s;
            }
            double operator()(const InfiniteMemoryEnvelope& e) const { return infinite_memory_theta(e.a, r, e.domain); }
            double operator()(const SumEnvelope& e) const {
                double s = 0.0;
                for (const auto& p : e.parts) s += (*p)(r);
                return s;
            }
        };
        return constant * std::visit(V{r, x}, envelope);
    }

    /// Power exponent e with eps_r = O(r^-e) up to logs; nullopt when the decay
    /// beats every power.
    std::optional<double> dominant_power_exponent() const {
        struct V {
            std::optional<double> operator()(const PowerEnvelope& e) const { return e.exponent; }
            std::optional<double> operator()(const ExpSqrtEnvelope&) const { return std::nullopt; }
            std::optional<double> operator()(const PowerLogEnvelope& e) const { return -e.d; }
            std::optional<double> operator()(const TabulatedEnvelope&) const { return std::nullopt; }
            std::optional<double> operator()(const InfiniteMemoryEnvelope& e) const {
                if (e.a.form == CoefficientForm::Power) return e.a.exponent - 1.0;
                return std::nullopt;
            }
            std::optional<double> operator()(const SumEnvelope& e) const {
                std::optional<double> best;
                for (const auto& p : e.parts) {
                    const auto q = p->dominant_power_exponent();
                    if (q && (!best || *q < *best)) best = q;
                }
                return best;
            }
        };
        return std::visit(V{}, envelope);
    }

    std::string envelope_name() const {
        struct V {
            std::string operator()(const PowerEnvelope&) const { return "power"; }
            std::string operator()(const ExpSqrtEnvelope&) const { return "exp-sqrt"; }
            std::string operator()(const PowerLogEnvelope&) const { return "power-log"; }
            std::string operator()(const TabulatedEnvelope&) const { return "tabulated"; }
            std::string operator()(const InfiniteMemoryEnvelope&) const { return "infinite-memory"; }
            std::string operator()(const SumEnvelope&) const { return "sum"; }
        };
        return std::visit(V{}, envelope);
    }
};

inline Json to_json(const DecayProfile& p) {
    Json j;
    j["kind"] = to_string(p.kind);
    j["envelope"] = p.envelope_name();
    j["constant"] = p.constant;
    if (const auto* e = std::get_if<PowerEnvelope>(&p.envelope)) j["exponent"] = e->exponent;
    if (const auto* e = std::get_if<ExpSqrtEnvelope>(&p.envelope)) j["c"] = e->c;
    if (const auto* e = std::get_if<PowerLogEnvelope>(&p.envelope)) j["d"] = e->d;
    if (const auto* e = std::get_if<SumEnvelope>(&p.envelope)) {
        Json parts = Json::array();
        for (const auto& q : e->parts) parts.push_back(to_json(*q));
        j["parts"] = parts;
    }
    const auto dom = p.dominant_power_exponent();
    j["power_exponent"] = dom ? Json(*dom) : Json(nullptr);
    return j;
}

/// Exact minimum over integer p in [1, r] of a_total^{r/p} + sum_{|j|>p} a_j.
inline double infinite_memory_theta(const CoefficientSeq& a, std::int64_t r, LagDomain domain) {
    require(r >= 1, "infinite_memory_theta: r must be >= 1");
    const std::int64_t L = a.form == CoefficientForm::Explicit ? a.explicit_extent(domain) : std::int64_t{0};
    const double total = a.abs_sum(L, domain);
    require(total < 1.0, "infinite_memory_theta: a_total must be < 1");
    double best = std::numeric_limits<double>::infinity();
    for (std::int64_t p = 1; p <= r; ++p) {
        const double head = std::pow(total, static_cast<double>(r) / static_cast<double>(p));
        best = std::min(best, head + a.tail_mass(p, domain));
    }
    return best;
}

namespace detail {

inline DecayProfile linear_profile(const CoefficientSeq& a, std::optional<double> mu, DependenceKind kind) {
    DecayProfile p;
    p.kind = kind;
    if (mu) {
        p.envelope = PowerEnvelope{*mu - 0.5};
    } else if (a.form == CoefficientForm::Power) {
        p.envelope = PowerEnvelope{a.exponent - 0.5};
    } else if (a.form == CoefficientForm::Geometric) {
        p.envelope = ExpSqrtEnvelope{-std::log(std::fabs(a.rate))};
    } else {
        p.envelope = ExpSqrtEnvelope{1.0};
    }
    return p;
}

inline DecayProfile natural_profile(const ProcessSpec& s) {
    struct V {
        const ProcessSpec& s;
        DecayProfile operator()(const GaussianStationary& f) const {
            return {DependenceKind::Lambda, 1.0, TabulatedEnvelope{f.cov}};
        }
        DecayProfile operator()(const CausalLinear& f) const {
            return linear_profile(f.a, f.mu, DependenceKind::Theta);
        }
        DecayProfile operator()(const NoncausalLinear& f) const {
            return linear_profile(f.a, f.mu, DependenceKind::Lambda);
        }
        DecayProfile operator()(const ArchInfty& f) const {
            if (f.b.form == CoefficientForm::Power) return {DependenceKind::Lambda, 1.0, PowerEnvelope{f.b.exponent - 1.0}};
            const double c = f.b.form == CoefficientForm::Geometric ? -std::log(std::fabs(f.b.rate)) : 1.0;
            return {DependenceKind::Lambda, 1.0, ExpSqrtEnvelope{c}};
        }
        DecayProfile operator()(const Garch&) const { return {DependenceKind::Lambda, 1.0, ExpSqrtEnvelope{1.0}}; }
        DecayProfile operator()(const CausalBilinear& f) const {
            if (f.profile_d) return {DependenceKind::Lambda, 1.0, PowerLogEnvelope{*f.profile_d}};
            return {DependenceKind::Lambda, 1.0, ExpSqrtEnvelope{1.0}};
        }
        DecayProfile operator()(const NoncausalBilinear& f) const {
            if (f.mu) return {DependenceKind::Lambda, 1.0, PowerEnvelope{*f.mu - 1.0}};
            if (f.a.form == CoefficientForm::Power) return {DependenceKind::Lambda, 1.0, PowerEnvelope{f.a.exponent - 1.0}};
            return {DependenceKind::Lambda, 1.0, ExpSqrtEnvelope{1.0}};
        }
        DecayProfile operator()(const Volterra& f) const {
            if (f.mu) return {DependenceKind::Lambda, 1.0, PowerEnvelope{*f.mu + 1.0}};
            double rate = 0.0;
            for (const auto& k : f.kernels) rate = std::max(rate, k.rate);
            return {DependenceKind::Lambda, 1.0, ExpSqrtEnvelope{rate > 0.0 ? -std::log(rate) : 1.0}};
        }
        DecayProfile operator()(const InfiniteMemory& f) const {
            const auto d = f.causal ? LagDomain::from_one() : LagDomain::two_sided_without_zero();
            return {f.causal ? DependenceKind::Theta : DependenceKind::Lambda, 1.0, InfiniteMemoryEnvelope{f.a, d}};
        }
        DecayProfile operator()(const LongrangeGaussian& f) const {
            return {DependenceKind::Lambda, 1.0, PowerEnvelope{2.0 - 2.0 * f.hurst}};
        }
        DecayProfile operator()(const IndependentSum& f) const {
            SumEnvelope env;
            bool all_theta = true;
            for (const auto& c : f.components) {
                auto part = natural_profile(c);
                all_theta = all_theta && part.kind == DependenceKind::Theta;
                env.parts.push_back(std::make_shared<const DecayProfile>(std::move(part)));
            }
            return {all_theta ? DependenceKind::Theta : DependenceKind::Lambda, 1.0, env};
        }
    };
    return std::visit(V{s}, s.family);
}

}  // namespace detail

/// The family's stated profile. Asking a theta family for lambda returns the same
/// envelope relabelled; asking a lambda family for theta is an error.
inline DecayProfile decay_profile(const ProcessSpec& spec, std::optional<DependenceKind> requested = std::nullopt) {
    validate(spec);
    DecayProfile p = detail::natural_profile(spec);
    if (!requested || *requested == p.kind) return p;
    if (*requested == DependenceKind::Lambda) {
        p.kind = DependenceKind::Lambda;
        return p;
    }
    throw SpecError("family '" + family_name(spec) + "' has no theta (causal) profile");
}

/// psi(u, v, Lip g1, Lip g2) * eps_r.
inline double psi_bound(DependenceKind kind, std::int64_t u, std::int64_t v, double lip1, double lip2, double eps_r) {
    require(u >= 1 && v >= 1, "psi_bound: u and v must be >= 1");
    require(lip1 >= 0.0 && lip2 >= 0.0 && eps_r >= 0.0, "psi_bound: lipschitz constants and eps must be >= 0");
    const double du = static_cast<double>(u), dv = static_cast<double>(v);
    if (kind == DependenceKind::Theta) return dv * lip2 * eps_r;
    return (du * dv * lip1 * lip2 + du * lip1 + dv * lip2) * eps_r;
}

}  // namespace weakdep
