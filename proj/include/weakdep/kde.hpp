#pragma once

// Kernel density estimation (full sample and subsampled), bandwidth
// admissibility, the exponent-calculus zone engine and the rate planners.

#include "weakdep/dependence.hpp"
#include "weakdep/error.hpp"
#include "weakdep/json_io.hpp"
#include "weakdep/rational.hpp"
#include "weakdep/stats.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <variant>

namespace weakdep {

// ---------------------------------------------------------------------------
// Kernels
// ---------------------------------------------------------------------------

struct KernelSpec {
    std::function<double(double)> K;
    std::function<double(double)> dK;
    int order = 2;
    double moment_p = 1.0;  ///< int t^p K(t) dt
    double l2 = 0.0;        ///< int K^2(t) dt
    double sup_norm = 0.0;
    double lipschitz = 0.0;
    std::string name;

    double operator()(double t) const { return K(t); }
};

namespace detail {

/// max |g| over [0, 12] for an even or odd g: fine grid then golden-section refinement.
inline double sup_abs_symmetric(const std::function<double(double)>& g) {
    const double step = 1e-3;
    double best = 0.0, arg = 0.0;
    for (double x = 0.0; x <= 12.0; x += step) {
        const double v = std::fabs(g(x));
        if (v > best) {
            best = v;
            arg = x;
        }
    }
    double a = std::max(0.0, arg - step), b = arg + step;
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int i = 0; i < 100; ++i) {
        const double c = b - phi * (b - a), d = a + phi * (b - a);
        if (std::fabs(g(c)) > std::fabs(g(d)))
            b = d;
        else
            a = c;
    }
    return std::max(best, std::fabs(g(0.5 * (a + b))));
}

}  // namespace detail

/// Gaussian-based kernel of order p in {2, 4, 6}: polynomial times phi with
/// vanishing moments 1..p-1.
inline KernelSpec kernel_gaussian_order(int p = 2) {
    KernelSpec k;
    k.order = p;
    const double inv_sqrt_pi = 1.0 / std::sqrt(std::numbers::pi);
    switch (p) {
        case 2:
            k.K = [](double t) { return normal_pdf(t); };
            k.dK = [](double t) { return -t * normal_pdf(t); };
            k.moment_p = 1.0;
            k.l2 = 0.5 * inv_sqrt_pi;
            k.name = "gaussian2";
            break;
        case 4:
            k.K = [](double t) { return 0.5 * (3.0 - t * t) * normal_pdf(t); };
            k.dK = [](double t) { return 0.5 * (t * t * t - 5.0 * t) * normal_pdf(t); };
            k.moment_p = -3.0;
            k.l2 = 27.0 / 32.0 * inv_sqrt_pi;
            k.name = "gaussian4";
            break;
        case 6:
            k.K = [](double t) {
                const double t2 = t * t;
                return (15.0 - 10.0 * t2 + t2 * t2) * normal_pdf(t) / 8.0;
            };
            k.dK = [](double t) {
                const double t2 = t * t;
                return (-t2 * t2 * t + 14.0 * t2 * t - 35.0 * t) * normal_pdf(t) / 8.0;
            };
            k.moment_p = 15.0;
            k.l2 = 2265.0 / 2048.0 * inv_sqrt_pi;
            k.name = "gaussian6";
            break;
        default: throw SpecError("kernel_gaussian_order: order must be 2, 4 or 6");
    }
    k.sup_norm = detail::sup_abs_symmetric(k.K);
    k.lipschitz = detail::sup_abs_symmetric(k.dK);
    return k;
}

inline KernelSpec kernel_from_name(const std::string& name) {
    if (name == "gaussian2" || name == "gaussian") return kernel_gaussian_order(2);
    if (name == "gaussian4") return kernel_gaussian_order(4);
    if (name == "gaussian6") return kernel_gaussian_order(6);
    throw SpecError("unknown kernel '" + name + "' (use gaussian2, gaussian4 or gaussian6)");
}

// ---------------------------------------------------------------------------
// Estimators
// ---------------------------------------------------------------------------

/// (1/(n h)) sum_i K((x - X_i)/h)
inline double kde_evaluate(std::span<const double> path, double x, double h, const KernelSpec& kernel) {
    require(h > 0.0, "kde_evaluate: bandwidth must be positive");
    require(!path.empty(), "kde_evaluate: empty path");
    CompensatedSum s;
    for (double xi : path) s.add(kernel.K((x - xi) / h));
    return s.value() / (static_cast<double>(path.size()) * h);
}

/// KDE over X_{m}, X_{2m}, ..., X_{k m}, k = floor(len / m).
inline double kde_subsampled(std::span<const double> path, std::int64_t m_n, double x, double h,
                             const KernelSpec& kernel) {
    require(h > 0.0, "kde_subsampled: bandwidth must be positive");
    require(m_n >= 1, "kde_subsampled: m_n must be >= 1");
    require(!path.empty() && static_cast<std::size_t>(m_n) <= path.size(), "kde_subsampled: m_n exceeds the path length");
    const std::size_t k = path.size() / static_cast<std::size_t>(m_n);
    CompensatedSum s;
    const auto step = static_cast<std::size_t>(m_n);
    for (std::size_t j = step - 1; j < k * step; j += step) s.add(kernel.K((x - path[j]) / h));
    return s.value() / (static_cast<double>(k) * h);
}

inline double variance_target(double fx, const KernelSpec& kernel) {
    require(fx >= 0.0, "variance_target: density value must be >= 0");
    return fx * kernel.l2;
}

/// h^p f^{(p)}(x) moment_p / p!
inline double bias_prediction(double fx_deriv, const KernelSpec& kernel, double h) {
    return std::pow(h, kernel.order) * fx_deriv * kernel.moment_p / std::tgamma(kernel.order + 1.0);
}

// ---------------------------------------------------------------------------
// Full-sample bandwidth condition
// ---------------------------------------------------------------------------

/// lambda: e > 5 and max(2/(e-4), 5/(2e-5)) < h < 1; theta: e > 3 and 0 < h < 1.
inline bool full_sample_bandwidth_ok(DependenceKind kind, const Rational& e, const Rational& h) {
    if (!(h > Rational(0) && h < Rational(1))) return false;
    if (kind == DependenceKind::Theta) return e > Rational(3);
    if (!(e > Rational(5))) return false;
    const Rational lower = rmax(Rational(2) / (e - Rational(4)), Rational(5) / (Rational(2) * e - Rational(5)));
    return h > lower;
}

inline bool full_sample_bandwidth_ok(DependenceKind kind, double e, double h) {
    return full_sample_bandwidth_ok(kind, rational_from_double(e), rational_from_double(h));
}

// ---------------------------------------------------------------------------
// Zone engine
// ---------------------------------------------------------------------------

/// n-exponent of sum_{l=1}^{k_n} min(h_n, k_n v_{k_n,k_n,m_n l}) with
/// k_n = n^{1-m}, h_n = n^{-h}, m_n = n^m, and k_n v = n^beta l^{-e}.
struct ZoneExponent {
    Rational beta{0};
    Rational crossover{0};  ///< s with l* = n^s
    Rational exponent{0};   ///< E
    std::string regime;
    bool log_factor = false;
};

inline ZoneExponent zone_exponent(DependenceKind kind, const Rational& e, const Rational& m, const Rational& h) {
    require(e > Rational(0), "zone_exponent: e must be positive");
    const Rational kappa = Rational(1) - m;
    ZoneExponent z;
    if (kind == DependenceKind::Theta) {
        z.beta = Rational(2) * h - e * m;
    } else {
        const Rational inner = rmax(-kappa + Rational(3) * h, -kappa / Rational(2) + Rational(3) * h / Rational(2));
        z.beta = Rational(3) * kappa + inner - e * m;
    }
    z.crossover = (z.beta + h) / e;
    const Rational& s = z.crossover;
    if (s >= kappa) {
        z.exponent = kappa - h;
        z.regime = "bandwidth-capped";
    } else if (e > Rational(1)) {
        if (s > Rational(0)) {
            z.exponent = s - h;
            z.regime = "split";
        } else {
            z.exponent = z.beta;
            z.regime = "tail";
        }
    } else if (e == Rational(1)) {
        z.exponent = s > Rational(0) ? s - h : z.beta;
        z.regime = s > Rational(0) ? "split" : "tail";
        z.log_factor = true;
    } else {
        z.exponent = z.beta + (Rational(1) - e) * kappa;
        z.regime = s > Rational(0) ? "split" : "tail";
    }
    return z;
}

/// True iff m + h < 1 and the bound's n-exponent is strictly negative.
inline bool admissible_zone(DependenceKind kind, const Rational& e, const Rational& m, const Rational& h) {
    require(m > Rational(0) && m < Rational(1) && h > Rational(0) && h < Rational(1),
            "admissible_zone: m and h must lie in (0,1)");
    if (!(m + h < Rational(1))) return false;
    return zone_exponent(kind, e, m, h).exponent < Rational(0);
}

inline bool admissible_zone(DependenceKind kind, double e, double m, double h) {
    return admissible_zone(kind, rational_from_double(e), rational_from_double(m), rational_from_double(h));
}

// ---------------------------------------------------------------------------
// Optimal plans
// ---------------------------------------------------------------------------

/// base + coeff * eps
struct EpsAffine {
    Rational base{0};
    Rational coeff{0};

    Rational at(const Rational& eps) const { return base + coeff * eps; }
    std::string str() const {
        if (coeff == Rational(0)) return to_string(base);
        const std::string sign = coeff > Rational(0) ? " + " : " - ";
        const Rational a = coeff > Rational(0) ? coeff : -coeff;
        return to_string(base) + sign + (a == Rational(1) ? std::string() : to_string(a)) + "eps";
    }
};

struct Regularity {
    enum class Kind { None, Integer, Fractional };
    Kind kind = Kind::None;
    int p = 0;
    Rational rho{0};

    static Regularity none() { return {}; }
    static Regularity integer(int p) { return {Kind::Integer, p, Rational(p)}; }
    static Regularity fractional(const Rational& rho) { return {Kind::Fractional, 0, rho}; }
};

struct BandwidthPlan {
    DependenceKind kind = DependenceKind::Lambda;
    Rational e{0};
    Regularity regularity;
    std::string source;  ///< which closed form produced the plan
    EpsAffine h, m, rate;
    Rational realization_eps{1, 100};
    Rational h_realized{0}, m_realized{0};
    bool subsampled = true;  ///< false only for the full-sample fallback
    bool admissible = false;
    std::string note;
};

/// The eps at which plan flags are evaluated.
inline const Rational& plan_realization_eps() {
    static const Rational eps(1, 100);
    return eps;
}

/// Concrete (m, h) for a plan: m picks up at least one eps so exact boundary
/// optima move inside; an eps-sized h shrinks to eps/4 so it cannot cancel m's margin.
inline void realize(BandwidthPlan& plan) {
    const Rational& eps = plan_realization_eps();
    plan.realization_eps = eps;
    const Rational mc = rmax(plan.m.coeff, Rational(1));
    plan.m_realized = plan.subsampled ? plan.m.base + mc * eps : Rational(0);
    plan.h_realized = plan.h.base + plan.h.coeff * eps / Rational(4);
    if (!plan.subsampled) {
        plan.admissible = full_sample_bandwidth_ok(plan.kind, plan.e, plan.h_realized);
        return;
    }
    const bool in_square = plan.m_realized > Rational(0) && plan.m_realized < Rational(1) &&
                           plan.h_realized > Rational(0) && plan.h_realized < Rational(1);
    plan.admissible = in_square && admissible_zone(plan.kind, plan.e, plan.m_realized, plan.h_realized);
}

namespace detail {

inline BandwidthPlan regularity_plan(DependenceKind kind, const Rational& e, int p, bool fractional) {
    const Rational one(1), ev = rmax(e, one), pr(p);
    const Rational D = kind == DependenceKind::Lambda ? Rational(5) + pr * (Rational(5) + Rational(2) * ev)
                                                      : Rational(3) + Rational(2) * pr * ev;
    BandwidthPlan plan;
    plan.kind = kind;
    plan.e = e;
    plan.h = {e / D, 0};
    plan.m = {one - e * (Rational(2) * pr + one) / D, fractional ? Rational(2) : Rational(0)};
    plan.rate = {pr * e / D, fractional ? Rational(-1) : Rational(0)};
    plan.source = fractional ? "subsampled-kde fractional regularity" : "subsampled-kde integer regularity";
    return plan;
}

}  // namespace detail

/// Closed-form (h, m, rate) exponents: the subsampled-KDE optimum without
/// regularity, or the regularity-p (integer) / regularity-rho (fractional) plans.
inline BandwidthPlan optimal_plan(DependenceKind kind, const Rational& e, const Regularity& reg = Regularity::none()) {
    require(e > Rational(0), "optimal_plan: e must be positive");
    const Rational one(1), zero(0);
    BandwidthPlan plan;
    plan.kind = kind;
    plan.e = e;
    plan.regularity = reg;
    if (reg.kind == Regularity::Kind::None) {
        if (kind == DependenceKind::Lambda) {
            require(e <= Rational(6), "optimal_plan: lambda plan without regularity needs 0 < e <= 6");
            const Rational D = Rational(5) + Rational(2) * rmax(e, one);
            plan.rate = {e / D, -1};
            plan.h = {zero, 1};
            if (e >= one) {
                plan.m = {Rational(5) / D, 1};
            } else {
                // For e < 1, m = 5/7 does not give a vanishing bound;
                // 1 - 2e/7 is the exponent that gives the rate e/7.
                plan.m = {one - Rational(2) * e / Rational(7), 1};
                plan.note = "m corrected to 1 - 2e/7 for e < 1";
            }
        } else {
            require(e <= Rational(3), "optimal_plan: theta plan without regularity needs 0 < e <= 3");
            plan.rate = {rmin(e, one) / Rational(2), -1};
            plan.h = {zero, 1};
            plan.m = {rmax(one - e, zero), 1};
        }
        plan.source = "subsampled-kde";
        realize(plan);
        return plan;
    }

    int p = reg.p;
    bool fractional = false;
    if (reg.kind == Regularity::Kind::Fractional) {
        require(reg.rho.denominator() != 1, "optimal_plan: rho must not be an integer (use integer regularity)");
        require(reg.rho > one, "optimal_plan: rho must exceed 1 so that [rho] >= 1");
        p = static_cast<int>(reg.rho.numerator() / reg.rho.denominator());
        fractional = true;
    }
    require(p >= 1, "optimal_plan: regularity p must be >= 1");
    const Rational pr(p);
    if (kind == DependenceKind::Lambda) {
        require(e <= Rational(5) * pr + Rational(5), "optimal_plan: lambda plan needs 0 < e <= 5p + 5");
        plan = detail::regularity_plan(kind, e, p, fractional);
    } else {
        require(e <= pr + Rational(3), "optimal_plan: theta plan needs 0 < e <= p + 3");
        plan = detail::regularity_plan(kind, e, p, fractional);
        if (plan.m.base < zero) {
            // theta in (3, p+3]: the full sample already satisfies the CLT, use h = 1/(2p+1).
            plan.m = {zero, 0};
            plan.h = {one / (Rational(2) * pr + one), fractional ? Rational(1) : Rational(0)};
            plan.rate = {pr / (Rational(2) * pr + one), fractional ? Rational(-1) : Rational(0)};
            plan.source = "full-sample kde";
            plan.subsampled = false;
            plan.note = "theta > 3: no subsampling needed, full-sample bandwidth n^{-1/(2p+1)}";
        }
    }
    plan.regularity = reg;
    realize(plan);
    return plan;
}

inline BandwidthPlan optimal_plan(DependenceKind kind, double e, const Regularity& reg = Regularity::none()) {
    return optimal_plan(kind, rational_from_double(e), reg);
}

inline Json to_json(const EpsAffine& a) {
    return Json{{"expr", a.str()}, {"base", to_string(a.base)}, {"eps_coeff", to_string(a.coeff)},
                {"base_value", to_double(a.base)}};
}

inline Json to_json(const BandwidthPlan& p) {
    Json j;
    j["kind"] = to_string(p.kind);
    j["e"] = to_string(p.e);
    switch (p.regularity.kind) {
        case Regularity::Kind::None: j["regularity"] = nullptr; break;
        case Regularity::Kind::Integer: j["regularity"] = Json{{"p", p.regularity.p}}; break;
        case Regularity::Kind::Fractional: j["regularity"] = Json{{"rho", to_string(p.regularity.rho)}}; break;
    }
    j["source"] = p.source;
    j["h_exponent"] = to_json(p.h);
    j["m_exponent"] = to_json(p.m);
    j["rate_exponent"] = to_json(p.rate);
    j["realization"] = Json{{"eps", to_string(p.realization_eps)},
                            {"m", to_string(p.m_realized)},
                            {"h", to_string(p.h_realized)}};
    j["admissible"] = p.admissible;
    if (!p.note.empty()) j["note"] = p.note;
    return j;
}

inline Json to_json(const ZoneExponent& z) {
    return Json{{"beta", to_string(z.beta)},
                {"crossover", to_string(z.crossover)},
                {"exponent", to_string(z.exponent)},
                {"exponent_value", to_double(z.exponent)},
                {"regime", z.regime},
                {"log_factor", z.log_factor}};
}

}  // namespace weakdep
