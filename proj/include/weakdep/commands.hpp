#pragma once

// Subcommand runners behind the `weakdep` CLI. Each reads a JSON config,
// writes report.json (plus CSVs) into an output directory and returns the
// exit status: 0 pass, 2 fail. Configuration problems throw SpecError with a
// "<file>:<line>:" prefix.

#include "weakdep/dependence.hpp"
#include "weakdep/error.hpp"
#include "weakdep/harness.hpp"
#include "weakdep/json_io.hpp"
#include "weakdep/kde.hpp"
#include "weakdep/lindeberg.hpp"
#include "weakdep/process_spec.hpp"
#include "weakdep/rational.hpp"
#include "weakdep/resample.hpp"
#include "weakdep/simulate.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace weakdep {

struct RunOptions {
    std::filesystem::path out_dir = ".";
    std::optional<std::uint64_t> seed;
    unsigned workers = 1;
};

/// A parsed config document that remembers its text for line-anchored errors.
class ConfigDoc {
public:
    ConfigDoc(std::string text, std::string source) : text_(std::move(text)), source_(std::move(source)) {
        json_ = parse_json_text(text_, source_);
        if (!json_.is_object()) throw SpecError(source_ + ":1: config must be a JSON object");
    }

    static ConfigDoc load(const std::string& path) { return ConfigDoc(read_text_file(path), path); }

    const Json& json() const { return json_; }
    bool has(const std::string& key) const { return json_.contains(key) && !json_.at(key).is_null(); }

    template <class Fn>
    auto with(const std::string& key, Fn&& fn) const {
        return anchored(text_, source_, key, std::forward<Fn>(fn));
    }

    template <class T>
    T get(const std::string& key) const {
        return with(key, [&] {
            if (!json_.contains(key)) throw SpecError("missing required key");
            return json_.at(key).get<T>();
        });
    }

    template <class T>
    T get_or(const std::string& key, T fallback) const {
        return has(key) ? get<T>(key) : fallback;
    }

    ProcessSpec process() const {
        return with("process", [&] {
            if (!json_.contains("process")) throw SpecError("missing required key");
            return process_spec_from_json(json_.at("process"));
        });
    }

    [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
        throw SpecError(source_ + ":" + std::to_string(key_line(text_, key)) + ": " + key + ": " + msg);
    }

    const std::string& text() const { return text_; }
    const std::string& source() const { return source_; }

private:
    std::string text_, source_;
    Json json_;
};

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline void write_report(const RunOptions& o, const std::string& command, Json payload, bool pass, double secs) {
    write_text_file(o.out_dir / "report.json", weakdep::dump_json(report_document(command, std::move(payload), pass, secs)) + "\n");
}

/// Exponent given as a JSON number or an exact "p/q" string.
inline Rational exponent_from_json(const Json& j) {
    if (j.is_string()) return parse_rational(j.get<std::string>());
    return rational_from_double(j.get<double>());
}

/// (kind, e) either given directly or read off the process' decay profile.
inline std::pair<DependenceKind, std::optional<Rational>> dependence_from(const ConfigDoc& c) {
    std::optional<DependenceKind> kind;
    if (c.has("kind")) kind = c.with("kind", [&] { return parse_dependence_kind(c.json().at("kind").get<std::string>()); });
    if (c.has("process")) {
        const DecayProfile prof = c.with("process", [&] { return decay_profile(c.process(), kind); });
        const auto e = prof.dominant_power_exponent();
        return {prof.kind, e ? std::optional<Rational>(rational_from_double(*e)) : std::nullopt};
    }
    if (!kind) c.fail("kind", "either 'process' or both 'kind' and 'e' are required");
    if (!c.has("e")) c.fail("e", "missing required key");
    return {*kind, c.with("e", [&] { return exponent_from_json(c.json().at("e")); })};
}

inline RowMap row_map_from(const ConfigDoc& c) {
    if (!c.has("rows")) return RowMap::scaled_mean();
    return c.with("rows", [&] {
        const Json& r = c.json().at("rows");
        if (r.is_string()) {
            const auto s = r.get<std::string>();
            if (s == "scaled-mean") return RowMap::scaled_mean();
            if (s == "identity") return RowMap::identity();
            throw SpecError("rows must be 'scaled-mean', 'identity' or {\"subsampled\": step}");
        }
        return RowMap::subsampled(r.at("subsampled").get<std::int64_t>());
    });
}

inline TestFunction test_function_from(const ConfigDoc& c) {
    return c.with("test_function", [&] {
        const Json& f = c.json().at("test_function");
        const auto type = f.at("type").get<std::string>();
        if (type == "char") {
            const double t = f.at("t").get<double>();
            require(t != 0.0, "t must be nonzero");
            return TestFunction::characteristic(t);
        }
        if (type == "sine") return TestFunction::sine(f.value("w", 1.0));
        if (type == "cosine") return TestFunction::cosine(f.value("w", 1.0));
        if (type == "linear") return TestFunction::linear(f.value("slope", 1.0));
        throw SpecError("test_function.type must be char, sine, cosine or linear");
    });
}

inline Regularity regularity_from(const ConfigDoc& c) {
    if (!c.has("regularity")) return Regularity::none();
    return c.with("regularity", [&] {
        const Json& r = c.json().at("regularity");
        if (r.contains("p")) return Regularity::integer(r.at("p").get<int>());
        if (r.contains("rho")) return Regularity::fractional(exponent_from_json(r.at("rho")));
        throw SpecError("regularity needs 'p' or 'rho'");
    });
}

}  // namespace detail

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

inline int run_simulate(const ConfigDoc& c, const RunOptions& o) {
    const auto t0 = std::chrono::steady_clock::now();
    const ProcessSpec spec = c.process();
    const auto n = c.get<std::int64_t>("n");
    if (n < 1) c.fail("n", "must be >= 1");
    const std::uint64_t seed = o.seed ? *o.seed : c.get_or<std::uint64_t>("seed", 1);
    const Path p = c.with("process", [&] { return simulate(spec, n, seed); });
    std::string csv = "index,value\n";
    for (std::size_t i = 0; i < p.values.size(); ++i) csv += std::to_string(i + 1) + "," + format_double(p.values[i]) + "\n";
    write_text_file(o.out_dir / "path.csv", csv);
    Json payload;
    payload["process"] = to_json(spec);
    payload["n"] = n;
    payload["seed"] = seed;
    payload["truncation_lag"] = truncation_lag(spec);
    payload["burn_in_length"] = burn_in_length(spec);
    payload["summary"] = Json{{"mean", mean(p.values)},
                              {"variance", p.values.size() > 1 ? sample_variance(p.values) : 0.0}};
    detail::write_report(o, "simulate", payload, true, detail::seconds_since(t0));
    return 0;
}

// ---------------------------------------------------------------------------
// diagnose
// ---------------------------------------------------------------------------

/// Combined standard error of Delta_hat and the estimated bound terms.
inline double combined_se(const LindebergReport& r) {
    double v = r.delta_hat.se * r.delta_hat.se;
    if (r.lemma == Lemma::Three && r.T_hat) v += r.T_hat->se * r.T_hat->se;
    if (r.lemma == Lemma::Two) {
        if (r.T1_hat) v += r.T1_hat->se * r.T1_hat->se;
        if (r.T2_hat) v += 0.25 * r.T2_hat->se * r.T2_hat->se;
    }
    return std::sqrt(v);
}

inline bool lemma_holds(const LindebergReport& r, double se_multiplier = 4.0) {
    return r.delta_hat.value <= r.bound + se_multiplier * combined_se(r);
}

inline int run_diagnose(const ConfigDoc& c, const RunOptions& o) {
    const auto t0 = std::chrono::steady_clock::now();
    const ProcessSpec spec = c.process();
    const auto k = c.get<std::int64_t>("k");
    if (k < 1) c.fail("k", "must be >= 1");
    const auto R = c.get<std::int64_t>("replicates");
    if (R < 100) c.fail("replicates", "must be >= 100 (got " + std::to_string(R) + ")");
    const double delta = c.get_or<double>("delta", 1.0);
    if (!(delta > 0.0 && delta <= 1.0)) c.fail("delta", "must lie in (0,1]");
    const double eps = c.get_or<double>("epsilon", 0.1);
    if (eps < 0.0) c.fail("epsilon", "must be >= 0");
    const bool independent = c.get_or<bool>("independent", false);
    const RowMap map = detail::row_map_from(c);
    const TestFunction f = detail::test_function_from(c);
    const std::uint64_t seed = o.seed ? *o.seed : c.get_or<std::uint64_t>("seed", 1);
    const RowEnsemble ens = c.with("process", [&] {
        return sample_rows(spec, map, k, static_cast<std::size_t>(R), seed, o.workers);
    });
    const LindebergReport rep = lindeberg_report(ens, f, delta, eps, independent);
    const bool pass = lemma_holds(rep);
    Json payload;
    payload["process"] = to_json(spec);
    payload["rows"] = map.name();
    payload["seed"] = seed;
    payload["lindeberg"] = to_json(rep);
    payload["combined_se"] = combined_se(rep);
    detail::write_report(o, "diagnose", payload, pass, detail::seconds_since(t0));
    return pass ? 0 : 2;
}

// ---------------------------------------------------------------------------
// plan
// ---------------------------------------------------------------------------

inline constexpr int kZoneGrid = 200;

/// Cell-centre grid m, h = (2i+1)/(2 * grid) with exact admissibility flags.
inline std::string zone_csv(DependenceKind kind, const Rational& e, int grid = kZoneGrid) {
    std::string s = "m,h,admissible\n";
    const Rational den(2 * grid);
    for (int i = 0; i < grid; ++i) {
        const Rational m = Rational(2 * i + 1) / den;
        for (int j = 0; j < grid; ++j) {
            const Rational h = Rational(2 * j + 1) / den;
            s += format_double(to_double(m)) + "," + format_double(to_double(h)) + "," +
                 (admissible_zone(kind, e, m, h) ? "1" : "0") + "\n";
        }
    }
    return s;
}

inline int run_plan_mean(const ConfigDoc& c, const RunOptions& o) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto [kind, e] = detail::dependence_from(c);
    const SubsampleBound b = c.with(c.has("process") ? "process" : "e", [&] { return plan_subsample_mean(kind, e); });
    const double margin = c.get_or<double>("margin", 0.02);
    if (margin < 0.0) c.fail("margin", "must be >= 0");
    Json payload;
    payload["bound"] = to_json(b);
    payload["margin"] = margin;
    bool pass = true;
    if (c.has("n")) {
        const auto n = c.get<std::int64_t>("n");
        const double m = c.has("m") ? c.get<double>("m") : to_double(b.bound) + margin;
        const SubsamplePlan p = c.with(c.has("m") ? "m" : "n", [&] { return make_subsample_plan(n, m, b); });
        payload["plan"] = to_json(p);
        pass = p.feasible;
    }
    detail::write_report(o, "plan mean", payload, pass, detail::seconds_since(t0));
    return pass ? 0 : 2;
}

inline int run_plan_kde(const ConfigDoc& c, const RunOptions& o) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto [kind, e] = detail::dependence_from(c);
    if (!e) c.fail(c.has("process") ? "process" : "e", "the kde planners need a power-law decay exponent");
    const Regularity reg = detail::regularity_from(c);
    const BandwidthPlan plan =
        c.with(c.has("regularity") ? "regularity" : "e", [&, kind = kind, e = e] { return optimal_plan(kind, *e, reg); });
    Json payload;
    payload["plan"] = to_json(plan);
    payload["zone"] = Json{{"grid", kZoneGrid}, {"file", "zone.csv"}};
    if (c.has("m") && c.has("h")) {
        const Rational m = c.with("m", [&] { return detail::exponent_from_json(c.json().at("m")); });
        const Rational h = c.with("h", [&] { return detail::exponent_from_json(c.json().at("h")); });
        const ZoneExponent z = c.with("m", [&, kind = kind, e = e] { return zone_exponent(kind, *e, m, h); });
        payload["query"] = Json{{"m", to_string(m)},
                                {"h", to_string(h)},
                                {"admissible", c.with("m", [&, kind = kind, e = e] { return admissible_zone(kind, *e, m, h); })},
                                {"exponent", to_json(z)}};
    }
    write_text_file(o.out_dir / "zone.csv", zone_csv(kind, *e));
    detail::write_report(o, "plan kde", payload, plan.admissible, detail::seconds_since(t0));
    return plan.admissible ? 0 : 2;
}

// ---------------------------------------------------------------------------
// clt
// ---------------------------------------------------------------------------

inline int run_clt(const ConfigDoc& c, const RunOptions& o) {
    MCConfig cfg = mc_config_from_text(c.text(), c.source());
    if (o.seed) cfg.seed = *o.seed;
    cfg.workers = o.workers;
    return run_experiment(cfg, o.out_dir);
}

// ---------------------------------------------------------------------------
// kde
// ---------------------------------------------------------------------------

inline int run_kde(const ConfigDoc& c, const RunOptions& o) {
    const auto t0 = std::chrono::steady_clock::now();
    const ProcessSpec spec = c.process();
    const auto n = c.get<std::int64_t>("n");
    if (n < 1) c.fail("n", "must be >= 1");
    const std::uint64_t seed = o.seed ? *o.seed : c.get_or<std::uint64_t>("seed", 1);
    const KernelSpec K = c.with("kernel", [&] { return kernel_from_name(c.get_or<std::string>("kernel", "gaussian2")); });
    double h = 0.0;
    if (c.has("bandwidth") == c.has("h_exponent")) c.fail("bandwidth", "give exactly one of bandwidth or h_exponent");
    if (c.has("bandwidth")) {
        h = c.get<double>("bandwidth");
        if (!(h > 0.0)) c.fail("bandwidth", "must be positive");
    } else {
        const double he = c.get<double>("h_exponent");
        if (!(he > 0.0 && he < 1.0)) c.fail("h_exponent", "must lie in (0,1)");
        h = std::pow(static_cast<double>(n), -he);
    }
    const std::int64_t step = c.get_or<std::int64_t>("step", 1);
    if (step < 1 || step > n) c.fail("step", "must lie in [1, n]");
    double lo = -4.0, hi = 4.0;
    std::int64_t points = 201;
    if (c.has("grid")) {
        c.with("grid", [&] {
            const Json& g = c.json().at("grid");
            lo = g.value("from", lo);
            hi = g.value("to", hi);
            points = g.value("points", points);
            require(points >= 2 && hi > lo, "grid needs points >= 2 and to > from");
            return 0;
        });
    }
    const Path p = c.with("process", [&] { return simulate(spec, n, seed); });
    const auto marginal = known_marginal(spec);
    std::string csv = marginal ? "x,density,true_density\n" : "x,density\n";
    for (std::int64_t i = 0; i < points; ++i) {
        const double x = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
        csv += format_double(x) + "," + format_double(kde_subsampled(p.values, step, x, h, K));
        if (marginal) csv += "," + format_double(marginal->pdf(x));
        csv += "\n";
    }
    write_text_file(o.out_dir / "kde.csv", csv);
    Json payload;
    payload["process"] = to_json(spec);
    payload["n"] = n;
    payload["seed"] = seed;
    payload["kernel"] = K.name;
    payload["bandwidth"] = h;
    payload["step"] = step;
    payload["retained"] = n / step;
    payload["marginal"] = marginal ? Json(marginal->description) : Json(nullptr);
    detail::write_report(o, "kde", payload, true, detail::seconds_since(t0));
    return 0;
}

}  // namespace weakdep
