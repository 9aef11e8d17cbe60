#pragma once

// Monte Carlo CLT experiments: replicate statistics, KS distance to N(0,1),
// verdicts and the report/CSV writers used by the CLI.

#include "weakdep/error.hpp"
#include "weakdep/json_io.hpp"
#include "weakdep/kde.hpp"
#include "weakdep/lindeberg.hpp"
#include "weakdep/parallel.hpp"
#include "weakdep/process_spec.hpp"
#include "weakdep/resample.hpp"
#include "weakdep/rng.hpp"
#include "weakdep/simulate.hpp"
#include "weakdep/stats.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace weakdep {

inline constexpr const char* kReportSchema = "weakdep.report/1";

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct StatisticSpec {
    enum class Kind { Mean, BlockMean, SubsampledMean, Kde, SubsampledKde };
    Kind kind = Kind::Mean;
    std::int64_t p = 0, q = 0;               ///< block-mean
    std::optional<std::int64_t> step;        ///< subsampling step m_n
    std::optional<double> m_exponent;        ///< or m_n = round(n^m)
    double x = 0.0;                          ///< kde evaluation point
    std::optional<double> bandwidth;         ///< h_n directly
    std::optional<double> h_exponent;        ///< or h_n = n^{-h}
    std::string kernel = "gaussian2";
};

inline std::string to_string(StatisticSpec::Kind k) {
    switch (k) {
        case StatisticSpec::Kind::Mean: return "mean";
        case StatisticSpec::Kind::BlockMean: return "block-mean";
        case StatisticSpec::Kind::SubsampledMean: return "subsampled-mean";
        case StatisticSpec::Kind::Kde: return "kde";
        case StatisticSpec::Kind::SubsampledKde: return "subsampled-kde";
    }
    return "mean";
}

struct MCConfig {
    std::string name;
    ProcessSpec spec;
    StatisticSpec statistic;
    std::int64_t n = 1;
    std::size_t replicates = 200;
    std::uint64_t seed = 1;
    std::optional<double> target_variance;
    double bias_allowance = 0.02;
    double variance_tolerance = 0.15;
    unsigned workers = 1;
};

/// Statistic parameters resolved against n.
struct ResolvedStatistic {
    StatisticSpec::Kind kind = StatisticSpec::Kind::Mean;
    std::int64_t m_n = 1, k_n = 0;
    double h_n = 0.0;
    std::optional<BlockScheme> blocks;
    std::optional<KernelSpec> kernel;
};

inline ResolvedStatistic resolve_statistic(const StatisticSpec& st, std::int64_t n) {
    require(n >= 1, "n must be >= 1");
    ResolvedStatistic r;
    r.kind = st.kind;
    r.k_n = n;
    const auto resolve_step = [&] {
        require(st.step.has_value() != st.m_exponent.has_value(), "statistic needs exactly one of step or m_exponent");
        if (st.step) {
            require(*st.step >= 1, "statistic.step must be >= 1");
            r.m_n = *st.step;
        } else {
            require(*st.m_exponent >= 0.0 && *st.m_exponent < 1.0, "statistic.m_exponent must lie in [0,1)");
            r.m_n = std::max<std::int64_t>(1, std::llround(std::pow(static_cast<double>(n), *st.m_exponent)));
        }
        require(r.m_n <= n, "statistic subsampling step exceeds n");
        r.k_n = n / r.m_n;
    };
    const auto resolve_bandwidth = [&] {
        require(st.bandwidth.has_value() != st.h_exponent.has_value(), "statistic needs exactly one of bandwidth or h_exponent");
        if (st.bandwidth) {
            require(*st.bandwidth > 0.0, "statistic.bandwidth must be positive");
            r.h_n = *st.bandwidth;
        } else {
            require(*st.h_exponent > 0.0 && *st.h_exponent < 1.0, "statistic.h_exponent must lie in (0,1)");
            r.h_n = std::pow(static_cast<double>(n), -*st.h_exponent);
        }
        r.kernel = kernel_from_name(st.kernel);
    };
    switch (st.kind) {
        case StatisticSpec::Kind::Mean: break;
        case StatisticSpec::Kind::BlockMean: r.blocks = bernstein_partition(n, st.p, st.q); break;
        case StatisticSpec::Kind::SubsampledMean: resolve_step(); break;
        case StatisticSpec::Kind::Kde: resolve_bandwidth(); break;
        case StatisticSpec::Kind::SubsampledKde:
            resolve_step();
            resolve_bandwidth();
            break;
    }
    return r;
}

inline double evaluate_statistic(const ResolvedStatistic& r, std::span<const double> path, double x = 0.0) {
    const double n = static_cast<double>(path.size());
    switch (r.kind) {
        case StatisticSpec::Kind::Mean: return compensated_sum(path) / std::sqrt(n);
        case StatisticSpec::Kind::BlockMean: {
            CompensatedSum s;
            for (const auto& [a, b] : r.blocks->blocks)
                for (std::int64_t i = a; i <= b; ++i) s.add(path[static_cast<std::size_t>(i - 1)]);
            return s.value() / std::sqrt(n);
        }
        case StatisticSpec::Kind::SubsampledMean: return subsampled_mean(path, r.m_n);
        case StatisticSpec::Kind::Kde: return std::sqrt(n * r.h_n) * kde_evaluate(path, x, r.h_n, *r.kernel);
        case StatisticSpec::Kind::SubsampledKde:
            return std::sqrt(static_cast<double>(r.k_n) * r.h_n) * kde_subsampled(path, r.m_n, x, r.h_n, *r.kernel);
    }
    return 0.0;
}

// ---------------------------------------------------------------------------
// Marginals
// ---------------------------------------------------------------------------

struct MarginalDensity {
    std::function<double(double)> pdf;
    std::string description;
};

/// Closed-form marginal density where the family has one: Gaussian families,
/// linear filters of normal innovations, and single-tap filters of uniform innovations.
inline std::optional<MarginalDensity> known_marginal(const ProcessSpec& s) {
    const auto normal = [](double var, std::string what) {
        const double sd = std::sqrt(var);
        return MarginalDensity{[sd](double x) { return normal_pdf(x / sd) / sd; }, std::move(what)};
    };
    if (const auto* f = std::get_if<GaussianStationary>(&s.family)) return normal(f->cov[0], "normal");
    if (std::holds_alternative<LongrangeGaussian>(s.family)) return normal(1.0, "normal");
    const CoefficientSeq* a = nullptr;
    LagDomain d;
    if (const auto* f = std::get_if<CausalLinear>(&s.family)) {
        a = &f->a;
        d = LagDomain::from_zero();
    } else if (const auto* f = std::get_if<NoncausalLinear>(&s.family)) {
        a = &f->a;
        d = LagDomain::two_sided_with_zero();
    }
    if (!a) return std::nullopt;
    const auto taps = a->expand(truncation_lag(s), d);
    if (s.innovation.family == InnovationFamily::StandardNormal) {
        CompensatedSum v;
        for (double c : taps) v.add(c * c);
        return normal(v.value(), "normal");
    }
    if (s.innovation.family == InnovationFamily::UniformSymmetric) {
        std::size_t nonzero = 0;
        double c = 0.0;
        for (double t : taps)
            if (t != 0.0) {
                ++nonzero;
                c = t;
            }
        if (nonzero == 1) {
            const double w = std::fabs(c) * s.innovation.half_width;
            return MarginalDensity{[w](double x) { return std::fabs(x) <= w ? 0.5 / w : 0.0; }, "uniform"};
        }
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Replicates, KS and verdicts
// ---------------------------------------------------------------------------

/// R realizations of the statistic; replicate r simulates with derive_seed(seed, r).
inline std::vector<double> replicate_statistic(const MCConfig& c) {
    require(c.replicates >= 1, "replicates must be >= 1");
    const ResolvedStatistic r = resolve_statistic(c.statistic, c.n);
    const Simulator sim(c.spec, c.n);
    std::vector<double> out(c.replicates);
    const double x = c.statistic.x;
    parallel_for(c.replicates, c.workers, [&](std::size_t i) {
        out[i] = evaluate_statistic(r, sim.values(derive_seed(c.seed, i)), x);
    });
    return out;
}

/// One-sample KS distance to N(0,1): max_i max(i/R - Phi(x_(i)), Phi(x_(i)) - (i-1)/R).
inline double ks_normal(std::span<const double> samples, bool standardize = false) {
    require(!samples.empty(), "ks_normal: no samples");
    std::vector<double> x(samples.begin(), samples.end());
    if (standardize) {
        const double m = mean(x), sd = std::sqrt(sample_variance(x));
        require(sd > 0.0, "ks_normal: zero-variance samples cannot be standardized");
        for (double& v : x) v = (v - m) / sd;
    }
    std::sort(x.begin(), x.end());
    const double R = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double F = normal_cdf(x[i]);
        d = std::max({d, static_cast<double>(i + 1) / R - F, F - static_cast<double>(i) / R});
    }
    return d;
}

inline double ks_threshold(std::size_t R, double allowance) { return 1.36 / std::sqrt(static_cast<double>(R)) + allowance; }

struct MCReport {
    std::size_t replicates = 0;
    double mean = 0.0;
    double variance = 0.0;
    double ks_distance = 0.0;
    double ks_threshold = 0.0;
    std::optional<double> target_variance;
    std::optional<double> variance_ratio;
    double variance_tolerance = 0.15;
    std::string standardization;
    bool pass = false;
    double runtime_seconds = 0.0;
    ResolvedStatistic statistic;
};

/// Target used for standardization: configured, else the analytic KDE target
/// f(x) int K^2 when the marginal is known, else none (empirical).
inline std::pair<std::optional<double>, std::string> standardization_target(const MCConfig& c,
                                                                             const ResolvedStatistic& r) {
    if (c.target_variance) return {c.target_variance, "configured-target"};
    if (r.kind == StatisticSpec::Kind::Kde || r.kind == StatisticSpec::Kind::SubsampledKde) {
        if (const auto m = known_marginal(c.spec))
            return {variance_target(m->pdf(c.statistic.x), *r.kernel), "analytic-kde-target(" + m->description + ")"};
    }
    return {std::nullopt, "empirical"};
}

inline MCReport clt_report(const MCConfig& c, std::span<const double> values) {
    MCReport rep;
    rep.statistic = resolve_statistic(c.statistic, c.n);
    rep.replicates = values.size();
    rep.mean = mean(values);
    rep.variance = sample_variance(values);
    rep.ks_threshold = ks_threshold(values.size(), c.bias_allowance);
    rep.variance_tolerance = c.variance_tolerance;
    const auto [target, how] = standardization_target(c, rep.statistic);
    rep.standardization = how;
    rep.target_variance = target;
    if (target) {
        require(*target > 0.0, "target variance must be positive");
        std::vector<double> z(values.begin(), values.end());
        const double sd = std::sqrt(*target);
        for (double& v : z) v = (v - rep.mean) / sd;
        rep.ks_distance = ks_normal(z);
        rep.variance_ratio = rep.variance / *target;
    } else {
        rep.ks_distance = ks_normal(values, true);
    }
    rep.pass = rep.ks_distance < rep.ks_threshold &&
               (!rep.variance_ratio || std::fabs(*rep.variance_ratio - 1.0) < c.variance_tolerance);
    return rep;
}

inline MCReport clt_verdict(const MCConfig& c) {
    require(c.replicates >= 200, "replicates must be >= 200");
    const auto t0 = std::chrono::steady_clock::now();
    const auto values = replicate_statistic(c);
    MCReport rep = clt_report(c, values);
    rep.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

inline Json to_json(const StatisticSpec& s) {
    Json j;
    j["type"] = to_string(s.kind);
    switch (s.kind) {
        case StatisticSpec::Kind::Mean: break;
        case StatisticSpec::Kind::BlockMean:
            j["p"] = s.p;
            j["q"] = s.q;
            break;
        case StatisticSpec::Kind::SubsampledKde:
        case StatisticSpec::Kind::SubsampledMean:
            if (s.step) j["step"] = *s.step;
            if (s.m_exponent) j["m_exponent"] = *s.m_exponent;
            if (s.kind == StatisticSpec::Kind::SubsampledMean) break;
            [[fallthrough]];
        case StatisticSpec::Kind::Kde:
            j["x"] = s.x;
            if (s.bandwidth) j["bandwidth"] = *s.bandwidth;
            if (s.h_exponent) j["h_exponent"] = *s.h_exponent;
            j["kernel"] = s.kernel;
            break;
    }
    return j;
}

inline Json to_json(const MCConfig& c) {
    Json j;
    if (!c.name.empty()) j["name"] = c.name;
    j["process"] = to_json(c.spec);
    j["statistic"] = to_json(c.statistic);
    j["n"] = c.n;
    j["replicates"] = c.replicates;
    j["seed"] = c.seed;
    j["target_variance"] = c.target_variance ? Json(*c.target_variance) : Json(nullptr);
    j["bias_allowance"] = c.bias_allowance;
    j["variance_tolerance"] = c.variance_tolerance;
    return j;
}

inline Json to_json(const MCReport& r) {
    Json j;
    j["replicates"] = r.replicates;
    j["mean"] = r.mean;
    j["variance"] = r.variance;
    j["ks_distance"] = r.ks_distance;
    j["ks_threshold"] = r.ks_threshold;
    j["target_variance"] = r.target_variance ? Json(*r.target_variance) : Json(nullptr);
    j["variance_ratio"] = r.variance_ratio ? Json(*r.variance_ratio) : Json(nullptr);
    j["variance_tolerance"] = r.variance_tolerance;
    j["standardization"] = r.standardization;
    Json st;
    st["m_n"] = r.statistic.m_n;
    st["k_n"] = r.statistic.k_n;
    if (r.statistic.h_n > 0.0) st["h_n"] = r.statistic.h_n;
    if (r.statistic.blocks) {
        st["blocks"] = r.statistic.blocks->k;
        st["omitted"] = r.statistic.blocks->omitted();
    }
    j["resolved_statistic"] = st;
    j["verdict"] = r.pass ? "pass" : "fail";
    return j;
}

// ---------------------------------------------------------------------------
// Config parsing with line-anchored errors
// ---------------------------------------------------------------------------

/// 1-based line of the first occurrence of "key" in the document (0 if absent).
inline int key_line(const std::string& text, const std::string& key) {
    const auto pos = text.find("\"" + key + "\"");
    if (pos == std::string::npos) return 0;
    return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
}

inline int byte_line(const std::string& text, std::size_t byte) {
    byte = std::min(byte, text.size());
    return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

/// Parses a JSON document, reporting syntax errors as "<source>:<line>: ...".
inline Json parse_json_text(const std::string& text, const std::string& source) {
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw SpecError(source + ":" + std::to_string(byte_line(text, e.byte > 0 ? e.byte - 1 : 0)) + ": " + e.what());
    }
}

/// Runs fn, rewriting failures as "<source>:<line of key>: <key>: message".
template <class Fn>
auto anchored(const std::string& text, const std::string& source, const std::string& key, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const nlohmann::json::exception& e) {
        throw SpecError(source + ":" + std::to_string(key_line(text, key)) + ": " + key + ": " + e.what());
    } catch (const SpecError& e) {
        throw SpecError(source + ":" + std::to_string(key_line(text, key)) + ": " + key + ": " + e.what());
    }
}

inline StatisticSpec statistic_from_json(const Json& j) {
    StatisticSpec s;
    const std::string type = j.at("type").get<std::string>();
    if (type == "mean") {
        s.kind = StatisticSpec::Kind::Mean;
    } else if (type == "block-mean") {
        s.kind = StatisticSpec::Kind::BlockMean;
        s.p = j.at("p").get<std::int64_t>();
        s.q = j.at("q").get<std::int64_t>();
    } else if (type == "subsampled-mean" || type == "subsampled-kde") {
        s.kind = type == "subsampled-mean" ? StatisticSpec::Kind::SubsampledMean : StatisticSpec::Kind::SubsampledKde;
        if (j.contains("step")) s.step = j.at("step").get<std::int64_t>();
        if (j.contains("m_exponent")) s.m_exponent = j.at("m_exponent").get<double>();
    } else if (type == "kde") {
        s.kind = StatisticSpec::Kind::Kde;
    } else {
        throw SpecError("unknown statistic type '" + type + "'");
    }
    if (s.kind == StatisticSpec::Kind::Kde || s.kind == StatisticSpec::Kind::SubsampledKde) {
        s.x = j.value("x", 0.0);
        if (j.contains("bandwidth")) s.bandwidth = j.at("bandwidth").get<double>();
        if (j.contains("h_exponent")) s.h_exponent = j.at("h_exponent").get<double>();
        s.kernel = j.value("kernel", std::string("gaussian2"));
    }
    return s;
}

/// Parses and validates an experiment document.
inline MCConfig mc_config_from_text(const std::string& text, const std::string& source) {
    const Json j = parse_json_text(text, source);
    if (!j.is_object()) throw SpecError(source + ":1: experiment config must be a JSON object");
    MCConfig c;
    c.name = j.value("name", std::string());
    c.spec = anchored(text, source, "process", [&] { return process_spec_from_json(j.at("process")); });
    c.statistic = anchored(text, source, "statistic", [&] { return statistic_from_json(j.at("statistic")); });
    c.n = anchored(text, source, "n", [&] {
        const auto n = j.at("n").get<std::int64_t>();
        require(n >= 1, "n must be >= 1");
        return n;
    });
    c.replicates = anchored(text, source, "replicates", [&] {
        const auto r = j.at("replicates").get<std::int64_t>();
        require(r >= 200, "replicates must be >= 200 (got " + std::to_string(r) + ")");
        return static_cast<std::size_t>(r);
    });
    if (j.contains("seed")) c.seed = anchored(text, source, "seed", [&] { return j.at("seed").get<std::uint64_t>(); });
    if (j.contains("target_variance") && !j.at("target_variance").is_null())
        c.target_variance = anchored(text, source, "target_variance", [&] {
            const double t = j.at("target_variance").get<double>();
            require(t > 0.0, "target_variance must be positive");
            return t;
        });
    if (j.contains("bias_allowance"))
        c.bias_allowance = anchored(text, source, "bias_allowance", [&] {
            const double a = j.at("bias_allowance").get<double>();
            require(a >= 0.0, "bias_allowance must be >= 0");
            return a;
        });
    if (j.contains("variance_tolerance"))
        c.variance_tolerance = anchored(text, source, "variance_tolerance", [&] {
            const double a = j.at("variance_tolerance").get<double>();
            require(a > 0.0, "variance_tolerance must be positive");
            return a;
        });
    anchored(text, source, "statistic", [&] {
        (void)resolve_statistic(c.statistic, c.n);
        return 0;
    });
    return c;
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

inline void write_text_file(const std::filesystem::path& p, const std::string& text) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
    out << text;
}

inline std::string replicates_csv(std::span<const double> values) {
    std::string s = "replicate,value\n";
    for (std::size_t i = 0; i < values.size(); ++i) s += std::to_string(i) + "," + format_double(values[i]) + "\n";
    return s;
}

/// Report document: schema, command, payload, then runtime as the last key.
inline Json report_document(const std::string& command, Json payload, bool pass, double runtime_seconds) {
    Json j;
    j["schema_version"] = kReportSchema;
    j["command"] = command;
    for (auto it = payload.begin(); it != payload.end(); ++it) j[it.key()] = it.value();
    j["verdict"] = pass ? "pass" : "fail";
    j["runtime"] = Json{{"seconds", runtime_seconds}};
    return j;
}

/// Runs a CLT experiment and writes report.json and replicates.csv into out_dir.
/// Returns 0 on pass and 2 on fail; configuration problems throw SpecError.
inline int run_experiment(const MCConfig& c, const std::filesystem::path& out_dir) {
    require(c.replicates >= 200, "replicates must be >= 200");
    const auto t0 = std::chrono::steady_clock::now();
    const auto values = replicate_statistic(c);
    const MCReport rep = clt_report(c, values);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    Json payload;
    payload["config"] = to_json(c);
    payload["result"] = to_json(rep);
    write_text_file(out_dir / "report.json", dump_json(report_document("clt", payload, rep.pass, secs)) + "\n");
    write_text_file(out_dir / "replicates.csv", replicates_csv(values));
    return rep.pass ? 0 : 2;
}

inline int run_experiment(const std::string& config_path, const std::filesystem::path& out_dir,
                          std::optional<std::uint64_t> seed = std::nullopt, unsigned workers = 1) {
    MCConfig c = mc_config_from_text(read_text_file(config_path), config_path);
    if (seed) c.seed = *seed;
    c.workers = workers;
    return run_experiment(c, out_dir);
}

}  // namespace weakdep
