#pragma once

// Monte Carlo evaluation of the Lindeberg bound terms A_k, B_k(eps), T(k),
// T_1, T_2 and of Delta_k, plus Bernstein blocking.

#include "weakdep/error.hpp"
#include "weakdep/json_io.hpp"
#include "weakdep/parallel.hpp"
#include "weakdep/process_spec.hpp"
#include "weakdep/rng.hpp"
#include "weakdep/simulate.hpp"
#include "weakdep/stats.hpp"

#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace weakdep {

// ---------------------------------------------------------------------------
// Triangular-array rows
// ---------------------------------------------------------------------------

/// R replicate rows of k summands X_{1,k}, ..., X_{k,k}, stored row-major.
class RowEnsemble {
public:
    RowEnsemble(std::size_t replicates, std::size_t k) : r_(replicates), k_(k), v_(replicates * k, 0.0) {}
    RowEnsemble(std::size_t replicates, std::size_t k, std::vector<double> values)
        : r_(replicates), k_(k), v_(std::move(values)) {
        require(v_.size() == r_ * k_, "RowEnsemble: value count must equal replicates * k");
    }

    std::size_t replicates() const { return r_; }
    std::size_t k() const { return k_; }
    double operator()(std::size_t r, std::size_t i) const { return v_[r * k_ + i]; }
    double& operator()(std::size_t r, std::size_t i) { return v_[r * k_ + i]; }
    std::span<const double> row(std::size_t r) const { return {v_.data() + r * k_, k_}; }
    std::span<double> row(std::size_t r) { return {v_.data() + r * k_, k_}; }

    std::vector<double> column(std::size_t i) const {
        std::vector<double> c(r_);
        for (std::size_t r = 0; r < r_; ++r) c[r] = (*this)(r, i);
        return c;
    }

private:
    std::size_t r_, k_;
    std::vector<double> v_;
};

/// How a simulated path becomes a row X_{1,k}, ..., X_{k,k}.
struct RowMap {
    enum class Kind { Identity, ScaledMean, Subsampled, Custom };
    using Fn = std::function<std::vector<double>(std::span<const double> path, std::int64_t k)>;

    Kind kind = Kind::ScaledMean;
    std::int64_t step = 1;
    Fn fn;
    std::function<std::int64_t(std::int64_t)> length;

    static RowMap identity() { return {Kind::Identity, 1, {}, {}}; }
    /// X_{i,k} = X_i / sqrt(k)
    static RowMap scaled_mean() { return {Kind::ScaledMean, 1, {}, {}}; }
    /// X_{i,k} = X_{i*step} / sqrt(k)
    static RowMap subsampled(std::int64_t step) {
        require(step >= 1, "RowMap::subsampled: step must be >= 1");
        return {Kind::Subsampled, step, {}, {}};
    }
    static RowMap custom(Fn f, std::function<std::int64_t(std::int64_t)> path_length) {
        return {Kind::Custom, 1, std::move(f), std::move(path_length)};
    }

    std::int64_t path_length(std::int64_t k) const {
        switch (kind) {
            case Kind::Identity:
            case Kind::ScaledMean: return k;
            case Kind::Subsampled: return k * step;
            case Kind::Custom: return length(k);
        }
        return k;
    }

    std::vector<double> apply(std::span<const double> path, std::int64_t k) const {
        std::vector<double> out(static_cast<std::size_t>(k));
        const double scale = kind == Kind::Identity ? 1.0 : 1.0 / std::sqrt(static_cast<double>(k));
        switch (kind) {
            case Kind::Identity:
            case Kind::ScaledMean:
                for (std::int64_t i = 0; i < k; ++i) out[static_cast<std::size_t>(i)] = scale * path[static_cast<std::size_t>(i)];
                break;
            case Kind::Subsampled:
                for (std::int64_t i = 1; i <= k; ++i)
                    out[static_cast<std::size_t>(i - 1)] = scale * path[static_cast<std::size_t>(i * step - 1)];
                break;
            case Kind::Custom: out = fn(path, k); break;
        }
        return out;
    }

    std::string name() const {
        switch (kind) {
            case Kind::Identity: return "identity";
            case Kind::ScaledMean: return "scaled-mean";
            case Kind::Subsampled: return "subsampled:" + std::to_string(step);
            case Kind::Custom: return "custom";
        }
        return "custom";
    }
};

/// R rows from independent paths of `spec`; replicate r uses seed derive_seed(seed, r).
inline RowEnsemble sample_rows(const ProcessSpec& spec, const RowMap& map, std::int64_t k, std::size_t replicates,
                               std::uint64_t seed, unsigned workers = 1) {
    require(k >= 1, "sample_rows: k must be >= 1");
    const Simulator sim(spec, map.path_length(k));
    RowEnsemble ens(replicates, static_cast<std::size_t>(k));
    parallel_for(replicates, workers, [&](std::size_t r) {
        const auto path = sim.values(derive_seed(seed, r));
        const auto row = map.apply(path, k);
        std::copy(row.begin(), row.end(), ens.row(r).begin());
    });
    return ens;
}

// ---------------------------------------------------------------------------
// Test functions
// ---------------------------------------------------------------------------

/// A test function: a characteristic exponential x -> e^{itx}, or a smooth f
/// with its first two derivatives and declared sup-norms of f'' and f'''.
struct TestFunction {
    enum class Kind { Char, Smooth };
    using Real = std::function<double(double)>;

    Kind kind = Kind::Char;
    double t = 1.0;
    Real f, f1, f2;
    double norm2 = 0.0, norm3 = 0.0;
    std::function<double(double)> gaussian_mean;  ///< sigma^2 -> E f(N(0, sigma^2)), if known
    std::string label;

    static TestFunction characteristic(double t) {
        TestFunction g;
        g.kind = Kind::Char;
        g.t = t;
        g.norm2 = t * t;
        g.norm3 = std::fabs(t) * t * t;
        g.label = "char";
        return g;
    }
    static TestFunction sine(double w) {
        TestFunction g;
        g.kind = Kind::Smooth;
        g.f = [w](double x) { return std::sin(w * x); };
        g.f1 = [w](double x) { return w * std::cos(w * x); };
        g.f2 = [w](double x) { return -w * w * std::sin(w * x); };
        g.norm2 = w * w;
        g.norm3 = std::fabs(w) * w * w;
        g.gaussian_mean = [](double) { return 0.0; };
        g.label = "sine";
        return g;
    }
    static TestFunction cosine(double w) {
        TestFunction g;
        g.kind = Kind::Smooth;
        g.f = [w](double x) { return std::cos(w * x); };
        g.f1 = [w](double x) { return -w * std::sin(w * x); };
        g.f2 = [w](double x) { return -w * w * std::cos(w * x); };
        g.norm2 = w * w;
        g.norm3 = std::fabs(w) * w * w;
        g.gaussian_mean = [w](double s2) { return std::exp(-0.5 * w * w * s2); };
        g.label = "cosine";
        return g;
    }
    static TestFunction linear(double slope) {
        TestFunction g;
        g.kind = Kind::Smooth;
        g.f = [slope](double x) { return slope * x; };
        g.f1 = [slope](double) { return slope; };
        g.f2 = [](double) { return 0.0; };
        g.gaussian_mean = [](double) { return 0.0; };
        g.label = "linear";
        return g;
    }

    /// ||f''||^{1-delta} ||f'''||^delta
    double mixed_norm(double delta) const { return std::pow(norm2, 1.0 - delta) * std::pow(norm3, delta); }
};

// ---------------------------------------------------------------------------
// Bound terms
// ---------------------------------------------------------------------------

namespace detail {

/// Full-sample estimate plus batch standard error of a statistic over replicate ranges.
template <class Stat>
Estimate batched(std::size_t replicates, Stat&& stat) {
    const double full = stat(std::size_t{0}, replicates);
    const std::size_t nb = std::min(kDefaultBatches, replicates);
    const Batching b{replicates, nb};
    std::vector<double> parts(nb);
    for (std::size_t i = 0; i < nb; ++i) parts[i] = stat(b.begin(i), b.begin(i + 1));
    return {full, batch_standard_error(parts)};
}

class ComplexMean {
public:
    void add(std::complex<double> z) {
        re_.add(z.real());
        im_.add(z.imag());
        ++n_;
    }
    std::complex<double> value() const {
        const double d = static_cast<double>(n_);
        return {re_.value() / d, im_.value() / d};
    }

private:
    CompensatedSum re_, im_;
    std::size_t n_ = 0;
};

inline double column_variance_sum(const RowEnsemble& ens, std::size_t lo, std::size_t hi) {
    CompensatedSum s;
    std::vector<double> col(hi - lo);
    for (std::size_t i = 0; i < ens.k(); ++i) {
        for (std::size_t r = lo; r < hi; ++r) col[r - lo] = ens(r, i);
        s.add(sample_variance(col));
    }
    return s.value();
}

}  // namespace detail

/// A_k = sum_i E|X_i|^{2+delta}, expectations replaced by replicate averages.
inline double moment_sum_A(const RowEnsemble& ens, double delta) {
    require(delta > 0.0 && delta <= 1.0, "moment_sum_A: delta must lie in (0,1]");
    CompensatedSum s;
    for (std::size_t i = 0; i < ens.k(); ++i) {
        CompensatedSum c;
        for (std::size_t r = 0; r < ens.replicates(); ++r) c.add(std::pow(std::fabs(ens(r, i)), 2.0 + delta));
        s.add(c.value() / static_cast<double>(ens.replicates()));
    }
    return s.value();
}

/// B_k(eps) = sum_i E(X_i^2 1{|X_i| > eps}).
inline double truncated_sum_B(const RowEnsemble& ens, double eps) {
    require(eps >= 0.0, "truncated_sum_B: epsilon must be >= 0");
    CompensatedSum s;
    for (std::size_t i = 0; i < ens.k(); ++i) {
        CompensatedSum c;
        for (std::size_t r = 0; r < ens.replicates(); ++r) {
            const double x = ens(r, i);
            if (std::fabs(x) > eps) c.add(x * x);
        }
        s.add(c.value() / static_cast<double>(ens.replicates()));
    }
    return s.value();
}

/// T(k) = sum_j |cov(e^{it(X_1+...+X_{j-1})}, e^{itX_j})|, complex covariance without conjugation.
inline Estimate char_T_estimate(const RowEnsemble& ens, double t) {
    const std::size_t k = ens.k();
    return detail::batched(ens.replicates(), [&](std::size_t lo, std::size_t hi) {
        std::vector<detail::ComplexMean> fg(k), f(k), g(k);
        for (std::size_t r = lo; r < hi; ++r) {
            double w = 0.0;
            for (std::size_t j = 0; j < k; ++j) {
                const double x = ens(r, j);
                const std::complex<double> a = std::polar(1.0, t * w), b = std::polar(1.0, t * x);
                fg[j].add(a * b);
                f[j].add(a);
                g[j].add(b);
                w += x;
            }
        }
        CompensatedSum s;
        for (std::size_t j = 1; j < k; ++j) s.add(std::abs(fg[j].value() - f[j].value() * g[j].value()));
        return s.value();
    });
}

/// |E e^{itS_k} - e^{-t^2 Sigma_k / 2}| with Sigma_k the sum of the summand variances.
inline Estimate delta_char_estimate(const RowEnsemble& ens, double t) {
    return detail::batched(ens.replicates(), [&](std::size_t lo, std::size_t hi) {
        if (t == 0.0) return 0.0;
        detail::ComplexMean m;
        for (std::size_t r = lo; r < hi; ++r) m.add(std::polar(1.0, t * compensated_sum(ens.row(r))));
        const double sigma = detail::column_variance_sum(ens, lo, hi);
        return std::abs(m.value() - std::complex<double>(std::exp(-0.5 * t * t * sigma), 0.0));
    });
}

/// |E f(S_k) - E f(N(0, Sigma_k))| for a smooth f with a known Gaussian mean.
inline Estimate delta_smooth_estimate(const RowEnsemble& ens, const TestFunction& f) {
    require(f.kind == TestFunction::Kind::Smooth && f.gaussian_mean, "delta_smooth_estimate: needs a smooth f with a Gaussian mean");
    return detail::batched(ens.replicates(), [&](std::size_t lo, std::size_t hi) {
        CompensatedSum s;
        for (std::size_t r = lo; r < hi; ++r) s.add(f.f(compensated_sum(ens.row(r))));
        const double sigma = detail::column_variance_sum(ens, lo, hi);
        return std::fabs(s.value() / static_cast<double>(hi - lo) - f.gaussian_mean(sigma));
    });
}

struct SmoothTerms {
    Estimate t1;
    Estimate t2;
};

/// T_1 = sum_i |cov(f'(W_i), X_i)| and T_2 = sum_i |E f''(W_i) X_i^2 - E f''(W_i) X*_i^2|,
/// W_i = X_1 + ... + X_{i-1}, X* taken from the next replicate (cyclically).
inline SmoothTerms smooth_T12_estimate(const RowEnsemble& ens, const TestFunction& f) {
    require(f.kind == TestFunction::Kind::Smooth, "smooth_T12_estimate: needs a smooth test function");
    const std::size_t k = ens.k();
    const auto term = [&](int which) {
        return detail::batched(ens.replicates(), [&, which](std::size_t lo, std::size_t hi) {
            const std::size_t count = hi - lo;
            std::vector<CompensatedSum> a(k), b(k), c(k);
            for (std::size_t r = lo; r < hi; ++r) {
                const std::size_t partner = lo + (r - lo + 1) % count;
                double w = 0.0;
                for (std::size_t i = 0; i < k; ++i) {
                    const double x = ens(r, i);
                    if (which == 1) {
                        const double d = f.f1(w);
                        a[i].add(d * x);
                        b[i].add(d);
                        c[i].add(x);
                    } else {
                        const double d = f.f2(w), xs = ens(partner, i);
                        a[i].add(d * x * x);
                        b[i].add(d * xs * xs);
                    }
                    w += x;
                }
            }
            const double nrm = static_cast<double>(count);
            CompensatedSum s;
            for (std::size_t i = 0; i < k; ++i) {
                const double v = which == 1 ? a[i].value() / nrm - (b[i].value() / nrm) * (c[i].value() / nrm)
                                            : (a[i].value() - b[i].value()) / nrm;
                s.add(std::fabs(v));
            }
            return s.value();
        });
    };
    return {term(1), term(2)};
}

// ---------------------------------------------------------------------------
// Reports and lemma bounds
// ---------------------------------------------------------------------------

enum class Lemma { One, Two, Three };

inline std::string to_string(Lemma l) {
    switch (l) {
        case Lemma::One: return "lemma1";
        case Lemma::Two: return "lemma2";
        case Lemma::Three: return "lemma3";
    }
    return "lemma3";
}

inline Lemma parse_lemma(const std::string& s) {
    if (s == "lemma1") return Lemma::One;
    if (s == "lemma2") return Lemma::Two;
    if (s == "lemma3") return Lemma::Three;
    throw SpecError("lemma must be lemma1, lemma2 or lemma3, got '" + s + "'");
}

struct LindebergReport {
    std::size_t replicates = 0;
    std::size_t k = 0;
    double delta = 1.0;
    double epsilon = 0.0;
    Estimate delta_hat;
    double A_k = 0.0;
    double B_k = 0.0;
    std::optional<Estimate> T_hat;
    std::optional<Estimate> T1_hat;
    std::optional<Estimate> T2_hat;
    std::optional<Lemma> lemma;
    double bound = 0.0;
    std::string test_function;
    double t = 0.0;
};

/// Right-hand side of the chosen lemma. `norm_or_t` is ||f''||^{1-d}||f'''||^d
/// for lemmas 1 and 2 and the frequency t for lemma 3.
inline double lemma_bound(const LindebergReport& rep, Lemma which, double delta, double norm_or_t) {
    require(delta > 0.0 && delta <= 1.0, "lemma_bound: delta must lie in (0,1]");
    switch (which) {
        case Lemma::One: return 3.0 * norm_or_t * rep.A_k;
        case Lemma::Two:
            require(rep.T1_hat.has_value() && rep.T2_hat.has_value(), "lemma_bound: lemma2 needs T1 and T2 estimates");
            return rep.T1_hat->value + 0.5 * rep.T2_hat->value + 6.0 * norm_or_t * rep.A_k;
        case Lemma::Three:
            require(rep.T_hat.has_value(), "lemma_bound: lemma3 needs a T(k) estimate");
            return rep.T_hat->value + 3.0 * std::pow(std::fabs(norm_or_t), 2.0 + delta) * rep.A_k;
    }
    return 0.0;
}

inline Json to_json(const Estimate& e) { return Json{{"value", e.value}, {"se", e.se}}; }

inline Json to_json(const LindebergReport& r) {
    Json j;
    j["replicates"] = r.replicates;
    j["k"] = r.k;
    j["delta"] = r.delta;
    j["test_function"] = r.test_function;
    if (r.test_function == "char") j["t"] = r.t;
    j["delta_hat"] = to_json(r.delta_hat);
    j["A_k"] = r.A_k;
    j["epsilon"] = r.epsilon;
    j["B_k"] = r.B_k;
    j["T_hat"] = r.T_hat ? to_json(*r.T_hat) : Json(nullptr);
    j["T1_hat"] = r.T1_hat ? to_json(*r.T1_hat) : Json(nullptr);
    j["T2_hat"] = r.T2_hat ? to_json(*r.T2_hat) : Json(nullptr);
    j["lemma"] = r.lemma ? Json(to_string(*r.lemma)) : Json(nullptr);
    j["bound"] = r.bound;
    return j;
}

/// Evaluates every term for `f` on an ensemble and fills the matching lemma bound:
/// lemma 3 for characteristic functions, else lemma 2 (lemma 1 when `independent`).
inline LindebergReport lindeberg_report(const RowEnsemble& ens, const TestFunction& f, double delta, double epsilon,
                                        bool independent = false) {
    LindebergReport rep;
    rep.replicates = ens.replicates();
    rep.k = ens.k();
    rep.delta = delta;
    rep.epsilon = epsilon;
    rep.A_k = moment_sum_A(ens, delta);
    rep.B_k = truncated_sum_B(ens, epsilon);
    rep.test_function = f.label;
    if (f.kind == TestFunction::Kind::Char) {
        rep.t = f.t;
        rep.delta_hat = delta_char_estimate(ens, f.t);
        rep.T_hat = char_T_estimate(ens, f.t);
        rep.lemma = Lemma::Three;
        rep.bound = lemma_bound(rep, Lemma::Three, delta, f.t);
        return rep;
    }
    if (f.gaussian_mean) rep.delta_hat = delta_smooth_estimate(ens, f);
    const auto st = smooth_T12_estimate(ens, f);
    rep.T1_hat = st.t1;
    rep.T2_hat = st.t2;
    rep.lemma = independent ? Lemma::One : Lemma::Two;
    rep.bound = lemma_bound(rep, *rep.lemma, delta, f.mixed_norm(delta));
    return rep;
}

// Spec-level conveniences that simulate the ensemble first.

inline Estimate char_T_estimate(const ProcessSpec& spec, const RowMap& map, double t, std::int64_t k, std::size_t R,
                                std::uint64_t seed, unsigned workers = 1) {
    require(R >= 100, "char_T_estimate: R must be >= 100");
    require(t != 0.0, "char_T_estimate: t must be nonzero");
    return char_T_estimate(sample_rows(spec, map, k, R, seed, workers), t);
}

inline Estimate delta_char_estimate(const ProcessSpec& spec, const RowMap& map, double t, std::int64_t k,
                                    std::size_t R, std::uint64_t seed, unsigned workers = 1) {
    require(R >= 100, "delta_char_estimate: R must be >= 100");
    return delta_char_estimate(sample_rows(spec, map, k, R, seed, workers), t);
}

inline SmoothTerms smooth_T12_estimate(const ProcessSpec& spec, const RowMap& map, const TestFunction& f,
                                       std::int64_t k, std::size_t R, std::uint64_t seed, unsigned workers = 1) {
    return smooth_T12_estimate(sample_rows(spec, map, k, R, seed, workers), f);
}

// ---------------------------------------------------------------------------
// Bernstein blocks
// ---------------------------------------------------------------------------

struct BlockScheme {
    std::int64_t n = 0, p = 0, q = 0, k = 0;
    std::vector<std::pair<std::int64_t, std::int64_t>> blocks;  ///< 1-based inclusive ranges

    std::int64_t covered() const { return k * p; }
    std::int64_t omitted() const { return n - covered(); }
};

inline BlockScheme bernstein_partition(std::int64_t n, std::int64_t p, std::int64_t q) {
    require(p + q <= n, "bernstein_partition: p + q must not exceed n");
    require(q >= 1 && q < p && p < n, "bernstein_partition: need 1 <= q < p < n");
    BlockScheme s{n, p, q, n / (p + q), {}};
    for (std::int64_t j = 1; j <= s.k; ++j) {
        const std::int64_t first = (j - 1) * (p + q) + 1;
        s.blocks.emplace_back(first, first + p - 1);
    }
    return s;
}

/// ||n^{-1/2} sum_{i<=n} X_i - n^{-1/2} sum_{blocks} X_i||_2 over replicate paths (rows of length n).
inline Estimate block_remainder_l2(const RowEnsemble& paths, const BlockScheme& s) {
    require(static_cast<std::int64_t>(paths.k()) == s.n, "block_remainder_l2: path length must equal scheme n");
    std::vector<char> in_block(static_cast<std::size_t>(s.n), 0);
    for (const auto& [a, b] : s.blocks)
        for (std::int64_t i = a; i <= b; ++i) in_block[static_cast<std::size_t>(i - 1)] = 1;
    std::vector<double> d2(paths.replicates());
    const double scale = 1.0 / std::sqrt(static_cast<double>(s.n));
    for (std::size_t r = 0; r < paths.replicates(); ++r) {
        CompensatedSum sum;
        for (std::size_t i = 0; i < paths.k(); ++i)
            if (!in_block[i]) sum.add(paths(r, i));
        const double d = scale * sum.value();
        d2[r] = d * d;
    }
    const double m = mean(d2);
    const double value = std::sqrt(m);
    // delta method: se(sqrt(M)) = se(M) / (2 sqrt(M))
    const double se_m = std::sqrt(sample_variance(d2) / static_cast<double>(d2.size()));
    return {value, value > 0.0 ? se_m / (2.0 * value) : 0.0};
}

}  // namespace weakdep
