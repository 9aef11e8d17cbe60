#pragma once

// Seeded path generation for every process family.

#include "weakdep/error.hpp"
#include "weakdep/fft.hpp"
#include "weakdep/process_spec.hpp"
#include "weakdep/rng.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <vector>

namespace weakdep {

/// A simulated series with the seed and spec that produced it.
struct Path {
    std::vector<double> values;
    std::uint64_t seed = 0;
    std::shared_ptr<const ProcessSpec> spec;

    std::size_t size() const { return values.size(); }
};

/// The long-range envelope k^{2H-2}, with value 1 at k = 0.
inline double gaussian_longrange_cov(double hurst, std::int64_t k) {
    require(hurst > 0.5 && hurst < 1.0, "gaussian_longrange_cov: H must lie in (1/2,1)");
    require(k >= 0, "gaussian_longrange_cov: k must be nonnegative");
    if (k == 0) return 1.0;
    return std::pow(static_cast<double>(k), 2.0 * hurst - 2.0);
}

/// Fractional Gaussian noise covariance, unit variance; ~ H(2H-1) k^{2H-2}.
inline double fgn_cov(double hurst, std::int64_t k) {
    require(hurst > 0.0 && hurst < 1.0, "fgn_cov: H must lie in (0,1)");
    const double a = static_cast<double>(k < 0 ? -k : k);
    const double e = 2.0 * hurst;
    if (a == 0.0) return 1.0;
    return 0.5 * (std::pow(a + 1.0, e) - 2.0 * std::pow(a, e) + std::pow(a - 1.0, e));
}

// ---------------------------------------------------------------------------
// Innovations
// ---------------------------------------------------------------------------

/// Per-engine innovation sampler; one instance must serve one engine.
class InnovationDraw {
public:
    explicit InnovationDraw(const InnovationLaw& law)
        : law_(law), uniform_(-law.half_width, law.half_width) {}

    double operator()(Engine& e) {
        switch (law_.family) {
            case InnovationFamily::StandardNormal: return normal_(e);
            case InnovationFamily::UniformSymmetric: return uniform_(e);
            case InnovationFamily::Rademacher: return (e() >> 63) ? 1.0 : -1.0;
        }
        return 0.0;
    }

private:
    InnovationLaw law_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_;
};

/// xi_k for k in [lo, hi]. Indices >= 1 come from one stream read forward and
/// indices <= 0 from another read backward, so xi_k does not depend on lo/hi.
class InnovationBlock {
public:
    InnovationBlock(const InnovationLaw& law, std::uint64_t seed, std::int64_t lo, std::int64_t hi)
        : lo_(lo), v_(static_cast<std::size_t>(std::max<std::int64_t>(hi - lo + 1, 0))) {
        if (hi >= std::max<std::int64_t>(lo, 1)) {
            Engine fwd = make_engine(seed, 0);
            InnovationDraw draw(law);
            for (std::int64_t k = 1; k <= hi; ++k) {
                const double x = draw(fwd);
                if (k >= lo) v_[static_cast<std::size_t>(k - lo)] = x;
            }
        }
        if (lo <= 0) {
            Engine bwd = make_engine(seed, 1);
            InnovationDraw draw(law);
            for (std::int64_t k = 0; k >= lo; --k) {
                const double x = draw(bwd);
                if (k <= hi) v_[static_cast<std::size_t>(k - lo)] = x;
            }
        }
    }

    double operator()(std::int64_t k) const { return v_[static_cast<std::size_t>(k - lo_)]; }
    std::int64_t lo() const { return lo_; }
    const std::vector<double>& values() const { return v_; }

private:
    std::int64_t lo_;
    std::vector<double> v_;
};

// ---------------------------------------------------------------------------
// Engines
// ---------------------------------------------------------------------------

namespace detail {

class PathEngine {
public:
    virtual ~PathEngine() = default;
    virtual std::vector<double> generate(std::uint64_t seed) const = 0;
};

/// Exact stationary Gaussian sampler: circulant embedding, else dense Cholesky.
class GaussianEngine final : public PathEngine {
public:
    static constexpr std::int64_t kCholeskyLimit = 4096;

    GaussianEngine(const std::vector<double>& cov, std::int64_t n) : n_(n) {
        const auto gamma = [&](std::int64_t k) {
            return k < static_cast<std::int64_t>(cov.size()) ? cov[static_cast<std::size_t>(k)] : 0.0;
        };
        if (n == 1) {
            sd0_ = std::sqrt(gamma(0));
            return;
        }
        const std::size_t m = next_pow2(static_cast<std::size_t>(2 * (n - 1)));
        FftBuffer row(m), eig(m);
        const auto half = static_cast<std::int64_t>(m / 2);
        for (std::size_t j = 0; j < m; ++j) {
            const auto jj = static_cast<std::int64_t>(j);
            row.re(j) = gamma(jj <= half ? jj : static_cast<std::int64_t>(m) - jj);
            row.im(j) = 0.0;
        }
        ComplexFft fft(m);
        fft.forward(row, eig);
        double peak = 0.0, most_negative = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            peak = std::max(peak, eig.re(j));
            most_negative = std::min(most_negative, eig.re(j));
        }
        if (most_negative >= -1e-10 * peak) {
            fft_ = std::make_unique<ComplexFft>(m);
            weights_.resize(m);
            for (std::size_t j = 0; j < m; ++j)
                weights_[j] = std::sqrt(std::max(eig.re(j), 0.0) / static_cast<double>(m));
            return;
        }
        if (n > kCholeskyLimit)
            throw NumericalError("circulant embedding has negative eigenvalue " + std::to_string(most_negative) +
                                 " and n = " + std::to_string(n) + " exceeds the dense fallback limit " +
                                 std::to_string(kCholeskyLimit));
        Eigen::MatrixXd t(n, n);
        for (std::int64_t i = 0; i < n; ++i)
            for (std::int64_t j = 0; j < n; ++j) t(i, j) = gamma(i > j ? i - j : j - i);
        Eigen::LLT<Eigen::MatrixXd> llt(t);
        if (llt.info() != Eigen::Success)
            throw NumericalError("covariance sequence is not positive definite (Cholesky failed for n = " +
                                 std::to_string(n) + ")");
        chol_ = llt.matrixL();
    }

    bool uses_circulant() const { return fft_ != nullptr; }
    bool uses_cholesky() const { return chol_.size() > 0; }

    std::vector<double> generate(std::uint64_t seed) const override {
        Engine e = make_engine(seed, 2);
        std::normal_distribution<double> z(0.0, 1.0);
        std::vector<double> out(static_cast<std::size_t>(n_));
        if (n_ == 1) {
            out[0] = sd0_ * z(e);
            return out;
        }
        if (fft_) {
            const std::size_t m = fft_->size();
            FftBuffer a(m), y(m);
            for (std::size_t j = 0; j < m; ++j) {
                const double re = z(e), im = z(e);
                a.re(j) = weights_[j] * re;
                a.im(j) = weights_[j] * im;
            }
            fft_->forward(a, y);
            for (std::int64_t k = 0; k < n_; ++k) out[static_cast<std::size_t>(k)] = y.re(static_cast<std::size_t>(k));
            return out;
        }
        Eigen::VectorXd w(n_);
        for (std::int64_t k = 0; k < n_; ++k) w(k) = z(e);
        const Eigen::VectorXd x = chol_ * w;
        for (std::int64_t k = 0; k < n_; ++k) out[static_cast<std::size_t>(k)] = x(k);
        return out;
    }

private:
    std::int64_t n_;
    double sd0_ = 1.0;
    std::unique_ptr<ComplexFft> fft_;
    std::vector<double> weights_;
    Eigen::MatrixXd chol_;
};

/// X_k = sum_{j=jlo}^{jhi} a_j xi_{k-j}.
class LinearEngine final : public PathEngine {
public:
    static constexpr std::size_t kDirectTapLimit = 96;

    LinearEngine(InnovationLaw law, std::vector<double> taps, std::int64_t jlo, std::int64_t n)
        : law_(law), taps_(std::move(taps)), jlo_(jlo), jhi_(jlo + static_cast<std::int64_t>(taps_.size()) - 1), n_(n) {
        if (taps_.size() > kDirectTapLimit && n_ > 1)
            conv_ = std::make_unique<FftConvolver>(taps_, static_cast<std::size_t>(n_ + jhi_ - jlo_));
    }

    std::vector<double> generate(std::uint64_t seed) const override {
        InnovationBlock xi(law_, seed, 1 - jhi_, n_ - jlo_);
        if (conv_) return conv_->apply(xi.values());
        std::vector<double> out(static_cast<std::size_t>(n_));
        for (std::int64_t k = 1; k <= n_; ++k) {
            double s = 0.0;
            for (std::size_t q = 0; q < taps_.size(); ++q) s += taps_[q] * xi(k - (jlo_ + static_cast<std::int64_t>(q)));
            out[static_cast<std::size_t>(k - 1)] = s;
        }
        return out;
    }

private:
    InnovationLaw law_;
    std::vector<double> taps_;
    std::int64_t jlo_, jhi_, n_;
    std::unique_ptr<FftConvolver> conv_;
};

/// Causal recursions run from the zero state with a discarded warm-up.
class CausalRecursionEngine final : public PathEngine {
public:
    enum class Kind { Arch, Garch, Bilinear, Memory };

    CausalRecursionEngine(const ProcessSpec& s, std::int64_t n) : law_(s.innovation), n_(n) {
        lag_ = std::max<std::int64_t>(truncation_lag(s), 1);
        warmup_ = burn_in_length(s) * lag_;
        const auto d = LagDomain::from_one();
        if (const auto* f = std::get_if<ArchInfty>(&s.family)) {
            kind_ = Kind::Arch;
            c0_ = f->b0;
            c_ = f->b.expand(lag_, d);
        } else if (const auto* f = std::get_if<Garch>(&s.family)) {
            kind_ = Kind::Garch;
            c0_ = f->omega;
            c_.assign(static_cast<std::size_t>(lag_ + 1), 0.0);
            a_.assign(static_cast<std::size_t>(lag_ + 1), 0.0);
            for (std::size_t i = 0; i < f->alpha.size(); ++i) c_[i + 1] = f->alpha[i];
            for (std::size_t i = 0; i < f->beta.size(); ++i) a_[i + 1] = f->beta[i];
        } else if (const auto* f = std::get_if<CausalBilinear>(&s.family)) {
            kind_ = Kind::Bilinear;
            a0_ = f->a0;
            a_ = f->a.expand(lag_, d);
            c0_ = f->c0;
            c_ = f->c.expand(lag_, d);
        } else if (const auto* f = std::get_if<InfiniteMemory>(&s.family)) {
            kind_ = Kind::Memory;
            c_ = f->a.expand(lag_, d);
            tanh_ = f->map == MemoryMap::Tanh;
        } else {
            throw SpecError("CausalRecursionEngine: unsupported family");
        }
    }

    std::int64_t warmup() const { return warmup_; }

    std::vector<double> generate(std::uint64_t seed) const override {
        const std::int64_t start = 1 - warmup_;
        InnovationBlock xi(law_, seed, start, n_);
        const auto total = static_cast<std::size_t>(n_ - start + 1);
        std::vector<double> x(total, 0.0), aux(kind_ == Kind::Garch ? total : 0, 0.0);
        const auto L = static_cast<std::size_t>(lag_);
        for (std::size_t t = 0; t < total; ++t) {
            const double e = xi(start + static_cast<std::int64_t>(t));
            const std::size_t jmax = std::min(L, t);
            switch (kind_) {
                case Kind::Arch: {
                    double r2 = c0_;
                    for (std::size_t j = 1; j <= jmax; ++j) r2 += c_[j] * x[t - j] * x[t - j];
                    x[t] = std::sqrt(std::max(r2, c0_)) * e;
                    break;
                }
                case Kind::Garch: {
                    double s2 = c0_;
                    for (std::size_t j = 1; j <= jmax; ++j) s2 += c_[j] * x[t - j] * x[t - j] + a_[j] * aux[t - j];
                    aux[t] = s2;
                    x[t] = std::sqrt(s2) * e;
                    break;
                }
                case Kind::Bilinear: {
                    double sa = a0_, sc = c0_;
                    for (std::size_t j = 1; j <= jmax; ++j) {
                        sa += a_[j] * x[t - j];
                        sc += c_[j] * x[t - j];
                    }
                    x[t] = e * sa + sc;
                    break;
                }
                case Kind::Memory: {
                    double s = e;
                    for (std::size_t j = 1; j <= jmax; ++j) s += c_[j] * (tanh_ ? std::tanh(x[t - j]) : x[t - j]);
                    x[t] = s;
                    break;
                }
            }
        }
        return {x.end() - n_, x.end()};
    }

private:
    InnovationLaw law_;
    std::int64_t n_;
    std::int64_t lag_ = 1;
    std::int64_t warmup_ = 0;
    Kind kind_ = Kind::Arch;
    double a0_ = 0.0, c0_ = 0.0;
    std::vector<double> a_, c_;  // indexed by lag, entry 0 unused
    bool tanh_ = false;
};

/// Two-sided recursions solved by Jacobi fixed-point iteration on a padded window.
class FixedPointEngine final : public PathEngine {
public:
    FixedPointEngine(const ProcessSpec& s, std::int64_t n) : law_(s.innovation), n_(n) {
        lag_ = std::max<std::int64_t>(truncation_lag(s), 1);
        iterations_ = burn_in_length(s);
        pad_ = iterations_ * lag_;
        const auto d = LagDomain::two_sided_without_zero();
        if (const auto* f = std::get_if<NoncausalBilinear>(&s.family)) {
            multiplicative_ = true;
            a0_ = f->a0;
            a_ = f->a.expand(lag_, d);
        } else if (const auto* f = std::get_if<InfiniteMemory>(&s.family)) {
            a_ = f->a.expand(lag_, d);
            tanh_ = f->map == MemoryMap::Tanh;
        } else {
            throw SpecError("FixedPointEngine: unsupported family");
        }
    }

    std::vector<double> generate(std::uint64_t seed) const override {
        const std::int64_t lo = 1 - pad_, hi = n_ + pad_;
        InnovationBlock xi(law_, seed, lo, hi);
        const auto total = static_cast<std::int64_t>(hi - lo + 1);
        std::vector<double> cur(static_cast<std::size_t>(total), 0.0), next(cur.size());
        // a_ holds lags -L..L at offsets 0..2L
        for (std::int64_t it = 0; it < iterations_; ++it) {
            for (std::int64_t t = 0; t < total; ++t) {
                double s = multiplicative_ ? a0_ : 0.0;
                for (std::int64_t j = -lag_; j <= lag_; ++j) {
                    const std::int64_t u = t - j;
                    if (j == 0 || u < 0 || u >= total) continue;
                    const double v = cur[static_cast<std::size_t>(u)];
                    s += a_[static_cast<std::size_t>(j + lag_)] * (tanh_ ? std::tanh(v) : v);
                }
                const double e = xi(lo + t);
                next[static_cast<std::size_t>(t)] = multiplicative_ ? e * s : e + s;
            }
            std::swap(cur, next);
        }
        return {cur.begin() + pad_, cur.begin() + pad_ + n_};
    }

private:
    InnovationLaw law_;
    std::int64_t n_;
    std::int64_t lag_ = 1, iterations_ = 1, pad_ = 0;
    bool multiplicative_ = false, tanh_ = false;
    double a0_ = 0.0;
    std::vector<double> a_;
};

/// Finite-order Volterra expansion on lags [-J, J].
class VolterraEngine final : public PathEngine {
public:
    VolterraEngine(const ProcessSpec& s, const Volterra& v, std::int64_t n)
        : law_(s.innovation), kernels_(v.kernels), terms_(v.terms), n_(n) {
        support_ = volterra_support(s, v);
        reach_ = support_;
        for (const auto& t : terms_)
            for (auto l : t.lags) reach_ = std::max(reach_, l < 0 ? -l : l);
        for (const auto& k : kernels_) max_order_ = std::max(max_order_, k.order);
    }

    std::vector<double> generate(std::uint64_t seed) const override {
        InnovationBlock xi(law_, seed, 1 - reach_, n_ + reach_);
        std::vector<double> out(static_cast<std::size_t>(n_));
        // e[p] = elementary symmetric polynomial of degree p in the window variables
        for (std::int64_t k = 1; k <= n_; ++k) {
            double e[4] = {1.0, 0.0, 0.0, 0.0};
            double prev[4] = {1.0, 0.0, 0.0, 0.0};
            double total = 0.0;
            for (std::int64_t m = 0; m <= support_; ++m) {
                std::copy(std::begin(e), std::end(e), std::begin(prev));
                const auto add = [&](double y) {
                    for (int p = max_order_; p >= 1; --p) e[p] += y * e[p - 1];
                };
                add(xi(k - m));
                if (m > 0) add(xi(k + m));
                for (const auto& ker : kernels_)
                    total += ker.scale * std::pow(ker.rate, static_cast<double>(m)) * (e[ker.order] - prev[ker.order]);
            }
            for (const auto& t : terms_) {
                double prod = t.coef;
                for (auto l : t.lags) prod *= xi(k - l);
                total += prod;
            }
            out[static_cast<std::size_t>(k - 1)] = total;
        }
        return out;
    }

private:
    InnovationLaw law_;
    std::vector<VolterraKernel> kernels_;
    std::vector<VolterraTerm> terms_;
    std::int64_t n_;
    std::int64_t support_ = 0, reach_ = 0;
    int max_order_ = 1;
};

class SumEngine;

std::shared_ptr<const PathEngine> build_engine(const ProcessSpec& s, std::int64_t n);

class SumEngine final : public PathEngine {
public:
    SumEngine(const IndependentSum& f, std::int64_t n) : n_(n) {
        for (const auto& c : f.components) parts_.push_back(build_engine(c, n));
    }

    std::vector<double> generate(std::uint64_t seed) const override {
        std::vector<double> out(static_cast<std::size_t>(n_), 0.0);
        for (std::size_t c = 0; c < parts_.size(); ++c) {
            const auto v = parts_[c]->generate(derive_seed(seed, 100 + c));
            for (std::size_t i = 0; i < out.size(); ++i) out[i] += v[i];
        }
        return out;
    }

private:
    std::int64_t n_;
    std::vector<std::shared_ptr<const PathEngine>> parts_;
};

/// fGn autocovariances out to the half-length of the circulant used for paths of length n.
inline std::vector<double> fgn_covariances(double hurst, std::int64_t n) {
    const std::size_t lags = n > 1 ? next_pow2(static_cast<std::size_t>(2 * (n - 1))) / 2 + 1 : 1;
    std::vector<double> cov(lags);
    for (std::size_t k = 0; k < cov.size(); ++k) cov[k] = fgn_cov(hurst, static_cast<std::int64_t>(k));
    return cov;
}

inline std::shared_ptr<const PathEngine> build_engine(const ProcessSpec& s, std::int64_t n) {
    if (const auto* f = std::get_if<GaussianStationary>(&s.family)) return std::make_shared<GaussianEngine>(f->cov, n);
    if (const auto* f = std::get_if<LongrangeGaussian>(&s.family))
        return std::make_shared<GaussianEngine>(fgn_covariances(f->hurst, n), n);
    if (const auto* f = std::get_if<CausalLinear>(&s.family)) {
        const std::int64_t L = truncation_lag(s);
        return std::make_shared<LinearEngine>(s.innovation, f->a.expand(L, LagDomain::from_zero()), 0, n);
    }
    if (const auto* f = std::get_if<NoncausalLinear>(&s.family)) {
        const std::int64_t L = truncation_lag(s);
        return std::make_shared<LinearEngine>(s.innovation, f->a.expand(L, LagDomain::two_sided_with_zero()), -L, n);
    }
    if (const auto* f = std::get_if<Volterra>(&s.family)) return std::make_shared<VolterraEngine>(s, *f, n);
    if (const auto* f = std::get_if<IndependentSum>(&s.family)) return std::make_shared<SumEngine>(*f, n);
    if (std::holds_alternative<NoncausalBilinear>(s.family)) return std::make_shared<FixedPointEngine>(s, n);
    if (const auto* f = std::get_if<InfiniteMemory>(&s.family)) {
        if (!f->causal) return std::make_shared<FixedPointEngine>(s, n);
    }
    return std::make_shared<CausalRecursionEngine>(s, n);
}

}  // namespace detail

/// Worst-case |X_k| for a noncausal bilinear spec: ||xi|| |a0| / (1 - ||xi|| sum |a_j|).
inline double noncausal_bilinear_bound(const ProcessSpec& s) {
    const auto* f = std::get_if<NoncausalBilinear>(&s.family);
    require(f != nullptr, "noncausal_bilinear_bound: spec is not noncausal-bilinear");
    const double u = s.innovation.sup_bound();
    return u * std::fabs(f->a0) / (1.0 - contraction_rate(s));
}

/// Validated spec plus the precomputed sampler for paths of length n.
class Simulator {
public:
    Simulator(ProcessSpec spec, std::int64_t n) : spec_(std::make_shared<const ProcessSpec>(std::move(spec))), n_(n) {
        require(n >= 1, "simulate: n must be >= 1");
        validate(*spec_);
        engine_ = detail::build_engine(*spec_, n_);
    }

    std::vector<double> values(std::uint64_t seed) const { return engine_->generate(seed); }
    Path sample(std::uint64_t seed) const { return Path{values(seed), seed, spec_}; }

    std::int64_t n() const { return n_; }
    const ProcessSpec& spec() const { return *spec_; }
    std::shared_ptr<const ProcessSpec> spec_ptr() const { return spec_; }

private:
    std::shared_ptr<const ProcessSpec> spec_;
    std::int64_t n_;
    std::shared_ptr<const detail::PathEngine> engine_;
};

inline Path simulate(const ProcessSpec& spec, std::int64_t n, std::uint64_t seed) {
    return Simulator(spec, n).sample(seed);
}

inline ProcessSpec longrange_gaussian_spec(double hurst) {
    ProcessSpec s;
    s.family = LongrangeGaussian{hurst};
    return s;
}

inline Path simulate_longrange_gaussian(double hurst, std::int64_t n, std::uint64_t seed) {
    return simulate(longrange_gaussian_spec(hurst), n, seed);
}

}  // namespace weakdep
