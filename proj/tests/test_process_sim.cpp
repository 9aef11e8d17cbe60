#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <numeric>

using namespace weakdep;
using wdtest::mean_se;

using wdtest::all_families;

// ---------------------------------------------------------------------------
// Innovation laws
// ---------------------------------------------------------------------------

TEST(InnovationLaw, MomentsAndBoundedness) {
    const auto n = InnovationLaw::standard_normal(), u = InnovationLaw::uniform(2.0), r = InnovationLaw::rademacher();
    EXPECT_EQ(n.second_moment(), 1.0);
    EXPECT_DOUBLE_EQ(u.second_moment(), 4.0 / 3.0);
    EXPECT_EQ(r.second_moment(), 1.0);
    EXPECT_NEAR(n.abs_moment(3.0), 1.5957691216057308, 1e-14);
    EXPECT_NEAR(n.abs_moment(2.0), 1.0, 1e-14);
    EXPECT_NEAR(n.abs_moment(4.0), 3.0, 1e-13);
    EXPECT_DOUBLE_EQ(u.abs_moment(2.0), 4.0 / 3.0);
    EXPECT_EQ(r.abs_moment(1.5), 1.0);
    EXPECT_FALSE(n.bounded());
    EXPECT_TRUE(u.bounded());
    EXPECT_TRUE(r.bounded());
    EXPECT_THROW(n.abs_moment(0.0), SpecError);
    EXPECT_THROW(n.abs_moment(4.5), SpecError);
}

TEST(InnovationLaw, EmpiricalMeanIsZero) {
    for (const auto& law : {InnovationLaw::standard_normal(), InnovationLaw::uniform(1.5), InnovationLaw::rademacher()}) {
        const InnovationBlock b(law, 99, 1, 200000);
        const auto m = mean_se(b.values());
        EXPECT_LT(std::fabs(m.mean), 4.0 * m.se);
        if (law.bounded()) {
            for (double x : b.values()) ASSERT_LE(std::fabs(x), law.sup_bound());
        }
    }
}

TEST(InnovationBlock, IndexStableAcrossWindows) {
    const auto law = InnovationLaw::standard_normal();
    const InnovationBlock wide(law, 7, -50, 80), narrow(law, 7, -3, 10);
    for (std::int64_t k = -3; k <= 10; ++k) EXPECT_EQ(wide(k), narrow(k));
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

TEST(Simulate, IdentityFilterReturnsRawInnovations) {
    const Path p = simulate(wdtest::iid(), 3, 12345);
    const InnovationBlock xi(InnovationLaw::standard_normal(), 12345, 1, 3);
    ASSERT_EQ(p.size(), 3u);
    for (std::int64_t k = 1; k <= 3; ++k) EXPECT_EQ(p.values[static_cast<std::size_t>(k - 1)], xi(k));
    EXPECT_EQ(p.seed, 12345u);
    ASSERT_TRUE(p.spec);
}

TEST(Simulate, GeometricFilterLagOneAutocorrelation) {
    // sum a_j a_{j+1} / sum a_j^2 = 0.5 for a_j = 0.5^j
    const std::int64_t n = 4000;
    const Simulator sim(wdtest::ar1(0.5), n);
    std::vector<double> rho(200);
    for (std::size_t r = 0; r < rho.size(); ++r) {
        const auto x = sim.values(derive_seed(2024, r));
        const double m = mean(x);
        double num = 0.0, den = 0.0;
        for (std::int64_t i = 0; i < n; ++i) {
            den += (x[i] - m) * (x[i] - m);
            if (i + 1 < n) num += (x[i] - m) * (x[i + 1] - m);
        }
        rho[r] = num / den;
    }
    const auto s = mean_se(rho);
    EXPECT_LT(std::fabs(s.mean - 0.5), 3.0 * s.se + 0.5 / n * 4.0);
}

TEST(Simulate, InfiniteMemoryVarianceMatchesTruncatedRecursion) {
    // X_t = xi_t + sum_{j>=1} 2^{-j-1} X_{t-j}; MA(inf) weights psi by brute-force recursion
    ProcessSpec s;
    s.family = InfiniteMemory{CoefficientSeq::geometric(0.5, 0.5), true, MemoryMap::Linear};
    std::vector<double> psi{1.0};
    for (int k = 1; k < 400; ++k) {
        double v = 0.0;
        for (int j = 1; j <= k; ++j) v += std::pow(0.5, j + 1) * psi[static_cast<std::size_t>(k - j)];
        psi.push_back(v);
    }
    double target = 0.0;
    for (double p : psi) target += p * p;

    const Simulator sim(s, 50);
    std::vector<double> x0(4000);
    for (std::size_t r = 0; r < x0.size(); ++r) x0[r] = sim.values(derive_seed(77, r))[49];
    const double v = sample_variance(x0);
    // se of a sample variance under normality: v sqrt(2/(R-1))
    EXPECT_LT(std::fabs(v - target), 3.0 * target * std::sqrt(2.0 / 3999.0));
}

TEST(Simulate, LengthIsExactAndBurnInDiscarded) {
    for (const auto& s : all_families()) {
        for (std::int64_t n : {1, 2, 17, 300}) {
            const Path p = simulate(s, n, 3);
            EXPECT_EQ(p.size(), static_cast<std::size_t>(n)) << family_name(s);
            for (double x : p.values) EXPECT_TRUE(std::isfinite(x)) << family_name(s);
        }
    }
}

TEST(Simulate, RejectsInvalidSpecs) {
    ProcessSpec arch;
    arch.family = ArchInfty{1.0, CoefficientSeq::geometric(1.0, 0.5)};  // sum b_j = 1
    EXPECT_THROW(simulate(arch, 10, 1), SpecError);

    ProcessSpec nb;
    nb.family = NoncausalBilinear{1.0, CoefficientSeq::geometric(0.1, 0.5), std::nullopt};
    EXPECT_THROW(simulate(nb, 10, 1), SpecError);  // normal innovations are unbounded

    ProcessSpec im;
    im.family = InfiniteMemory{CoefficientSeq::explicit_list({0.6, 0.5}, 1), true, MemoryMap::Linear};
    EXPECT_THROW(simulate(im, 10, 1), SpecError);

    ProcessSpec g = wdtest::garch11(0.1, 0.5, 0.6);
    EXPECT_THROW(simulate(g, 10, 1), SpecError);

    EXPECT_THROW(simulate(wdtest::iid(), 0, 1), SpecError);
    EXPECT_THROW(simulate(longrange_gaussian_spec(1.0), 10, 1), SpecError);

    ProcessSpec slow;
    slow.family = CausalLinear{CoefficientSeq::power(1.0, 0.9), std::nullopt};
    EXPECT_THROW(simulate(slow, 10, 1), SpecError);
}

TEST(Simulate, TruncationOverrideMustMeetTolerance) {
    ProcessSpec s = wdtest::ar1(0.5);
    s.truncation_lag = 3;
    EXPECT_THROW(validate(s), SpecError);
    s.truncation_lag = 100;
    EXPECT_NO_THROW(validate(s));
    EXPECT_EQ(truncation_lag(s), 100);
}

// ---------------------------------------------------------------------------
// Long-range Gaussian
// ---------------------------------------------------------------------------

TEST(LongrangeCov, Examples) {
    EXPECT_DOUBLE_EQ(gaussian_longrange_cov(0.75, 4), 0.5);
    EXPECT_EQ(gaussian_longrange_cov(0.6, 0), 1.0);
    EXPECT_EQ(gaussian_longrange_cov(0.9, 0), 1.0);
    EXPECT_EQ(gaussian_longrange_cov(0.75, 1), 1.0);
    EXPECT_THROW(gaussian_longrange_cov(0.5, 1), SpecError);
    EXPECT_THROW(gaussian_longrange_cov(1.0, 1), SpecError);
    EXPECT_THROW(gaussian_longrange_cov(0.75, -1), SpecError);
}

TEST(LongrangeCov, LiteralSequenceIsNotACovariance) {
    // gamma(0) = gamma(1) = 1 forces X_1 = X_0, contradicting gamma(2) < 1
    ProcessSpec s;
    std::vector<double> cov;
    for (std::int64_t k = 0; k < 100; ++k) cov.push_back(gaussian_longrange_cov(0.75, k));
    s.family = GaussianStationary{cov};
    EXPECT_THROW(Simulator(s, 100), NumericalError);
}

TEST(LongrangeSim, SingleDrawIsStandardNormal) {
    std::vector<double> x(2000);
    for (std::size_t r = 0; r < x.size(); ++r) {
        const Path p = simulate_longrange_gaussian(0.75, 1, derive_seed(5, r));
        ASSERT_EQ(p.size(), 1u);
        x[r] = p.values[0];
    }
    EXPECT_LT(ks_normal(x), 1.63 / std::sqrt(2000.0));
}

TEST(LongrangeSim, SampleCovarianceMatchesLags0To4) {
    const double H = 0.75;
    const std::int64_t n = 256;
    const std::size_t R = 10000;
    const Simulator sim(longrange_gaussian_spec(H), n);
    std::vector<std::vector<double>> prod(5, std::vector<double>(R));
    for (std::size_t r = 0; r < R; ++r) {
        const auto x = sim.values(derive_seed(31, r));
        for (int k = 0; k <= 4; ++k) prod[k][r] = x[100] * x[100 + k];
    }
    for (int k = 0; k <= 4; ++k) {
        const auto s = mean_se(prod[k]);
        EXPECT_LT(std::fabs(s.mean - fgn_cov(H, k)), 3.0 * s.se) << "lag " << k;
    }
}

TEST(LongrangeSim, TwoPointLawMatchesCholeskyOracle) {
    const double H = 0.6, g1 = fgn_cov(H, 1);
    const std::size_t R = 4000;
    const Simulator sim(longrange_gaussian_spec(H), 2);
    std::vector<double> a(R), b(R), c(R);
    for (std::size_t r = 0; r < R; ++r) {
        const auto x = sim.values(derive_seed(8, r));
        a[r] = x[0];
        b[r] = x[1];
        c[r] = (x[0] + x[1]) / std::sqrt(2.0 + 2.0 * g1);
    }
    const double thr = 1.63 / std::sqrt(double(R));
    EXPECT_LT(ks_normal(a), thr);
    EXPECT_LT(ks_normal(b), thr);
    EXPECT_LT(ks_normal(c), thr);
}

TEST(LongrangeSim, FgnCovarianceProperties) {
    EXPECT_EQ(fgn_cov(0.75, 0), 1.0);
    EXPECT_NEAR(fgn_cov(0.5, 3), 0.0, 1e-15);
    // gamma(k) k^{2-2H} -> H(2H-1)
    EXPECT_NEAR(fgn_cov(0.75, 100000) * std::pow(100000.0, 0.5), 0.375, 1e-5);
}

TEST(LongrangeSim, LargePathsUseCirculantEmbedding) {
    const detail::GaussianEngine e(detail::fgn_covariances(0.9, 20000), 20000);
    EXPECT_TRUE(e.uses_circulant());
}

// ---------------------------------------------------------------------------
// burn_in_length
// ---------------------------------------------------------------------------

TEST(BurnIn, Examples) {
    EXPECT_EQ(burn_in_length(wdtest::ar1(0.5)), 0);

    ProcessSpec im;
    im.family = InfiniteMemory{CoefficientSeq::geometric(0.5, 0.5), true, MemoryMap::Linear};
    EXPECT_EQ(burn_in_length(im), 20);

    ProcessSpec arch;
    arch.family = ArchInfty{1.0, CoefficientSeq::geometric(0.9, 0.5)};
    EXPECT_EQ(burn_in_length(arch), 132);
}

// ---------------------------------------------------------------------------
// Properties
// ---------------------------------------------------------------------------

TEST(SimulateProperty, SeedDeterminism) {
    for (const auto& s : all_families()) {
        const Simulator sim(s, 128);
        EXPECT_EQ(sim.values(17), sim.values(17)) << family_name(s);
        EXPECT_EQ(sim.values(17), simulate(s, 128, 17).values) << family_name(s);
        EXPECT_NE(sim.values(17), sim.values(18)) << family_name(s);
    }
}

TEST(SimulateProperty, WindowStationarity) {
    const std::int64_t n = 200;
    const std::size_t R = 1000;
    for (const auto& s : all_families()) {
        const Simulator sim(s, n);
        std::vector<double> dm(R), dv(R);
        for (std::size_t r = 0; r < R; ++r) {
            const auto x = sim.values(derive_seed(404, r));
            const std::span<const double> a(x.data(), n / 2), b(x.data() + n / 2, n / 2);
            dm[r] = mean(a) - mean(b);
            CompensatedSum qa, qb;
            for (double v : a) qa.add(v * v);
            for (double v : b) qb.add(v * v);
            dv[r] = (qa.value() - qb.value()) / (n / 2);
        }
        const auto m = mean_se(dm), v = mean_se(dv);
        EXPECT_LT(std::fabs(m.mean), 4.0 * m.se) << family_name(s);
        EXPECT_LT(std::fabs(v.mean), 4.0 * v.se) << family_name(s);
    }
}

TEST(SimulateProperty, DoublingTruncationLagStaysWithinTolerance) {
    const auto law = InnovationLaw::uniform(1.0);
    std::vector<ProcessSpec> specs;
    specs.push_back(wdtest::ar1(0.7, 1.0, law));
    {
        ProcessSpec s;
        s.family = NoncausalLinear{CoefficientSeq::power(1.0, 3.5), std::nullopt};
        s.innovation = law;
        s.tail_tolerance = 1e-4;
        specs.push_back(s);
    }
    {
        ProcessSpec s;
        s.family = Volterra{{{1, 1.0, 0.5}, {2, 0.5, 0.3}, {3, 0.2, 0.3}}, {}, std::nullopt};
        s.innovation = law;
        specs.push_back(s);
    }
    for (const auto& base : specs) {
        ProcessSpec twice = base;
        twice.truncation_lag = 2 * truncation_lag(base);
        const auto a = simulate(base, 500, 61).values, b = simulate(twice, 500, 61).values;
        double worst = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::fabs(a[i] - b[i]));
        EXPECT_LE(worst, base.tail_tolerance * base.innovation.scale()) << family_name(base);
        EXPECT_GT(truncation_lag(base), 0) << family_name(base);
    }
}

TEST(SimulateProperty, NoncausalBilinearStaysBounded) {
    ProcessSpec s;
    s.family = NoncausalBilinear{1.0, CoefficientSeq::geometric(0.3, 0.5), std::nullopt};
    s.innovation = InnovationLaw::uniform(1.0);
    const double bound = noncausal_bilinear_bound(s);
    EXPECT_NEAR(bound, 1.0 / (1.0 - 0.6), 1e-6);
    const Simulator sim(s, 2000);
    for (std::uint64_t seed = 0; seed < 20; ++seed)
        for (double x : sim.values(seed)) ASSERT_LE(std::fabs(x), bound);
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

TEST(ProcessSpecJson, RoundTripsEveryFamily) {
    for (const auto& s : all_families()) {
        const Json j = to_json(s);
        const ProcessSpec back = process_spec_from_json(Json::parse(dump_json(j)));
        EXPECT_EQ(dump_json(to_json(back)), dump_json(j)) << family_name(s);
        EXPECT_EQ(simulate(back, 50, 4).values, simulate(s, 50, 4).values) << family_name(s);
    }
}

TEST(ProcessSpecJson, RejectsUnknownFamilyAndBadFields) {
    EXPECT_THROW(process_spec_from_json(Json::parse(R"({"family": "arima"})")), SpecError);
    EXPECT_THROW(process_spec_from_json(Json::parse(R"({"family": "longrange-gaussian", "hurst": 0.4})")), SpecError);
    EXPECT_THROW(process_spec_from_json(Json::parse(R"({"family": "causal-linear"})")), std::exception);
    EXPECT_THROW(process_spec_from_json(Json::parse(
                     R"({"family": "causal-linear", "coefficients": [1], "innovation": {"law": "cauchy"}})")),
                 SpecError);
}

TEST(ProcessSpecJson, SchemaCoversSerializedFields) {
    std::ifstream in(WEAKDEP_DOCS_DIR "/process_spec.schema.json");
    ASSERT_TRUE(in.good());
    const Json schema = Json::parse(in);
    const auto& families = schema["properties"]["family"]["enum"];
    for (const auto& s : all_families()) {
        const Json j = to_json(s);
        const std::string fam = j["family"];
        EXPECT_NE(std::find(families.begin(), families.end(), fam), families.end()) << fam;
        Json allowed = schema["properties"];
        for (const auto& branch : schema["allOf"]) {
            const auto& cond = branch["if"]["properties"]["family"];
            const bool hit = cond.contains("const") ? cond["const"] == fam
                                                    : std::find(cond["enum"].begin(), cond["enum"].end(), fam) != cond["enum"].end();
            if (hit) allowed.update(branch["then"]["properties"]);
        }
        for (const auto& [key, value] : j.items()) EXPECT_TRUE(allowed.contains(key)) << fam << "." << key;
    }
}
