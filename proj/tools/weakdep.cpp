// weakdep: simulate processes, evaluate Lindeberg terms, plan subsampling and
// bandwidths, and run Monte Carlo CLT experiments.

#include "weakdep/commands.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

int main(int argc, char** argv) {
    CLI::App app{"Weak-dependence CLT toolkit"};
    app.require_subcommand(1);

    std::string config;
    std::string out = ".";
    std::uint64_t seed = 0;
    unsigned workers = 1;

    const auto common = [&](CLI::App* sub) {
        sub->add_option("--config", config, "JSON config file")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out, "output directory");
        sub->add_option("--seed", seed, "master seed (overrides the config)");
        sub->add_option("--workers", workers, "worker threads")->check(CLI::Range(1u, 1024u));
    };

    auto* simulate = app.add_subcommand("simulate", "simulate one path: path.csv, report.json");
    auto* diagnose = app.add_subcommand("diagnose", "Lindeberg bound terms and the lemma inequality");
    auto* plan = app.add_subcommand("plan", "subsampling and bandwidth planners");
    plan->require_subcommand(1);
    auto* plan_mean = plan->add_subcommand("mean", "subsampled-mean exponent bound");
    auto* plan_kde = plan->add_subcommand("kde", "optimal kde plan and zone.csv");
    auto* clt = app.add_subcommand("clt", "Monte Carlo CLT experiment: report.json, replicates.csv");
    auto* kde = app.add_subcommand("kde", "kernel density of one simulated path: kde.csv");
    for (auto* s : {simulate, diagnose, plan_mean, plan_kde, clt, kde}) common(s);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        weakdep::RunOptions opts;
        opts.out_dir = out;
        opts.workers = workers;
        bool seed_given = false;
        for (auto* s : {simulate, diagnose, plan_mean, plan_kde, clt, kde})
            if (s->parsed() && s->count("--seed") > 0) seed_given = true;
        if (seed_given) opts.seed = seed;

        const auto doc = weakdep::ConfigDoc::load(config);
        if (simulate->parsed()) return weakdep::run_simulate(doc, opts);
        if (diagnose->parsed()) return weakdep::run_diagnose(doc, opts);
        if (plan_mean->parsed()) return weakdep::run_plan_mean(doc, opts);
        if (plan_kde->parsed()) return weakdep::run_plan_kde(doc, opts);
        if (clt->parsed()) return weakdep::run_clt(doc, opts);
        if (kde->parsed()) return weakdep::run_kde(doc, opts);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
