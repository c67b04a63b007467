// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The featsearch Authors

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "featsearch/featsearch.hpp"

namespace fs = std::filesystem;
using namespace featsearch;

namespace {

struct RunOpts {
    std::string config;
    std::optional<std::string> method;
    std::optional<std::size_t> budget;
    std::optional<double> seconds;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> repeats;
    std::optional<std::size_t> workers;
    std::optional<std::size_t> population;
    std::optional<double> mutation;
    std::optional<double> crossover;
    std::optional<std::size_t> t;
    std::optional<std::string> clock;
    std::optional<std::string> out;
    bool no_preflight = false;
};

int cmd_run(RunOpts const& o) {
    CampaignConfig c = load_campaign(o.config);
    if (o.method) {
        if (*o.method != "ga" && *o.method != "rs" && *o.method != "twise") { throw ConfigError("--method must be ga, rs or twise"); }
        c.method = *o.method;
    }
    if (o.budget) { c.budget.evaluations = *o.budget; }
    if (o.seconds) { c.budget.seconds = *o.seconds; }
    if (o.seed) { c.seed = *o.seed; }
    if (o.repeats) { c.repeats = *o.repeats; }
    if (o.workers) { c.workers = *o.workers; }
    if (o.population) { c.population = *o.population; }
    if (o.mutation) { c.operators.mutation_prob = *o.mutation; }
    if (o.crossover) { c.operators.crossover_prob = *o.crossover; }
    if (o.t) { c.t = *o.t; }
    if (o.clock) { c.clock = *o.clock; }
    if (o.out) { c.output = *o.out; }
    auto ctx = prepare_campaign(std::move(c), !o.no_preflight);
    auto res = run_campaign(ctx, &std::cout);
    std::cout << "report: " << res.report.summary.parent_path().string() << "\n" << summary_csv(res.report.rows);
    return 0;
}

int cmd_compare(std::vector<std::string> const& archives, std::string const& out, std::size_t repeats, std::uint64_t seed) {
    std::vector<fs::path> paths(archives.begin(), archives.end());
    auto files = compare_archives(paths, out, ReportSettings{repeats, seed, 10});
    std::cout << summary_csv(files.rows);
    std::cout << "diversity (mean cluster coverage over " << files.report.repeats << " repeats, " << files.report.pooled << " failures):\n";
    for (auto const& [m, v] : files.report.mean_coverage) { std::cout << "  " << m << " " << fixed(v, 4) << "\n"; }
    std::cout << "written to " << out << "\n";
    return 0;
}

FeatureSpace space_from(std::string const& space_file, std::string const& preset) {
    if (!preset.empty()) {
        auto s = presets::by_name(preset);
        if (!s) { throw UsageError("unknown preset '" + preset + "' (known: safeqa, navqa)"); }
        return *s;
    }
    if (space_file.empty()) { throw UsageError("give --space FILE or --preset NAME"); }
    return load_feature_space(space_file);
}

int cmd_verify(std::string const& space_file, std::string const& preset, std::size_t t, std::string const& array_file, std::uint64_t seed,
               std::size_t candidates, std::string const& out) {
    FeatureSpace const space = space_from(space_file, preset);
    CoveringArray ca;
    if (!array_file.empty()) {
        ca = load_covering_array(array_file, space);
        if (ca.t != 0 && ca.t != t) { std::cout << "note: file declares t=" << ca.t << ", verifying t=" << t << "\n"; }
    } else {
        ca = generate_covering_array(space, t, seed, CoveringSettings{candidates});
    }
    if (!out.empty()) { save_covering_array(ca, space, out); }
    auto const rep = verify_coverage(space, ca.rows, t);
    std::uint64_t const bound = 3 * rep.lower_bound;
    std::cout << "space " << space.name() << " (" << space.dimension() << " features, " << space.combination_count() << " combinations)\n"
              << "strength " << t << ", rows " << rep.rows << ", lower bound " << rep.lower_bound << ", size within 3x bound: "
              << (rep.rows <= bound ? "yes" : "no") << "\n"
              << "valid tuples " << rep.valid_tuples << " (" << rep.method << "), covered " << rep.covered << " (" << fixed(100.0 * rep.ratio(), 2)
              << "%), inconsistent rows " << rep.inconsistent_rows << "\n";
    for (auto const& m : rep.missing) { std::cout << "  missing: " << m << "\n"; }
    std::cout << (rep.complete() ? "coverage complete\n" : "coverage INCOMPLETE\n");
    return rep.complete() ? 0 : 1;
}

nlohmann::json scaffold_space() {
    return nlohmann::json::parse(R"({
  "name": "my_space",
  "features": [
    {"name": "politeness", "kind": "ordinal", "category": "style", "domain": ["impolite", "neutral", "polite"]},
    {"name": "venue", "kind": "categorical", "category": "content", "domain": ["restaurant", "car_repair"]},
    {"name": "cuisine", "kind": "categorical", "category": "content", "domain": ["none", "italian", "german"]},
    {"name": "fillers", "kind": "ordinal", "category": "perturbation", "domain": ["none", "low", "high"]}
  ],
  "constraints": [
    {"when": {"feature": "venue", "in": ["car_repair"]}, "then": [{"feature": "cuisine", "force": "none"}]}
  ]
})");
}

int cmd_gen_space(std::string const& preset, std::string const& out) {
    nlohmann::json j;
    if (preset.empty()) {
        j = scaffold_space();
        feature_space_from_json(j);  // the scaffold must itself load
    } else {
        auto s = presets::by_name(preset);
        if (!s) { throw UsageError("unknown preset '" + preset + "' (known: safeqa, navqa)"); }
        j = to_json(*s);
    }
    std::string const text = j.dump(2) + "\n";
    if (out.empty() || out == "-") {
        std::cout << text;
    } else {
        std::ofstream f(out, std::ios::binary);
        if (!f) { throw ConfigError("cannot write '" + out + "'"); }
        f << text;
        std::cerr << "wrote " << out << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"featsearch: feature-guided search-based test generation for LLM applications"};
    app.require_subcommand(1);

    RunOpts ro;
    auto* run = app.add_subcommand("run", "Run a campaign from a config file");
    run->add_option("config", ro.config, "Campaign config (JSON)")->required()->check(CLI::ExistingFile);
    run->add_option("--method", ro.method, "ga | rs | twise");
    run->add_option("--budget", ro.budget, "Maximum evaluations");
    run->add_option("--seconds", ro.seconds, "Wall-clock budget (needs --clock steady)");
    run->add_option("--seed", ro.seed, "Master seed");
    run->add_option("--repeats", ro.repeats, "Number of repeats");
    run->add_option("--workers", ro.workers, "Evaluation worker threads");
    run->add_option("--population", ro.population, "Population size k");
    run->add_option("--mutation", ro.mutation, "Per-variable mutation probability");
    run->add_option("--crossover", ro.crossover, "Crossover probability per pair");
    run->add_option("--t", ro.t, "Covering strength for twise");
    run->add_option("--clock", ro.clock, "logical | steady");
    run->add_option("--out", ro.out, "Output directory");
    run->add_flag("--no-preflight", ro.no_preflight, "Skip endpoint reachability checks");

    std::vector<std::string> archives;
    std::string cmp_out = "compare";
    std::size_t cmp_repeats = 10;
    std::uint64_t cmp_seed = 0;
    auto* cmp = app.add_subcommand("compare", "Compare saved archives (summary, time series, diversity)");
    cmp->add_option("archives", archives, "Archive files")->required()->check(CLI::ExistingFile);
    cmp->add_option("--out", cmp_out, "Report directory");
    cmp->add_option("--repeats", cmp_repeats, "Clustering repeats");
    cmp->add_option("--seed", cmp_seed, "Clustering seed");

    std::string va_space;
    std::string va_preset;
    std::size_t va_t = 4;
    std::string va_array;
    std::uint64_t va_seed = 0;
    std::size_t va_candidates = 50;
    std::string va_out;
    auto* va = app.add_subcommand("verify-array", "Generate (or load) a covering array and audit its t-wise coverage");
    va->add_option("--space", va_space, "Feature-space file")->check(CLI::ExistingFile);
    va->add_option("--preset", va_preset, "Bundled space: safeqa | navqa");
    va->add_option("--t", va_t, "Strength");
    va->add_option("--array", va_array, "Existing covering-array file to audit")->check(CLI::ExistingFile);
    va->add_option("--seed", va_seed, "Generation seed");
    va->add_option("--candidates", va_candidates, "Candidate completions per row");
    va->add_option("--out", va_out, "Export the array to this file");

    std::string gs_preset;
    std::string gs_out;
    auto* gs = app.add_subcommand("gen-space", "Write a feature-space file (a bundled preset or an editable scaffold)");
    gs->add_option("--preset", gs_preset, "safeqa | navqa");
    gs->add_option("--out", gs_out, "Output file (default stdout)");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*run) { return cmd_run(ro); }
        if (*cmp) { return cmd_compare(archives, cmp_out, cmp_repeats, cmp_seed); }
        if (*va) { return cmd_verify(va_space, va_preset, va_t, va_array, va_seed, va_candidates, va_out); }
        if (*gs) { return cmd_gen_space(gs_preset, gs_out); }
    } catch (UsageError const& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (ConfigError const& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (TemplateError const& e) {
        std::cerr << "template error: " << e.what() << "\n";
        return 2;
    } catch (TransportError const& e) {
        std::cerr << "transport error: " << e.what() << "\n";
        return 3;
    } catch (std::exception const& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
