// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The featsearch Authors

#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "featsearch/analysis.hpp"
#include "featsearch/baselines.hpp"
#include "featsearch/evaluation.hpp"
#include "featsearch/feature_space.hpp"
#include "featsearch/gateway.hpp"
#include "featsearch/mock.hpp"
#include "featsearch/poi.hpp"
#include "featsearch/record.hpp"
#include "featsearch/search.hpp"
#include "featsearch/testgen.hpp"

// Campaign configuration, wiring and orchestration.

namespace featsearch {

namespace fs = std::filesystem;

struct MockSettings {
    std::string generator_style = "generic";  // navigation | safety | generic
    std::size_t embedding_dimension = 128;
    std::uint64_t embedding_seed = 0;
    double embedding_locality = 0.5;
    nlohmann::json aut;                       // mock application spec
    fs::path aut_base;                        // for paths inside the spec
};

struct CampaignConfig {
    fs::path source;  // config file, if loaded from one
    fs::path space_path;
    std::string method = "ga";
    Budget budget;
    std::size_t population = 20;
    OperatorParams operators;
    std::size_t t = 4;
    std::size_t covering_candidates = 50;
    double similarity = 0.8;
    FitnessSpec fitness;
    fs::path pois_path;
    fs::path template_path;
    fs::path examples_path;
    fs::path fewshot_path;
    GenerationSettings generation;
    std::optional<MockSettings> mock;
    std::map<Role, EndpointBinding> endpoints;
    std::uint64_t seed = 0;
    std::size_t repeats = 1;
    std::size_t workers = 1;
    std::string clock = "logical";
    std::size_t diversity_repeats = 10;
    fs::path output = "out";
};

namespace detail {

/// Reads a config value with a diagnostic naming the JSON path on type errors.
template <class T>
T field(nlohmann::json const& j, char const* key, T fallback, std::string const& path) {
    if (!j.contains(key) || j[key].is_null()) { return fallback; }
    try {
        return j[key].get<T>();
    } catch (nlohmann::json::exception const&) {
        throw ConfigError(path + key + ": wrong type (" + std::string(j[key].type_name()) + ")");
    }
}

inline fs::path resolve(fs::path const& base, std::string const& p) {
    if (p.empty()) { return {}; }
    fs::path q(p);
    return q.is_absolute() ? q : (base / q).lexically_normal();
}

inline void require_file(fs::path const& p, std::string const& what) {
    if (!p.empty() && !fs::is_regular_file(p)) { throw ConfigError(what + ": file '" + p.string() + "' does not exist"); }
}

}  // namespace detail

/// Parses a campaign config. Relative paths resolve against `base`.
inline CampaignConfig campaign_from_json(nlohmann::json const& j, fs::path const& base) {
    using detail::field;
    if (!j.is_object()) { throw ConfigError("campaign config must be a JSON object"); }
    int const version = field(j, "version", 1, "");
    if (version != 1) { throw ConfigError("version: unsupported campaign config version " + std::to_string(version)); }
    CampaignConfig c;
    c.space_path = detail::resolve(base, field(j, "space", std::string{}, ""));
    if (c.space_path.empty()) { throw ConfigError("space: a feature-space file is required"); }
    c.method = field(j, "method", c.method, "");
    if (c.method != "ga" && c.method != "rs" && c.method != "twise") { throw ConfigError("method: must be ga, rs or twise (got '" + c.method + "')"); }
    if (j.contains("budget")) {
        auto const& b = j["budget"];
        if (!b.is_object()) { throw ConfigError("budget: must be an object"); }
        if (b.contains("evaluations") && !b["evaluations"].is_null()) { c.budget.evaluations = field(b, "evaluations", std::size_t{0}, "budget."); }
        if (b.contains("seconds") && !b["seconds"].is_null()) { c.budget.seconds = field(b, "seconds", 0.0, "budget."); }
    } else {
        c.budget.evaluations = 100;
    }
    c.population = field(j, "population", c.population, "");
    c.operators.crossover_prob = field(j, "crossover", c.operators.crossover_prob, "");
    c.operators.mutation_prob = field(j, "mutation", c.operators.mutation_prob, "");
    c.operators.eta_c = field(j, "eta_c", c.operators.eta_c, "");
    c.operators.eta_m = field(j, "eta_m", c.operators.eta_m, "");
    c.operators.tournament_size = field(j, "tournament_size", c.operators.tournament_size, "");
    c.t = field(j, "t", c.t, "");
    c.covering_candidates = field(j, "covering_candidates", c.covering_candidates, "");
    c.similarity = field(j, "similarity", c.similarity, "");
    c.seed = field(j, "seed", c.seed, "");
    c.repeats = field(j, "repeats", c.repeats, "");
    c.workers = field(j, "workers", c.workers, "");
    c.clock = field(j, "clock", c.clock, "");
    c.diversity_repeats = field(j, "diversity_repeats", c.diversity_repeats, "");
    c.output = detail::resolve(base, field(j, "output", std::string{"out"}, ""));

    nlohmann::json const fit = j.value("fitness", nlohmann::json::object());
    for (auto const& o : field(fit, "objectives", std::vector<std::string>{"judge_response_quality", "poi_match"}, "fitness.")) {
        try {
            c.fitness.objectives.push_back(parse_objective(o));
        } catch (ConfigError const& e) {
            throw ConfigError(std::string("fitness.objectives: ") + e.what());
        }
    }
    c.fitness.f1_threshold = field(fit, "f1_threshold", c.fitness.f1_threshold, "fitness.");
    c.fitness.f2_threshold = field(fit, "f2_threshold", c.fitness.f2_threshold, "fitness.");
    c.fitness.judge_retries = field(fit, "judge_retries", c.fitness.judge_retries, "fitness.");
    if (fit.contains("constraints")) {
        c.fitness.constraints.clear();
        for (auto const& jc : fit["constraints"]) {
            try {
                c.fitness.constraints.push_back(poi_constraint_from_json(jc));
            } catch (std::exception const& e) {
                throw ConfigError(std::string("fitness.constraints: ") + e.what());
            }
        }
    }
    c.pois_path = detail::resolve(base, field(fit, "pois", std::string{}, "fitness."));
    nlohmann::json const judges = fit.value("judges", nlohmann::json::object());
    auto load_judge = [&](char const* key) -> std::shared_ptr<JudgeTemplate const> {
        auto p = detail::resolve(base, field(judges, key, std::string{}, "fitness.judges."));
        if (p.empty()) { return nullptr; }
        detail::require_file(p, std::string("fitness.judges.") + key);
        return std::make_shared<JudgeTemplate const>(JudgeTemplate::load(p.string()));
    };
    c.fitness.safety_judge = load_judge("safety");
    c.fitness.binary_judge = load_judge("binary");
    c.fitness.quality_judge = load_judge("response_quality");

    nlohmann::json const gen = j.value("generator", nlohmann::json::object());
    c.template_path = detail::resolve(base, field(gen, "template", std::string{}, "generator."));
    if (c.template_path.empty()) { throw ConfigError("generator.template: a prompt template is required"); }
    c.examples_path = detail::resolve(base, field(gen, "examples", std::string{}, "generator."));
    c.fewshot_path = detail::resolve(base, field(gen, "fewshot", std::string{}, "generator."));
    c.generation.rag_count = field(gen, "rag_count", c.generation.rag_count, "generator.");
    c.generation.fewshot_count = field(gen, "fewshot_count", c.generation.fewshot_count, "generator.");
    c.generation.retries = field(gen, "retries", c.generation.retries, "generator.");
    c.generation.max_chars = field(gen, "max_chars", c.generation.max_chars, "generator.");
    if (c.examples_path.empty()) { c.generation.rag_count = 0; }

    if (j.contains("mock") && !j["mock"].is_null()) {
        auto const& m = j["mock"];
        MockSettings ms;
        ms.generator_style = field(m, "generator", ms.generator_style, "mock.");
        ms.embedding_dimension = field(m, "embedding_dimension", ms.embedding_dimension, "mock.");
        ms.embedding_seed = field(m, "embedding_seed", ms.embedding_seed, "mock.");
        ms.embedding_locality = field(m, "embedding_locality", ms.embedding_locality, "mock.");
        ms.aut_base = base;
        if (m.contains("aut") && m["aut"].is_string()) {
            auto p = detail::resolve(base, m["aut"].get<std::string>());
            detail::require_file(p, "mock.aut");
            std::ifstream in(p);
            try {
                ms.aut = nlohmann::json::parse(in);
            } catch (nlohmann::json::exception const& e) {
                throw ConfigError("mock.aut: " + p.string() + ": " + e.what());
            }
            ms.aut_base = p.parent_path();
        } else {
            ms.aut = m.value("aut", nlohmann::json::object());
        }
        c.mock = std::move(ms);
    }
    if (j.contains("endpoints") && !j["endpoints"].is_null()) {
        for (auto role : {Role::generator, Role::judge, Role::embedder, Role::aut}) {
            auto const key = to_string(role);
            if (!j["endpoints"].contains(key)) { continue; }
            try {
                c.endpoints[role] = binding_from_json(role, j["endpoints"][key]);
            } catch (std::exception const& e) {
                throw ConfigError("endpoints." + key + ": " + e.what());
            }
        }
    }
    if (!c.mock && c.endpoints.empty()) { throw ConfigError("either mock or endpoints must be configured"); }

    detail::require_file(c.space_path, "space");
    detail::require_file(c.template_path, "generator.template");
    detail::require_file(c.examples_path, "generator.examples");
    detail::require_file(c.fewshot_path, "generator.fewshot");
    detail::require_file(c.pois_path, "fitness.pois");
    return c;
}

inline CampaignConfig load_campaign(fs::path const& path) {
    std::ifstream in(path);
    if (!in) { throw ConfigError("cannot open campaign config '" + path.string() + "'"); }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (nlohmann::json::exception const& e) {
        throw ConfigError("campaign config '" + path.string() + "': " + e.what());
    }
    auto c = campaign_from_json(j, path.parent_path());
    c.source = path;
    return c;
}

inline Clock make_clock(CampaignConfig const& c) {
    if (c.clock == "logical") { return Clock::logical(); }
    if (c.clock == "steady") { return Clock::steady(); }
    throw ConfigError("clock: must be 'logical' or 'steady'");
}

/// Checks everything that can be checked before budget is spent.
inline void validate_campaign(CampaignConfig const& c) {
    if (c.repeats == 0) { throw ConfigError("repeats: must be positive"); }
    if (c.workers == 0) { throw ConfigError("workers: must be positive"); }
    if (!(c.similarity > 0.0 && c.similarity <= 1.0)) { throw ConfigError("similarity: must be in (0, 1]"); }
    SearchSettings s{c.population, c.operators, c.budget, c.seed};
    s.validate(make_clock(c));
    c.fitness.validate();
}

/// Mock endpoints, remote endpoints, or a mix (remote bindings win).
inline Gateway build_gateway(CampaignConfig const& c, FeatureSpace const& space, PoiDatabase const& pois) {
    Gateway g;
    if (c.mock) {
        g.generator = std::make_shared<mock::MockGenerator>(space, c.mock->generator_style);
        g.judge = std::make_shared<mock::MockJudge>();
        g.embedder = std::make_shared<mock::HashEmbedder>(c.mock->embedding_dimension, c.mock->embedding_seed, c.mock->embedding_locality);
        PoiDatabase aut_pois = pois;
        if (c.mock->aut.contains("pois")) {
            aut_pois = PoiDatabase::load(detail::resolve(c.mock->aut_base, c.mock->aut["pois"].get<std::string>()).string());
        }
        g.aut = std::make_shared<mock::MockApplication>(space, mock::mock_aut_spec_from_json(c.mock->aut, space, std::move(aut_pois)));
    }
    for (auto const& [role, b] : c.endpoints) {
        switch (role) {
            case Role::generator: g.generator = std::make_shared<RetryingChat>(std::make_shared<HttpChat>(b), b.retry_policy()); break;
            case Role::judge: g.judge = std::make_shared<RetryingChat>(std::make_shared<HttpChat>(b), b.retry_policy()); break;
            case Role::embedder: g.embedder = std::make_shared<RetryingEmbedder>(std::make_shared<HttpEmbedder>(b), b.retry_policy()); break;
            case Role::aut:
                g.aut = std::make_shared<ChatApplication>(std::make_shared<RetryingChat>(std::make_shared<HttpChat>(b), b.retry_policy()),
                                                          b.system_prompt);
                break;
        }
    }
    if (!g.generator || !g.embedder || !g.aut) { throw ConfigError("endpoints: generator, embedder and aut are all required"); }
    return g;
}

/// Endpoint reachability (GET {base}/models) for every remote binding.
inline void preflight_endpoints(CampaignConfig const& c) {
    for (auto const& [role, b] : c.endpoints) {
        if (!HttpEndpoint(b).reachable()) { throw TransportError("preflight: " + to_string(role) + " endpoint " + b.base_url + " is unreachable"); }
    }
}

/// Everything a campaign run needs, loaded once.
struct CampaignContext {
    CampaignConfig config;
    FeatureSpace space;
    std::shared_ptr<PoiDatabase const> pois;
    Gateway gateway;
    std::shared_ptr<TestGenerator const> generator;
};

inline CampaignContext prepare_campaign(CampaignConfig config, bool preflight = true) {
    validate_campaign(config);
    FeatureSpace space = load_feature_space(config.space_path.string());
    auto pois = std::make_shared<PoiDatabase const>(config.pois_path.empty() ? PoiDatabase{} : PoiDatabase::load(config.pois_path.string()));
    PromptTemplate tmpl = PromptTemplate::load(config.template_path.string());
    if (preflight) { preflight_endpoints(config); }
    Gateway gw = build_gateway(config, space, *pois);
    std::shared_ptr<ExampleStore const> store;
    if (!config.examples_path.empty()) { store = std::make_shared<ExampleStore const>(ExampleStore::load(config.examples_path.string(), gw.embedder.get())); }
    std::vector<std::string> fewshot;
    if (!config.fewshot_path.empty()) { fewshot = load_fewshot(config.fewshot_path.string()); }
    auto gen = std::make_shared<TestGenerator const>(space, std::move(tmpl), gw.generator, gw.embedder, store, std::move(fewshot), config.generation);
    return CampaignContext{std::move(config), std::move(space), std::move(pois), std::move(gw), std::move(gen)};
}

struct RunOutput {
    Archive archive;
    std::optional<CoveringArray> covering;
};

/// One repeat of the configured method with the given seed.
inline RunOutput run_once(CampaignContext const& ctx, std::uint64_t seed) {
    auto const& c = ctx.config;
    EvaluatorConfig ec{c.fitness, c.similarity, c.workers, c.method};
    Evaluator ev(ctx.space, ctx.generator, ctx.gateway, ctx.pois, ec, make_clock(c));
    if (c.method == "ga") {
        SearchSettings s{c.population, c.operators, c.budget, seed};
        return {run_search(ctx.space, ev, s, "ga"), std::nullopt};
    }
    if (c.method == "rs") { return {random_search(ctx.space, ev, c.budget, seed, c.population), std::nullopt}; }
    auto ca = generate_covering_array(ctx.space, c.t, seed, CoveringSettings{c.covering_candidates});
    auto a = run_twise(ctx.space, ev, ca, c.budget, seed, c.population);
    return {std::move(a), std::move(ca)};
}

struct CampaignResult {
    std::vector<fs::path> archives;
    ReportFiles report;
};

/// Runs every repeat (seed derived from the master seed), writing
/// <out>/<method>_r<i>/{archive,failures}.jsonl (plus covering_array.jsonl
/// for t-wise) and reports under <out>/report/.
inline CampaignResult run_campaign(CampaignContext const& ctx, std::ostream* log = nullptr) {
    auto const& c = ctx.config;
    fs::create_directories(c.output);
    CampaignResult res;
    std::vector<Archive> archives;
    for (std::size_t r = 0; r < c.repeats; ++r) {
        std::uint64_t const seed = c.repeats == 1 ? c.seed : derive_seed(c.seed, "repeat", r);
        auto out = run_once(ctx, seed);
        fs::path const dir = c.output / (c.method + "_r" + std::to_string(r));
        fs::create_directories(dir);
        out.archive.save((dir / "archive.jsonl").string());
        out.archive.save_failures((dir / "failures.jsonl").string());
        if (out.covering) { save_covering_array(*out.covering, ctx.space, (dir / "covering_array.jsonl").string()); }
        res.archives.push_back(dir / "archive.jsonl");
        if (log) {
            auto const row = summarize(c.method, out.archive);
            *log << c.method << " repeat " << r << " seed " << seed << ": " << row.tests << " tests, " << row.failures << " failures, "
                 << row.excluded << " excluded -> " << dir.string() << "\n";
        }
        archives.push_back(std::move(out.archive));
    }
    std::vector<LabelledArchive> labelled;
    for (std::size_t r = 0; r < archives.size(); ++r) { labelled.push_back({c.method + "_r" + std::to_string(r), &archives[r]}); }
    res.report = emit_report(labelled, c.output / "report", ReportSettings{c.diversity_repeats, c.seed, 10});
    return res;
}

/// Cross-method comparison of saved archives.
inline ReportFiles compare_archives(std::vector<fs::path> const& paths, fs::path const& out_dir, ReportSettings const& settings = {}) {
    if (paths.size() < 2) { throw UsageError("compare needs at least two archives"); }
    std::vector<Archive> archives;
    for (auto const& p : paths) { archives.push_back(Archive::load(p.string())); }
    std::vector<Archive const*> ptrs;
    for (auto const& a : archives) { ptrs.push_back(&a); }
    auto const labels = unique_labels(ptrs);
    std::vector<LabelledArchive> labelled;
    for (std::size_t i = 0; i < archives.size(); ++i) { labelled.push_back({labels[i], &archives[i]}); }
    return emit_report(labelled, out_dir, settings);
}

}  // namespace featsearch
