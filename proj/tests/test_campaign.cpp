// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The featsearch Authors

#include <gtest/gtest.h>

#include <cstdlib>
#include <sys/wait.h>

#include "featsearch/featsearch.hpp"
#include "fixtures.hpp"

using namespace featsearch;
namespace fs = std::filesystem;

namespace {

nlohmann::json campaign_json(std::string const& name) { return nlohmann::json::parse(test::slurp(test::data_path("campaigns/" + name + ".json"))); }

/// Loads `j` as if it sat next to the bundled campaigns.
CampaignConfig parse(nlohmann::json const& j) { return campaign_from_json(j, fs::path(test::data_path("campaigns"))); }

std::string config_error(nlohmann::json const& j) {
    try {
        parse(j);
    } catch (ConfigError const& e) {
        return e.what();
    }
    return "";
}

std::size_t line_count(fs::path const& p) {
    auto const text = test::slurp(p);
    return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

int cli(std::string const& args, fs::path const& log) {
    std::string const cmd = std::string(FEATSEARCH_CLI) + " " + args + " >" + log.string() + " 2>&1";
    int const status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

// Config parsing --------------------------------------------------------------------

TEST(Config, BundledCampaignsLoad) {
    auto const nav = test::bundled_campaign("navqa_mock");
    EXPECT_EQ(nav.method, "ga");
    EXPECT_EQ(nav.budget.evaluations, std::optional<std::size_t>(1000));
    EXPECT_EQ(nav.population, 20U);
    EXPECT_EQ(nav.fitness.objectives.size(), 2U);
    EXPECT_TRUE(nav.mock.has_value());
    auto const safe = test::bundled_campaign("safeqa_mock");
    EXPECT_EQ(safe.fitness.objectives, std::vector<Objective>{Objective::judge_safety});
    auto const remote = load_campaign(test::data_path("campaigns/navqa_remote.example.json"));
    EXPECT_EQ(remote.endpoints.size(), 4U);
    EXPECT_EQ(remote.endpoints.at(Role::generator).api_key_env, "FEATSEARCH_API_KEY");
}

TEST(Config, ErrorsNameTheField) {
    auto j = campaign_json("navqa_mock");
    j["population"] = "twenty";
    EXPECT_NE(config_error(j).find("population"), std::string::npos);

    j = campaign_json("navqa_mock");
    j["budget"]["evaluations"] = "many";
    EXPECT_NE(config_error(j).find("budget.evaluations"), std::string::npos);

    j = campaign_json("navqa_mock");
    j["method"] = "annealing";
    EXPECT_NE(config_error(j).find("method"), std::string::npos);

    j = campaign_json("navqa_mock");
    j["fitness"]["objectives"] = {"accuracy"};
    EXPECT_NE(config_error(j).find("fitness.objectives"), std::string::npos);

    j = campaign_json("navqa_mock");
    j["endpoints"] = {{"judge", {{"base_url", "http://x/v1"}, {"model", "m"}, {"temperature", 3.0}}}};
    EXPECT_NE(config_error(j).find("endpoints.judge"), std::string::npos);

    j = campaign_json("navqa_mock");
    j.erase("mock");
    EXPECT_NE(config_error(j).find("mock or endpoints"), std::string::npos);
}

TEST(Config, MissingTemplateNamesThePath) {
    auto j = campaign_json("navqa_mock");
    j["generator"]["template"] = "../templates/does_not_exist.txt";
    auto const msg = config_error(j);
    EXPECT_NE(msg.find("generator.template"), std::string::npos);
    EXPECT_NE(msg.find("does_not_exist.txt"), std::string::npos);
}

TEST(Config, InvalidSettingsRejectedBeforeRunning) {
    auto c = test::bundled_campaign("navqa_mock");
    c.population = 1;
    EXPECT_THROW(validate_campaign(c), ConfigError);
    c = test::bundled_campaign("navqa_mock");
    c.operators.mutation_prob = 1.5;
    EXPECT_THROW(validate_campaign(c), ConfigError);
    c = test::bundled_campaign("navqa_mock");
    c.budget.seconds = 10.0;
    EXPECT_THROW(validate_campaign(c), ConfigError);
    c.clock = "steady";
    EXPECT_NO_THROW(validate_campaign(c));
    c.clock = "sundial";
    EXPECT_THROW(validate_campaign(c), ConfigError);
}

// Campaign runs ---------------------------------------------------------------------

TEST(Campaign, GeneticSmokeRunWritesEverything) {
    auto c = test::bundled_campaign("navqa_mock", 4);
    c.budget.evaluations = 100;
    c.output = test::temp_dir("campaign_ga");
    c.diversity_repeats = 2;
    auto const res = run_campaign(prepare_campaign(c, false));
    ASSERT_EQ(res.archives.size(), 1U);
    auto const dir = c.output / "ga_r0";
    EXPECT_EQ(res.archives[0], dir / "archive.jsonl");
    auto const a = Archive::load(res.archives[0].string());
    EXPECT_EQ(a.size(), 100U);
    EXPECT_EQ(line_count(dir / "archive.jsonl"), 101U);
    std::size_t fails = 0;
    for (auto const& r : a.records()) { fails += r.failed() ? 1 : 0; }
    EXPECT_EQ(line_count(dir / "failures.jsonl"), fails + 1);
    EXPECT_TRUE(fs::exists(c.output / "report" / "summary.csv"));
    EXPECT_TRUE(fs::exists(c.output / "report" / "timeseries_ga_r0.csv"));
    EXPECT_TRUE(fs::exists(c.output / "report" / "diversity.json"));
    EXPECT_FALSE(fs::exists(dir / "covering_array.jsonl"));
}

TEST(Campaign, RepeatsUseDerivedSeeds) {
    auto c = test::bundled_campaign("safeqa_mock", 2);
    c.budget.evaluations = 40;
    c.repeats = 2;
    c.diversity_repeats = 1;
    c.output = test::temp_dir("campaign_repeats");
    auto const res = run_campaign(prepare_campaign(c, false));
    ASSERT_EQ(res.archives.size(), 2U);
    auto const a = Archive::load(res.archives[0].string());
    auto const b = Archive::load(res.archives[1].string());
    EXPECT_NE(a.info().seed, b.info().seed);
    EXPECT_EQ(res.report.rows.size(), 2U);
}

TEST(Campaign, TWiseExportsItsCoveringArray) {
    auto c = test::bundled_campaign("safeqa_mock");
    c.method = "twise";
    c.t = 2;
    c.budget.evaluations = 60;
    c.diversity_repeats = 1;
    c.output = test::temp_dir("campaign_twise");
    auto const ctx = prepare_campaign(c, false);
    run_campaign(ctx);
    auto const ca = load_covering_array((c.output / "twise_r0" / "covering_array.jsonl").string(), ctx.space);
    EXPECT_EQ(ca.t, 2U);
    EXPECT_TRUE(verify_coverage(ctx.space, ca.rows, 2).complete());
    auto const a = Archive::load((c.output / "twise_r0" / "archive.jsonl").string());
    EXPECT_EQ(a.size(), 60U);
    EXPECT_EQ(a.info().method, "twise");
}

TEST(Campaign, ArchiveSurvivesSaveAndLoad) {
    auto c = test::bundled_campaign("navqa_mock", 2);
    c.budget.evaluations = 60;
    auto const ctx = prepare_campaign(c, false);
    auto const out = run_once(ctx, 4);
    auto const path = (test::temp_dir("campaign_io") / "a.jsonl").string();
    out.archive.save(path);
    auto const back = Archive::load(path);
    EXPECT_EQ(test::archive_text(back), test::archive_text(out.archive));
    EXPECT_EQ(back.info().seed, 4U);
}

// Comparison ------------------------------------------------------------------------

TEST(Compare, NeedsTwoArchives) { EXPECT_THROW(compare_archives({"only.jsonl"}, test::temp_dir("cmp_one")), UsageError); }

TEST(Compare, GeneticVersusRandom) {
    auto const dir = test::temp_dir("cmp_ga_rs");
    std::vector<fs::path> paths;
    for (std::string method : {"ga", "rs"}) {
        auto c = test::bundled_campaign("navqa_mock", 4);
        c.method = method;
        c.budget.evaluations = 200;
        auto const out = run_once(prepare_campaign(c, false), 1);
        paths.push_back(dir / (method + ".jsonl"));
        out.archive.save(paths.back().string());
    }
    auto const files = compare_archives(paths, dir / "report", ReportSettings{2, 0, 10});
    ASSERT_EQ(files.rows.size(), 2U);
    EXPECT_EQ(files.rows[0].method, "ga");
    EXPECT_EQ(files.rows[1].method, "rs");
    EXPECT_EQ(files.rows[0].tests, 200U);
    EXPECT_TRUE(files.report.mean_coverage.count("ga"));
    EXPECT_TRUE(files.report.mean_coverage.count("rs"));
}

TEST(Compare, IdenticalArchivesGiveEqualRows) {
    auto const dir = test::temp_dir("cmp_same");
    auto c = test::bundled_campaign("safeqa_mock", 2);
    c.budget.evaluations = 40;
    auto const out = run_once(prepare_campaign(c, false), 2);
    out.archive.save((dir / "a.jsonl").string());
    out.archive.save((dir / "b.jsonl").string());
    auto const files = compare_archives({dir / "a.jsonl", dir / "b.jsonl"}, dir / "report", ReportSettings{2, 0, 10});
    ASSERT_EQ(files.rows.size(), 2U);
    EXPECT_NE(files.rows[0].label, files.rows[1].label);
    EXPECT_EQ(files.rows[0].failures, files.rows[1].failures);
    EXPECT_EQ(files.rows[0].ratio, files.rows[1].ratio);
    EXPECT_EQ(files.rows[0].mean_fitness, files.rows[1].mean_fitness);
    auto const& cov = files.report.mean_coverage;
    EXPECT_EQ(cov.at(files.rows[0].label), cov.at(files.rows[1].label));
}

// Command line ----------------------------------------------------------------------

TEST(Cli, GenSpaceMatchesBundledFile) {
    auto const dir = test::temp_dir("cli_gen");
    EXPECT_EQ(cli("gen-space --preset navqa --out " + (dir / "n.json").string(), dir / "log"), 0);
    EXPECT_EQ(test::slurp(dir / "n.json"), test::slurp(test::data_path("spaces/navqa.json")));
    EXPECT_EQ(cli("gen-space --out " + (dir / "s.json").string(), dir / "log"), 0);
    EXPECT_NO_THROW(load_feature_space((dir / "s.json").string()));
    EXPECT_EQ(cli("gen-space --preset nope", dir / "log"), 2);
}

TEST(Cli, VerifyArray) {
    auto const dir = test::temp_dir("cli_verify");
    EXPECT_EQ(cli("verify-array --preset safeqa --t 2 --out " + (dir / "ca.jsonl").string(), dir / "log"), 0);
    EXPECT_NE(test::slurp(dir / "log").find("coverage complete"), std::string::npos);
    EXPECT_EQ(cli("verify-array --preset safeqa --t 3 --array " + (dir / "ca.jsonl").string(), dir / "log"), 1);
    EXPECT_EQ(cli("verify-array --preset safeqa --t 99", dir / "log"), 2);
}

TEST(Cli, RunAndCompare) {
    auto const dir = test::temp_dir("cli_run");
    std::string const cfg = test::data_path("campaigns/safeqa_mock.json");
    EXPECT_EQ(cli("run " + cfg + " --budget 30 --out " + (dir / "ga").string(), dir / "log"), 0) << test::slurp(dir / "log");
    EXPECT_EQ(cli("run " + cfg + " --method rs --budget 30 --out " + (dir / "rs").string(), dir / "log"), 0);
    EXPECT_EQ(cli("compare " + (dir / "ga/ga_r0/archive.jsonl").string() + " " + (dir / "rs/rs_r0/archive.jsonl").string() + " --out " +
                      (dir / "cmp").string(),
                  dir / "log"),
              0);
    EXPECT_TRUE(fs::exists(dir / "cmp" / "summary.csv"));
    EXPECT_EQ(cli("run " + cfg + " --method annealing", dir / "log"), 2);
    EXPECT_EQ(cli("run " + cfg + " --seconds 5 --out " + (dir / "x").string(), dir / "log"), 2);
    EXPECT_NE(test::slurp(dir / "log").find("steady"), std::string::npos);
}

TEST(Cli, UnreachableEndpointIsTransportError) {
    auto const dir = test::temp_dir("cli_remote");
    auto j = campaign_json("navqa_mock");
    j.erase("mock");
    for (auto const* role : {"generator", "judge", "embedder", "aut"}) {
        j["endpoints"][role] = {{"base_url", "http://127.0.0.1:9/v1"}, {"model", "m"}, {"timeout_s", 1.0}};
    }
    for (auto const* key : {"space", "output"}) { j[key] = (fs::path(test::data_path("campaigns")) / j[key].get<std::string>()).string(); }
    for (auto const* key : {"template", "examples", "fewshot"}) {
        j["generator"][key] = (fs::path(test::data_path("campaigns")) / j["generator"][key].get<std::string>()).string();
    }
    j["fitness"]["pois"] = (fs::path(test::data_path("campaigns")) / j["fitness"]["pois"].get<std::string>()).string();
    j["fitness"]["judges"]["response_quality"] =
        (fs::path(test::data_path("campaigns")) / j["fitness"]["judges"]["response_quality"].get<std::string>()).string();
    j["output"] = (dir / "out").string();
    test::write_text(dir / "remote.json", j.dump(2));
    EXPECT_EQ(cli("run " + (dir / "remote.json").string(), dir / "log"), 3) << test::slurp(dir / "log");
}
