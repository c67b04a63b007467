// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The featsearch Authors

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "featsearch/mock.hpp"
#include "featsearch/presets.hpp"
#include "featsearch/testgen.hpp"
#include "test_util.hpp"

using namespace featsearch;

namespace {

std::string const kTemplate =
    "Content-related: {{content}}\nStyle: {{style}}\nPerturbation: {{perturbation}}\nRetrieved:\n{{rag_examples}}\nManual:\n{{examples}}\n";

// Five features mirroring the worked navigation vector.
FeatureSpace worked_space() {
    using K = FeatureKind;
    using C = FeatureCategory;
    return FeatureSpace("worked", {
                                      FeatureDef{"venue", K::categorical, C::content, {"hospital", "bar", "restaurant"}},
                                      FeatureDef{"cuisine", K::categorical, C::content, {"none", "italian", "german"}},
                                      FeatureDef{"rating", K::ordinal, C::content, {"3.5", "4", "4.5", "5"}},
                                      FeatureDef{"tone", K::ordinal, C::style, {"impolite", "neutral", "polite"}},
                                      FeatureDef{"perturbation", K::categorical, C::perturbation, {"none", "fillers"}},
                                  });
}

FeatureVector worked_vector(FeatureSpace const& s) { return s.make_vector({"bar", "italian", "4", "polite", "none"}); }

Example hand_example(std::uint64_t id, std::string text, std::vector<double> e) {
    Example ex;
    ex.id = id;
    ex.text = std::move(text);
    ex.embedding = std::move(e);
    return ex;
}

std::shared_ptr<TestGenerator> scripted_generator(std::vector<mock::ScriptedChat::Step> steps, std::size_t retries,
                                                  std::shared_ptr<mock::ScriptedChat>* out = nullptr) {
    auto chat = std::make_shared<mock::ScriptedChat>(std::move(steps));
    if (out != nullptr) { *out = chat; }
    GenerationSettings settings;
    settings.rag_count = 0;
    settings.retries = retries;
    return std::make_shared<TestGenerator>(worked_space(), PromptTemplate(kTemplate), chat, nullptr, nullptr, std::vector<std::string>{},
                                           settings);
}

std::size_t words_in(std::string const& s) {
    std::istringstream in(s);
    std::string w;
    std::size_t n = 0;
    while (in >> w) { ++n; }
    return n;
}

}  // namespace

TEST(Template, RendersWorkedVectorVerbatim) {
    auto const s = worked_space();
    std::string const got = PromptTemplate(kTemplate).render(s, worked_vector(s), {"a retrieved one"}, {"a manual one", "another"});
    std::string const want =
        "Content-related: venue: bar\ncuisine: italian\nrating: 4\n"
        "Style: tone: polite\n"
        "Perturbation: perturbation: none\n"
        "Retrieved:\n- a retrieved one\n"
        "Manual:\n- a manual one\n- another\n";
    EXPECT_EQ(got, want);
}

TEST(Template, EmptyExampleListsBecomeNone) {
    auto const s = worked_space();
    std::string const got = PromptTemplate(kTemplate).render(s, worked_vector(s), {}, {});
    EXPECT_NE(got.find("Retrieved:\n(none)\n"), std::string::npos);
    EXPECT_NE(got.find("Manual:\n(none)\n"), std::string::npos);
    EXPECT_EQ(got.find("{{"), std::string::npos);
}

TEST(Template, ExampleTextIsNotReExpanded) {
    auto const s = worked_space();
    std::string const got = PromptTemplate(kTemplate).render(s, worked_vector(s), {"literal {{content}} here"}, {});
    EXPECT_NE(got.find("- literal {{content}} here"), std::string::npos);
}

TEST(Template, RenderingIsDeterministic) {
    auto const s = worked_space();
    PromptTemplate const t(kTemplate);
    EXPECT_EQ(t.render(s, worked_vector(s), {"x"}, {"y"}), t.render(s, worked_vector(s), {"x"}, {"y"}));
}

TEST(Template, RejectsMissingDuplicateAndUnknownPlaceholders) {
    EXPECT_THROW(PromptTemplate("{{content}} {{style}} {{perturbation}} {{rag_examples}}"), TemplateError);
    EXPECT_THROW(PromptTemplate(kTemplate + "{{style}}"), TemplateError);
    EXPECT_THROW(PromptTemplate(kTemplate + "{{venue}}"), TemplateError);
    EXPECT_THROW(PromptTemplate::load("/nonexistent/template.txt"), ConfigError);
}

TEST(Template, BundledTemplatesLoadAndResolve) {
    auto const s = presets::navqa_space();
    for (std::string const name : {"navigation_generation.txt", "safety_generation.txt"}) {
        auto const t = PromptTemplate::load(test::data_path("templates/" + name));
        auto const text = t.render(s, s.random_vector(1), {"r"}, {"f"});
        EXPECT_EQ(text.find("{{"), std::string::npos) << name;
    }
}

TEST(Retrieval, ToyStoreMatchesBruteForceRanking) {
    ExampleStore const store("hand", {hand_example(0, "a", {1, 0, 0}), hand_example(1, "b", {0.6, 0.8, 0}), hand_example(2, "c", {0, 0.2, 1})});
    std::vector<std::vector<double>> const queries{{1, 0.1, 0}, {0, 1, 0.5}, {0.2, 0.2, 0.9}, {-1, 0, 0}};
    for (auto const& q : queries) {
        std::vector<std::pair<double, std::uint64_t>> want;
        for (auto const& ex : store.records()) {
            double const c = dot(q, ex.embedding) / std::sqrt(dot(q, q) * dot(ex.embedding, ex.embedding));
            want.emplace_back(-c, ex.id);
        }
        std::sort(want.begin(), want.end());
        auto const got = nearest_examples(store, q, 3);
        ASSERT_EQ(got.size(), 3U);
        for (std::size_t i = 0; i < 3; ++i) {
            EXPECT_EQ(got[i].example->id, want[i].second);
            EXPECT_NEAR(got[i].similarity, -want[i].first, 1e-12);
        }
    }
}

TEST(Retrieval, IdenticalEmbeddingComesFirst) {
    ExampleStore const store("hand", {hand_example(0, "a", {1, 0}), hand_example(1, "b", {0.3, 0.7})});
    auto const got = nearest_examples(store, {0.3, 0.7}, 1);
    ASSERT_EQ(got.size(), 1U);
    EXPECT_EQ(got[0].example->id, 1U);
    EXPECT_NEAR(got[0].similarity, 1.0, 1e-12);
}

TEST(Retrieval, CountBeyondStoreReturnsEverythingOrdered) {
    ExampleStore const store("hand", {hand_example(5, "a", {0, 1}), hand_example(3, "b", {1, 0}), hand_example(4, "c", {1, 0})});
    auto const got = nearest_examples(store, {1, 0}, 10);
    ASSERT_EQ(got.size(), 3U);
    // Ties on similarity fall back to ascending id.
    EXPECT_EQ(got[0].example->id, 3U);
    EXPECT_EQ(got[1].example->id, 4U);
    EXPECT_EQ(got[2].example->id, 5U);
}

TEST(Retrieval, EmptyStoreOrDimensionMismatchIsConfigError) {
    EXPECT_THROW(nearest_examples(ExampleStore{}, {1, 0}, 3), ConfigError);
    ExampleStore const store("hand", {hand_example(0, "a", {1, 0})});
    EXPECT_THROW(nearest_examples(store, {1, 0, 0}, 3), ConfigError);
    EXPECT_THROW(ExampleStore("hand", {hand_example(0, "a", {1, 0}), hand_example(1, "b", {1, 0, 0})}), ConfigError);
}

TEST(Retrieval, RagEnabledWithoutStoreIsConfigError) {
    auto chat = std::make_shared<mock::ScriptedChat>(std::vector<mock::ScriptedChat::Step>{std::string("x")});
    auto emb = std::make_shared<mock::HashEmbedder>(16);
    GenerationSettings settings;
    settings.rag_count = 5;
    EXPECT_THROW(TestGenerator(worked_space(), PromptTemplate(kTemplate), chat, emb, std::make_shared<ExampleStore const>(), {}, settings),
                 ConfigError);
}

TEST(ExampleStoreFile, BundledStoresLoadWithMockEmbeddings) {
    mock::HashEmbedder emb(64);
    for (std::string const name : {"navigation_examples.jsonl", "safety_examples.jsonl"}) {
        auto const store = ExampleStore::load(test::data_path("examples/" + name), &emb);
        EXPECT_FALSE(store.empty()) << name;
        EXPECT_EQ(store.dimension(), 64U);
        EXPECT_EQ(store.embedding_model(), emb.model_id());
        for (auto const& ex : store.records()) { EXPECT_EQ(ex.embedding, emb.embed(ex.text)); }
    }
    EXPECT_EQ(load_fewshot(test::data_path("examples/navigation_fewshot.txt")).size(), 5U);
}

TEST(ExampleStoreFile, RejectsMissingHeader) {
    auto const dir = test::temp_dir("store_header");
    test::write_text(dir / "bad.jsonl", "{\"text\": \"hello\"}\n");
    mock::HashEmbedder emb(8);
    EXPECT_THROW(ExampleStore::load((dir / "bad.jsonl").string(), &emb), ConfigError);
}

TEST(ExampleStoreFile, RetrievalUsesFeatureRendering) {
    mock::HashEmbedder emb(64);
    auto const s = presets::navqa_space();
    auto const store = ExampleStore::load(test::data_path("examples/navigation_examples.jsonl"), &emb);
    auto const v = s.random_vector(3);
    auto const got = retrieve_examples(store, s, v, 5, emb);
    auto const want = nearest_examples(store, emb.embed(s.describe(v)), 5);
    ASSERT_EQ(got.size(), 5U);
    for (std::size_t i = 0; i < 5; ++i) { EXPECT_EQ(got[i].example->id, want[i].example->id); }
}

TEST(Generate, CannedReplyIsValid) {
    auto gen = scripted_generator({std::string("  Find me an Italian bar  ")}, 2);
    auto const s = worked_space();
    auto const in = gen->generate(worked_vector(s));
    EXPECT_TRUE(in.valid);
    EXPECT_EQ(in.utterance, "Find me an Italian bar");
    EXPECT_EQ(in.model, "scripted");
    EXPECT_EQ(in.attempts, 1U);
    EXPECT_EQ(in.vector, worked_vector(s));
}

TEST(Generate, EmptyThreeTimesIsInvalid) {
    std::shared_ptr<mock::ScriptedChat> chat;
    auto gen = scripted_generator({std::string(""), std::string("   "), std::string("\n")}, 2, &chat);
    auto const in = gen->generate(worked_vector(worked_space()));
    EXPECT_FALSE(in.valid);
    EXPECT_TRUE(in.utterance.empty());
    EXPECT_EQ(in.attempts, 3U);
    EXPECT_EQ(chat->calls(), 3U);
}

TEST(Generate, RecoversWithinRetries) {
    auto gen = scripted_generator({std::string(""), std::string("a bar please")}, 2);
    auto const in = gen->generate(worked_vector(worked_space()));
    EXPECT_TRUE(in.valid);
    EXPECT_EQ(in.attempts, 2U);
}

TEST(Generate, TransportFailureBecomesInvalidWithNote) {
    auto gen = scripted_generator({mock::Fail{"connection refused"}}, 1);
    auto const in = gen->generate(worked_vector(worked_space()));
    EXPECT_FALSE(in.valid);
    EXPECT_NE(in.note.find("connection refused"), std::string::npos);
}

TEST(Generate, OversizedReplyIsRetried) {
    auto gen = scripted_generator({std::string(5000, 'x'), std::string("ok then")}, 2);
    auto const in = gen->generate(worked_vector(worked_space()));
    EXPECT_TRUE(in.valid);
    EXPECT_EQ(in.utterance, "ok then");
}

TEST(Generate, PromptDigestIsStable) {
    auto gen = scripted_generator({std::string("x")}, 0);
    auto const s = worked_space();
    auto const a = gen->generate(worked_vector(s));
    auto const b = gen->generate(worked_vector(s));
    EXPECT_EQ(a.prompt_digest, b.prompt_digest);
    EXPECT_EQ(a.prompt_digest, hex64(fnv1a(gen->prompt(worked_vector(s)))));
}

TEST(Generate, MockGeneratorProducesWorkedShape) {
    auto const s = worked_space();
    auto chat = std::make_shared<mock::MockGenerator>(s, "navigation");
    auto emb = std::make_shared<mock::HashEmbedder>(64);
    auto const tmpl = PromptTemplate::load(test::data_path("templates/navigation_generation.txt"));
    TestGenerator const gen(s, tmpl, chat, emb, nullptr, {}, GenerationSettings{0, 5, 2, 2000});
    auto const in = gen.generate(worked_vector(s));
    ASSERT_TRUE(in.valid);
    std::string const low = to_lower(in.utterance);
    EXPECT_NE(low.find("bar"), std::string::npos) << in.utterance;
    EXPECT_NE(low.find("italian"), std::string::npos) << in.utterance;
    EXPECT_NE(low.find("4"), std::string::npos) << in.utterance;
    EXPECT_LE(words_in(in.utterance), 12U) << in.utterance;
    EXPECT_EQ(in.utterance, "Could you find me please an Italian bar, rated 4");
}

TEST(Generate, TemplateCarriesWordLimitGuideline) {
    auto const body = PromptTemplate::load(test::data_path("templates/navigation_generation.txt")).body();
    EXPECT_NE(body.find("12 words"), std::string::npos);
}
