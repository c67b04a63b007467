// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The featsearch Authors

#pragma once

#include <array>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "featsearch/common.hpp"
#include "featsearch/feature_space.hpp"
#include "featsearch/gateway.hpp"

// Feature vector -> natural-language test input.

namespace featsearch {

inline std::string read_text_file(std::string const& path, char const* what) {
    std::ifstream in(path, std::ios::binary);
    if (!in) { throw ConfigError(std::string("cannot open ") + what + " '" + path + "'"); }
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

/// Replaces every occurrence of `key` in `text`.
inline std::string replace_all(std::string text, std::string_view key, std::string_view value) {
    std::size_t pos = 0;
    while ((pos = text.find(key, pos)) != std::string::npos) {
        text.replace(pos, key.size(), value);
        pos += value.size();
    }
    return text;
}

inline std::size_t count_occurrences(std::string_view text, std::string_view key) {
    std::size_t n = 0;
    for (std::size_t pos = text.find(key); pos != std::string_view::npos; pos = text.find(key, pos + key.size())) { ++n; }
    return n;
}

// Template -----------------------------------------------------------------

class PromptTemplate {
public:
    static constexpr std::array<std::string_view, 5> placeholders{"{{content}}", "{{style}}", "{{perturbation}}", "{{rag_examples}}",
                                                                  "{{examples}}"};

    explicit PromptTemplate(std::string body, std::string source = "<inline>") : body_{std::move(body)}, source_{std::move(source)} {
        for (auto p : placeholders) {
            auto const n = count_occurrences(body_, p);
            if (n != 1) {
                throw TemplateError("template " + source_ + ": placeholder " + std::string(p) + " must appear exactly once (found " +
                                    std::to_string(n) + ")");
            }
        }
        std::string probe = body_;
        for (auto p : placeholders) { probe = replace_all(probe, p, ""); }
        if (auto pos = probe.find("{{"); pos != std::string::npos) {
            auto const end = probe.find("}}", pos);
            throw TemplateError("template " + source_ + ": unknown placeholder " + probe.substr(pos, end == std::string::npos ? 12 : end + 2 - pos));
        }
    }

    static PromptTemplate load(std::string const& path) { return PromptTemplate(read_text_file(path, "template"), path); }

    std::string const& body() const noexcept { return body_; }
    std::string const& source() const noexcept { return source_; }

    /// Features grouped by category as "name: value" lines; example lists as
    /// "- text" lines; "(none)" for anything empty.
    std::string render(FeatureSpace const& space, FeatureVector const& v, std::vector<std::string> const& rag_examples,
                       std::vector<std::string> const& fewshot) const {
        auto block = [](std::string s) { return s.empty() ? std::string("(none)") : s; };
        auto list = [](std::vector<std::string> const& xs) {
            std::string out;
            for (auto const& x : xs) {
                if (!out.empty()) { out += '\n'; }
                out += "- " + x;
            }
            return out.empty() ? std::string("(none)") : out;
        };
        // Substitute in one left-to-right pass so values containing "{{...}}"
        // are never re-expanded.
        std::vector<std::pair<std::string_view, std::string>> subs{
            {placeholders[0], block(space.describe(v, FeatureCategory::content))},
            {placeholders[1], block(space.describe(v, FeatureCategory::style))},
            {placeholders[2], block(space.describe(v, FeatureCategory::perturbation))},
            {placeholders[3], list(rag_examples)},
            {placeholders[4], list(fewshot)},
        };
        std::string out;
        std::size_t pos = 0;
        while (true) {
            std::size_t best = std::string::npos;
            std::size_t which = 0;
            for (std::size_t i = 0; i < subs.size(); ++i) {
                auto const p = body_.find(subs[i].first, pos);
                if (p < best) {
                    best = p;
                    which = i;
                }
            }
            if (best == std::string::npos) { break; }
            out.append(body_, pos, best - pos);
            out += subs[which].second;
            pos = best + subs[which].first.size();
        }
        out.append(body_, pos, std::string::npos);
        return out;
    }

private:
    std::string body_;
    std::string source_;
};

// Example store ------------------------------------------------------------

struct Example {
    std::uint64_t id = 0;
    std::string text;
    nlohmann::json features = nlohmann::json::object();
    std::vector<double> embedding;
};

class ExampleStore {
public:
    ExampleStore() = default;
    ExampleStore(std::string model, std::vector<Example> records) : model_{std::move(model)}, records_{std::move(records)} { check(); }

    std::vector<Example> const& records() const noexcept { return records_; }
    std::string const& embedding_model() const noexcept { return model_; }
    std::size_t dimension() const noexcept { return records_.empty() ? 0 : records_.front().embedding.size(); }
    bool empty() const noexcept { return records_.empty(); }
    std::size_t size() const noexcept { return records_.size(); }

    /// Line-delimited records after a metadata header. Embeddings missing from
    /// the file, or computed by a different model than `embedder`, are
    /// recomputed with `embedder`.
    static ExampleStore load(std::string const& path, Embedder* embedder) {
        std::ifstream in(path);
        if (!in) { throw ConfigError("cannot open example store '" + path + "'"); }
        std::string line;
        std::size_t lineno = 0;
        nlohmann::json header;
        std::vector<Example> records;
        while (std::getline(in, line)) {
            ++lineno;
            if (trim(line).empty()) { continue; }
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(line);
            } catch (nlohmann::json::exception const& e) {
                throw ConfigError("example store '" + path + "' line " + std::to_string(lineno) + ": " + e.what());
            }
            if (header.is_null()) {
                if (!j.is_object() || j.value("schema", std::string{}) != "featsearch.examples") {
                    throw ConfigError("example store '" + path + "': first line must be a header with schema \"featsearch.examples\"");
                }
                header = std::move(j);
                continue;
            }
            Example ex;
            ex.id = j.value("id", static_cast<std::uint64_t>(records.size()));
            if (!j.contains("text") || !j["text"].is_string()) {
                throw ConfigError("example store '" + path + "' line " + std::to_string(lineno) + ": missing text");
            }
            ex.text = j["text"].get<std::string>();
            if (j.contains("features")) { ex.features = j["features"]; }
            if (j.contains("embedding")) { ex.embedding = j["embedding"].get<std::vector<double>>(); }
            records.push_back(std::move(ex));
        }
        if (header.is_null()) { throw ConfigError("example store '" + path + "' is empty"); }
        std::string model = header.value("embedding_model", std::string{});
        if (embedder != nullptr) {
            bool const stale = model != embedder->model_id();
            for (auto& ex : records) {
                if (stale || ex.embedding.empty()) { ex.embedding = embedder->embed(ex.text); }
            }
            model = embedder->model_id();
        }
        try {
            return ExampleStore(std::move(model), std::move(records));
        } catch (ConfigError const& e) {
            throw ConfigError("example store '" + path + "': " + e.what());
        }
    }

    nlohmann::json header() const { return {{"schema", "featsearch.examples"}, {"embedding_model", model_}, {"dimension", dimension()}}; }

private:
    void check() const {
        for (auto const& ex : records_) {
            if (ex.embedding.empty()) { throw ConfigError("record " + std::to_string(ex.id) + " has no embedding"); }
            if (ex.embedding.size() != records_.front().embedding.size()) {
                throw ConfigError("record " + std::to_string(ex.id) + " embedding dimension differs from the first record");
            }
        }
    }

    std::string model_;
    std::vector<Example> records_;
};

struct ScoredExample {
    Example const* example = nullptr;
    double similarity = 0.0;
};

/// The `count` records most similar to `query`; similarity descending, id
/// ascending on ties.
inline std::vector<ScoredExample> nearest_examples(ExampleStore const& store, std::vector<double> const& query, std::size_t count) {
    if (store.empty()) { throw ConfigError("retrieval requested from an empty example store"); }
    if (query.size() != store.dimension()) {
        throw ConfigError("query embedding dimension " + std::to_string(query.size()) + " differs from store dimension " +
                          std::to_string(store.dimension()));
    }
    std::vector<ScoredExample> scored;
    scored.reserve(store.size());
    for (auto const& ex : store.records()) { scored.push_back({&ex, cosine(query, ex.embedding)}); }
    std::sort(scored.begin(), scored.end(), [](ScoredExample const& a, ScoredExample const& b) {
        if (a.similarity != b.similarity) { return a.similarity > b.similarity; }
        return a.example->id < b.example->id;
    });
    if (scored.size() > count) { scored.resize(count); }
    return scored;
}

/// Embeds the "name: value" rendering of v and returns the nearest records.
inline std::vector<ScoredExample> retrieve_examples(ExampleStore const& store, FeatureSpace const& space, FeatureVector const& v, std::size_t count,
                                                    Embedder& embedder) {
    return nearest_examples(store, embedder.embed(space.describe(v)), count);
}

// Generation ---------------------------------------------------------------

struct GenerationSettings {
    std::size_t rag_count = 5;
    std::size_t fewshot_count = 5;
    std::size_t retries = 2;            // extra attempts after an empty reply or transport failure
    std::size_t max_chars = 2000;       // replies longer than this count as degenerate
};

struct GeneratedInput {
    std::string utterance;
    FeatureVector vector;
    std::string model;
    std::string prompt_digest;
    bool valid = false;
    std::size_t attempts = 0;
    std::string note;
};

namespace detail {
inline std::string clean_reply(std::string const& reply) {
    std::string s = trim(reply);
    if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') || (s.front() == '\'' && s.back() == '\''))) { s = trim(std::string_view(s).substr(1, s.size() - 2)); }
    return s;
}
}  // namespace detail

/// Everything needed to turn a vector into an utterance.
class TestGenerator {
public:
    TestGenerator(FeatureSpace space, PromptTemplate tmpl, std::shared_ptr<ChatModel> generator, std::shared_ptr<Embedder> embedder,
                  std::shared_ptr<ExampleStore const> rag_store, std::vector<std::string> fewshot, GenerationSettings settings)
        : space_{std::move(space)},
          template_{std::move(tmpl)},
          generator_{std::move(generator)},
          embedder_{std::move(embedder)},
          store_{std::move(rag_store)},
          fewshot_{std::move(fewshot)},
          settings_{settings} {
        if (!generator_) { throw ConfigError("test generation needs a generator endpoint"); }
        if (settings_.rag_count > 0) {
            if (!store_ || store_->empty()) { throw ConfigError("RAG retrieval is enabled but the example store is empty"); }
            if (!embedder_) { throw ConfigError("RAG retrieval needs an embedder endpoint"); }
        }
        if (fewshot_.size() > settings_.fewshot_count) { fewshot_.resize(settings_.fewshot_count); }
    }

    std::string prompt(FeatureVector const& v) const {
        std::vector<std::string> rag;
        if (settings_.rag_count > 0) {
            for (auto const& s : retrieve_examples(*store_, space_, v, settings_.rag_count, *embedder_)) { rag.push_back(s.example->text); }
        }
        return template_.render(space_, v, rag, fewshot_);
    }

    /// Render, call the generator, trim. Empty or oversized replies and
    /// transport failures are retried; after that the input is INVALID.
    GeneratedInput generate(FeatureVector const& v) const {
        GeneratedInput out;
        out.vector = v;
        out.model = generator_->model_id();
        std::string p;
        try {
            p = prompt(v);
        } catch (TransportError const& e) {
            out.note = std::string("retrieval failed: ") + e.what();
            return out;
        }
        out.prompt_digest = hex64(fnv1a(p));
        std::vector<Message> const msgs{{"user", p}};
        for (std::size_t attempt = 0; attempt <= settings_.retries; ++attempt) {
            ++out.attempts;
            try {
                std::string const text = detail::clean_reply(generator_->chat(msgs));
                if (text.empty()) {
                    out.note = "empty generation";
                    continue;
                }
                if (text.size() > settings_.max_chars) {
                    out.note = "generation exceeds " + std::to_string(settings_.max_chars) + " characters";
                    continue;
                }
                out.utterance = text;
                out.valid = true;
                out.note.clear();
                return out;
            } catch (TransportError const& e) {
                out.note = std::string("generator transport failure: ") + e.what();
            }
        }
        return out;
    }

    FeatureSpace const& space() const noexcept { return space_; }
    GenerationSettings const& settings() const noexcept { return settings_; }
    std::string generator_model() const { return generator_->model_id(); }

private:
    FeatureSpace space_;
    PromptTemplate template_;
    std::shared_ptr<ChatModel> generator_;
    std::shared_ptr<Embedder> embedder_;
    std::shared_ptr<ExampleStore const> store_;
    std::vector<std::string> fewshot_;
    GenerationSettings settings_;
};

/// Few-shot examples: one utterance per non-empty line, '#' lines ignored.
inline std::vector<std::string> load_fewshot(std::string const& path) {
    std::istringstream in(read_text_file(path, "few-shot file"));
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        std::string t = trim(line);
        if (t.empty() || t.front() == '#') { continue; }
        out.push_back(std::move(t));
    }
    return out;
}

}  // namespace featsearch
