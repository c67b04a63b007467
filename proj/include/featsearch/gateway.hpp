// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The featsearch Authors

#pragma once

#include <chrono>
#include <cstdlib>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "httplib.h"
#include "json.hpp"

#include "featsearch/common.hpp"
#include "featsearch/feature_space.hpp"
#include "featsearch/poi.hpp"

// Endpoint access. Every model the pipeline talks to (generator, judge,
// embedder, application under test) sits behind one of the interfaces below;
// remote implementations speak the OpenAI-compatible HTTP shape.

namespace featsearch {

struct Message {
    std::string role;
    std::string content;
};

class ChatModel {
public:
    virtual ~ChatModel() = default;
    /// One completion. Throws TransportError on communication failure.
    virtual std::string chat(std::vector<Message> const& messages) = 0;
    virtual std::string model_id() const = 0;
};

class Embedder {
public:
    virtual ~Embedder() = default;
    /// Unit-normalized embedding of text.
    virtual std::vector<double> embed(std::string const& text) = 0;
    virtual std::size_t dimension() const = 0;
    virtual std::string model_id() const = 0;
};

/// What the application under test returned for one utterance.
struct AUTOutput {
    std::string text;
    std::vector<Poi> pois;
    bool structured = false;  // a POI payload was present (possibly empty)
    double latency_ms = 0.0;
};

/// The system under test. `requested` is the feature vector the utterance was
/// generated from; real applications never see it, simulated ones may.
class Application {
public:
    virtual ~Application() = default;
    virtual AUTOutput execute(std::string const& utterance, FeatureVector const& requested) = 0;
    virtual std::string model_id() const = 0;
};

// Retries ------------------------------------------------------------------

struct RetryPolicy {
    std::size_t max_retries = 2;
    std::chrono::milliseconds backoff{200};
    double multiplier = 2.0;
};

/// Calls fn, retrying TransportError up to policy.max_retries times with
/// exponential backoff. The last error propagates.
template <typename Fn>
auto with_retries(RetryPolicy const& policy, Fn&& fn) -> decltype(fn()) {
    auto delay = policy.backoff;
    for (std::size_t attempt = 0;; ++attempt) {
        try {
            return fn();
        } catch (TransportError const&) {
            if (attempt >= policy.max_retries) { throw; }
            if (delay.count() > 0) { std::this_thread::sleep_for(delay); }
            delay = std::chrono::milliseconds(static_cast<long long>(static_cast<double>(delay.count()) * policy.multiplier));
        }
    }
}

class RetryingChat final : public ChatModel {
public:
    RetryingChat(std::shared_ptr<ChatModel> inner, RetryPolicy policy) : inner_{std::move(inner)}, policy_{policy} {}

    std::string chat(std::vector<Message> const& messages) override {
        return with_retries(policy_, [&] { return inner_->chat(messages); });
    }
    std::string model_id() const override { return inner_->model_id(); }

private:
    std::shared_ptr<ChatModel> inner_;
    RetryPolicy policy_;
};

class RetryingEmbedder final : public Embedder {
public:
    RetryingEmbedder(std::shared_ptr<Embedder> inner, RetryPolicy policy) : inner_{std::move(inner)}, policy_{policy} {}

    std::vector<double> embed(std::string const& text) override {
        return with_retries(policy_, [&] { return inner_->embed(text); });
    }
    std::size_t dimension() const override { return inner_->dimension(); }
    std::string model_id() const override { return inner_->model_id(); }

private:
    std::shared_ptr<Embedder> inner_;
    RetryPolicy policy_;
};

// Endpoint bindings --------------------------------------------------------

enum class Role { generator, judge, embedder, aut };

inline std::string to_string(Role r) {
    switch (r) {
        case Role::generator: return "generator";
        case Role::judge: return "judge";
        case Role::embedder: return "embedder";
        case Role::aut: return "aut";
    }
    return "?";
}

struct EndpointBinding {
    Role role = Role::generator;
    std::string base_url;           // e.g. http://localhost:8000/v1
    std::string model;
    double temperature = 0.0;
    double timeout_s = 60.0;
    std::size_t max_retries = 2;
    std::chrono::milliseconds backoff{500};
    std::string api_key_env;        // name of the variable holding the bearer token
    std::size_t max_concurrency = 4;
    std::string system_prompt;      // aut role only
    std::size_t dimension = 0;      // embedder role; 0 = learn from first reply

    void validate() const {
        if (base_url.empty()) { throw ConfigError(to_string(role) + " endpoint: base_url is required"); }
        if (model.empty()) { throw ConfigError(to_string(role) + " endpoint: model is required"); }
        if (!(temperature >= 0.0 && temperature <= 2.0)) { throw ConfigError(to_string(role) + " endpoint: temperature must be in [0,2]"); }
        if (max_concurrency == 0) { throw ConfigError(to_string(role) + " endpoint: max_concurrency must be positive"); }
    }

    RetryPolicy retry_policy() const { return RetryPolicy{max_retries, backoff, 2.0}; }
};

inline EndpointBinding binding_from_json(Role role, nlohmann::json const& j) {
    EndpointBinding b;
    b.role = role;
    b.base_url = j.value("base_url", std::string{});
    b.model = j.value("model", std::string{});
    b.temperature = j.value("temperature", 0.0);
    b.timeout_s = j.value("timeout_s", 60.0);
    b.max_retries = j.value("max_retries", std::size_t{2});
    b.backoff = std::chrono::milliseconds(j.value("backoff_ms", 500));
    b.api_key_env = j.value("api_key_env", std::string{});
    b.max_concurrency = j.value("max_concurrency", std::size_t{4});
    b.system_prompt = j.value("system_prompt", std::string{});
    b.dimension = j.value("dimension", std::size_t{0});
    b.validate();
    return b;
}

// HTTP ---------------------------------------------------------------------

namespace detail {

struct SplitUrl {
    std::string origin;  // scheme://host[:port]
    std::string prefix;  // path without trailing slash
};

inline SplitUrl split_url(std::string const& url) {
    auto const scheme_end = url.find("://");
    if (scheme_end == std::string::npos) { throw ConfigError("endpoint URL '" + url + "' lacks a scheme"); }
    auto const path_start = url.find('/', scheme_end + 3);
    SplitUrl s;
    s.origin = url.substr(0, path_start);
    s.prefix = path_start == std::string::npos ? "" : url.substr(path_start);
    while (!s.prefix.empty() && s.prefix.back() == '/') { s.prefix.pop_back(); }
    return s;
}

/// Counting-semaphore guard capping in-flight requests per binding.
class RequestSlots {
public:
    explicit RequestSlots(std::size_t n) : sem_{static_cast<std::ptrdiff_t>(std::min<std::size_t>(n, 1024))} {}
    void acquire() { sem_.acquire(); }
    void release() { sem_.release(); }

private:
    std::counting_semaphore<1024> sem_;
};

}  // namespace detail

/// Minimal OpenAI-compatible client: POST /chat/completions and /embeddings.
class HttpEndpoint {
public:
    explicit HttpEndpoint(EndpointBinding binding) : binding_{std::move(binding)}, url_{detail::split_url(binding_.base_url)}, slots_{binding_.max_concurrency} {}

    EndpointBinding const& binding() const noexcept { return binding_; }

    /// POSTs a JSON body; any transport failure or non-2xx status becomes a
    /// TransportError.
    nlohmann::json post(std::string const& path, nlohmann::json const& body) {
        slots_.acquire();
        struct Release {
            detail::RequestSlots& s;
            ~Release() { s.release(); }
        } guard{slots_};

        httplib::Client client(url_.origin);
        auto const timeout = std::chrono::duration<double>(binding_.timeout_s);
        client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
        client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
        httplib::Headers headers;
        if (!binding_.api_key_env.empty()) {
            if (char const* key = std::getenv(binding_.api_key_env.c_str())) {
                headers.emplace("Authorization", std::string("Bearer ") + key);
            }
        }
        auto res = client.Post(url_.prefix + path, headers, body.dump(), "application/json");
        if (!res) {
            throw TransportError(to_string(binding_.role) + " endpoint " + binding_.base_url + ": " + httplib::to_string(res.error()));
        }
        if (res->status < 200 || res->status >= 300) {
            throw TransportError(to_string(binding_.role) + " endpoint " + binding_.base_url + path + " returned HTTP " + std::to_string(res->status));
        }
        try {
            return nlohmann::json::parse(res->body);
        } catch (nlohmann::json::exception const& e) {
            throw TransportError(to_string(binding_.role) + " endpoint returned malformed JSON: " + e.what());
        }
    }

    /// True when the server answers at all (any HTTP status).
    bool reachable() {
        httplib::Client client(url_.origin);
        client.set_connection_timeout(std::chrono::seconds(5));
        client.set_read_timeout(std::chrono::seconds(5));
        auto res = client.Get(url_.prefix + "/models");
        return static_cast<bool>(res);
    }

private:
    EndpointBinding binding_;
    detail::SplitUrl url_;
    detail::RequestSlots slots_;
};

class HttpChat final : public ChatModel {
public:
    explicit HttpChat(EndpointBinding binding) : http_{std::move(binding)} {}

    std::string chat(std::vector<Message> const& messages) override {
        nlohmann::json msgs = nlohmann::json::array();
        for (auto const& m : messages) { msgs.push_back({{"role", m.role}, {"content", m.content}}); }
        nlohmann::json body{{"model", http_.binding().model}, {"messages", msgs}, {"temperature", http_.binding().temperature}};
        auto reply = http_.post("/chat/completions", body);
        try {
            auto const& content = reply.at("choices").at(0).at("message").at("content");
            return content.is_null() ? std::string{} : content.get<std::string>();
        } catch (nlohmann::json::exception const& e) {
            throw TransportError("chat completion reply lacks choices[0].message.content: " + std::string(e.what()));
        }
    }

    std::string model_id() const override { return http_.binding().model; }
    bool reachable() { return http_.reachable(); }

private:
    HttpEndpoint http_;
};

class HttpEmbedder final : public Embedder {
public:
    explicit HttpEmbedder(EndpointBinding binding) : http_{std::move(binding)}, dimension_{http_.binding().dimension} {}

    std::vector<double> embed(std::string const& text) override {
        nlohmann::json body{{"model", http_.binding().model}, {"input", text}};
        auto reply = http_.post("/embeddings", body);
        std::vector<double> v;
        try {
            v = reply.at("data").at(0).at("embedding").get<std::vector<double>>();
        } catch (nlohmann::json::exception const& e) {
            throw TransportError("embeddings reply lacks data[0].embedding: " + std::string(e.what()));
        }
        {
            std::lock_guard lock(mu_);
            if (dimension_ == 0) { dimension_ = v.size(); }
            if (v.size() != dimension_) {
                throw TransportError("embedding dimension " + std::to_string(v.size()) + " differs from " + std::to_string(dimension_));
            }
        }
        // Leave already-unit vectors bit-for-bit untouched.
        if (std::abs(std::sqrt(dot(v, v)) - 1.0) > 1e-12) { normalize(v); }
        return v;
    }

    std::size_t dimension() const override {
        std::lock_guard lock(mu_);
        return dimension_;
    }
    std::string model_id() const override { return http_.binding().model; }
    bool reachable() { return http_.reachable(); }

private:
    HttpEndpoint http_;
    mutable std::mutex mu_;
    std::size_t dimension_;
};

/// Parses an application reply. A JSON object with "response" (or "text") and
/// "pois" is structured; anything else is plain text.
inline AUTOutput parse_application_reply(std::string const& reply) {
    AUTOutput out;
    out.text = reply;
    auto j = nlohmann::json::parse(reply, nullptr, false);
    if (j.is_discarded() || !j.is_object()) { return out; }
    if (j.contains("response") && j["response"].is_string()) {
        out.text = j["response"].get<std::string>();
    } else if (j.contains("text") && j["text"].is_string()) {
        out.text = j["text"].get<std::string>();
    }
    if (j.contains("pois") && j["pois"].is_array()) {
        out.structured = true;
        for (auto const& p : j["pois"]) {
            if (p.is_object()) { out.pois.push_back(Poi{p}); }
        }
    }
    return out;
}

/// An application reachable as a chat model: the utterance is the user turn.
class ChatApplication final : public Application {
public:
    ChatApplication(std::shared_ptr<ChatModel> model, std::string system_prompt = {})
        : model_{std::move(model)}, system_prompt_{std::move(system_prompt)} {}

    AUTOutput execute(std::string const& utterance, FeatureVector const&) override {
        std::vector<Message> msgs;
        if (!system_prompt_.empty()) { msgs.push_back({"system", system_prompt_}); }
        msgs.push_back({"user", utterance});
        auto const t0 = std::chrono::steady_clock::now();
        auto reply = model_->chat(msgs);
        AUTOutput out = parse_application_reply(reply);
        out.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        return out;
    }

    std::string model_id() const override { return model_->model_id(); }

private:
    std::shared_ptr<ChatModel> model_;
    std::string system_prompt_;
};

/// The four endpoints a campaign needs.
struct Gateway {
    std::shared_ptr<ChatModel> generator;
    std::shared_ptr<ChatModel> judge;
    std::shared_ptr<Embedder> embedder;
    std::shared_ptr<Application> aut;
};

}  // namespace featsearch
