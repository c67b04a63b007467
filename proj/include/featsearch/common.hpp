// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The featsearch Authors

#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace featsearch {

// Errors -------------------------------------------------------------------

/// Malformed or inconsistent configuration (feature space, campaign, template).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A value that does not belong to its feature's domain.
struct DomainError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// API misuse: calling an operation without its preconditions.
struct UsageError : std::logic_error {
    using std::logic_error::logic_error;
};

/// Endpoint communication failure after the caller's retries.
struct TransportError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Prompt template problems (missing or unresolved placeholders).
struct TemplateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Hashing ------------------------------------------------------------------

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30U)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27U)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31U);
}

inline constexpr std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) noexcept {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Derives an independent stream seed from a master seed and a label.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view label, std::uint64_t index = 0) noexcept {
    return splitmix64(splitmix64(master ^ fnv1a(label)) + index);
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// Random numbers -----------------------------------------------------------

/// Deterministic generator with portable uniform draws.
///
/// The standard distributions are implementation-defined, so campaign results
/// would differ across standard libraries; all draws go through these helpers.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) noexcept : state_{seed} {}

    std::uint64_t next() noexcept {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30U)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27U)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31U);
    }

    /// Uniform in [0, 1).
    double uniform() noexcept { return static_cast<double>(next() >> 11U) * 0x1.0p-53; }

    /// Uniform integer in [0, n). n must be positive.
    std::size_t below(std::size_t n) noexcept {
        auto const bound = static_cast<std::uint64_t>(n);
        std::uint64_t const limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
        std::uint64_t r = next();
        while (r >= limit) { r = next(); }
        return static_cast<std::size_t>(r % bound);
    }

    bool coin(double p = 0.5) noexcept { return uniform() < p; }

    template <typename T>
    void shuffle(std::vector<T>& v) noexcept {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[below(i)]);
        }
    }

    std::uint64_t state() const noexcept { return state_; }

private:
    std::uint64_t state_;
};

// Vectors ------------------------------------------------------------------

inline double dot(std::span<double const> a, std::span<double const> b) {
    if (a.size() != b.size()) { throw UsageError("dot: dimension mismatch"); }
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) { s += a[i] * b[i]; }
    return s;
}

/// Cosine similarity; zero vectors have similarity 0 with everything.
inline double cosine(std::span<double const> a, std::span<double const> b) {
    double const na = std::sqrt(dot(a, a));
    double const nb = std::sqrt(dot(b, b));
    if (na == 0.0 || nb == 0.0) { return 0.0; }
    return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

inline void normalize(std::vector<double>& v) {
    double const n = std::sqrt(dot(v, v));
    if (n > 0.0) {
        for (double& x : v) { x /= n; }
    }
}

inline double squared_distance(std::span<double const> a, std::span<double const> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double const d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

// Strings ------------------------------------------------------------------

inline std::string trim(std::string_view s) {
    auto b = s.begin();
    auto e = s.end();
    while (b != e && std::isspace(static_cast<unsigned char>(*b))) { ++b; }
    while (e != b && std::isspace(static_cast<unsigned char>(*(e - 1)))) { --e; }
    return {b, e};
}

inline std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

/// Lowercased alphanumeric tokens; everything else separates.
inline std::vector<std::string> tokenize(std::string_view s) {
    std::vector<std::string> tokens;
    std::string cur;
    for (unsigned char c : s) {
        if (std::isalnum(c) != 0) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) { tokens.push_back(std::move(cur)); }
    return tokens;
}

inline std::size_t word_count(std::string_view s) {
    std::size_t n = 0;
    bool in_word = false;
    for (unsigned char c : s) {
        bool const ws = std::isspace(c) != 0;
        if (!ws && !in_word) { ++n; }
        in_word = !ws;
    }
    return n;
}

/// Fixed-precision decimal rendering used by every report writer.
inline std::string fixed(double v, int precision = 6) {
    if (std::isnan(v)) { return "nan"; }
    if (std::isinf(v)) { return v > 0 ? "inf" : "-inf"; }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", precision, v);
    return buf;
}

inline bool parse_double(std::string_view s, double& out) {
    std::string const t = trim(s);
    if (t.empty()) { return false; }
    char* end = nullptr;
    out = std::strtod(t.c_str(), &end);
    return end == t.c_str() + t.size() && std::isfinite(out);
}

}  // namespace featsearch
