// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The featsearch Authors

#pragma once

#include <fstream>
#include <vector>

#include "json.hpp"

#include "featsearch/common.hpp"
#include "featsearch/evaluation.hpp"
#include "featsearch/feature_space.hpp"
#include "featsearch/record.hpp"
#include "featsearch/search.hpp"

// Combinatorial (t-wise) baseline: constraint-aware greedy covering arrays,
// an independent coverage verifier, and the budgeted executor.

namespace featsearch {

namespace detail {

/// All t-subsets of {0..n-1} in lexicographic order.
inline std::vector<std::vector<std::size_t>> subsets(std::size_t n, std::size_t t) {
    std::vector<std::vector<std::size_t>> out;
    std::vector<std::size_t> s(t);
    for (std::size_t i = 0; i < t; ++i) { s[i] = i; }
    while (true) {
        out.push_back(s);
        std::size_t i = t;
        while (i > 0 && s[i - 1] == n - t + (i - 1)) { --i; }
        if (i == 0) { break; }
        ++s[i - 1];
        for (std::size_t j = i; j < t; ++j) { s[j] = s[j - 1] + 1; }
    }
    return out;
}

/// Flat index of the values of `v` on `subset` (mixed radix, first feature
/// most significant).
inline std::size_t tuple_code(FeatureSpace const& space, std::vector<std::size_t> const& subset, FeatureVector const& v) {
    std::size_t code = 0;
    for (auto f : subset) { code = code * space.feature(f).size() + v[f]; }
    return code;
}

inline std::size_t tuple_count(FeatureSpace const& space, std::vector<std::size_t> const& subset) {
    std::size_t n = 1;
    for (auto f : subset) { n *= space.feature(f).size(); }
    return n;
}

inline std::vector<std::size_t> tuple_values(FeatureSpace const& space, std::vector<std::size_t> const& subset, std::size_t code) {
    std::vector<std::size_t> vals(subset.size());
    for (std::size_t i = subset.size(); i-- > 0;) {
        vals[i] = code % space.feature(subset[i]).size();
        code /= space.feature(subset[i]).size();
    }
    return vals;
}

/// Every assignment of the trigger features that agrees with the given
/// partial assignment (SIZE_MAX = free) and leaves every assigned non-trigger
/// value allowed. Returned as full probe vectors (non-trigger features 0).
inline std::vector<FeatureVector> trigger_assignments(FeatureSpace const& space, std::vector<std::size_t> const& partial) {
    constexpr std::size_t free = std::numeric_limits<std::size_t>::max();
    auto const tf = space.trigger_features();
    FeatureVector probe;
    probe.index.assign(space.dimension(), 0);
    std::vector<FeatureVector> out;
    std::vector<std::size_t> choice(tf.size(), 0);
    while (true) {
        bool agree = true;
        for (std::size_t k = 0; k < tf.size(); ++k) {
            std::size_t const val = partial[tf[k]] == free ? choice[k] : partial[tf[k]];
            if (partial[tf[k]] != free && choice[k] != 0) { agree = false; }
            probe.index[tf[k]] = val;
        }
        if (agree) {
            auto const allowed = space.allowed_values(probe);
            bool ok = true;
            for (std::size_t f = 0; f < space.dimension() && ok; ++f) {
                if (partial[f] != free && !allowed[f][partial[f]]) { ok = false; }
            }
            if (ok) { out.push_back(probe); }
        }
        std::size_t k = 0;
        for (; k < tf.size(); ++k) {
            if (++choice[k] < space.feature(tf[k]).size()) { break; }
            choice[k] = 0;
        }
        if (k == tf.size()) { break; }
    }
    return out;
}

}  // namespace detail

/// True when some constraint-consistent full vector contains the tuple.
inline bool tuple_is_valid(FeatureSpace const& space, std::vector<std::size_t> const& subset, std::vector<std::size_t> const& values) {
    if (space.rules().empty()) { return true; }
    std::vector<std::size_t> partial(space.dimension(), std::numeric_limits<std::size_t>::max());
    for (std::size_t i = 0; i < subset.size(); ++i) { partial[subset[i]] = values[i]; }
    return !detail::trigger_assignments(space, partial).empty();
}

struct CoveringArray {
    std::size_t t = 0;
    std::uint64_t seed = 0;
    std::vector<FeatureVector> rows;
    std::size_t valid_tuples = 0;  // target set size
};

struct CoveringSettings {
    std::size_t candidates = 50;  // completions scored per row
};

/// Greedy one-row-at-a-time construction. Each row starts from the first
/// uncovered valid tuple; `candidates` completions fill the remaining
/// features in random order, each picking the value that covers the most new
/// tuples with the features already set (ties broken at random). The
/// completion covering the most new tuples becomes the row.
inline CoveringArray generate_covering_array(FeatureSpace const& space, std::size_t t, std::uint64_t seed, CoveringSettings settings = {}) {
    std::size_t const n = space.dimension();
    if (t < 1 || t > n) { throw ConfigError("covering strength t=" + std::to_string(t) + " must be in [1, " + std::to_string(n) + "]"); }
    if (settings.candidates == 0) { throw ConfigError("covering array needs at least one candidate per row"); }
    constexpr std::size_t free = std::numeric_limits<std::size_t>::max();
    Rng rng(derive_seed(seed, "covering", t));
    auto const subs = detail::subsets(n, t);

    // state: 0 uncovered, 1 covered, 2 invalid (never required)
    std::vector<std::vector<std::uint8_t>> state(subs.size());
    std::size_t uncovered = 0;
    for (std::size_t s = 0; s < subs.size(); ++s) {
        std::size_t const cnt = detail::tuple_count(space, subs[s]);
        state[s].assign(cnt, 0);
        for (std::size_t code = 0; code < cnt; ++code) {
            if (!tuple_is_valid(space, subs[s], detail::tuple_values(space, subs[s], code))) {
                state[s][code] = 2;
            } else {
                ++uncovered;
            }
        }
    }
    CoveringArray ca;
    ca.t = t;
    ca.seed = seed;
    ca.valid_tuples = uncovered;

    std::vector<std::vector<std::size_t>> by_feature(n);
    for (std::size_t s = 0; s < subs.size(); ++s) {
        for (auto f : subs[s]) { by_feature[f].push_back(s); }
    }
    auto const triggers = space.trigger_features();
    auto is_trigger = [&](std::size_t f) { return std::find(triggers.begin(), triggers.end(), f) != triggers.end(); };

    // New tuples covered by setting feature f to val given the assigned ones.
    auto gain = [&](std::vector<std::size_t>& partial, std::size_t f, std::size_t val) {
        partial[f] = val;
        std::size_t g = 0;
        for (auto s : by_feature[f]) {
            std::size_t code = 0;
            bool complete = true;
            for (auto g2 : subs[s]) {
                if (partial[g2] == free) {
                    complete = false;
                    break;
                }
                code = code * space.feature(g2).size() + partial[g2];
            }
            if (complete && state[s][code] == 0) { ++g; }
        }
        partial[f] = free;
        return g;
    };

    std::size_t cursor_s = 0;
    std::size_t cursor_c = 0;
    while (uncovered > 0) {
        while (state[cursor_s][cursor_c] != 0) {
            if (++cursor_c == state[cursor_s].size()) {
                cursor_c = 0;
                ++cursor_s;
            }
        }
        auto const seed_vals = detail::tuple_values(space, subs[cursor_s], cursor_c);
        std::vector<std::size_t> seed_partial(n, free);
        for (std::size_t i = 0; i < t; ++i) { seed_partial[subs[cursor_s][i]] = seed_vals[i]; }
        auto const assignments = detail::trigger_assignments(space, seed_partial);

        FeatureVector best;
        std::size_t best_gain = 0;
        bool have_best = false;
        for (std::size_t c = 0; c < settings.candidates; ++c) {
            std::vector<std::size_t> partial = seed_partial;
            // Trigger features come from one compatible assignment.
            FeatureVector const& ta = assignments[rng.below(assignments.size())];
            for (auto f : triggers) { partial[f] = ta[f]; }
            auto const allowed = space.allowed_values(ta);
            std::vector<std::size_t> order;
            for (std::size_t f = 0; f < n; ++f) {
                if (partial[f] == free) { order.push_back(f); }
            }
            rng.shuffle(order);
            for (auto f : order) {
                std::size_t top = 0;
                std::vector<std::size_t> ties;
                for (std::size_t val = 0; val < space.feature(f).size(); ++val) {
                    if (!allowed[f][val] && !is_trigger(f)) { continue; }
                    std::size_t const g = gain(partial, f, val);
                    if (ties.empty() || g > top) {
                        top = g;
                        ties.assign(1, val);
                    } else if (g == top) {
                        ties.push_back(val);
                    }
                }
                partial[f] = ties[rng.below(ties.size())];
            }
            FeatureVector row{partial};
            std::size_t total = 0;
            for (std::size_t s = 0; s < subs.size(); ++s) {
                if (state[s][detail::tuple_code(space, subs[s], row)] == 0) { ++total; }
            }
            if (!have_best || total > best_gain) {
                best = row;
                best_gain = total;
                have_best = true;
            }
        }
        if (space.apply_constraints(best) != best) { throw UsageError("covering array produced an inconsistent row"); }
        for (std::size_t s = 0; s < subs.size(); ++s) {
            auto& st = state[s][detail::tuple_code(space, subs[s], best)];
            if (st == 0) {
                st = 1;
                --uncovered;
            }
        }
        ca.rows.push_back(std::move(best));
    }
    return ca;
}

/// Product of the t largest domain sizes (lower bound on any t-wise array).
inline std::uint64_t covering_lower_bound(FeatureSpace const& space, std::size_t t) {
    std::vector<std::size_t> sizes;
    for (auto const& f : space.features()) { sizes.push_back(f.size()); }
    std::sort(sizes.rbegin(), sizes.rend());
    std::uint64_t p = 1;
    for (std::size_t i = 0; i < t && i < sizes.size(); ++i) { p *= sizes[i]; }
    return p;
}

struct CoverageReport {
    std::size_t t = 0;
    std::size_t rows = 0;
    std::size_t valid_tuples = 0;
    std::size_t covered = 0;
    std::size_t inconsistent_rows = 0;
    std::uint64_t lower_bound = 0;
    std::string method;  // "enumeration" or "constraint-probe"
    std::vector<std::string> missing;  // first few uncovered tuples

    bool complete() const noexcept { return covered == valid_tuples && inconsistent_rows == 0; }
    double ratio() const noexcept { return valid_tuples == 0 ? 1.0 : static_cast<double>(covered) / static_cast<double>(valid_tuples); }
};

/// Independent check. When the space has at most `enumeration_limit`
/// combinations the valid tuples are those occurring in some consistent full
/// vector (found by exhaustive enumeration); otherwise validity comes from
/// probing trigger assignments.
inline CoverageReport verify_coverage(FeatureSpace const& space, std::vector<FeatureVector> const& rows, std::size_t t,
                                      std::uint64_t enumeration_limit = 2'000'000) {
    std::size_t const n = space.dimension();
    if (t < 1 || t > n) { throw ConfigError("covering strength t=" + std::to_string(t) + " must be in [1, " + std::to_string(n) + "]"); }
    auto const subs = detail::subsets(n, t);
    CoverageReport rep;
    rep.t = t;
    rep.rows = rows.size();
    rep.lower_bound = covering_lower_bound(space, t);
    std::vector<std::vector<std::uint8_t>> valid(subs.size());
    std::vector<std::vector<std::uint8_t>> hit(subs.size());
    for (std::size_t s = 0; s < subs.size(); ++s) {
        valid[s].assign(detail::tuple_count(space, subs[s]), 0);
        hit[s].assign(valid[s].size(), 0);
    }
    std::uint64_t const total = space.combination_count();
    if (total <= enumeration_limit) {
        rep.method = "enumeration";
        FeatureVector v;
        v.index.assign(n, 0);
        for (std::uint64_t c = 0; c < total; ++c) {
            if (space.apply_constraints(v) == v) {
                for (std::size_t s = 0; s < subs.size(); ++s) { valid[s][detail::tuple_code(space, subs[s], v)] = 1; }
            }
            for (std::size_t f = n; f-- > 0;) {
                if (++v.index[f] < space.feature(f).size()) { break; }
                v.index[f] = 0;
            }
        }
    } else {
        rep.method = "constraint-probe";
        for (std::size_t s = 0; s < subs.size(); ++s) {
            for (std::size_t code = 0; code < valid[s].size(); ++code) {
                valid[s][code] = tuple_is_valid(space, subs[s], detail::tuple_values(space, subs[s], code)) ? 1 : 0;
            }
        }
    }
    for (auto const& row : rows) {
        space.check(row);
        if (space.apply_constraints(row) != row) {
            ++rep.inconsistent_rows;
            continue;
        }
        for (std::size_t s = 0; s < subs.size(); ++s) { hit[s][detail::tuple_code(space, subs[s], row)] = 1; }
    }
    for (std::size_t s = 0; s < subs.size(); ++s) {
        for (std::size_t code = 0; code < valid[s].size(); ++code) {
            if (!valid[s][code]) { continue; }
            ++rep.valid_tuples;
            if (hit[s][code]) {
                ++rep.covered;
            } else if (rep.missing.size() < 10) {
                auto vals = detail::tuple_values(space, subs[s], code);
                std::string desc;
                for (std::size_t i = 0; i < t; ++i) {
                    if (!desc.empty()) { desc += ", "; }
                    desc += space.feature(subs[s][i]).name + "=" + space.feature(subs[s][i]).domain[vals[i]];
                }
                rep.missing.push_back(desc);
            }
        }
    }
    return rep;
}

// Covering array files -----------------------------------------------------

inline void save_covering_array(CoveringArray const& ca, FeatureSpace const& space, std::string const& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) { throw ConfigError("cannot write covering array '" + path + "'"); }
    out << nlohmann::json{{"schema", "featsearch.covering_array"}, {"version", 1}, {"space", space.name()}, {"t", ca.t}, {"seed", ca.seed},
                          {"rows", ca.rows.size()}, {"valid_tuples", ca.valid_tuples}}
               .dump()
        << '\n';
    for (auto const& row : ca.rows) {
        nlohmann::json j = nlohmann::json::object();
        for (std::size_t i = 0; i < row.size(); ++i) { j[space.feature(i).name] = space.value(row, i); }
        out << j.dump() << '\n';
    }
}

inline CoveringArray load_covering_array(std::string const& path, FeatureSpace const& space) {
    std::ifstream in(path);
    if (!in) { throw ConfigError("cannot open covering array '" + path + "'"); }
    std::string line;
    CoveringArray ca;
    bool header = false;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) { continue; }
        auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) { throw ConfigError("covering array '" + path + "' line " + std::to_string(lineno) + ": not a JSON object"); }
        if (!header) {
            if (j.value("schema", std::string{}) != "featsearch.covering_array") { throw ConfigError("'" + path + "' is not a covering array file"); }
            ca.t = j.value("t", std::size_t{0});
            ca.seed = j.value("seed", std::uint64_t{0});
            header = true;
            continue;
        }
        std::vector<std::string> vals;
        for (auto const& f : space.features()) {
            if (!j.contains(f.name)) { throw ConfigError("covering array '" + path + "' line " + std::to_string(lineno) + ": missing " + f.name); }
            vals.push_back(detail::json_value_string(j[f.name]));
        }
        ca.rows.push_back(space.make_vector(vals));
    }
    if (!header) { throw ConfigError("covering array '" + path + "' is empty"); }
    return ca;
}

// Execution ----------------------------------------------------------------

/// Executes the rows in seeded random order; once they run out, continues
/// with random constrained vectors until the budget is used.
inline Archive run_twise(FeatureSpace const& space, Evaluator& evaluator, CoveringArray const& ca, Budget const& budget, std::uint64_t seed,
                         std::size_t batch = 20) {
    Clock const& clock = evaluator.clock();
    budget.validate(clock);
    if (batch == 0) { throw ConfigError("t-wise batch size must be positive"); }
    Archive archive(space, detail::archive_info(evaluator, "twise", seed));
    Rng rng(derive_seed(seed, "twise", ca.t));
    std::vector<FeatureVector> order = ca.rows;
    rng.shuffle(order);
    std::uint64_t next_id = 0;
    std::size_t used = 0;
    std::size_t row = 0;
    for (std::size_t gen = 0;; ++gen) {
        std::size_t const n = std::min(batch, budget.remaining(used, clock));
        if (n == 0) { break; }
        std::vector<Candidate> cands;
        for (std::size_t i = 0; i < n; ++i) {
            FeatureVector const v = row < order.size() ? order[row++] : space.random_vector(rng);
            cands.push_back(Candidate{next_id++, gen, space.encode(v)});
        }
        for (auto& r : evaluator.evaluate(cands)) {
            if (r.id >= order.size()) { r.flag("random_tail"); }
            archive.append(std::move(r));
        }
        used += n;
    }
    evaluator.finalize(archive.records());
    return archive;
}

}  // namespace featsearch
