// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The featsearch Authors

#pragma once

#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "featsearch/common.hpp"
#include "featsearch/feature_space.hpp"

// NSGA-II building blocks over encoded feature vectors. All objectives are
// minimized. Ordinal dimensions use SBX / polynomial mutation, categorical
// dimensions use uniform crossover / uniform redraw.

namespace featsearch {

struct OperatorParams {
    double crossover_prob = 0.7;   // per parent pair
    double mutation_prob = 0.12;   // per variable
    double eta_c = 15.0;
    double eta_m = 20.0;
    std::size_t tournament_size = 2;

    void validate() const {
        if (!(crossover_prob >= 0.0 && crossover_prob <= 1.0)) { throw ConfigError("crossover probability must be in [0,1]"); }
        if (!(mutation_prob >= 0.0 && mutation_prob <= 1.0)) { throw ConfigError("mutation probability must be in [0,1]"); }
        if (!(eta_c > 0.0) || !(eta_m > 0.0)) { throw ConfigError("distribution indices must be positive"); }
        if (tournament_size < 2) { throw ConfigError("tournament size must be at least 2"); }
    }
};

struct Individual {
    std::uint64_t id = 0;
    std::size_t generation = 0;
    EncodedVector encoded;
    std::optional<std::vector<double>> fitness;
    std::optional<std::size_t> rank;
    std::optional<double> crowding;

    bool evaluated() const noexcept { return fitness.has_value(); }
};

using Population = std::vector<Individual>;

/// a dominates b: no worse everywhere, strictly better somewhere.
inline bool dominates(std::span<double const> a, std::span<double const> b) {
    bool strictly = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] > b[i]) { return false; }
        if (a[i] < b[i]) { strictly = true; }
    }
    return strictly;
}

using Fronts = std::vector<std::vector<std::size_t>>;

/// Fast non-dominated sort. Indices inside each front are ascending.
inline Fronts non_dominated_sort(std::span<std::vector<double> const> fitness) {
    std::size_t const n = fitness.size();
    if (n == 0) { return {}; }
    std::size_t const m = fitness[0].size();
    for (auto const& f : fitness) {
        if (f.size() != m) { throw UsageError("non_dominated_sort: objective counts differ"); }
    }
    std::vector<std::vector<std::size_t>> dominated(n);
    std::vector<std::size_t> counter(n, 0);
    Fronts fronts(1);
    for (std::size_t p = 0; p < n; ++p) {
        for (std::size_t q = p + 1; q < n; ++q) {
            if (dominates(fitness[p], fitness[q])) {
                dominated[p].push_back(q);
                ++counter[q];
            } else if (dominates(fitness[q], fitness[p])) {
                dominated[q].push_back(p);
                ++counter[p];
            }
        }
    }
    for (std::size_t p = 0; p < n; ++p) {
        if (counter[p] == 0) { fronts[0].push_back(p); }
    }
    while (!fronts.back().empty()) {
        std::vector<std::size_t> next;
        for (auto p : fronts.back()) {
            for (auto q : dominated[p]) {
                if (--counter[q] == 0) { next.push_back(q); }
            }
        }
        std::sort(next.begin(), next.end());
        fronts.push_back(std::move(next));
    }
    fronts.pop_back();
    return fronts;
}

/// Sorts and writes ranks into the individuals.
inline Fronts non_dominated_sort(Population& pop) {
    std::vector<std::vector<double>> fit;
    fit.reserve(pop.size());
    for (auto const& ind : pop) {
        if (!ind.evaluated()) { throw UsageError("non_dominated_sort: individual " + std::to_string(ind.id) + " is not evaluated"); }
        fit.push_back(*ind.fitness);
    }
    Fronts fronts = non_dominated_sort(std::span<std::vector<double> const>(fit));
    for (std::size_t r = 0; r < fronts.size(); ++r) {
        for (auto i : fronts[r]) { pop[i].rank = r; }
    }
    return fronts;
}

/// Crowding distance of each member of one front (Deb et al. 2002). Extremes
/// per objective get +inf; a zero-range objective contributes nothing.
inline std::vector<double> crowding_distance(std::span<std::vector<double> const> front) {
    std::size_t const n = front.size();
    constexpr double inf = std::numeric_limits<double>::infinity();
    if (n == 0) { return {}; }
    std::vector<double> dist(n, 0.0);
    if (n <= 2) {
        std::fill(dist.begin(), dist.end(), inf);
        return dist;
    }
    std::size_t const m = front[0].size();
    std::vector<std::size_t> order(n);
    for (std::size_t obj = 0; obj < m; ++obj) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return front[a][obj] < front[b][obj]; });
        double const lo = front[order.front()][obj];
        double const hi = front[order.back()][obj];
        dist[order.front()] = inf;
        dist[order.back()] = inf;
        double const range = hi - lo;
        if (range <= 0.0) { continue; }
        for (std::size_t k = 1; k + 1 < n; ++k) {
            if (std::isinf(dist[order[k]])) { continue; }
            dist[order[k]] += (front[order[k + 1]][obj] - front[order[k - 1]][obj]) / range;
        }
    }
    return dist;
}

inline void assign_crowding(Population& pop, std::span<std::size_t const> front) {
    std::vector<std::vector<double>> fit;
    fit.reserve(front.size());
    for (auto i : front) { fit.push_back(*pop[i].fitness); }
    auto const d = crowding_distance(std::span<std::vector<double> const>(fit));
    for (std::size_t k = 0; k < front.size(); ++k) { pop[front[k]].crowding = d[k]; }
}

/// True when a beats b in a tournament; nullopt on a full tie.
inline std::optional<bool> tournament_beats(Individual const& a, Individual const& b) {
    if (*a.rank != *b.rank) { return *a.rank < *b.rank; }
    if (*a.crowding != *b.crowding) { return *a.crowding > *b.crowding; }
    return std::nullopt;
}

/// Tournament selection with replacement; returns indices into pop.
inline std::vector<std::size_t> tournament_select(Population const& pop, std::size_t count, Rng& rng, std::size_t tournament_size = 2) {
    if (pop.empty()) { throw UsageError("tournament_select: empty population"); }
    for (auto const& ind : pop) {
        if (!ind.rank || !ind.crowding) { throw UsageError("tournament_select: rank and crowding must be assigned"); }
    }
    std::vector<std::size_t> out;
    out.reserve(count);
    for (std::size_t c = 0; c < count; ++c) {
        std::size_t best = rng.below(pop.size());
        for (std::size_t t = 1; t < tournament_size; ++t) {
            std::size_t const other = rng.below(pop.size());
            auto const beats = tournament_beats(pop[other], pop[best]);
            if (beats ? *beats : rng.coin()) { best = other; }
        }
        out.push_back(best);
    }
    return out;
}

namespace detail {

// Bounded SBX for one variable pair (Deb & Agrawal, as in the reference
// NSGA-II code).
inline std::pair<double, double> sbx(double p1, double p2, double lo, double hi, double eta, Rng& rng) {
    if (std::abs(p1 - p2) <= 1e-14 || hi <= lo) { return {p1, p2}; }
    double const y1 = std::min(p1, p2);
    double const y2 = std::max(p1, p2);
    double const u = rng.uniform();
    auto betaq = [&](double beta) {
        double const alpha = 2.0 - std::pow(beta, -(eta + 1.0));
        if (u <= 1.0 / alpha) { return std::pow(u * alpha, 1.0 / (eta + 1.0)); }
        return std::pow(1.0 / (2.0 - u * alpha), 1.0 / (eta + 1.0));
    };
    double const span = y2 - y1;
    double c1 = 0.5 * ((y1 + y2) - betaq(1.0 + 2.0 * (y1 - lo) / span) * span);
    double c2 = 0.5 * ((y1 + y2) + betaq(1.0 + 2.0 * (hi - y2) / span) * span);
    c1 = std::clamp(c1, lo, hi);
    c2 = std::clamp(c2, lo, hi);
    if (rng.coin()) { std::swap(c1, c2); }
    return {c1, c2};
}

// Bounded polynomial mutation for one variable.
inline double polynomial(double y, double lo, double hi, double eta, Rng& rng) {
    if (hi <= lo) { return y; }
    double const range = hi - lo;
    double const d1 = (y - lo) / range;
    double const d2 = (hi - y) / range;
    double const u = rng.uniform();
    double const pw = 1.0 / (eta + 1.0);
    double dq = 0.0;
    if (u < 0.5) {
        double const val = 2.0 * u + (1.0 - 2.0 * u) * std::pow(1.0 - d1, eta + 1.0);
        dq = std::pow(val, pw) - 1.0;
    } else {
        double const val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * std::pow(1.0 - d2, eta + 1.0);
        dq = 1.0 - std::pow(val, pw);
    }
    return std::clamp(y + dq * range, lo, hi);
}

}  // namespace detail

/// With probability crossover_prob the pair recombines: SBX on ordinal
/// dimensions, 50/50 swap on categorical ones. Otherwise children copy parents.
inline std::pair<EncodedVector, EncodedVector> crossover(EncodedVector const& p1, EncodedVector const& p2, FeatureSpace const& space,
                                                         OperatorParams const& params, Rng& rng) {
    if (p1.size() != space.dimension() || p2.size() != space.dimension()) { throw UsageError("crossover: parent dimension mismatch"); }
    EncodedVector c1 = p1;
    EncodedVector c2 = p2;
    if (!rng.coin(params.crossover_prob)) { return {c1, c2}; }
    for (std::size_t i = 0; i < space.dimension(); ++i) {
        if (space.feature(i).kind == FeatureKind::ordinal) {
            std::tie(c1.coords[i], c2.coords[i]) =
                detail::sbx(p1.coords[i], p2.coords[i], space.lower_bound(i), space.upper_bound(i), params.eta_c, rng);
        } else if (rng.coin()) {
            std::swap(c1.coords[i], c2.coords[i]);
        }
    }
    space.clamp(c1);
    space.clamp(c2);
    return {c1, c2};
}

/// Each variable mutates with probability mutation_prob: polynomial for
/// ordinal, uniform integer redraw for categorical.
inline EncodedVector mutate(EncodedVector x, FeatureSpace const& space, OperatorParams const& params, Rng& rng) {
    if (x.size() != space.dimension()) { throw UsageError("mutate: dimension mismatch"); }
    for (std::size_t i = 0; i < space.dimension(); ++i) {
        if (!rng.coin(params.mutation_prob)) { continue; }
        if (space.feature(i).kind == FeatureKind::ordinal) {
            x.coords[i] = detail::polynomial(x.coords[i], space.lower_bound(i), space.upper_bound(i), params.eta_m, rng);
        } else {
            x.coords[i] = static_cast<double>(rng.below(space.feature(i).size()));
        }
    }
    space.clamp(x);
    return x;
}

/// NSGA-II truncation to k: whole fronts first, the last admitted front split
/// by descending crowding distance (ties by ascending id). Survivors carry the
/// rank and crowding computed on the merged pool.
inline Population survive(Population merged, std::size_t k) {
    for (auto const& ind : merged) {
        if (!ind.evaluated()) { throw UsageError("survive: individual " + std::to_string(ind.id) + " is not evaluated"); }
    }
    Fronts const fronts = non_dominated_sort(merged);
    for (auto const& front : fronts) { assign_crowding(merged, front); }
    if (merged.size() <= k) { return merged; }

    Population out;
    out.reserve(k);
    for (auto const& front : fronts) {
        if (out.size() + front.size() <= k) {
            for (auto i : front) { out.push_back(merged[i]); }
            if (out.size() == k) { break; }
            continue;
        }
        std::vector<std::size_t> order(front.begin(), front.end());
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (*merged[a].crowding != *merged[b].crowding) { return *merged[a].crowding > *merged[b].crowding; }
            return merged[a].id < merged[b].id;
        });
        for (std::size_t j = 0; out.size() < k; ++j) { out.push_back(merged[order[j]]); }
        break;
    }
    return out;
}

}  // namespace featsearch
