// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The featsearch Authors

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>

#include "featsearch/nsga2.hpp"
#include "featsearch/presets.hpp"

using namespace featsearch;

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

bool dominates_oracle(std::vector<double> const& a, std::vector<double> const& b) {
    bool all_le = true;
    bool any_lt = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        all_le = all_le && a[i] <= b[i];
        any_lt = any_lt || a[i] < b[i];
    }
    return all_le && any_lt;
}

// Repeatedly peels off the members not dominated by any remaining member.
Fronts peel_fronts(std::vector<std::vector<double>> const& fit) {
    Fronts out;
    std::vector<bool> done(fit.size(), false);
    std::size_t left = fit.size();
    while (left > 0) {
        std::vector<std::size_t> front;
        for (std::size_t p = 0; p < fit.size(); ++p) {
            if (done[p]) { continue; }
            bool dominated = false;
            for (std::size_t q = 0; q < fit.size() && !dominated; ++q) { dominated = !done[q] && q != p && dominates_oracle(fit[q], fit[p]); }
            if (!dominated) { front.push_back(p); }
        }
        for (auto p : front) { done[p] = true; }
        left -= front.size();
        out.push_back(front);
    }
    return out;
}

// Textbook crowding distance on one front.
std::vector<double> crowding_oracle(std::vector<std::vector<double>> const& f) {
    std::size_t const n = f.size();
    std::vector<double> d(n, 0.0);
    if (n <= 2) { return std::vector<double>(n, inf); }
    for (std::size_t m = 0; m < f[0].size(); ++m) {
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) { idx[i] = i; }
        std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return f[a][m] < f[b][m]; });
        double const range = f[idx.back()][m] - f[idx.front()][m];
        d[idx.front()] = inf;
        d[idx.back()] = inf;
        if (range == 0.0) { continue; }
        for (std::size_t k = 1; k + 1 < n; ++k) { d[idx[k]] += (f[idx[k + 1]][m] - f[idx[k - 1]][m]) / range; }
    }
    return d;
}

Population make_pop(std::vector<std::vector<double>> const& fit) {
    Population pop;
    for (std::size_t i = 0; i < fit.size(); ++i) {
        Individual ind;
        ind.id = i;
        ind.encoded.coords = {0.0};
        ind.fitness = fit[i];
        pop.push_back(ind);
    }
    return pop;
}

std::vector<std::vector<double>> random_fitness(Rng& rng, std::size_t n, std::size_t m, bool coarse) {
    std::vector<std::vector<double>> fit(n, std::vector<double>(m));
    for (auto& f : fit) {
        for (auto& x : f) { x = coarse ? static_cast<double>(rng.below(5)) / 4.0 : rng.uniform(); }
    }
    return fit;
}

FeatureSpace three_feature_space() {
    return FeatureSpace("ops", {
                                   FeatureDef{"venue", FeatureKind::categorical, FeatureCategory::content,
                                              {"restaurant", "bar", "bakery", "cafe"}},
                                   FeatureDef{"cuisine", FeatureKind::categorical, FeatureCategory::content, {"italian", "german", "french"}},
                                   FeatureDef{"rating", FeatureKind::ordinal, FeatureCategory::content, {"3.5", "4", "4.5", "5"}},
                               });
}

}  // namespace

TEST(NonDominatedSort, SingleObjectiveGroupsEqualValues) {
    std::vector<std::vector<double>> const fit{{0.2}, {0.5}, {0.2}};
    EXPECT_EQ(non_dominated_sort(std::span<std::vector<double> const>(fit)), (Fronts{{0, 2}, {1}}));
}

TEST(NonDominatedSort, TwoObjectiveExample) {
    std::vector<std::vector<double>> const fit{{1, 2}, {2, 1}, {2, 2}};
    auto const fronts = non_dominated_sort(std::span<std::vector<double> const>(fit));
    EXPECT_EQ(fronts, peel_fronts(fit));
    EXPECT_EQ(fronts, (Fronts{{0, 1}, {2}}));
}

TEST(NonDominatedSort, IdenticalVectorsShareFrontZero) {
    std::vector<std::vector<double>> const fit(6, {0.3, 0.3});
    auto const fronts = non_dominated_sort(std::span<std::vector<double> const>(fit));
    ASSERT_EQ(fronts.size(), 1U);
    EXPECT_EQ(fronts[0].size(), 6U);
}

TEST(NonDominatedSort, MatchesBruteForceOnRandomInstances) {
    Rng rng{2024};
    std::size_t mismatches = 0;
    for (int inst = 0; inst < 1000; ++inst) {
        std::size_t const n = 1 + rng.below(50);
        std::size_t const m = 1 + rng.below(3);
        auto const fit = random_fitness(rng, n, m, inst % 2 == 0);
        if (non_dominated_sort(std::span<std::vector<double> const>(fit)) != peel_fronts(fit)) { ++mismatches; }
    }
    EXPECT_EQ(mismatches, 0U);
}

TEST(NonDominatedSort, AssignsRanksAndRejectsUnevaluated) {
    auto pop = make_pop({{1, 2}, {2, 1}, {2, 2}});
    non_dominated_sort(pop);
    EXPECT_EQ(*pop[0].rank, 0U);
    EXPECT_EQ(*pop[2].rank, 1U);
    pop[1].fitness.reset();
    EXPECT_THROW(non_dominated_sort(pop), UsageError);
}

TEST(Crowding, SmallFrontsAreAllInfinite) {
    std::vector<std::vector<double>> const two{{0.1, 0.9}, {0.9, 0.1}};
    for (double d : crowding_distance(std::span<std::vector<double> const>(two))) { EXPECT_EQ(d, inf); }
}

TEST(Crowding, MiddlePointSingleObjective) {
    std::vector<std::vector<double>> const f{{0.0}, {0.5}, {1.0}};
    auto const d = crowding_distance(std::span<std::vector<double> const>(f));
    EXPECT_EQ(d[0], inf);
    EXPECT_DOUBLE_EQ(d[1], (1.0 - 0.0) / 1.0);
    EXPECT_EQ(d[2], inf);
}

TEST(Crowding, EqualFitnessInteriorIsZero) {
    std::vector<std::vector<double>> const f(5, {0.4, 0.4});
    auto const d = crowding_distance(std::span<std::vector<double> const>(f));
    std::size_t zeros = 0;
    for (double x : d) { zeros += x == 0.0 ? 1 : 0; }
    EXPECT_EQ(zeros, 3U);
}

TEST(Crowding, MatchesOracleOnRandomFronts) {
    Rng rng{3};
    for (int inst = 0; inst < 200; ++inst) {
        std::size_t const n = 3 + rng.below(20);
        // Points on a line x + y = 1 are mutually non-dominated.
        std::vector<std::vector<double>> f;
        for (std::size_t i = 0; i < n; ++i) {
            double const x = rng.uniform();
            f.push_back({x, 1.0 - x});
        }
        auto const got = crowding_distance(std::span<std::vector<double> const>(f));
        auto const want = crowding_oracle(f);
        for (std::size_t i = 0; i < n; ++i) {
            if (std::isinf(want[i])) {
                ASSERT_TRUE(std::isinf(got[i]));
            } else {
                ASSERT_NEAR(got[i], want[i], 1e-12);
            }
        }
    }
}

TEST(Tournament, LowerRankWins) {
    Individual a;
    a.rank = 0;
    a.crowding = 0.1;
    Individual b;
    b.rank = 1;
    b.crowding = inf;
    EXPECT_EQ(tournament_beats(a, b), std::optional<bool>(true));
    EXPECT_EQ(tournament_beats(b, a), std::optional<bool>(false));
}

TEST(Tournament, EqualRankLargerCrowdingWins) {
    Individual a;
    a.rank = 0;
    a.crowding = inf;
    Individual b;
    b.rank = 0;
    b.crowding = 0.3;
    EXPECT_EQ(tournament_beats(a, b), std::optional<bool>(true));
    b.crowding = inf;
    EXPECT_FALSE(tournament_beats(a, b).has_value());
}

TEST(Tournament, DominatedMemberRarelySelected) {
    auto pop = make_pop({{0.0}, {1.0}});
    non_dominated_sort(pop);
    for (auto& p : pop) { p.crowding = inf; }
    Rng rng{9};
    auto const picks = tournament_select(pop, 4000, rng);
    std::size_t worse = 0;
    for (auto i : picks) { worse += i == 1 ? 1 : 0; }
    // The worse member wins only when drawn twice: probability 1/4.
    double const sigma = std::sqrt(4000 * 0.25 * 0.75);
    EXPECT_LE(std::abs(static_cast<double>(worse) - 1000.0), 3 * sigma);
}

TEST(Tournament, SeededSelectionRepeats) {
    Rng fit_rng{1};
    auto pop = survive(make_pop(random_fitness(fit_rng, 20, 2, false)), 20);
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng a{seed};
        Rng b{seed};
        ASSERT_EQ(tournament_select(pop, 20, a), tournament_select(pop, 20, b));
    }
}

TEST(Tournament, EmptyPopulationIsUsageError) {
    Rng rng{0};
    EXPECT_THROW(tournament_select(Population{}, 2, rng), UsageError);
}

TEST(Crossover, CuisineSwapExampleReachable) {
    auto const s = three_feature_space();
    auto const p1 = s.encode(s.make_vector({"restaurant", "italian", "4"}));
    auto const p2 = s.encode(s.make_vector({"bar", "german", "5"}));
    auto const want1 = s.make_vector({"restaurant", "german", "4"});
    auto const want2 = s.make_vector({"bar", "italian", "5"});
    OperatorParams params;
    params.crossover_prob = 1.0;
    bool found = false;
    for (std::uint64_t seed = 0; seed < 1000 && !found; ++seed) {
        Rng rng{seed};
        auto [c1, c2] = crossover(p1, p2, s, params, rng);
        found = s.decode(c1) == want1 && s.decode(c2) == want2;
    }
    EXPECT_TRUE(found);
}

TEST(Crossover, IdenticalParentsGiveIdenticalChildren) {
    auto const s = presets::navqa_space();
    Rng rng{4};
    OperatorParams params;
    params.crossover_prob = 1.0;
    for (int n = 0; n < 500; ++n) {
        auto const p = s.encode(s.random_vector(rng));
        auto [c1, c2] = crossover(p, p, s, params, rng);
        ASSERT_EQ(c1, p);
        ASSERT_EQ(c2, p);
    }
}

TEST(Crossover, ZeroProbabilityCopiesParents) {
    auto const s = presets::navqa_space();
    Rng rng{5};
    OperatorParams params;
    params.crossover_prob = 0.0;
    auto const a = s.encode(s.random_vector(rng));
    auto const b = s.encode(s.random_vector(rng));
    auto [c1, c2] = crossover(a, b, s, params, rng);
    EXPECT_EQ(c1, a);
    EXPECT_EQ(c2, b);
}

TEST(Crossover, SbxWithinBoundsAndMeanPreserving) {
    FeatureSpace const s("one", {FeatureDef{"level", FeatureKind::ordinal, FeatureCategory::style, {"a", "b", "c", "d", "e"}}});
    OperatorParams params;
    params.crossover_prob = 1.0;
    Rng rng{6};
    EncodedVector const p1{{0.2}};
    EncodedVector const p2{{0.6}};
    double const parent_mean = 0.4;
    double sum = 0.0;
    int const trials = 10000;
    for (int n = 0; n < trials; ++n) {
        auto [c1, c2] = crossover(p1, p2, s, params, rng);
        ASSERT_GE(c1.coords[0], s.lower_bound(0));
        ASSERT_LE(c1.coords[0], s.upper_bound(0));
        ASSERT_GE(c2.coords[0], s.lower_bound(0));
        ASSERT_LE(c2.coords[0], s.upper_bound(0));
        sum += (c1.coords[0] + c2.coords[0]) / 2.0;
    }
    EXPECT_NEAR(sum / trials, parent_mean, 0.01 * parent_mean);
}

TEST(Crossover, OutputsDecodeToValidVectors) {
    auto const s = presets::navqa_space();
    Rng rng{7};
    OperatorParams params;
    params.crossover_prob = 1.0;
    params.mutation_prob = 0.5;
    for (int n = 0; n < 2000; ++n) {
        auto [c1, c2] = crossover(s.encode(s.random_vector(rng)), s.encode(s.random_vector(rng)), s, params, rng);
        for (auto const& c : {mutate(c1, s, params, rng), mutate(c2, s, params, rng)}) {
            for (std::size_t i = 0; i < c.size(); ++i) {
                ASSERT_GE(c.coords[i], s.lower_bound(i));
                ASSERT_LE(c.coords[i], s.upper_bound(i));
            }
            auto const v = s.apply_constraints(s.decode(c));
            ASSERT_NO_THROW(s.check(v));
            ASSERT_TRUE(s.is_consistent(v));
        }
    }
}

TEST(Mutation, ZeroProbabilityIsIdentity) {
    auto const s = presets::navqa_space();
    Rng rng{8};
    OperatorParams params;
    params.mutation_prob = 0.0;
    for (int n = 0; n < 500; ++n) {
        auto const x = s.encode(s.random_vector(rng));
        ASSERT_EQ(mutate(x, s, params, rng), x);
    }
}

TEST(Mutation, VenueAndCuisineExampleReachable) {
    auto const s = three_feature_space();
    auto const x = s.encode(s.make_vector({"restaurant", "italian", "4"}));
    auto const want = s.make_vector({"bakery", "french", "4"});
    OperatorParams params;
    params.mutation_prob = 0.5;
    bool found = false;
    for (std::uint64_t seed = 0; seed < 2000 && !found; ++seed) {
        Rng rng{seed};
        found = s.decode(mutate(x, s, params, rng)) == want;
    }
    EXPECT_TRUE(found);
}

TEST(Mutation, CategoricalRedrawIsUniform) {
    auto const s = presets::navqa_space();
    std::size_t const venue = s.require_feature("venue");
    OperatorParams params;
    params.mutation_prob = 1.0;
    Rng rng{10};
    auto const x = s.encode(s.random_vector(rng));
    std::map<std::size_t, std::size_t> counts;
    std::size_t const n = 10000;
    for (std::size_t k = 0; k < n; ++k) { ++counts[s.decode(mutate(x, s, params, rng))[venue]]; }
    double const p = 1.0 / 8.0;
    double const sigma = std::sqrt(n * p * (1 - p));
    ASSERT_EQ(counts.size(), 8U);
    for (auto const& [v, c] : counts) { EXPECT_LE(std::abs(static_cast<double>(c) - n * p), 3 * sigma) << v; }
}

TEST(Mutation, PolynomialStaysWithinBounds) {
    auto const s = presets::navqa_space();
    OperatorParams params;
    params.mutation_prob = 1.0;
    Rng rng{12};
    for (int n = 0; n < 5000; ++n) {
        EncodedVector x;
        for (std::size_t i = 0; i < s.dimension(); ++i) { x.coords.push_back(s.upper_bound(i) * rng.uniform()); }
        auto const y = mutate(x, s, params, rng);
        for (std::size_t i = 0; i < y.size(); ++i) {
            ASSERT_GE(y.coords[i], s.lower_bound(i));
            ASSERT_LE(y.coords[i], s.upper_bound(i));
        }
    }
}

TEST(Survival, KAtLeastSizeKeepsEverything) {
    auto const pop = make_pop({{0.3}, {0.1}, {0.2}});
    auto const out = survive(pop, 5);
    ASSERT_EQ(out.size(), 3U);
    for (std::size_t i = 0; i < 3; ++i) { EXPECT_EQ(out[i].id, pop[i].id); }
}

TEST(Survival, SingleObjectiveKeepsBestTwo) {
    auto const out = survive(make_pop({{0.9}, {0.1}, {0.5}}), 2);
    std::set<double> kept;
    for (auto const& ind : out) { kept.insert((*ind.fitness)[0]); }
    EXPECT_EQ(kept, (std::set<double>{0.1, 0.5}));
}

TEST(Survival, MatchesReferenceTruncation) {
    Rng rng{13};
    for (int inst = 0; inst < 200; ++inst) {
        auto const fit = random_fitness(rng, 20, 2, inst % 3 == 0);
        std::size_t const k = 1 + rng.below(19);
        // Reference: whole fronts, then the split front by crowding desc, id asc.
        std::set<std::uint64_t> want;
        for (auto const& front : peel_fronts(fit)) {
            if (want.size() + front.size() <= k) {
                want.insert(front.begin(), front.end());
                continue;
            }
            std::vector<std::vector<double>> ff;
            for (auto i : front) { ff.push_back(fit[i]); }
            auto const d = crowding_oracle(ff);
            std::vector<std::size_t> order(front.size());
            for (std::size_t j = 0; j < order.size(); ++j) { order[j] = j; }
            std::sort(order.begin(), order.end(), [&](auto a, auto b) { return d[a] != d[b] ? d[a] > d[b] : front[a] < front[b]; });
            for (std::size_t j = 0; want.size() < k; ++j) { want.insert(front[order[j]]); }
            break;
        }
        std::set<std::uint64_t> got;
        for (auto const& ind : survive(make_pop(fit), k)) { got.insert(ind.id); }
        ASSERT_EQ(got, want) << "instance " << inst;
    }
}

TEST(Survival, SplitFrontKeepsExtremesFirst) {
    // One front of five points on a line; k = 2 keeps both extremes.
    auto const out = survive(make_pop({{0.5, 0.5}, {0.0, 1.0}, {0.25, 0.75}, {1.0, 0.0}, {0.75, 0.25}}), 2);
    std::set<std::uint64_t> ids;
    for (auto const& ind : out) { ids.insert(ind.id); }
    EXPECT_EQ(ids, (std::set<std::uint64_t>{1, 3}));
}

TEST(Survival, ElitismOverFiftyGenerations) {
    // Static two-objective fitness over the encoded vector.
    auto const s = presets::navqa_space();
    auto fitness = [&](EncodedVector const& x) {
        auto const v = s.decode(x);
        double a = 0.0;
        double b = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) {
            double const u = static_cast<double>(v[i]) / static_cast<double>(s.feature(i).size() - 1);
            a += u;
            b += (1.0 - u) * (i % 2 == 0 ? 1.0 : 0.5);
        }
        return std::vector<double>{a, b};
    };
    Rng rng{14};
    OperatorParams const params{0.7, 0.07, 15.0, 20.0, 2};
    std::uint64_t next_id = 0;
    Population pop;
    for (int i = 0; i < 20; ++i) {
        Individual ind;
        ind.id = next_id++;
        ind.encoded = s.encode(s.random_vector(rng));
        ind.fitness = fitness(ind.encoded);
        pop.push_back(ind);
    }
    pop = survive(pop, 20);
    auto best = [](Population const& p, std::size_t m) {
        double b = inf;
        for (auto const& ind : p) { b = std::min(b, (*ind.fitness)[m]); }
        return b;
    };
    double best0 = best(pop, 0);
    double best1 = best(pop, 1);
    for (int gen = 1; gen <= 50; ++gen) {
        auto const parents = tournament_select(pop, 20, rng);
        Population merged = pop;
        for (std::size_t i = 0; i + 1 < parents.size(); i += 2) {
            auto [c1, c2] = crossover(pop[parents[i]].encoded, pop[parents[i + 1]].encoded, s, params, rng);
            for (auto* c : {&c1, &c2}) {
                Individual ind;
                ind.id = next_id++;
                ind.generation = static_cast<std::size_t>(gen);
                ind.encoded = s.encode(s.apply_constraints(s.decode(mutate(*c, s, params, rng))));
                ind.fitness = fitness(ind.encoded);
                merged.push_back(ind);
            }
        }
        pop = survive(merged, 20);
        ASSERT_EQ(pop.size(), 20U);
        ASSERT_LE(best(pop, 0), best0) << "generation " << gen;
        ASSERT_LE(best(pop, 1), best1) << "generation " << gen;
        best0 = best(pop, 0);
        best1 = best(pop, 1);
    }
}
