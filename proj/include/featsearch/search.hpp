// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The featsearch Authors

#pragma once

#include <optional>
#include <vector>

#include "featsearch/common.hpp"
#include "featsearch/evaluation.hpp"
#include "featsearch/feature_space.hpp"
#include "featsearch/nsga2.hpp"
#include "featsearch/record.hpp"

// Generational NSGA-II loop and the random-search baseline.

namespace featsearch {

struct Budget {
    std::optional<std::size_t> evaluations;
    std::optional<double> seconds;

    void validate(Clock const& clock) const {
        if (!evaluations && !seconds) { throw ConfigError("budget needs evaluations and/or seconds"); }
        if (evaluations && *evaluations == 0) { throw ConfigError("budget.evaluations must be positive"); }
        if (seconds && !(*seconds > 0.0)) { throw ConfigError("budget.seconds must be positive"); }
        if (seconds && clock.is_logical()) { throw ConfigError("a wall-clock budget needs clock \"steady\""); }
    }

    /// Evaluations still allowed (SIZE_MAX when only time-limited), 0 once the
    /// time limit has passed.
    std::size_t remaining(std::size_t used, Clock const& clock) const {
        if (seconds && clock.elapsed_seconds() >= *seconds) { return 0; }
        if (!evaluations) { return std::numeric_limits<std::size_t>::max(); }
        return used >= *evaluations ? 0 : *evaluations - used;
    }
};

struct SearchSettings {
    std::size_t population = 20;
    OperatorParams operators;
    Budget budget;
    std::uint64_t seed = 0;

    void validate(Clock const& clock) const {
        if (population < 2) { throw ConfigError("population must be at least 2"); }
        operators.validate();
        budget.validate(clock);
    }
};

namespace detail {

inline ArchiveInfo archive_info(Evaluator const& ev, std::string method, std::uint64_t seed) {
    ArchiveInfo info;
    info.method = std::move(method);
    info.seed = seed;
    info.objectives = ev.fitness().names();
    info.clock = ev.clock().name();
    return info;
}

inline Individual to_individual(TestRecord const& r, std::size_t m) {
    Individual ind;
    ind.id = r.id;
    ind.generation = r.generation;
    ind.encoded = r.encoded;
    ind.fitness = r.search_fitness(m);
    return ind;
}

/// Mutation that always changes the decoded vector: the usual operator first,
/// then a forced redraw of one random feature if nothing changed.
inline EncodedVector mutate_fresh(EncodedVector const& x, FeatureSpace const& space, OperatorParams const& params, Rng& rng) {
    FeatureVector const before = space.apply_constraints(space.decode(x));
    EncodedVector y = mutate(x, space, params, rng);
    if (space.apply_constraints(space.decode(y)) != before) { return y; }
    for (std::size_t attempt = 0; attempt < 8 * space.dimension(); ++attempt) {
        FeatureVector v = before;
        std::size_t const f = rng.below(space.dimension());
        std::size_t const n = space.feature(f).size();
        if (n < 2) { continue; }
        std::size_t next = rng.below(n - 1);
        if (next >= v[f]) { ++next; }
        v.index[f] = next;
        v = space.apply_constraints(v);
        if (v != before) { return space.encode(v); }
    }
    return y;
}

}  // namespace detail

/// NSGA-II over encoded vectors. Duplicates are archived as EXCLUDED and, if
/// budget remains, replaced in the population by one freshly mutated variant.
inline Archive run_search(FeatureSpace const& space, Evaluator& evaluator, SearchSettings const& settings, std::string method = "ga") {
    Clock const& clock = evaluator.clock();
    settings.validate(clock);
    std::size_t const k = settings.population;
    std::size_t const m = evaluator.objective_count();
    Archive archive(space, detail::archive_info(evaluator, method, settings.seed));
    Rng rng(derive_seed(settings.seed, "search", 0));
    std::uint64_t next_id = 0;
    std::size_t used = 0;

    // Evaluates a batch, archives it, and returns population members with
    // duplicates swapped for fresh variants where budget allows.
    auto run_batch = [&](std::vector<EncodedVector> const& xs, std::size_t generation) {
        std::vector<Candidate> batch;
        for (auto const& x : xs) { batch.push_back(Candidate{next_id++, generation, x}); }
        auto recs = evaluator.evaluate(batch);
        used += recs.size();
        std::vector<std::size_t> dups;
        for (std::size_t i = 0; i < recs.size(); ++i) {
            if (recs[i].exclusion == Exclusion::duplicate) { dups.push_back(i); }
        }
        std::vector<EncodedVector> fresh;
        std::size_t const room = settings.budget.remaining(used, clock);
        for (std::size_t i = 0; i < dups.size() && fresh.size() < room; ++i) {
            fresh.push_back(detail::mutate_fresh(recs[dups[i]].encoded, space, settings.operators, rng));
        }
        std::vector<TestRecord> repl;
        if (!fresh.empty()) {
            std::vector<Candidate> rb;
            for (auto const& x : fresh) { rb.push_back(Candidate{next_id++, generation, x}); }
            repl = evaluator.evaluate(rb);
            used += repl.size();
        }
        Population members;
        for (auto const& r : recs) { members.push_back(detail::to_individual(r, m)); }
        for (std::size_t i = 0; i < repl.size(); ++i) { members[dups[i]] = detail::to_individual(repl[i], m); }
        for (auto& r : recs) { archive.append(std::move(r)); }
        for (auto& r : repl) { archive.append(std::move(r)); }
        return members;
    };

    std::vector<EncodedVector> init;
    for (std::size_t i = 0; i < k && init.size() < settings.budget.remaining(used, clock); ++i) {
        init.push_back(space.encode(space.random_vector(rng)));
    }
    Population pop = run_batch(init, 0);

    for (std::size_t gen = 1; !pop.empty(); ++gen) {
        std::size_t const room = settings.budget.remaining(used, clock);
        if (room == 0) { break; }
        auto fronts = non_dominated_sort(pop);
        for (auto const& f : fronts) { assign_crowding(pop, f); }
        auto parents = tournament_select(pop, k + (k % 2), rng, settings.operators.tournament_size);
        std::vector<EncodedVector> kids;
        for (std::size_t i = 0; i + 1 < parents.size(); i += 2) {
            auto [c1, c2] = crossover(pop[parents[i]].encoded, pop[parents[i + 1]].encoded, space, settings.operators, rng);
            kids.push_back(mutate(std::move(c1), space, settings.operators, rng));
            kids.push_back(mutate(std::move(c2), space, settings.operators, rng));
        }
        kids.resize(std::min({kids.size(), k, room}));
        Population offspring = run_batch(kids, gen);
        Population merged = std::move(pop);
        merged.insert(merged.end(), offspring.begin(), offspring.end());
        std::sort(merged.begin(), merged.end(), [](Individual const& a, Individual const& b) { return a.id < b.id; });
        pop = survive(std::move(merged), k);
    }
    evaluator.finalize(archive.records());
    return archive;
}

/// Uniform constrained sampling, evaluated in batches of `batch` candidates.
inline Archive random_search(FeatureSpace const& space, Evaluator& evaluator, Budget const& budget, std::uint64_t seed, std::size_t batch = 20) {
    Clock const& clock = evaluator.clock();
    budget.validate(clock);
    if (batch == 0) { throw ConfigError("random search batch size must be positive"); }
    Archive archive(space, detail::archive_info(evaluator, "rs", seed));
    Rng rng(derive_seed(seed, "random", 0));
    std::uint64_t next_id = 0;
    std::size_t used = 0;
    for (std::size_t gen = 0;; ++gen) {
        std::size_t const n = std::min(batch, budget.remaining(used, clock));
        if (n == 0) { break; }
        std::vector<Candidate> cands;
        for (std::size_t i = 0; i < n; ++i) { cands.push_back(Candidate{next_id++, gen, space.encode(space.random_vector(rng))}); }
        for (auto& r : evaluator.evaluate(cands)) { archive.append(std::move(r)); }
        used += n;
    }
    evaluator.finalize(archive.records());
    return archive;
}

}  // namespace featsearch
