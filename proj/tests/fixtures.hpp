// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The featsearch Authors

#pragma once

#include <memory>
#include <string>

#include "featsearch/campaign.hpp"
#include "test_util.hpp"

namespace test {

/// A bundled mock campaign with overrides for the knobs tests vary.
inline featsearch::CampaignConfig bundled_campaign(std::string const& name, std::size_t workers = 1, std::uint64_t seed = 1) {
    auto c = featsearch::load_campaign(data_path("campaigns/" + name + ".json"));
    c.workers = workers;
    c.seed = seed;
    return c;
}

inline featsearch::CampaignContext bundled_context(std::string const& name, std::size_t workers = 1, std::uint64_t seed = 1) {
    return featsearch::prepare_campaign(bundled_campaign(name, workers, seed), false);
}

inline std::unique_ptr<featsearch::Evaluator> make_evaluator(featsearch::CampaignContext const& ctx, std::string method = "ga") {
    auto const& c = ctx.config;
    featsearch::EvaluatorConfig ec{c.fitness, c.similarity, c.workers, std::move(method)};
    return std::make_unique<featsearch::Evaluator>(ctx.space, ctx.generator, ctx.gateway, ctx.pois, ec, featsearch::make_clock(c));
}

/// Archive lines joined, for byte comparisons.
inline std::string archive_text(featsearch::Archive const& a) {
    std::ostringstream os;
    a.write(os);
    return os.str();
}

}  // namespace test
