// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The featsearch Authors

#pragma once

#include "featsearch/feature_space.hpp"

// Bundled example feature spaces: one for safety red-teaming of a chat model,
// one for an in-car venue recommendation assistant. The files under
// data/spaces/ are generated from these (`featsearch gen-space --preset`).

namespace featsearch::presets {

namespace detail {
inline FeatureDef def(std::string name, FeatureKind kind, FeatureCategory cat, std::vector<std::string> domain) {
    return FeatureDef{std::move(name), kind, cat, std::move(domain)};
}
}  // namespace detail

/// 8 features, 5,600 combinations, no constraints.
inline FeatureSpace safeqa_space() {
    using K = FeatureKind;
    using C = FeatureCategory;
    using detail::def;
    return FeatureSpace(
        "safeqa",
        {
            def("politeness", K::ordinal, C::style, {"impolite", "polite"}),
            def("slang", K::ordinal, C::style, {"formal", "slangy"}),
            def("anthropomorphism", K::ordinal, C::style, {"machine_like", "human_like"}),
            def("persuasion", K::categorical, C::style,
                {"none", "evidence_based", "expert_endorsement", "misrepresentation", "authority_endorsement"}),
            def("writing_style", K::categorical, C::style,
                {"question", "role_play", "technical_terms", "uncommon_dialect", "misspellings"}),
            def("safety_category", K::categorical, C::content,
                {"hate_speech", "self_harm", "violence", "property_crime", "privacy_violation", "misinformation", "weapons"}),
            def("word_deletion", K::ordinal, C::perturbation, {"none", "applied"}),
            def("char_noise", K::ordinal, C::perturbation, {"none", "applied"}),
        });
}

/// 13 features, 11,664,000 combinations. Non-food venues carry no cuisine and
/// no price range.
inline FeatureSpace navqa_space() {
    using K = FeatureKind;
    using C = FeatureCategory;
    using detail::def;
    std::vector<FeatureDef> features{
        def("politeness", K::ordinal, C::style, {"impolite", "neutral", "polite"}),
        def("slang", K::ordinal, C::style, {"formal", "neutral", "slangy"}),
        def("anthropomorphism", K::ordinal, C::style, {"low", "medium", "high"}),
        def("implicitness", K::ordinal, C::style, {"explicit", "partial", "implicit"}),
        def("venue", K::categorical, C::content, {"hospital", "bar", "restaurant", "cafe", "bakery", "museum", "car_repair", "pharmacy"}),
        def("cuisine", K::categorical, C::content, {"none", "italian", "german", "french", "chinese"}),
        def("price", K::ordinal, C::content, {"none", "cheap", "moderate", "expensive", "luxury"}),
        def("rating", K::ordinal, C::content, {"3.5", "4", "4.5", "5"}),
        def("payment", K::categorical, C::content, {"cash", "card"}),
        def("parking", K::categorical, C::content, {"no", "yes"}),
        def("word_deletion", K::ordinal, C::perturbation, {"none", "low", "high"}),
        def("fillers", K::ordinal, C::perturbation, {"none", "low", "high"}),
        def("homophones", K::ordinal, C::perturbation, {"none", "very_low", "low", "medium", "high"}),
    };
    ConstraintRule no_food;
    no_food.trigger_feature = 4;
    no_food.trigger_values = {0, 5, 6, 7};  // hospital, museum, car_repair, pharmacy
    no_food.effects = {ConstraintEffect{5, 0, {}}, ConstraintEffect{6, std::nullopt, {0}}};
    return FeatureSpace("navqa", std::move(features), {no_food});
}

inline std::optional<FeatureSpace> by_name(std::string_view name) {
    if (name == "safeqa") { return safeqa_space(); }
    if (name == "navqa") { return navqa_space(); }
    return std::nullopt;
}

}  // namespace featsearch::presets
