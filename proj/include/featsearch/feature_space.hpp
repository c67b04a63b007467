// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The featsearch Authors

#pragma once

#include <compare>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "featsearch/common.hpp"

namespace featsearch {

enum class FeatureKind { ordinal, categorical };
enum class FeatureCategory { style, content, perturbation };

inline std::string to_string(FeatureKind k) { return k == FeatureKind::ordinal ? "ordinal" : "categorical"; }

inline std::string to_string(FeatureCategory c) {
    switch (c) {
        case FeatureCategory::style: return "style";
        case FeatureCategory::content: return "content";
        case FeatureCategory::perturbation: return "perturbation";
    }
    return "?";
}

inline FeatureKind parse_kind(std::string_view s) {
    if (s == "ordinal") { return FeatureKind::ordinal; }
    if (s == "categorical") { return FeatureKind::categorical; }
    throw ConfigError("unknown feature kind '" + std::string(s) + "'");
}

inline FeatureCategory parse_category(std::string_view s) {
    if (s == "style") { return FeatureCategory::style; }
    if (s == "content") { return FeatureCategory::content; }
    if (s == "perturbation") { return FeatureCategory::perturbation; }
    throw ConfigError("unknown feature category '" + std::string(s) + "'");
}

/// One discrete input dimension. Ordinal domains are listed in semantic order.
struct FeatureDef {
    std::string name;
    FeatureKind kind = FeatureKind::categorical;
    FeatureCategory category = FeatureCategory::content;
    std::vector<std::string> domain;

    std::size_t size() const noexcept { return domain.size(); }

    std::optional<std::size_t> index_of(std::string_view value) const {
        for (std::size_t i = 0; i < domain.size(); ++i) {
            if (domain[i] == value) { return i; }
        }
        return std::nullopt;
    }
};

/// Genotype: one domain index per feature.
struct FeatureVector {
    std::vector<std::size_t> index;

    std::size_t size() const noexcept { return index.size(); }
    std::size_t operator[](std::size_t i) const { return index[i]; }
    auto operator<=>(FeatureVector const&) const = default;
};

/// Numeric image of a FeatureVector used by the variation operators.
struct EncodedVector {
    std::vector<double> coords;

    std::size_t size() const noexcept { return coords.size(); }
    bool operator==(EncodedVector const&) const = default;
};

/// Effect of a fired rule on one target feature. Either a forced value or an
/// allowed subset (stored in domain order); never empty.
struct ConstraintEffect {
    std::size_t feature = 0;
    std::optional<std::size_t> force;
    std::vector<std::size_t> allowed;
};

/// "When <trigger feature> takes one of <values>, then <effects>."
struct ConstraintRule {
    std::size_t trigger_feature = 0;
    std::vector<std::size_t> trigger_values;
    std::vector<ConstraintEffect> effects;

    bool fires(FeatureVector const& v) const {
        return std::find(trigger_values.begin(), trigger_values.end(), v[trigger_feature]) != trigger_values.end();
    }
};

/// The search domain: ordered features plus constraint rules.
///
/// Rules are validated at construction. Trigger features may not be targeted by
/// any effect, so a single pass over the fired rules is a fixpoint. Effects of
/// all fired rules on the same target are combined: forced values must agree and
/// lie inside every co-firing restriction, and restrictions must intersect.
class FeatureSpace {
public:
    FeatureSpace() = default;

    FeatureSpace(std::string name, std::vector<FeatureDef> features, std::vector<ConstraintRule> rules = {})
        : name_{std::move(name)}, features_{std::move(features)}, rules_{std::move(rules)} {
        validate();
    }

    std::string const& name() const noexcept { return name_; }
    std::size_t dimension() const noexcept { return features_.size(); }
    std::vector<FeatureDef> const& features() const noexcept { return features_; }
    FeatureDef const& feature(std::size_t i) const { return features_.at(i); }
    std::vector<ConstraintRule> const& rules() const noexcept { return rules_; }

    std::optional<std::size_t> feature_index(std::string_view name) const {
        for (std::size_t i = 0; i < features_.size(); ++i) {
            if (features_[i].name == name) { return i; }
        }
        return std::nullopt;
    }

    std::size_t require_feature(std::string_view name) const {
        auto i = feature_index(name);
        if (!i) { throw ConfigError("unknown feature '" + std::string(name) + "'"); }
        return *i;
    }

    /// Product of domain sizes, saturating at UINT64_MAX. Never enumerates.
    std::uint64_t combination_count() const noexcept {
        std::uint64_t total = 1;
        for (auto const& f : features_) {
            if (total > std::numeric_limits<std::uint64_t>::max() / f.size()) {
                return std::numeric_limits<std::uint64_t>::max();
            }
            total *= f.size();
        }
        return total;
    }

    // Values -----------------------------------------------------------------

    FeatureVector make_vector(std::span<std::string const> values) const {
        if (values.size() != dimension()) {
            throw DomainError("expected " + std::to_string(dimension()) + " values, got " + std::to_string(values.size()));
        }
        FeatureVector v;
        v.index.reserve(values.size());
        for (std::size_t i = 0; i < values.size(); ++i) {
            auto idx = features_[i].index_of(values[i]);
            if (!idx) {
                throw DomainError("value '" + values[i] + "' is not in the domain of feature '" + features_[i].name + "'");
            }
            v.index.push_back(*idx);
        }
        return v;
    }

    FeatureVector make_vector(std::initializer_list<std::string> values) const {
        std::vector<std::string> const tmp(values);
        return make_vector(std::span<std::string const>(tmp));
    }

    std::string const& value(FeatureVector const& v, std::size_t i) const { return features_.at(i).domain.at(v[i]); }

    std::vector<std::string> values(FeatureVector const& v) const {
        check(v);
        std::vector<std::string> out;
        out.reserve(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) { out.push_back(features_[i].domain[v[i]]); }
        return out;
    }

    void check(FeatureVector const& v) const {
        if (v.size() != dimension()) {
            throw DomainError("feature vector has " + std::to_string(v.size()) + " entries, space has " + std::to_string(dimension()));
        }
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (v[i] >= features_[i].size()) {
                throw DomainError("index " + std::to_string(v[i]) + " is outside the domain of feature '" + features_[i].name + "'");
            }
        }
    }

    // Encoding ---------------------------------------------------------------

    double lower_bound(std::size_t) const noexcept { return 0.0; }

    double upper_bound(std::size_t i) const {
        auto const& f = features_.at(i);
        auto const n = static_cast<double>(f.size());
        return f.kind == FeatureKind::ordinal ? (n - 1.0) / n : n - 1.0;
    }

    /// Ordinal: index / |D|. Categorical: raw index.
    EncodedVector encode(FeatureVector const& v) const {
        check(v);
        EncodedVector x;
        x.coords.reserve(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) {
            auto const& f = features_[i];
            auto const idx = static_cast<double>(v[i]);
            x.coords.push_back(f.kind == FeatureKind::ordinal ? idx / static_cast<double>(f.size()) : idx);
        }
        return x;
    }

    EncodedVector encode(std::span<std::string const> values) const { return encode(make_vector(values)); }

    /// Clamps into bounds and snaps to the nearest grid index, ties toward the
    /// lower index.
    FeatureVector decode(EncodedVector const& x) const {
        if (x.size() != dimension()) {
            throw DomainError("encoded vector has " + std::to_string(x.size()) + " coordinates, space has " + std::to_string(dimension()));
        }
        FeatureVector v;
        v.index.reserve(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            auto const& f = features_[i];
            double c = x.coords[i];
            if (std::isnan(c)) { c = 0.0; }
            c = std::clamp(c, lower_bound(i), upper_bound(i));
            double const scaled = f.kind == FeatureKind::ordinal ? c * static_cast<double>(f.size()) : c;
            double const snapped = std::ceil(scaled - 0.5);
            auto idx = static_cast<std::size_t>(std::max(0.0, snapped));
            v.index.push_back(std::min(idx, f.size() - 1));
        }
        return v;
    }

    void clamp(EncodedVector& x) const {
        for (std::size_t i = 0; i < x.size(); ++i) {
            double& c = x.coords[i];
            if (std::isnan(c)) { c = 0.0; }
            c = std::clamp(c, lower_bound(i), upper_bound(i));
        }
    }

    // Constraints ------------------------------------------------------------

    FeatureVector apply_constraints(FeatureVector v) const {
        check(v);
        for (auto const& [feature, eff] : combined_effects(v)) {
            if (eff.force) {
                v.index[feature] = *eff.force;
            } else if (!eff.allowed[v[feature]]) {
                auto first = std::find(eff.allowed.begin(), eff.allowed.end(), true);
                v.index[feature] = static_cast<std::size_t>(first - eff.allowed.begin());
            }
        }
        return v;
    }

    bool is_consistent(FeatureVector const& v) const { return apply_constraints(v) == v; }

    /// For every feature, the values permitted given the fired rules of v.
    /// Only trigger-feature values of v matter.
    std::vector<std::vector<bool>> allowed_values(FeatureVector const& v) const {
        std::vector<std::vector<bool>> allowed;
        allowed.reserve(dimension());
        for (auto const& f : features_) { allowed.emplace_back(f.size(), true); }
        for (auto const& [feature, eff] : combined_effects(v)) {
            if (eff.force) {
                std::fill(allowed[feature].begin(), allowed[feature].end(), false);
                allowed[feature][*eff.force] = true;
            } else {
                allowed[feature] = eff.allowed;
            }
        }
        return allowed;
    }

    /// Features that appear as rule triggers, ascending.
    std::vector<std::size_t> trigger_features() const {
        std::set<std::size_t> s;
        for (auto const& r : rules_) { s.insert(r.trigger_feature); }
        return {s.begin(), s.end()};
    }

    // Sampling ---------------------------------------------------------------

    FeatureVector random_vector(Rng& rng) const {
        FeatureVector v;
        v.index.reserve(dimension());
        for (auto const& f : features_) { v.index.push_back(rng.below(f.size())); }
        return apply_constraints(std::move(v));
    }

    FeatureVector random_vector(std::uint64_t seed) const {
        Rng rng{seed};
        return random_vector(rng);
    }

    // Text -------------------------------------------------------------------

    /// "name: value" lines, in feature order, optionally one category only.
    std::string describe(FeatureVector const& v, std::optional<FeatureCategory> only = std::nullopt) const {
        check(v);
        std::string out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (only && features_[i].category != *only) { continue; }
            if (!out.empty()) { out += '\n'; }
            out += features_[i].name + ": " + features_[i].domain[v[i]];
        }
        return out;
    }

private:
    struct Combined {
        std::optional<std::size_t> force;
        std::vector<bool> allowed;
    };

    std::map<std::size_t, Combined> combined_effects(FeatureVector const& v) const {
        std::map<std::size_t, Combined> out;
        for (auto const& rule : rules_) {
            if (!rule.fires(v)) { continue; }
            for (auto const& eff : rule.effects) {
                auto [it, inserted] = out.try_emplace(eff.feature);
                auto& c = it->second;
                if (inserted) { c.allowed.assign(features_[eff.feature].size(), true); }
                if (eff.force) {
                    c.force = eff.force;
                } else {
                    std::vector<bool> mask(features_[eff.feature].size(), false);
                    for (auto a : eff.allowed) { mask[a] = true; }
                    for (std::size_t i = 0; i < mask.size(); ++i) { c.allowed[i] = c.allowed[i] && mask[i]; }
                }
            }
        }
        return out;
    }

    void validate() {
        if (features_.empty()) { throw ConfigError("feature space '" + name_ + "' has no features"); }
        std::set<std::string> names;
        for (auto const& f : features_) {
            if (f.name.empty()) { throw ConfigError("feature with empty name"); }
            if (!names.insert(f.name).second) { throw ConfigError("duplicate feature name '" + f.name + "'"); }
            if (f.domain.size() < 2) { throw ConfigError("feature '" + f.name + "' needs at least two domain values"); }
            std::set<std::string> vals(f.domain.begin(), f.domain.end());
            if (vals.size() != f.domain.size()) { throw ConfigError("feature '" + f.name + "' has duplicate domain values"); }
        }

        std::set<std::size_t> triggers;
        for (auto const& r : rules_) { triggers.insert(r.trigger_feature); }
        for (std::size_t ri = 0; ri < rules_.size(); ++ri) {
            auto& r = rules_[ri];
            std::string const where = "constraint rule #" + std::to_string(ri);
            if (r.trigger_feature >= dimension()) { throw ConfigError(where + ": trigger feature out of range"); }
            if (r.trigger_values.empty()) { throw ConfigError(where + ": empty trigger value set"); }
            for (auto tv : r.trigger_values) {
                if (tv >= features_[r.trigger_feature].size()) { throw ConfigError(where + ": trigger value out of range"); }
            }
            if (r.effects.empty()) { throw ConfigError(where + ": no effects"); }
            for (auto& e : r.effects) {
                if (e.feature >= dimension()) { throw ConfigError(where + ": effect feature out of range"); }
                auto const& target = features_[e.feature];
                if (triggers.count(e.feature) != 0) {
                    throw ConfigError(where + ": feature '" + target.name + "' is both a trigger and a target (rule chains are not supported)");
                }
                if (e.force) {
                    if (*e.force >= target.size()) { throw ConfigError(where + ": forced value out of range"); }
                    if (!e.allowed.empty()) { throw ConfigError(where + ": effect on '" + target.name + "' both forces and restricts"); }
                } else {
                    if (e.allowed.empty()) { throw ConfigError(where + ": restriction empties feature '" + target.name + "'"); }
                    for (auto a : e.allowed) {
                        if (a >= target.size()) { throw ConfigError(where + ": restricted value out of range"); }
                    }
                    std::sort(e.allowed.begin(), e.allowed.end());
                    e.allowed.erase(std::unique(e.allowed.begin(), e.allowed.end()), e.allowed.end());
                }
            }
        }
        check_cofiring_rules();
    }

    // Enumerates every distinguishable assignment of the trigger features and
    // checks that the combined effects are satisfiable.
    void check_cofiring_rules() const {
        if (rules_.empty()) { return; }
        std::vector<std::size_t> const tf = trigger_features();
        std::vector<std::vector<std::size_t>> reps(tf.size());
        std::uint64_t total = 1;
        for (std::size_t k = 0; k < tf.size(); ++k) {
            std::set<std::size_t> mentioned;
            for (auto const& r : rules_) {
                if (r.trigger_feature == tf[k]) { mentioned.insert(r.trigger_values.begin(), r.trigger_values.end()); }
            }
            reps[k].assign(mentioned.begin(), mentioned.end());
            for (std::size_t val = 0; val < features_[tf[k]].size(); ++val) {
                if (mentioned.count(val) == 0) {
                    reps[k].push_back(val);
                    break;
                }
            }
            total *= reps[k].size();
            if (total > (1U << 20U)) { throw ConfigError("too many interacting constraint triggers to validate"); }
        }

        FeatureVector probe;
        probe.index.assign(dimension(), 0);
        std::vector<std::size_t> odometer(tf.size(), 0);
        for (std::uint64_t n = 0; n < total; ++n) {
            for (std::size_t k = 0; k < tf.size(); ++k) { probe.index[tf[k]] = reps[k][odometer[k]]; }
            check_assignment(probe);
            for (std::size_t k = 0; k < tf.size(); ++k) {
                if (++odometer[k] < reps[k].size()) { break; }
                odometer[k] = 0;
            }
        }
    }

    void check_assignment(FeatureVector const& probe) const {
        std::map<std::size_t, std::optional<std::size_t>> forced;
        std::map<std::size_t, std::vector<bool>> allowed;
        for (auto const& rule : rules_) {
            if (!rule.fires(probe)) { continue; }
            for (auto const& eff : rule.effects) {
                auto const& target = features_[eff.feature];
                if (eff.force) {
                    auto& f = forced[eff.feature];
                    if (f && *f != *eff.force) {
                        throw ConfigError("conflicting FORCE rules on feature '" + target.name + "' ('" + target.domain[*f] + "' vs '" +
                                          target.domain[*eff.force] + "')");
                    }
                    f = eff.force;
                } else {
                    auto [it, inserted] = allowed.try_emplace(eff.feature, target.size(), true);
                    std::vector<bool> mask(target.size(), false);
                    for (auto a : eff.allowed) { mask[a] = true; }
                    for (std::size_t i = 0; i < mask.size(); ++i) { it->second[i] = it->second[i] && mask[i]; }
                }
            }
        }
        for (auto const& [feature, mask] : allowed) {
            auto const& target = features_[feature];
            if (std::find(mask.begin(), mask.end(), true) == mask.end()) {
                throw ConfigError("co-firing RESTRICT rules empty the allowed set of feature '" + target.name + "'");
            }
            auto f = forced.find(feature);
            if (f != forced.end() && f->second && !mask[*f->second]) {
                throw ConfigError("FORCE of '" + target.domain[*f->second] + "' on feature '" + target.name +
                                  "' contradicts a co-firing RESTRICT rule");
            }
        }
    }

    std::string name_;
    std::vector<FeatureDef> features_;
    std::vector<ConstraintRule> rules_;
};

// Config file --------------------------------------------------------------
//
// {
//   "name": "navqa",
//   "features": [ {"name": "venue", "kind": "categorical", "category": "content",
//                  "domain": ["hospital", "bar", ...]}, ... ],
//   "constraints": [ {"when": {"feature": "venue", "in": ["car_repair"]},
//                     "then": [ {"feature": "cuisine", "force": "none"},
//                               {"feature": "price", "restrict": ["none"]} ]} ]
// }

namespace detail {

inline std::string json_value_string(nlohmann::json const& j) {
    if (j.is_string()) { return j.get<std::string>(); }
    if (j.is_number_integer()) { return std::to_string(j.get<long long>()); }
    if (j.is_number()) {
        std::ostringstream os;
        os << j.get<double>();
        return os.str();
    }
    throw ConfigError("domain values must be strings or numbers, got " + j.dump());
}

inline std::size_t domain_index(FeatureDef const& f, std::string const& value, std::string const& where) {
    auto idx = f.index_of(value);
    if (!idx) { throw ConfigError(where + ": value '" + value + "' is not in the domain of feature '" + f.name + "'"); }
    return *idx;
}

}  // namespace detail

inline FeatureSpace feature_space_from_json(nlohmann::json const& j) {
    try {
        std::vector<FeatureDef> features;
        for (auto const& jf : j.at("features")) {
            FeatureDef f;
            f.name = jf.at("name").get<std::string>();
            f.kind = parse_kind(jf.at("kind").get<std::string>());
            f.category = parse_category(jf.at("category").get<std::string>());
            for (auto const& jv : jf.at("domain")) { f.domain.push_back(detail::json_value_string(jv)); }
            features.push_back(std::move(f));
        }
        auto index_of_feature = [&](std::string const& name, std::string const& where) {
            for (std::size_t i = 0; i < features.size(); ++i) {
                if (features[i].name == name) { return i; }
            }
            throw ConfigError(where + ": unknown feature '" + name + "'");
        };

        std::vector<ConstraintRule> rules;
        if (j.contains("constraints")) {
            std::size_t ri = 0;
            for (auto const& jr : j.at("constraints")) {
                std::string const where = "constraints[" + std::to_string(ri++) + "]";
                ConstraintRule r;
                auto const& when = jr.at("when");
                r.trigger_feature = index_of_feature(when.at("feature").get<std::string>(), where);
                for (auto const& jv : when.at("in")) {
                    r.trigger_values.push_back(detail::domain_index(features[r.trigger_feature], detail::json_value_string(jv), where));
                }
                for (auto const& je : jr.at("then")) {
                    ConstraintEffect e;
                    e.feature = index_of_feature(je.at("feature").get<std::string>(), where);
                    if (je.contains("force")) {
                        e.force = detail::domain_index(features[e.feature], detail::json_value_string(je.at("force")), where);
                    }
                    if (je.contains("restrict")) {
                        for (auto const& jv : je.at("restrict")) {
                            e.allowed.push_back(detail::domain_index(features[e.feature], detail::json_value_string(jv), where));
                        }
                        if (e.allowed.empty()) { throw ConfigError(where + ": empty restrict set"); }
                    }
                    if (!e.force && e.allowed.empty()) { throw ConfigError(where + ": effect needs 'force' or 'restrict'"); }
                    r.effects.push_back(std::move(e));
                }
                rules.push_back(std::move(r));
            }
        }
        return FeatureSpace(j.value("name", std::string{"unnamed"}), std::move(features), std::move(rules));
    } catch (nlohmann::json::exception const& e) {
        throw ConfigError(std::string("feature space: ") + e.what());
    }
}

inline nlohmann::json to_json(FeatureSpace const& space) {
    nlohmann::json j;
    j["name"] = space.name();
    j["features"] = nlohmann::json::array();
    for (auto const& f : space.features()) {
        j["features"].push_back({{"name", f.name}, {"kind", to_string(f.kind)}, {"category", to_string(f.category)}, {"domain", f.domain}});
    }
    j["constraints"] = nlohmann::json::array();
    for (auto const& r : space.rules()) {
        auto const& tf = space.feature(r.trigger_feature);
        nlohmann::json in = nlohmann::json::array();
        for (auto v : r.trigger_values) { in.push_back(tf.domain[v]); }
        nlohmann::json then = nlohmann::json::array();
        for (auto const& e : r.effects) {
            auto const& target = space.feature(e.feature);
            nlohmann::json je{{"feature", target.name}};
            if (e.force) {
                je["force"] = target.domain[*e.force];
            } else {
                nlohmann::json allowed = nlohmann::json::array();
                for (auto a : e.allowed) { allowed.push_back(target.domain[a]); }
                je["restrict"] = allowed;
            }
            then.push_back(je);
        }
        j["constraints"].push_back({{"when", {{"feature", tf.name}, {"in", in}}}, {"then", then}});
    }
    return j;
}

inline FeatureSpace load_feature_space(std::string const& path) {
    std::ifstream in(path);
    if (!in) { throw ConfigError("cannot open feature space file '" + path + "'"); }
    nlohmann::json j;
    try {
        in >> j;
    } catch (nlohmann::json::exception const& e) {
        throw ConfigError("feature space file '" + path + "': " + e.what());
    }
    return feature_space_from_json(j);
}

}  // namespace featsearch
