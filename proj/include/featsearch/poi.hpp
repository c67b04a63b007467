// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The featsearch Authors

#pragma once

#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "featsearch/common.hpp"
#include "featsearch/feature_space.hpp"

// Structured venue records returned by navigation assistants, and the
// constraint-matching score computed against them.

namespace featsearch {

/// One venue record; a JSON object with typed fields (rating: real,
/// price_level: integer, everything else text).
struct Poi {
    nlohmann::json fields = nlohmann::json::object();

    std::optional<std::string> text(std::string const& field) const {
        auto it = fields.find(field);
        if (it == fields.end() || it->is_null()) { return std::nullopt; }
        if (it->is_string()) { return it->get<std::string>(); }
        if (it->is_boolean()) { return it->get<bool>() ? "yes" : "no"; }
        if (it->is_number_integer()) { return std::to_string(it->get<long long>()); }
        if (it->is_number()) {
            std::ostringstream os;
            os << it->get<double>();
            return os.str();
        }
        return std::nullopt;
    }

    std::optional<double> number(std::string const& field) const {
        auto it = fields.find(field);
        if (it == fields.end()) { return std::nullopt; }
        if (it->is_number()) { return it->get<double>(); }
        if (it->is_string()) {
            double d = 0.0;
            if (parse_double(it->get<std::string>(), d)) { return d; }
        }
        return std::nullopt;
    }

    bool operator==(Poi const&) const = default;
};

enum class MatchKind {
    categorical,  // 0 if equal else 1
    ordinal,      // |index difference| / (|D| - 1)
    minimum,      // 0 when the record meets the requested floor, normalized shortfall otherwise
    text,         // 1 - cosine of embeddings
};

inline MatchKind parse_match_kind(std::string_view s) {
    if (s == "categorical") { return MatchKind::categorical; }
    if (s == "ordinal") { return MatchKind::ordinal; }
    if (s == "minimum") { return MatchKind::minimum; }
    if (s == "text") { return MatchKind::text; }
    throw ConfigError("unknown match kind '" + std::string(s) + "'");
}

inline std::string to_string(MatchKind k) {
    switch (k) {
        case MatchKind::categorical: return "categorical";
        case MatchKind::ordinal: return "ordinal";
        case MatchKind::minimum: return "minimum";
        case MatchKind::text: return "text";
    }
    return "?";
}

/// How one content feature is checked against a POI field.
struct PoiConstraint {
    std::string feature;
    std::string field;
    MatchKind kind = MatchKind::categorical;
    double weight = 1.0;
    /// Feature values meaning "no requirement"; such constraints are not checked.
    std::vector<std::string> unconstrained{"none"};
    /// The POI stores the domain index as an integer (e.g. price_level).
    bool field_is_index = false;
};

/// A requirement extracted from a feature vector.
struct RequestedConstraint {
    PoiConstraint spec;
    std::size_t feature = 0;  // index in the space
    std::size_t value = 0;    // domain index
};

/// Embeds free text for MatchKind::text constraints.
using TextEmbedFn = std::function<std::vector<double>(std::string const&)>;

inline std::vector<RequestedConstraint> extract_constraints(FeatureSpace const& space, FeatureVector const& v,
                                                            std::vector<PoiConstraint> const& specs) {
    std::vector<RequestedConstraint> out;
    for (auto const& spec : specs) {
        std::size_t const fi = space.require_feature(spec.feature);
        std::string const& value = space.value(v, fi);
        if (std::find(spec.unconstrained.begin(), spec.unconstrained.end(), value) != spec.unconstrained.end()) { continue; }
        out.push_back(RequestedConstraint{spec, fi, v[fi]});
    }
    return out;
}

namespace detail {

inline std::optional<double> numeric_domain_value(FeatureDef const& f, std::size_t i) {
    double d = 0.0;
    if (parse_double(f.domain[i], d)) { return d; }
    return std::nullopt;
}

inline std::optional<std::pair<double, double>> numeric_domain_span(FeatureDef const& f) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t i = 0; i < f.size(); ++i) {
        auto d = numeric_domain_value(f, i);
        if (!d) { return std::nullopt; }
        lo = std::min(lo, *d);
        hi = std::max(hi, *d);
    }
    return std::make_pair(lo, hi);
}

// Position of the POI's value on the feature's scale, as a domain index when
// possible.
inline std::optional<double> poi_position(FeatureDef const& f, PoiConstraint const& spec, Poi const& poi) {
    if (spec.field_is_index) { return poi.number(spec.field); }
    if (auto t = poi.text(spec.field)) {
        if (auto idx = f.index_of(*t)) { return static_cast<double>(*idx); }
    }
    return std::nullopt;
}

}  // namespace detail

/// dist(in.c, poi.c) in [0, 1]. A missing field is maximally distant.
inline double constraint_distance(FeatureSpace const& space, RequestedConstraint const& rc, Poi const& poi,
                                  TextEmbedFn const& embed = {}) {
    FeatureDef const& f = space.feature(rc.feature);
    std::string const& requested = f.domain[rc.value];
    auto const& spec = rc.spec;
    switch (spec.kind) {
        case MatchKind::categorical: {
            auto t = poi.text(spec.field);
            return (t && to_lower(*t) == to_lower(requested)) ? 0.0 : 1.0;
        }
        case MatchKind::ordinal:
        case MatchKind::minimum: {
            double const denom = static_cast<double>(f.size() - 1);
            double diff = 0.0;  // requested minus offered, in domain-normalized units
            if (auto pos = detail::poi_position(f, spec, poi)) {
                diff = (static_cast<double>(rc.value) - *pos) / denom;
            } else {
                auto span = detail::numeric_domain_span(f);
                auto offered = poi.number(spec.field);
                if (!span || !offered || span->second <= span->first) { return 1.0; }
                diff = (*detail::numeric_domain_value(f, rc.value) - *offered) / (span->second - span->first);
            }
            if (spec.kind == MatchKind::minimum) { return std::clamp(diff, 0.0, 1.0); }
            return std::clamp(std::abs(diff), 0.0, 1.0);
        }
        case MatchKind::text: {
            auto t = poi.text(spec.field);
            if (!t) { return 1.0; }
            if (!embed) { throw UsageError("text constraint '" + spec.feature + "' needs an embedder"); }
            return std::clamp(1.0 - cosine(embed(requested), embed(*t)), 0.0, 1.0);
        }
    }
    return 1.0;
}

/// Weighted match of one POI, normalized by the total weight of the checked
/// constraints. With nothing to check every record matches fully.
inline double poi_match(FeatureSpace const& space, std::vector<RequestedConstraint> const& constraints, Poi const& poi,
                        TextEmbedFn const& embed = {}) {
    double num = 0.0;
    double den = 0.0;
    for (auto const& rc : constraints) {
        num += rc.spec.weight * (1.0 - constraint_distance(space, rc, poi, embed));
        den += rc.spec.weight;
    }
    return den > 0.0 ? num / den : 1.0;
}

/// Content fitness: 1 when nothing exists and nothing was returned, 0 when
/// something exists but nothing was returned, else the best POI's match.
inline double fitness_poi(FeatureSpace const& space, std::vector<RequestedConstraint> const& constraints, std::vector<Poi> const& returned,
                          bool poi_exists, TextEmbedFn const& embed = {}) {
    if (returned.empty()) { return poi_exists ? 0.0 : 1.0; }
    double best = 0.0;
    for (auto const& poi : returned) { best = std::max(best, poi_match(space, constraints, poi, embed)); }
    return best;
}

/// Ground-truth venue snapshot, scanned exhaustively.
class PoiDatabase {
public:
    PoiDatabase() = default;
    explicit PoiDatabase(std::vector<Poi> records) : records_{std::move(records)} {}

    std::vector<Poi> const& records() const noexcept { return records_; }
    bool empty() const noexcept { return records_.empty(); }

    /// Some record satisfies every requested constraint exactly.
    bool exists(FeatureSpace const& space, std::vector<RequestedConstraint> const& constraints, TextEmbedFn const& embed = {}) const {
        return std::any_of(records_.begin(), records_.end(), [&](Poi const& p) { return satisfies(space, constraints, p, embed); });
    }

    /// Records that satisfy every requested constraint, in file order.
    std::vector<Poi> matches(FeatureSpace const& space, std::vector<RequestedConstraint> const& constraints, TextEmbedFn const& embed = {}) const {
        std::vector<Poi> out;
        for (auto const& p : records_) {
            if (satisfies(space, constraints, p, embed)) { out.push_back(p); }
        }
        return out;
    }

    static bool satisfies(FeatureSpace const& space, std::vector<RequestedConstraint> const& constraints, Poi const& p,
                          TextEmbedFn const& embed = {}) {
        return std::all_of(constraints.begin(), constraints.end(),
                           [&](RequestedConstraint const& rc) { return constraint_distance(space, rc, p, embed) == 0.0; });
    }

    static PoiDatabase load(std::string const& path) {
        std::ifstream in(path);
        if (!in) { throw ConfigError("cannot open POI snapshot '" + path + "'"); }
        std::vector<Poi> records;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (trim(line).empty()) { continue; }
            try {
                auto j = nlohmann::json::parse(line);
                if (!j.is_object()) { throw ConfigError("not an object"); }
                records.push_back(Poi{std::move(j)});
            } catch (std::exception const& e) {
                throw ConfigError("POI snapshot '" + path + "' line " + std::to_string(lineno) + ": " + e.what());
            }
        }
        return PoiDatabase(std::move(records));
    }

private:
    std::vector<Poi> records_;
};

inline nlohmann::json to_json(PoiConstraint const& c) {
    return {{"feature", c.feature}, {"field", c.field}, {"kind", to_string(c.kind)}, {"weight", c.weight},
            {"unconstrained", c.unconstrained}, {"field_is_index", c.field_is_index}};
}

inline PoiConstraint poi_constraint_from_json(nlohmann::json const& j) {
    PoiConstraint c;
    c.feature = j.at("feature").get<std::string>();
    c.field = j.value("field", c.feature);
    c.kind = parse_match_kind(j.value("kind", std::string{"categorical"}));
    c.weight = j.value("weight", 1.0);
    if (j.contains("unconstrained")) { c.unconstrained = j.at("unconstrained").get<std::vector<std::string>>(); }
    c.field_is_index = j.value("field_is_index", false);
    if (!(c.weight > 0.0)) { throw ConfigError("constraint weight for '" + c.feature + "' must be positive"); }
    return c;
}

/// Default navigation constraint set: venue weighted 2, everything else 1.
inline std::vector<PoiConstraint> default_navigation_constraints() {
    return {
        {"venue", "category", MatchKind::categorical, 2.0, {"none"}, false},
        {"cuisine", "cuisine", MatchKind::categorical, 1.0, {"none"}, false},
        {"price", "price_level", MatchKind::ordinal, 1.0, {"none"}, true},
        {"rating", "rating", MatchKind::minimum, 1.0, {"none"}, false},
        {"payment", "payment", MatchKind::categorical, 1.0, {"none"}, false},
        {"parking", "parking", MatchKind::categorical, 1.0, {"none"}, false},
    };
}

}  // namespace featsearch
