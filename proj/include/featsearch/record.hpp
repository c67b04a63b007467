// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The featsearch Authors

#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "featsearch/common.hpp"
#include "featsearch/feature_space.hpp"
#include "featsearch/poi.hpp"

// One evaluated test case and the line-delimited archive that stores them.

namespace featsearch {

enum class Verdict { pass, fail, excluded, pending };
enum class Exclusion { none, duplicate, invalid, no_poi_exists };

inline std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::pass: return "PASS";
        case Verdict::fail: return "FAIL";
        case Verdict::excluded: return "EXCLUDED";
        case Verdict::pending: return "PENDING";
    }
    return "?";
}

inline Verdict parse_verdict(std::string_view s) {
    if (s == "PASS") { return Verdict::pass; }
    if (s == "FAIL") { return Verdict::fail; }
    if (s == "EXCLUDED") { return Verdict::excluded; }
    if (s == "PENDING") { return Verdict::pending; }
    throw ConfigError("unknown verdict '" + std::string(s) + "'");
}

inline std::string to_string(Exclusion e) {
    switch (e) {
        case Exclusion::none: return "none";
        case Exclusion::duplicate: return "duplicate";
        case Exclusion::invalid: return "invalid";
        case Exclusion::no_poi_exists: return "no_poi_exists";
    }
    return "?";
}

inline Exclusion parse_exclusion(std::string_view s) {
    if (s == "none") { return Exclusion::none; }
    if (s == "duplicate") { return Exclusion::duplicate; }
    if (s == "invalid") { return Exclusion::invalid; }
    if (s == "no_poi_exists") { return Exclusion::no_poi_exists; }
    throw ConfigError("unknown exclusion '" + std::string(s) + "'");
}

struct TestRecord {
    std::uint64_t id = 0;
    std::size_t generation = 0;
    std::string method;
    EncodedVector encoded;
    FeatureVector values;
    std::string utterance;
    std::string generator_model;
    std::string prompt_digest;
    std::string output;
    std::vector<Poi> pois;
    std::vector<double> fitness;  // measured objectives; empty when the AUT was never run
    Verdict verdict = Verdict::pending;
    Exclusion exclusion = Exclusion::none;
    std::optional<bool> poi_exists;
    std::vector<std::string> flags;
    std::vector<double> embedding;  // utterance embedding; persisted for failures only
    double wall_ms = 0.0;
    std::int64_t timestamp_ms = 0;

    bool excluded() const noexcept { return verdict == Verdict::excluded; }
    bool failed() const noexcept { return verdict == Verdict::fail; }

    /// What the search sees: measured fitness, or all-worst (1.0) for
    /// excluded and invalid records.
    std::vector<double> search_fitness(std::size_t m) const {
        if (excluded() || fitness.size() != m) { return std::vector<double>(m, 1.0); }
        return fitness;
    }

    void flag(std::string f) {
        if (std::find(flags.begin(), flags.end(), f) == flags.end()) { flags.push_back(std::move(f)); }
    }
};

inline std::string output_digest(std::string const& text) { return hex64(fnv1a(text)); }

inline nlohmann::json to_json(TestRecord const& r, FeatureSpace const& space) {
    nlohmann::json values = nlohmann::json::object();
    for (std::size_t i = 0; i < r.values.size(); ++i) { values[space.feature(i).name] = space.value(r.values, i); }
    nlohmann::json pois = nlohmann::json::array();
    for (auto const& p : r.pois) { pois.push_back(p.fields); }
    nlohmann::json j{
        {"id", r.id},
        {"generation", r.generation},
        {"method", r.method},
        {"encoded", r.encoded.coords},
        {"values", values},
        {"utterance", r.utterance},
        {"generator_model", r.generator_model},
        {"prompt_digest", r.prompt_digest},
        {"output", r.output},
        {"output_digest", output_digest(r.output)},
        {"pois", pois},
        {"fitness", r.fitness},
        {"verdict", to_string(r.verdict)},
        {"exclusion", to_string(r.exclusion)},
        {"poi_exists", r.poi_exists ? nlohmann::json(*r.poi_exists) : nlohmann::json(nullptr)},
        {"flags", r.flags},
        {"wall_ms", r.wall_ms},
        {"timestamp_ms", r.timestamp_ms},
    };
    if (r.failed() && !r.embedding.empty()) { j["embedding"] = r.embedding; }
    return j;
}

inline TestRecord record_from_json(nlohmann::json const& j, FeatureSpace const& space) {
    TestRecord r;
    r.id = j.at("id").get<std::uint64_t>();
    r.generation = j.at("generation").get<std::size_t>();
    r.method = j.at("method").get<std::string>();
    r.encoded.coords = j.at("encoded").get<std::vector<double>>();
    std::vector<std::string> vals;
    for (auto const& f : space.features()) { vals.push_back(j.at("values").at(f.name).get<std::string>()); }
    r.values = space.make_vector(vals);
    r.utterance = j.at("utterance").get<std::string>();
    r.generator_model = j.value("generator_model", std::string{});
    r.prompt_digest = j.value("prompt_digest", std::string{});
    r.output = j.at("output").get<std::string>();
    for (auto const& p : j.at("pois")) { r.pois.push_back(Poi{p}); }
    r.fitness = j.at("fitness").get<std::vector<double>>();
    r.verdict = parse_verdict(j.at("verdict").get<std::string>());
    r.exclusion = parse_exclusion(j.at("exclusion").get<std::string>());
    if (j.contains("poi_exists") && !j["poi_exists"].is_null()) { r.poi_exists = j["poi_exists"].get<bool>(); }
    r.flags = j.at("flags").get<std::vector<std::string>>();
    if (j.contains("embedding")) { r.embedding = j["embedding"].get<std::vector<double>>(); }
    r.wall_ms = j.value("wall_ms", 0.0);
    r.timestamp_ms = j.value("timestamp_ms", std::int64_t{0});
    return r;
}

// Archive ------------------------------------------------------------------

inline constexpr int archive_version = 1;

struct ArchiveInfo {
    std::string method;
    std::uint64_t seed = 0;
    std::vector<std::string> objectives;
    std::string clock = "logical";
    nlohmann::json space;  // full feature-space definition
};

class Archive {
public:
    Archive(FeatureSpace space, ArchiveInfo info) : space_{std::move(space)}, info_{std::move(info)} {
        if (info_.space.is_null()) { info_.space = to_json(space_); }
    }

    FeatureSpace const& space() const noexcept { return space_; }
    ArchiveInfo const& info() const noexcept { return info_; }
    std::vector<TestRecord> const& records() const noexcept { return records_; }
    std::vector<TestRecord>& records() noexcept { return records_; }
    std::size_t size() const noexcept { return records_.size(); }

    void append(TestRecord r) {
        if (!records_.empty() && r.id <= records_.back().id) {
            throw UsageError("archive ids must grow (" + std::to_string(r.id) + " after " + std::to_string(records_.back().id) + ")");
        }
        records_.push_back(std::move(r));
    }

    nlohmann::json header() const {
        return {{"schema", "featsearch.archive"}, {"version", archive_version},   {"method", info_.method}, {"seed", info_.seed},
                {"objectives", info_.objectives}, {"clock", info_.clock}, {"space", info_.space}};
    }

    void write(std::ostream& os) const {
        os << header().dump() << '\n';
        for (auto const& r : records_) { os << to_json(r, space_).dump() << '\n'; }
    }

    void save(std::string const& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) { throw ConfigError("cannot write archive '" + path + "'"); }
        write(out);
    }

    /// Only the failing records, same format.
    void save_failures(std::string const& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) { throw ConfigError("cannot write failures '" + path + "'"); }
        out << header().dump() << '\n';
        for (auto const& r : records_) {
            if (r.failed()) { out << to_json(r, space_).dump() << '\n'; }
        }
    }

    static Archive load(std::string const& path) {
        std::ifstream in(path);
        if (!in) { throw ConfigError("cannot open archive '" + path + "'"); }
        std::string line;
        if (!std::getline(in, line)) { throw ConfigError("archive '" + path + "' is empty"); }
        nlohmann::json h;
        try {
            h = nlohmann::json::parse(line);
        } catch (nlohmann::json::exception const& e) {
            throw ConfigError("archive '" + path + "' header: " + e.what());
        }
        if (h.value("schema", std::string{}) != "featsearch.archive") { throw ConfigError("'" + path + "' is not a featsearch archive"); }
        int const version = h.value("version", 0);
        if (version != archive_version) {
            throw ConfigError("archive '" + path + "' has schema version " + std::to_string(version) + ", expected " + std::to_string(archive_version));
        }
        ArchiveInfo info;
        info.method = h.at("method").get<std::string>();
        info.seed = h.at("seed").get<std::uint64_t>();
        info.objectives = h.at("objectives").get<std::vector<std::string>>();
        info.clock = h.value("clock", std::string{"logical"});
        info.space = h.at("space");
        Archive a(feature_space_from_json(info.space), info);
        std::size_t lineno = 1;
        while (std::getline(in, line)) {
            ++lineno;
            if (trim(line).empty()) { continue; }
            try {
                a.append(record_from_json(nlohmann::json::parse(line), a.space()));
            } catch (std::exception const& e) {
                throw ConfigError("archive '" + path + "' line " + std::to_string(lineno) + ": " + e.what());
            }
        }
        return a;
    }

private:
    FeatureSpace space_;
    ArchiveInfo info_;
    std::vector<TestRecord> records_;
};

}  // namespace featsearch
