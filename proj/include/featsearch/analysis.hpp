// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The featsearch Authors

#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "featsearch/common.hpp"
#include "featsearch/record.hpp"

// Metrics over archives: failures over budget, failure ratio, and cluster
// coverage of the pooled failure embeddings.

namespace featsearch {

// Failure counts -----------------------------------------------------------

struct SeriesPoint {
    std::size_t evaluations = 0;  // tests consumed so far, excluded ones included
    std::size_t failures = 0;     // cumulative counted failures
    std::int64_t timestamp_ms = 0;
};

/// One point per archived record, in id order.
inline std::vector<SeriesPoint> failures_over_budget(std::vector<TestRecord> const& records) {
    std::vector<SeriesPoint> out;
    out.reserve(records.size());
    std::size_t fails = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].failed()) { ++fails; }
        out.push_back({i + 1, fails, records[i].timestamp_ms});
    }
    return out;
}

inline std::size_t failure_count(std::vector<TestRecord> const& records) {
    return static_cast<std::size_t>(std::count_if(records.begin(), records.end(), [](TestRecord const& r) { return r.failed(); }));
}

/// Failures over non-excluded tests; absent when every test was excluded.
inline std::optional<double> failure_ratio(std::vector<TestRecord> const& records) {
    std::size_t counted = 0;
    std::size_t fails = 0;
    for (auto const& r : records) {
        if (r.excluded()) { continue; }
        ++counted;
        if (r.failed()) { ++fails; }
    }
    if (counted == 0) { return std::nullopt; }
    return static_cast<double>(fails) / static_cast<double>(counted);
}

// Clustering ---------------------------------------------------------------

using Points = std::vector<std::vector<double>>;

struct KMeansResult {
    std::vector<std::size_t> labels;
    Points centroids;
    double inertia = 0.0;
    std::size_t iterations = 0;
};

/// Lloyd's k-means with seeded furthest-point initialisation: a random first
/// centre, then repeatedly the point furthest from all chosen centres (lowest
/// index on ties). Empty clusters are re-seeded with the worst-fit point.
inline KMeansResult kmeans(Points const& pts, std::size_t k, std::uint64_t seed, std::size_t max_iter = 100) {
    if (pts.empty()) { throw UsageError("kmeans: no points"); }
    if (k == 0 || k > pts.size()) { throw UsageError("kmeans: k must be in [1, N]"); }
    std::size_t const n = pts.size();
    Rng rng(seed);
    KMeansResult res;
    res.centroids.push_back(pts[rng.below(n)]);
    std::vector<double> mind(n, std::numeric_limits<double>::infinity());
    while (res.centroids.size() < k) {
        std::size_t far = 0;
        double fd = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
            mind[i] = std::min(mind[i], squared_distance(pts[i], res.centroids.back()));
            if (mind[i] > fd) {
                fd = mind[i];
                far = i;
            }
        }
        res.centroids.push_back(pts[far]);
    }
    res.labels.assign(n, 0);
    for (res.iterations = 0; res.iterations < max_iter; ++res.iterations) {
        bool changed = res.iterations == 0;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t best = 0;
            double bd = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c) {
                double const d = squared_distance(pts[i], res.centroids[c]);
                if (d < bd) {
                    bd = d;
                    best = c;
                }
            }
            if (res.labels[i] != best) {
                res.labels[i] = best;
                changed = true;
            }
        }
        std::vector<std::size_t> count(k, 0);
        Points sum(k, std::vector<double>(pts[0].size(), 0.0));
        for (std::size_t i = 0; i < n; ++i) {
            ++count[res.labels[i]];
            for (std::size_t d = 0; d < pts[i].size(); ++d) { sum[res.labels[i]][d] += pts[i][d]; }
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (count[c] == 0) {
                std::size_t worst = 0;
                double wd = -1.0;
                for (std::size_t i = 0; i < n; ++i) {
                    double const d = squared_distance(pts[i], res.centroids[res.labels[i]]);
                    if (count[res.labels[i]] > 1 && d > wd) {
                        wd = d;
                        worst = i;
                    }
                }
                --count[res.labels[worst]];
                res.labels[worst] = c;
                count[c] = 1;
                res.centroids[c] = pts[worst];
                changed = true;
                continue;
            }
            for (auto& x : sum[c]) { x /= static_cast<double>(count[c]); }
            res.centroids[c] = sum[c];
        }
        if (!changed) { break; }
    }
    res.inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) { res.inertia += squared_distance(pts[i], res.centroids[res.labels[i]]); }
    return res;
}

/// Mean silhouette with Euclidean distance; points in singleton clusters
/// score 0.
inline double silhouette(Points const& pts, std::vector<std::size_t> const& labels, std::size_t k) {
    std::size_t const n = pts.size();
    if (n < 2 || k < 2) { return 0.0; }
    std::vector<std::size_t> size(k, 0);
    for (auto l : labels) { ++size[l]; }
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> sum(k, 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) { sum[labels[j]] += std::sqrt(squared_distance(pts[i], pts[j])); }
        }
        std::size_t const own = labels[i];
        if (size[own] <= 1) { continue; }
        double const a = sum[own] / static_cast<double>(size[own] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c) {
            if (c != own && size[c] > 0) { b = std::min(b, sum[c] / static_cast<double>(size[c])); }
        }
        double const den = std::max(a, b);
        if (den > 0.0 && std::isfinite(b)) { total += (b - a) / den; }
    }
    return total / static_cast<double>(n);
}

struct KSelection {
    std::size_t k = 1;
    double score = 0.0;
    std::vector<std::size_t> labels;
    std::vector<std::pair<std::size_t, double>> scanned;  // (k, silhouette)
};

inline std::size_t distinct_points(Points const& pts) { return std::set<std::vector<double>>(pts.begin(), pts.end()).size(); }

/// k with the highest mean silhouette over [k_min, k_max] (lowest k on ties).
/// Fewer than three points, or fewer than two distinct ones, give k = 1.
inline KSelection select_k(Points const& pts, std::size_t k_min, std::size_t k_max, std::uint64_t seed) {
    KSelection sel;
    sel.labels.assign(pts.size(), 0);
    std::size_t const distinct = distinct_points(pts);
    k_max = std::min({k_max, pts.size() >= 1 ? pts.size() - 1 : 0, distinct});
    if (pts.size() < 3 || distinct < 2 || k_max < k_min) { return sel; }
    bool first = true;
    for (std::size_t k = k_min; k <= k_max; ++k) {
        auto km = kmeans(pts, k, derive_seed(seed, "k", k));
        double const s = silhouette(pts, km.labels, k);
        sel.scanned.emplace_back(k, s);
        if (first || s > sel.score) {
            sel.k = k;
            sel.score = s;
            sel.labels = km.labels;
            first = false;
        }
    }
    return sel;
}

struct LabelledFailure {
    std::string method;
    std::vector<double> embedding;
};

struct DiversityReport {
    std::size_t repeats = 0;
    std::size_t pooled = 0;
    std::vector<std::size_t> k;                             // chosen k per repeat
    std::map<std::string, std::vector<double>> coverage;    // per method, per repeat
    std::map<std::string, double> mean_coverage;

    nlohmann::json to_json() const {
        nlohmann::json cov = nlohmann::json::object();
        nlohmann::json mean = nlohmann::json::object();
        for (auto const& [m, xs] : coverage) {
            nlohmann::json arr = nlohmann::json::array();
            for (double x : xs) { arr.push_back(std::stod(fixed(x, 6))); }
            cov[m] = arr;
        }
        for (auto const& [m, x] : mean_coverage) { mean[m] = std::stod(fixed(x, 6)); }
        return {{"repeats", repeats}, {"pooled_failures", pooled}, {"k", k}, {"coverage", cov}, {"mean_coverage", mean}};
    }
};

/// Clusters the pooled failure embeddings `repeats` times (seed derived per
/// repeat) and reports, per method, the fraction of clusters holding at least
/// one of its failures. `methods` lists every method to report, including
/// those without failures.
inline DiversityReport diversity_coverage(std::vector<LabelledFailure> const& failures, std::vector<std::string> const& methods,
                                          std::size_t repeats = 10, std::uint64_t seed = 0, std::size_t k_cap = 10) {
    if (repeats == 0) { throw UsageError("diversity_coverage: repeats must be positive"); }
    DiversityReport rep;
    rep.repeats = repeats;
    rep.pooled = failures.size();
    Points pts;
    for (auto const& f : failures) {
        if (f.embedding.empty()) { throw UsageError("diversity_coverage: failure without embedding (method " + f.method + ")"); }
        pts.push_back(f.embedding);
    }
    std::set<std::string> all(methods.begin(), methods.end());
    for (auto const& f : failures) { all.insert(f.method); }
    for (auto const& m : all) { rep.coverage[m] = {}; }
    for (std::size_t r = 0; r < repeats; ++r) {
        KSelection sel = select_k(pts, 2, k_cap, derive_seed(seed, "diversity", r));
        rep.k.push_back(sel.k);
        std::map<std::string, std::set<std::size_t>> hit;
        for (std::size_t i = 0; i < failures.size(); ++i) { hit[failures[i].method].insert(sel.labels[i]); }
        for (auto const& m : all) {
            double const c = static_cast<double>(hit[m].size()) / static_cast<double>(sel.k);
            rep.coverage[m].push_back(c);
        }
    }
    for (auto const& [m, xs] : rep.coverage) {
        double s = 0.0;
        for (double x : xs) { s += x; }
        rep.mean_coverage[m] = s / static_cast<double>(xs.size());
    }
    return rep;
}

// Reports ------------------------------------------------------------------

struct LabelledArchive {
    std::string label;
    Archive const* archive = nullptr;
};

struct ReportSettings {
    std::size_t repeats = 10;
    std::uint64_t seed = 0;
    std::size_t k_cap = 10;
};

struct ReportRow {
    std::string label;
    std::string method;
    std::uint64_t seed = 0;
    std::size_t tests = 0;
    std::size_t excluded = 0;
    std::size_t duplicates = 0;
    std::size_t invalid = 0;
    std::size_t no_poi = 0;
    std::size_t failures = 0;
    std::optional<double> ratio;
    std::vector<std::string> objectives;
    std::vector<double> mean_fitness;
};

inline ReportRow summarize(std::string label, Archive const& a) {
    ReportRow row;
    row.label = std::move(label);
    row.method = a.info().method;
    row.seed = a.info().seed;
    row.objectives = a.info().objectives;
    row.tests = a.size();
    std::vector<double> sum(row.objectives.size(), 0.0);
    std::size_t measured = 0;
    for (auto const& r : a.records()) {
        if (r.excluded()) {
            ++row.excluded;
            row.duplicates += r.exclusion == Exclusion::duplicate;
            row.invalid += r.exclusion == Exclusion::invalid;
            row.no_poi += r.exclusion == Exclusion::no_poi_exists;
            continue;
        }
        if (r.failed()) { ++row.failures; }
        if (r.fitness.size() == sum.size()) {
            ++measured;
            for (std::size_t i = 0; i < sum.size(); ++i) { sum[i] += r.fitness[i]; }
        }
    }
    row.ratio = failure_ratio(a.records());
    for (auto& s : sum) { row.mean_fitness.push_back(measured ? s / static_cast<double>(measured) : 0.0); }
    return row;
}

inline std::string join(std::vector<std::string> const& xs, char sep) {
    std::string out;
    for (auto const& x : xs) {
        if (!out.empty()) { out += sep; }
        out += x;
    }
    return out;
}

inline std::string summary_csv(std::vector<ReportRow> const& rows) {
    std::ostringstream os;
    os << "label,method,seed,tests,excluded,duplicates,invalid,no_poi_exists,counted,failures,failure_ratio,objectives,mean_fitness\n";
    for (auto const& r : rows) {
        std::vector<std::string> mf;
        for (double x : r.mean_fitness) { mf.push_back(fixed(x, 6)); }
        os << r.label << ',' << r.method << ',' << r.seed << ',' << r.tests << ',' << r.excluded << ',' << r.duplicates << ',' << r.invalid << ','
           << r.no_poi << ',' << (r.tests - r.excluded) << ',' << r.failures << ',' << (r.ratio ? fixed(*r.ratio, 6) : std::string("NA")) << ','
           << join(r.objectives, '|') << ',' << join(mf, '|') << '\n';
    }
    return os.str();
}

inline std::string timeseries_csv(std::vector<SeriesPoint> const& series) {
    std::ostringstream os;
    os << "evaluations,failures,timestamp_ms\n";
    for (auto const& p : series) { os << p.evaluations << ',' << p.failures << ',' << p.timestamp_ms << '\n'; }
    return os.str();
}

inline void write_file(std::filesystem::path const& path, std::string const& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) { throw ConfigError("cannot write '" + path.string() + "'"); }
    out << content;
}

/// Labels unique across the set: the method name, then "_s<seed>", then "_<n>".
inline std::vector<std::string> unique_labels(std::vector<Archive const*> const& archives) {
    std::map<std::string, std::size_t> count;
    for (auto const* a : archives) { ++count[a->info().method]; }
    std::vector<std::string> out;
    std::set<std::string> used;
    for (auto const* a : archives) {
        std::string l = a->info().method;
        if (count[l] > 1) { l += "_s" + std::to_string(a->info().seed); }
        std::string base = l;
        for (std::size_t n = 2; used.count(l) != 0; ++n) { l = base + "_" + std::to_string(n); }
        used.insert(l);
        out.push_back(l);
    }
    return out;
}

struct ReportFiles {
    std::filesystem::path summary;
    std::vector<std::filesystem::path> timeseries;
    std::filesystem::path diversity;
    DiversityReport report;
    std::vector<ReportRow> rows;
};

/// Summary table, one time series per archive, and the diversity report over
/// all failures pooled by label.
inline ReportFiles emit_report(std::vector<LabelledArchive> const& archives, std::filesystem::path const& dir, ReportSettings const& settings = {}) {
    if (archives.empty()) { throw UsageError("emit_report: no archives"); }
    std::filesystem::create_directories(dir);
    ReportFiles files;
    std::vector<LabelledFailure> pooled;
    std::vector<std::string> labels;
    for (auto const& la : archives) {
        files.rows.push_back(summarize(la.label, *la.archive));
        labels.push_back(la.label);
        auto p = dir / ("timeseries_" + la.label + ".csv");
        write_file(p, timeseries_csv(failures_over_budget(la.archive->records())));
        files.timeseries.push_back(p);
        for (auto const& r : la.archive->records()) {
            if (r.failed() && !r.embedding.empty()) { pooled.push_back({la.label, r.embedding}); }
        }
    }
    files.summary = dir / "summary.csv";
    write_file(files.summary, summary_csv(files.rows));
    files.report = diversity_coverage(pooled, labels, settings.repeats, settings.seed, settings.k_cap);
    files.diversity = dir / "diversity.json";
    write_file(files.diversity, files.report.to_json().dump(2) + "\n");
    return files;
}

}  // namespace featsearch
