#pragma once

#include <algorithm>
#include <limits>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "segtrain/corpus.hpp"
#include "segtrain/error.hpp"
#include "segtrain/parallel.hpp"
#include "segtrain/scorer.hpp"

namespace segtrain {

enum class Aggregation { first_p, max_p };

inline Aggregation parse_aggregation(std::string_view s)
{
    if (s == "firstp" || s == "first_p") {
        return Aggregation::first_p;
    }
    if (s == "maxp" || s == "max_p") {
        return Aggregation::max_p;
    }
    throw UsageError("unknown aggregation '" + std::string(s) + "'");
}

struct RankedEntry {
    std::string doc_id;
    double score = 0.0;
    std::size_t rank = 0;

    friend bool operator==(RankedEntry const &, RankedEntry const &) = default;
};

struct RankedList {
    std::string query_id;
    std::vector<RankedEntry> entries;

    friend bool operator==(RankedList const &, RankedList const &) = default;
};

/// Sorts by score descending, doc id ascending, and assigns ranks from 1.
inline RankedList rank_by_score(std::string query_id, std::vector<std::pair<std::string, double>> scored)
{
    std::set<std::string_view> ids;
    for (auto const &[doc, s] : scored) {
        if (!ids.insert(doc).second) {
            throw DataError("duplicate candidate '" + doc + "' for query " + query_id);
        }
    }
    std::sort(scored.begin(), scored.end(), [](auto const &a, auto const &b) {
        if (a.second != b.second) {
            return a.second > b.second;
        }
        return a.first < b.first;
    });
    RankedList list{std::move(query_id), {}};
    list.entries.reserve(scored.size());
    for (std::size_t i = 0; i < scored.size(); ++i) {
        list.entries.push_back({std::move(scored[i].first), scored[i].second, i + 1});
    }
    return list;
}

/// Document score from precomputed per-segment features.
inline double aggregate_segment_scores(ScorerParams const &params, std::span<FeatureVector const> segments,
                                       Aggregation agg)
{
    if (segments.empty()) {
        throw DataError("document has no segments");
    }
    if (agg == Aggregation::first_p) {
        return score(params, segments.front());
    }
    double best = -std::numeric_limits<double>::infinity();
    for (auto const &x : segments) {
        best = std::max(best, score(params, x));
    }
    return best;
}

inline std::vector<FeatureVector> inference_features(Query const &query, Document const &doc,
                                                     CorpusStats const &stats)
{
    std::vector<FeatureVector> out;
    for (auto const &seg : segment_for_inference(doc, stats.max_tokens)) {
        out.push_back(extract_features(query, seg, stats));
    }
    return out;
}

/// first_p scores segment 0; max_p takes the maximum over all inference segments.
inline double score_document(ScorerParams const &params, Query const &query, Document const &doc, Aggregation agg,
                             CorpusStats const &stats)
{
    auto const features = inference_features(query, doc, stats);
    return aggregate_segment_scores(params, features, agg);
}

inline RankedList rerank(ScorerParams const &params, Query const &query, std::span<Document const> candidates,
                         Aggregation agg, CorpusStats const &stats, std::size_t threads = 1)
{
    if (candidates.empty()) {
        throw DataError("rerank: no candidates for query " + query.id);
    }
    std::vector<std::pair<std::string, double>> scored(candidates.size());
    parallel_for(candidates.size(), threads, [&](std::size_t i) {
        scored[i] = {candidates[i].id, score_document(params, query, candidates[i], agg, stats)};
    });
    return rank_by_score(query.id, std::move(scored));
}

} // namespace segtrain
