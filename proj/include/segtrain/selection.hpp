#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <utility>

namespace segtrain {

/// (query id, document id)
using QueryDocKey = std::pair<std::string, std::string>;

/// Selected segment index per query-document pair, with the selecting score when
/// the map came from a scorer.
struct SegmentIndexMap {
    std::map<QueryDocKey, std::size_t> index;
    std::map<QueryDocKey, double> score;

    void set(QueryDocKey const &key, std::size_t i, double s = 0.0)
    {
        index[key] = i;
        score[key] = s;
    }

    [[nodiscard]] std::size_t size() const noexcept { return index.size(); }

    friend bool operator==(SegmentIndexMap const &, SegmentIndexMap const &) = default;
};

/// Ground-truth segment index per relevant query-document pair.
using GoldSegments = std::map<QueryDocKey, std::size_t>;

} // namespace segtrain
