#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "segtrain/error.hpp"
#include "segtrain/random.hpp"
#include "segtrain/ranking.hpp"
#include "segtrain/selection.hpp"

namespace segtrain {

struct Qrels {
    std::map<std::string, std::map<std::string, int>> grades;

    void set(std::string const &qid, std::string const &doc, int grade) { grades[qid][doc] = grade; }

    [[nodiscard]] int grade(std::string const &qid, std::string const &doc) const
    {
        auto q = grades.find(qid);
        if (q == grades.end()) {
            return 0;
        }
        auto d = q->second.find(doc);
        return d == q->second.end() ? 0 : d->second;
    }

    friend bool operator==(Qrels const &, Qrels const &) = default;
};

using Run = std::map<std::string, RankedList>;

using PerQuery = std::map<std::string, double>;

namespace detail {

inline void require_overlap(Run const &run, Qrels const &qrels)
{
    bool const any = std::any_of(qrels.grades.begin(), qrels.grades.end(),
                                 [&](auto const &q) { return run.count(q.first) != 0; });
    if (!any) {
        throw DataError("run and qrels share no queries");
    }
}

inline double mean_of(PerQuery const &values)
{
    double sum = 0.0;
    for (auto const &[q, v] : values) {
        sum += v;
    }
    return values.empty() ? 0.0 : sum / static_cast<double>(values.size());
}

} // namespace detail

/// Reciprocal rank of the first document with grade > 0 within `cutoff`, for every
/// query in the qrels (queries missing from the run score 0).
inline PerQuery mrr_per_query(Run const &run, Qrels const &qrels, std::size_t cutoff = 10)
{
    if (cutoff == 0) {
        throw UsageError("mrr: cutoff must be >= 1");
    }
    detail::require_overlap(run, qrels);
    PerQuery out;
    for (auto const &[qid, judged] : qrels.grades) {
        double rr = 0.0;
        if (auto it = run.find(qid); it != run.end()) {
            auto const &entries = it->second.entries;
            for (std::size_t i = 0; i < entries.size() && i < cutoff; ++i) {
                if (qrels.grade(qid, entries[i].doc_id) > 0) {
                    rr = 1.0 / static_cast<double>(i + 1);
                    break;
                }
            }
        }
        out[qid] = rr;
    }
    return out;
}

inline double mrr(Run const &run, Qrels const &qrels, std::size_t cutoff = 10)
{
    return detail::mean_of(mrr_per_query(run, qrels, cutoff));
}

/// Linear-gain NDCG with a log2(rank + 1) discount.
inline PerQuery ndcg_per_query(Run const &run, Qrels const &qrels, std::size_t k)
{
    if (k == 0) {
        throw UsageError("ndcg: k must be >= 1");
    }
    detail::require_overlap(run, qrels);
    PerQuery out;
    for (auto const &[qid, judged] : qrels.grades) {
        std::vector<int> ideal;
        for (auto const &[doc, g] : judged) {
            if (g > 0) {
                ideal.push_back(g);
            }
        }
        std::sort(ideal.begin(), ideal.end(), std::greater<>());
        double idcg = 0.0;
        for (std::size_t i = 0; i < ideal.size() && i < k; ++i) {
            idcg += ideal[i] / std::log2(static_cast<double>(i) + 2.0);
        }
        double dcg = 0.0;
        if (auto it = run.find(qid); it != run.end()) {
            auto const &entries = it->second.entries;
            for (std::size_t i = 0; i < entries.size() && i < k; ++i) {
                int const g = qrels.grade(qid, entries[i].doc_id);
                if (g > 0) {
                    dcg += g / std::log2(static_cast<double>(i) + 2.0);
                }
            }
        }
        out[qid] = idcg > 0.0 ? dcg / idcg : 0.0;
    }
    return out;
}

inline double ndcg_at_k(Run const &run, Qrels const &qrels, std::size_t k)
{
    return detail::mean_of(ndcg_per_query(run, qrels, k));
}

/// Fraction of gold pairs whose selected segment equals the gold segment.
inline double segment_p_at_1(SegmentIndexMap const &selection, GoldSegments const &gold)
{
    if (gold.empty()) {
        throw DataError("segment_p_at_1: empty gold set");
    }
    std::size_t hits = 0;
    for (auto const &[key, g] : gold) {
        auto it = selection.index.find(key);
        if (it == selection.index.end()) {
            throw DataError("segment_p_at_1: no selection for (" + key.first + ", " + key.second + ")");
        }
        hits += it->second == g ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(gold.size());
}

// ---------------------------------------------------------------------------
// Paired t-test
// ---------------------------------------------------------------------------

namespace detail {

/// Continued fraction for the regularized incomplete beta function (modified Lentz).
inline double beta_continued_fraction(double a, double b, double x)
{
    constexpr double tiny = 1e-300;
    constexpr double eps = 1e-15;
    double const qab = a + b;
    double const qap = a + 1.0;
    double const qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < tiny) {
        d = tiny;
    }
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 10000; ++m) {
        double const m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) {
            d = tiny;
        }
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) {
            c = tiny;
        }
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) {
            d = tiny;
        }
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) {
            c = tiny;
        }
        d = 1.0 / d;
        double const del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) {
            break;
        }
    }
    return h;
}

} // namespace detail

/// Regularized incomplete beta I_x(a, b).
inline double incomplete_beta(double a, double b, double x)
{
    if (x <= 0.0) {
        return 0.0;
    }
    if (x >= 1.0) {
        return 1.0;
    }
    double const log_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    double const front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * detail::beta_continued_fraction(a, b, x) / a;
    }
    return 1.0 - front * detail::beta_continued_fraction(b, a, 1.0 - x) / b;
}

/// Two-sided tail probability P(|T| >= |t|) for Student's t with `df` degrees of freedom.
inline double student_t_two_sided(double t, double df)
{
    return incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
}

struct TTestResult {
    double t = 0.0;
    double df = 0.0;
    double p_value = 1.0;
};

inline TTestResult paired_t_test_detail(std::span<double const> a, std::span<double const> b)
{
    if (a.size() != b.size()) {
        throw DataError("paired_t_test: length mismatch (" + std::to_string(a.size()) + " vs " +
                        std::to_string(b.size()) + ")");
    }
    if (a.size() < 2) {
        throw DataError("paired_t_test: need at least two pairs");
    }
    auto const n = static_cast<double>(a.size());
    std::vector<double> diff(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff[i] = a[i] - b[i];
    }
    double const mean = std::accumulate(diff.begin(), diff.end(), 0.0) / n;
    double ss = 0.0;
    for (double d : diff) {
        ss += (d - mean) * (d - mean);
    }
    TTestResult r;
    r.df = n - 1.0;
    if (ss == 0.0) {
        r.t = mean == 0.0 ? 0.0 : std::copysign(INFINITY, mean);
        r.p_value = mean == 0.0 ? 1.0 : 0.0;
        return r;
    }
    double const se = std::sqrt(ss / (n - 1.0) / n);
    r.t = mean / se;
    r.p_value = student_t_two_sided(r.t, r.df);
    return r;
}

/// Two-sided p-value of the paired t statistic.
inline double paired_t_test(std::span<double const> a, std::span<double const> b)
{
    return paired_t_test_detail(a, b).p_value;
}

// ---------------------------------------------------------------------------
// Cross-validation
// ---------------------------------------------------------------------------

struct Fold {
    std::vector<std::string> train;
    std::vector<std::string> test;
};

/// Seeded shuffle, then contiguous folds; the first (n mod k) folds get one extra query.
inline std::vector<Fold> kfold_split(std::vector<std::string> query_ids, std::size_t k, std::uint64_t seed)
{
    if (k < 2) {
        throw UsageError("kfold_split: k must be >= 2");
    }
    if (k > query_ids.size()) {
        throw UsageError("kfold_split: k=" + std::to_string(k) + " exceeds " + std::to_string(query_ids.size()) +
                         " queries");
    }
    Rng rng(seed);
    std::shuffle(query_ids.begin(), query_ids.end(), rng);
    std::size_t const base = query_ids.size() / k;
    std::size_t const extra = query_ids.size() % k;
    std::vector<Fold> folds(k);
    std::size_t pos = 0;
    for (std::size_t f = 0; f < k; ++f) {
        std::size_t const size = base + (f < extra ? 1 : 0);
        for (std::size_t i = 0; i < query_ids.size(); ++i) {
            if (i >= pos && i < pos + size) {
                folds[f].test.push_back(query_ids[i]);
            } else {
                folds[f].train.push_back(query_ids[i]);
            }
        }
        pos += size;
    }
    return folds;
}

} // namespace segtrain
