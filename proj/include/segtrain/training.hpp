#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <iterator>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "segtrain/corpus.hpp"
#include "segtrain/error.hpp"
#include "segtrain/eval.hpp"
#include "segtrain/parallel.hpp"
#include "segtrain/random.hpp"
#include "segtrain/ranking.hpp"
#include "segtrain/scorer.hpp"
#include "segtrain/selection.hpp"

namespace segtrain {

using DocumentStore = std::map<std::string, Document>;

/// Per (query, document) features of each segment, in segment order.
using FeatureTable = std::map<QueryDocKey, std::vector<FeatureVector>>;

struct TrainingTopic {
    Query query;
    std::vector<std::string> positives;
    std::vector<std::string> negatives;
};

struct TrainingSet {
    std::vector<TrainingTopic> topics;
    std::map<std::string, std::vector<Segment>> segments; // training segmentation per document
    FeatureTable features;

    [[nodiscard]] std::vector<FeatureVector> const &features_of(std::string const &qid, std::string const &doc) const
    {
        auto it = features.find({qid, doc});
        if (it == features.end()) {
            throw DataError("no training segments for (" + qid + ", " + doc + ")");
        }
        return it->second;
    }
};

inline DocumentStore make_document_store(std::vector<Document> docs)
{
    DocumentStore store;
    for (auto &doc : docs) {
        std::string id = doc.id;
        if (!store.emplace(id, std::move(doc)).second) {
            throw DataError("duplicate document id '" + id + "'");
        }
    }
    return store;
}

/// Segments every referenced document with the training policy and caches the
/// features of every (query, document, segment) triple. Features do not depend on
/// the scorer parameters, so they are computed once.
inline TrainingSet build_training_set(std::vector<TrainingTopic> topics, DocumentStore const &docs,
                                      SegmentationPolicy const &policy, std::size_t query_token_budget,
                                      CorpusStats const &stats, std::size_t threads = 1)
{
    TrainingSet set;
    std::vector<std::pair<Query const *, std::string>> jobs;
    std::set<std::string> qids;
    for (auto const &topic : topics) {
        if (!qids.insert(topic.query.id).second) {
            throw DataError("duplicate training topic '" + topic.query.id + "'");
        }
        if (topic.positives.empty()) {
            throw DataError("topic " + topic.query.id + " has no positive documents");
        }
        std::set<std::string> pos(topic.positives.begin(), topic.positives.end());
        for (auto const &n : topic.negatives) {
            if (pos.count(n) != 0) {
                throw DataError("document " + n + " is both positive and negative for " + topic.query.id);
            }
        }
    }
    set.topics = std::move(topics);
    for (auto const &topic : set.topics) {
        for (auto const *list : {&topic.positives, &topic.negatives}) {
            for (auto const &d : *list) {
                auto doc = docs.find(d);
                if (doc == docs.end()) {
                    throw DataError("topic " + topic.query.id + " references unknown document '" + d + "'");
                }
                if (set.segments.count(d) == 0) {
                    set.segments.emplace(d, training_segments(doc->second, query_token_budget, policy));
                }
                jobs.emplace_back(&topic.query, d);
            }
        }
    }
    std::vector<std::vector<FeatureVector>> computed(jobs.size());
    parallel_for(jobs.size(), threads, [&](std::size_t i) {
        for (auto const &seg : set.segments.at(jobs[i].second)) {
            computed[i].push_back(extract_features(*jobs[i].first, seg, stats));
        }
    });
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        set.features[{jobs[i].first->id, jobs[i].second}] = std::move(computed[i]);
    }
    return set;
}

// ---------------------------------------------------------------------------
// Validation bundle
// ---------------------------------------------------------------------------

struct EvalBundle {
    std::vector<Query> queries;
    std::map<std::string, std::vector<std::string>> candidates;
    Qrels qrels;
    FeatureTable features; // inference segmentation
    std::size_t mrr_cutoff = 10;
};

inline EvalBundle build_eval_bundle(std::vector<Query> queries, std::map<std::string, std::vector<std::string>> candidates,
                                    Qrels qrels, DocumentStore const &docs, CorpusStats const &stats,
                                    std::size_t mrr_cutoff = 10, std::size_t threads = 1)
{
    EvalBundle bundle;
    bundle.queries = std::move(queries);
    bundle.candidates = std::move(candidates);
    bundle.qrels = std::move(qrels);
    bundle.mrr_cutoff = mrr_cutoff;
    std::vector<std::pair<Query const *, Document const *>> jobs;
    for (auto const &q : bundle.queries) {
        auto it = bundle.candidates.find(q.id);
        if (it == bundle.candidates.end()) {
            continue;
        }
        for (auto const &d : it->second) {
            auto doc = docs.find(d);
            if (doc == docs.end()) {
                throw DataError("candidate '" + d + "' for " + q.id + " is not in the corpus");
            }
            jobs.emplace_back(&q, &doc->second);
        }
    }
    std::vector<std::vector<FeatureVector>> computed(jobs.size());
    parallel_for(jobs.size(), threads,
                 [&](std::size_t i) { computed[i] = inference_features(*jobs[i].first, *jobs[i].second, stats); });
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        bundle.features[{jobs[i].first->id, jobs[i].second->id}] = std::move(computed[i]);
    }
    return bundle;
}

/// Ranks each bundle query's candidates from the cached inference features.
inline Run rank_bundle(ScorerParams const &params, EvalBundle const &bundle, Aggregation agg)
{
    Run run;
    for (auto const &q : bundle.queries) {
        auto it = bundle.candidates.find(q.id);
        if (it == bundle.candidates.end() || it->second.empty()) {
            continue;
        }
        std::vector<std::pair<std::string, double>> scored;
        scored.reserve(it->second.size());
        for (auto const &d : it->second) {
            scored.emplace_back(d, aggregate_segment_scores(params, bundle.features.at({q.id, d}), agg));
        }
        run.emplace(q.id, rank_by_score(q.id, std::move(scored)));
    }
    return run;
}

inline double validation_mrr(ScorerParams const &params, EvalBundle const &bundle)
{
    return mrr(rank_bundle(params, bundle, Aggregation::max_p), bundle.qrels, bundle.mrr_cutoff);
}

// ---------------------------------------------------------------------------
// Configuration and results
// ---------------------------------------------------------------------------

struct TrainConfig {
    LossKind loss = LossKind::pairwise_hinge;
    ScorerKind scorer = ScorerKind::linear;
    std::size_t hidden = default_hidden;
    double learning_rate = 0.05;
    std::size_t epochs = 20;
    std::size_t batch_size = 32;
    std::size_t patience_epochs = 3;
    std::size_t max_segments = 4; // k
    std::size_t negatives_per_positive = 0; // 0 = 1 for pairwise, 10 for pointwise
    std::size_t max_iterations = 4;
    std::size_t iteration_patience = 1;
    std::uint64_t seed = 0;
    std::size_t threads = 1;

    [[nodiscard]] std::size_t effective_negatives() const
    {
        if (negatives_per_positive != 0) {
            return negatives_per_positive;
        }
        return loss == LossKind::pairwise_hinge ? 1 : 10;
    }

    void validate() const
    {
        if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
            throw UsageError("learning_rate must be a finite non-negative number");
        }
        if (epochs == 0 || batch_size == 0 || max_segments == 0 || max_iterations == 0) {
            throw UsageError("epochs, batch_size, max_segments and max_iterations must be positive");
        }
    }
};

struct IterationState {
    std::size_t n = 0;
    ScorerParams params;
    SegmentIndexMap selection; // the map this iteration trained on
    double validation_metric = 0.0;
    std::size_t epochs_run = 0;
};

struct BestTrainResult {
    ScorerParams theta0;
    double theta0_metric = 0.0;
    std::vector<IterationState> history;
    std::size_t best_iteration = 0; // iteration number n of the best state (history[n - 1])

    [[nodiscard]] IterationState const &best() const { return history.at(best_iteration - 1); }
};

enum class SelectionSource { first, gold, scorer };

inline SelectionSource parse_selection_source(std::string_view s)
{
    if (s == "first") {
        return SelectionSource::first;
    }
    if (s == "gold") {
        return SelectionSource::gold;
    }
    if (s == "scorer" || s == "best") {
        return SelectionSource::scorer;
    }
    throw UsageError("unknown selection source '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Example construction
// ---------------------------------------------------------------------------

struct ExampleSet {
    std::vector<PairwiseExample> pairs;
    std::vector<PointwiseExample> points;
    std::size_t skipped_topics = 0;

    [[nodiscard]] std::size_t size() const noexcept { return pairs.size() + points.size(); }
};

/// Marks the bootstrap objective, in which every leading segment pair is used.
struct AllSegments {};

using TrainTarget = std::variant<AllSegments, SegmentIndexMap>;

namespace detail {

inline std::size_t selected_index(SegmentIndexMap const &selection, std::string const &qid, std::string const &doc)
{
    auto it = selection.index.find({qid, doc});
    if (it == selection.index.end()) {
        throw DataError("selection has no entry for (" + qid + ", " + doc + ")");
    }
    return it->second;
}

inline FeatureVector const &segment_features(TrainingSet const &set, std::string const &qid, std::string const &doc,
                                             std::size_t index)
{
    auto const &f = set.features_of(qid, doc);
    if (index >= f.size()) {
        throw DataError("selected segment " + std::to_string(index) + " out of range for (" + qid + ", " + doc +
                        ")");
    }
    return f[index];
}

inline std::vector<std::string> sample_negatives(std::vector<std::string> const &pool, std::size_t n, Rng &rng)
{
    std::vector<std::string> out;
    std::sample(pool.begin(), pool.end(), std::back_inserter(out), std::min(n, pool.size()), rng);
    return out;
}

/// Shared walk over topics: for every positive, draws up to `negs` negatives and
/// hands (topic, positive, sampled negatives) to `emit`.
template <typename Emit>
std::size_t for_each_sample(TrainingSet const &set, std::size_t negs, Rng &rng, Emit &&emit)
{
    std::size_t skipped = 0;
    for (auto const &topic : set.topics) {
        if (topic.negatives.empty()) {
            ++skipped;
            continue;
        }
        for (auto const &pos : topic.positives) {
            emit(topic, pos, sample_negatives(topic.negatives, negs, rng));
        }
    }
    return skipped;
}

} // namespace detail

/// Training examples under a fixed selection. Pairwise: one (d+, d-) pair per sampled
/// negative, each on its selected segment. Pointwise: the positive plus the sampled
/// negatives, each scored on its selected segment.
inline ExampleSet build_pairs(TrainingSet const &set, SegmentIndexMap const &selection, TrainConfig const &cfg,
                              Rng &rng)
{
    ExampleSet out;
    auto const negs = cfg.effective_negatives();
    out.skipped_topics = detail::for_each_sample(
        set, negs, rng, [&](TrainingTopic const &topic, std::string const &pos, std::vector<std::string> const &neg) {
            auto const &qid = topic.query.id;
            std::size_t const pi = detail::selected_index(selection, qid, pos);
            if (cfg.loss == LossKind::pairwise_hinge) {
                for (auto const &n : neg) {
                    std::size_t const ni = detail::selected_index(selection, qid, n);
                    out.pairs.push_back({qid, pos, n, pi, ni, detail::segment_features(set, qid, pos, pi),
                                         detail::segment_features(set, qid, n, ni)});
                }
            } else {
                out.points.push_back({qid, pos, pi, detail::segment_features(set, qid, pos, pi), 1});
                for (auto const &n : neg) {
                    std::size_t const ni = detail::selected_index(selection, qid, n);
                    out.points.push_back({qid, n, ni, detail::segment_features(set, qid, n, ni), 0});
                }
            }
        });
    return out;
}

/// Bootstrap examples: every sampled (d+, d-) pair contributes the aligned segment
/// pairs j < min(k, |d+|, |d-|). Pointwise mode emits each of the first k segments.
inline ExampleSet build_all_segment_examples(TrainingSet const &set, TrainConfig const &cfg, Rng &rng)
{
    ExampleSet out;
    auto const k = cfg.max_segments;
    out.skipped_topics = detail::for_each_sample(
        set, cfg.effective_negatives(), rng,
        [&](TrainingTopic const &topic, std::string const &pos, std::vector<std::string> const &neg) {
            auto const &qid = topic.query.id;
            auto const &pf = set.features_of(qid, pos);
            if (cfg.loss == LossKind::pairwise_hinge) {
                for (auto const &n : neg) {
                    auto const &nf = set.features_of(qid, n);
                    std::size_t const m = std::min({k, pf.size(), nf.size()});
                    for (std::size_t j = 0; j < m; ++j) {
                        out.pairs.push_back({qid, pos, n, j, j, pf[j], nf[j]});
                    }
                }
            } else {
                for (std::size_t j = 0; j < std::min(k, pf.size()); ++j) {
                    out.points.push_back({qid, pos, j, pf[j], 1});
                }
                for (auto const &n : neg) {
                    auto const &nf = set.features_of(qid, n);
                    for (std::size_t j = 0; j < std::min(k, nf.size()); ++j) {
                        out.points.push_back({qid, n, j, nf[j], 0});
                    }
                }
            }
        });
    return out;
}

// ---------------------------------------------------------------------------
// Objectives
// ---------------------------------------------------------------------------

/// Bootstrap objective: mean hinge over all topics, all (d+, d-) pairs and aligned
/// segment indices j < min(k, |d+|, |d-|).
inline double loss_theta0(ScorerParams const &params, TrainingSet const &set, std::size_t k)
{
    double sum = 0.0;
    std::size_t count = 0;
    for (auto const &topic : set.topics) {
        auto const &qid = topic.query.id;
        for (auto const &pos : topic.positives) {
            auto const &pf = set.features_of(qid, pos);
            for (auto const &neg : topic.negatives) {
                auto const &nf = set.features_of(qid, neg);
                std::size_t const m = std::min({k, pf.size(), nf.size()});
                for (std::size_t j = 0; j < m; ++j) {
                    sum += hinge_loss(score(params, pf[j]), score(params, nf[j]));
                    ++count;
                }
            }
        }
    }
    return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

/// Mean loss with each document represented by its selected segment. Pairwise runs
/// over all (d+, d-) pairs of each topic; pointwise over every judged document.
inline double loss_selected(ScorerParams const &params, TrainingSet const &set, SegmentIndexMap const &selection,
                            LossKind loss)
{
    double sum = 0.0;
    std::size_t count = 0;
    for (auto const &topic : set.topics) {
        auto const &qid = topic.query.id;
        auto seg_score = [&](std::string const &doc) {
            return score(params, detail::segment_features(set, qid, doc, detail::selected_index(selection, qid, doc)));
        };
        if (loss == LossKind::pairwise_hinge) {
            for (auto const &pos : topic.positives) {
                double const yp = seg_score(pos);
                for (auto const &neg : topic.negatives) {
                    sum += hinge_loss(yp, seg_score(neg));
                    ++count;
                }
            }
        } else {
            for (auto const &pos : topic.positives) {
                sum += pointwise_ce_loss(seg_score(pos), 1);
                ++count;
            }
            for (auto const &neg : topic.negatives) {
                sum += pointwise_ce_loss(seg_score(neg), 0);
                ++count;
            }
        }
    }
    return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

// ---------------------------------------------------------------------------
// Segment selection
// ---------------------------------------------------------------------------

/// For every judged (query, document) pair, the index of the highest-scoring segment
/// among the first k; ties go to the smallest index.
inline SegmentIndexMap select_segments(ScorerParams const &params, TrainingSet const &set, std::size_t k,
                                       std::size_t threads = 1)
{
    if (k == 0) {
        throw UsageError("select_segments: k must be >= 1");
    }
    std::vector<QueryDocKey> keys;
    for (auto const &topic : set.topics) {
        for (auto const *list : {&topic.positives, &topic.negatives}) {
            for (auto const &d : *list) {
                keys.emplace_back(topic.query.id, d);
            }
        }
    }
    std::vector<std::pair<std::size_t, double>> best(keys.size());
    parallel_for(keys.size(), threads, [&](std::size_t i) {
        auto const &f = set.features_of(keys[i].first, keys[i].second);
        std::size_t const m = std::min(k, f.size());
        std::size_t arg = 0;
        double top = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < m; ++j) {
            double const s = score(params, f[j]);
            if (s > top) {
                top = s;
                arg = j;
            }
        }
        best[i] = {arg, top};
    });
    SegmentIndexMap out;
    for (std::size_t i = 0; i < keys.size(); ++i) {
        out.set(keys[i], best[i].first, best[i].second);
    }
    return out;
}

/// Segment 0 for every judged pair.
inline SegmentIndexMap first_segment_selection(TrainingSet const &set)
{
    SegmentIndexMap out;
    for (auto const &topic : set.topics) {
        for (auto const *list : {&topic.positives, &topic.negatives}) {
            for (auto const &d : *list) {
                out.set({topic.query.id, d}, 0);
            }
        }
    }
    return out;
}

/// Gold segments for positives, segment 0 for negatives.
inline SegmentIndexMap gold_selection(TrainingSet const &set, GoldSegments const &gold)
{
    SegmentIndexMap out = first_segment_selection(set);
    for (auto const &topic : set.topics) {
        for (auto const &d : topic.positives) {
            auto it = gold.find({topic.query.id, d});
            if (it == gold.end()) {
                throw DataError("no gold segment for positive (" + topic.query.id + ", " + d + ")");
            }
            if (it->second >= set.features_of(topic.query.id, d).size()) {
                throw DataError("gold segment out of range for (" + topic.query.id + ", " + d + ")");
            }
            out.set({topic.query.id, d}, it->second);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainOutcome {
    ScorerParams params;
    double validation_metric = 0.0;
    std::size_t epochs_run = 0;
    std::vector<double> epoch_metrics;
};

/// One complete training run from a fresh initialization: per epoch, resample
/// negatives, run mini-batch SGD, and measure validation MRR (MaxP). Returns the
/// best-MRR snapshot; stops after patience_epochs epochs without improvement.
inline TrainOutcome train_single(TrainingSet const &set, EvalBundle const &dev, TrainTarget const &target,
                                 TrainConfig const &cfg, std::uint64_t seed)
{
    cfg.validate();
    if (set.topics.empty()) {
        throw DataError("train_single: empty training set");
    }
    ScorerParams params = init_params(cfg.scorer, seed, cfg.hidden);
    Rng rng(derive_seed(seed, "sampling"));

    TrainOutcome out{params, -std::numeric_limits<double>::infinity(), 0, {}};
    std::size_t stale = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        ExampleSet examples = std::holds_alternative<AllSegments>(target)
                                  ? build_all_segment_examples(set, cfg, rng)
                                  : build_pairs(set, std::get<SegmentIndexMap>(target), cfg, rng);
        if (examples.size() == 0) {
            throw DataError("train_single: no training examples (every topic lacks negatives)");
        }
        std::shuffle(examples.pairs.begin(), examples.pairs.end(), rng);
        std::shuffle(examples.points.begin(), examples.points.end(), rng);

        auto run_batches = [&](auto const &items) {
            for (std::size_t start = 0; start < items.size(); start += cfg.batch_size) {
                std::size_t const len = std::min(cfg.batch_size, items.size() - start);
                auto const step = batch_loss_and_gradient(params, std::span(items).subspan(start, len));
                params = sgd_step(params, step.gradient, cfg.learning_rate);
            }
        };
        if (cfg.loss == LossKind::pairwise_hinge) {
            run_batches(examples.pairs);
        } else {
            run_batches(examples.points);
        }

        double const metric = validation_mrr(params, dev);
        out.epoch_metrics.push_back(metric);
        out.epochs_run = epoch + 1;
        if (metric > out.validation_metric) {
            out.validation_metric = metric;
            out.params = params;
            stale = 0;
        } else if (++stale >= cfg.patience_epochs) {
            break;
        }
    }
    return out;
}

using IterationObserver = std::function<void(IterationState const &)>;

/// The full procedure: bootstrap θ0 on all aligned segments, select segments with it,
/// then repeatedly train a freshly initialized scorer on the current selection and
/// reselect with it. Iterations stop once the validation metric fails to improve for
/// iteration_patience consecutive iterations.
inline BestTrainResult best_train(TrainingSet const &set, EvalBundle const &dev, TrainConfig const &cfg,
                                  IterationObserver const &observer = {})
{
    cfg.validate();
    BestTrainResult result;
    auto theta0 = train_single(set, dev, AllSegments{}, cfg, cfg.seed);
    result.theta0 = theta0.params;
    result.theta0_metric = theta0.validation_metric;

    SegmentIndexMap selection = select_segments(theta0.params, set, cfg.max_segments, cfg.threads);
    double best_metric = -std::numeric_limits<double>::infinity();
    std::size_t stale = 0;
    for (std::size_t n = 1; n <= cfg.max_iterations; ++n) {
        auto trained = train_single(set, dev, selection, cfg, cfg.seed + n);
        IterationState state{n, trained.params, selection, trained.validation_metric, trained.epochs_run};
        if (observer) {
            observer(state);
        }
        result.history.push_back(std::move(state));
        if (trained.validation_metric > best_metric) {
            best_metric = trained.validation_metric;
            result.best_iteration = n;
            stale = 0;
        } else if (++stale >= cfg.iteration_patience) {
            break;
        }
        if (n < cfg.max_iterations) {
            selection = select_segments(result.history.back().params, set, cfg.max_segments, cfg.threads);
        }
    }
    return result;
}

/// FirstP (segment 0 everywhere) or Gold-P (gold segments for positives) training.
inline TrainOutcome train_baseline(TrainingSet const &set, EvalBundle const &dev, SelectionSource source,
                                   TrainConfig const &cfg, GoldSegments const *gold = nullptr)
{
    switch (source) {
    case SelectionSource::first:
        return train_single(set, dev, first_segment_selection(set), cfg, cfg.seed + 1);
    case SelectionSource::gold:
        if (gold == nullptr) {
            throw UsageError("gold baseline requires gold segment labels");
        }
        return train_single(set, dev, gold_selection(set, *gold), cfg, cfg.seed + 1);
    case SelectionSource::scorer:
        break;
    }
    throw UsageError("scorer-selected training runs through best_train");
}

} // namespace segtrain
