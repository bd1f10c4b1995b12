#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "segtrain/config.hpp"
#include "segtrain/corpus.hpp"
#include "segtrain/eval.hpp"
#include "segtrain/io.hpp"
#include "segtrain/synth.hpp"
#include "segtrain/training.hpp"

namespace segtrain {

/// Candidate pools truncated to the re-ranking depth, in first-stage rank order.
using CandidatePools = std::map<std::string, std::vector<std::string>>;

inline CandidatePools candidate_pools(Run const &first_stage, std::size_t depth)
{
    CandidatePools pools;
    for (auto const &[qid, list] : first_stage) {
        auto &pool = pools[qid];
        for (auto const &e : list.entries) {
            if (pool.size() == depth) {
                break;
            }
            pool.push_back(e.doc_id);
        }
    }
    return pools;
}

inline Run pools_as_run(CandidatePools const &pools)
{
    Run run;
    for (auto const &[qid, docs] : pools) {
        auto &list = run[qid];
        list.query_id = qid;
        for (std::size_t i = 0; i < docs.size(); ++i) {
            list.entries.push_back({docs[i], static_cast<double>(docs.size() - i), i + 1});
        }
    }
    return run;
}

/// Training topics: positives are the judged-relevant documents present in the
/// corpus, negatives the remaining pool candidates. Queries without a positive are
/// left out.
inline std::vector<TrainingTopic> make_topics(std::vector<Query> const &queries, std::set<std::string> const &ids,
                                              Qrels const &qrels, CandidatePools const &pools,
                                              DocumentStore const &docs)
{
    std::vector<TrainingTopic> topics;
    for (auto const &q : queries) {
        if (ids.count(q.id) == 0) {
            continue;
        }
        TrainingTopic topic{q, {}, {}};
        if (auto judged = qrels.grades.find(q.id); judged != qrels.grades.end()) {
            for (auto const &[doc, g] : judged->second) {
                if (g > 0 && docs.count(doc) != 0) {
                    topic.positives.push_back(doc);
                }
            }
        }
        if (topic.positives.empty()) {
            continue;
        }
        std::set<std::string> pos(topic.positives.begin(), topic.positives.end());
        if (auto pool = pools.find(q.id); pool != pools.end()) {
            for (auto const &d : pool->second) {
                if (pos.count(d) == 0 && docs.count(d) != 0) {
                    topic.negatives.push_back(d);
                }
            }
        }
        topics.push_back(std::move(topic));
    }
    return topics;
}

struct QuerySplit {
    std::set<std::string> train;
    std::set<std::string> dev;
};

/// Dev queries are a k-fold test fold when folds > 0, otherwise the last
/// dev_queries ids in sorted order. Everything else is training.
inline QuerySplit split_queries(PipelineConfig const &cfg, std::vector<Query> const &queries)
{
    std::vector<std::string> ids;
    for (auto const &q : queries) {
        ids.push_back(q.id);
    }
    std::sort(ids.begin(), ids.end());
    QuerySplit split;
    if (cfg.folds > 0) {
        auto folds = kfold_split(ids, cfg.folds, cfg.train.seed);
        split.train.insert(folds[cfg.fold].train.begin(), folds[cfg.fold].train.end());
        split.dev.insert(folds[cfg.fold].test.begin(), folds[cfg.fold].test.end());
        return split;
    }
    if (cfg.dev_queries >= ids.size() && cfg.dev_queries > 0) {
        throw UsageError("dev_queries leaves no training queries");
    }
    std::size_t const cut = ids.size() - cfg.dev_queries;
    split.train.insert(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(cut));
    split.dev.insert(ids.begin() + static_cast<std::ptrdiff_t>(cut), ids.end());
    return split;
}

/// Everything loaded from the pipeline's input files.
struct PipelineData {
    std::vector<Document> documents;
    DocumentStore store;
    std::vector<Query> queries;
    Qrels qrels;
    CandidatePools pools;
    GoldSegments gold;
    CorpusStats stats;
};

inline CorpusStats pipeline_stats(PipelineConfig const &cfg, std::span<Document const> docs)
{
    return compute_corpus_stats(docs, cfg.inference_max_tokens, cfg.train.max_segments);
}

inline PipelineData load_pipeline_data(PipelineConfig const &cfg, bool need_qrels, bool need_gold)
{
    auto require = [](std::string const &path, char const *what) {
        if (path.empty()) {
            throw UsageError(std::string("missing input: ") + what);
        }
        return path;
    };
    PipelineData data;
    data.documents = read_file(require(cfg.corpus, "corpus"), [](auto &in, auto const &src) { return parse_corpus(in, src); });
    data.store = make_document_store(data.documents);
    data.queries =
        read_file(require(cfg.queries, "queries"), [](auto &in, auto const &src) { return parse_queries(in, src); });
    data.pools = candidate_pools(
        read_file(require(cfg.candidates, "candidates"), [](auto &in, auto const &src) { return parse_run(in, src); }),
        cfg.rerank_depth);
    if (need_qrels) {
        data.qrels = read_file(require(cfg.qrels, "qrels"), [](auto &in, auto const &src) { return parse_qrels(in, src); });
    }
    if (need_gold) {
        data.gold = read_file(require(cfg.gold, "gold"), [](auto &in, auto const &src) { return parse_gold(in, src); });
    }
    data.stats = pipeline_stats(cfg, data.documents);
    return data;
}

inline Qrels restrict_qrels(Qrels const &qrels, std::set<std::string> const &ids)
{
    Qrels out;
    for (auto const &[qid, docs] : qrels.grades) {
        if (ids.count(qid) != 0) {
            out.grades[qid] = docs;
        }
    }
    return out;
}

inline std::vector<Query> restrict_queries(std::vector<Query> const &queries, std::set<std::string> const &ids)
{
    std::vector<Query> out;
    for (auto const &q : queries) {
        if (ids.count(q.id) != 0) {
            out.push_back(q);
        }
    }
    return out;
}

inline TrainingSet pipeline_training_set(PipelineConfig const &cfg, PipelineData const &data,
                                         std::set<std::string> const &ids)
{
    auto policy = cfg.segmentation;
    policy.max_segments = cfg.train.max_segments;
    return build_training_set(make_topics(data.queries, ids, data.qrels, data.pools, data.store), data.store, policy,
                              cfg.query_token_budget, data.stats, cfg.train.threads);
}

inline EvalBundle pipeline_eval_bundle(PipelineConfig const &cfg, PipelineData const &data,
                                       std::set<std::string> const &ids)
{
    CandidatePools pools;
    for (auto const &id : ids) {
        if (auto it = data.pools.find(id); it != data.pools.end()) {
            pools.emplace(id, it->second);
        }
    }
    return build_eval_bundle(restrict_queries(data.queries, ids), std::move(pools), restrict_qrels(data.qrels, ids),
                             data.store, data.stats, cfg.mrr_cutoff, cfg.train.threads);
}

/// Writes corpus.jsonl, queries.tsv, qrels.txt, candidates.run and gold.jsonl.
inline void write_synth_corpus(SynthCorpus const &corpus, std::filesystem::path const &dir)
{
    std::filesystem::create_directories(dir);
    {
        auto out = open_output((dir / "corpus.jsonl").string());
        write_corpus(corpus.records, out);
    }
    {
        auto out = open_output((dir / "queries.tsv").string());
        write_queries(corpus.queries, out);
    }
    {
        auto out = open_output((dir / "qrels.txt").string());
        write_qrels(corpus.qrels, out);
    }
    {
        auto out = open_output((dir / "candidates.run").string());
        write_run(pools_as_run(corpus.candidates), "pool", out);
    }
    {
        auto out = open_output((dir / "gold.jsonl").string());
        write_gold(corpus.gold, out);
    }
}

} // namespace segtrain
