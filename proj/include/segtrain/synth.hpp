#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "segtrain/corpus.hpp"
#include "segtrain/error.hpp"
#include "segtrain/eval.hpp"
#include "segtrain/random.hpp"
#include "segtrain/selection.hpp"

namespace segtrain {

struct SynthConfig {
    std::size_t num_queries = 250;
    std::size_t docs_per_query = 6; // candidate pool size, the relevant document included
    std::size_t sentences_per_doc = 80; // long enough for four training segments at the default budgets
    std::size_t tokens_per_sentence = 20;
    std::size_t title_tokens = 2;
    std::size_t vocab_size = 5000;
    std::size_t query_terms = 4;
    std::size_t plant_begin = 0; // planted segment range [plant_begin, plant_end)
    std::size_t plant_end = 4;
    double distractor_overlap = 0.3;
    double noise = 0.1;
    double zipf_exponent = 1.0;
    std::size_t query_vocab_begin = 500; // query terms come from vocabulary ranks >= this
    std::uint64_t seed = 0;

    void validate() const
    {
        if (num_queries == 0 || docs_per_query == 0 || sentences_per_doc == 0 || tokens_per_sentence == 0 ||
            vocab_size == 0 || query_terms == 0) {
            throw UsageError("synth: counts must be positive");
        }
        if (plant_begin >= plant_end) {
            throw UsageError("synth: empty plant range");
        }
        if (query_terms > tokens_per_sentence) {
            throw UsageError("synth: query_terms exceeds tokens_per_sentence");
        }
        if (!(distractor_overlap >= 0.0 && distractor_overlap <= 1.0) || !(noise >= 0.0 && noise <= 1.0)) {
            throw UsageError("synth: distractor_overlap and noise must lie in [0, 1]");
        }
        if (query_pool_size() < num_queries * query_terms) {
            throw UsageError("synth: vocab_size too small for disjoint query terms");
        }
    }

    /// Query terms come from vocabulary ranks [query_vocab_begin, vocab_size).
    [[nodiscard]] std::size_t query_pool_begin() const noexcept { return std::min(query_vocab_begin, vocab_size); }
    [[nodiscard]] std::size_t query_pool_size() const noexcept { return vocab_size - query_pool_begin(); }
};

/// Raw (doc_id, title, body) record as stored in the corpus file.
struct CorpusRecord {
    std::string doc_id;
    std::string title;
    std::string body;

    friend bool operator==(CorpusRecord const &, CorpusRecord const &) = default;
};

struct SynthCorpus {
    std::vector<Query> queries;
    std::vector<CorpusRecord> records;
    std::vector<Document> documents;
    Qrels qrels;
    GoldSegments gold;
    std::map<std::string, std::vector<std::string>> candidates;
};

namespace detail {

inline std::string word(std::size_t id) { return "w" + std::to_string(id); }

inline std::string join_words(std::vector<std::string> const &words)
{
    std::string out;
    for (auto const &w : words) {
        if (!out.empty()) {
            out += ' ';
        }
        out += w;
    }
    return out;
}

inline std::string render_body(std::vector<std::vector<std::string>> const &sentences)
{
    std::string out;
    for (auto const &s : sentences) {
        if (!out.empty()) {
            out += ' ';
        }
        out += join_words(s) + ".";
    }
    return out;
}

inline std::string numbered(char prefix, std::size_t i, int width)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%c%0*zu", prefix, width, i);
    return buf;
}

} // namespace detail

/// Builds a collection with one relevant document per query. The relevant document
/// gets one sentence rewritten to carry the query terms (each dropped with
/// probability `noise`), placed inside a gold segment drawn uniformly from the plant
/// range of its training segmentation under `policy`. One negative per query
/// receives a scattered subset of the query terms (the distractor).
inline SynthCorpus generate_corpus(SynthConfig const &cfg, SegmentationPolicy const &policy,
                                   std::size_t query_token_budget)
{
    cfg.validate();
    policy.validate();
    Rng rng(cfg.seed);

    std::vector<double> weights(cfg.vocab_size);
    for (std::size_t r = 0; r < cfg.vocab_size; ++r) {
        weights[r] = 1.0 / std::pow(static_cast<double>(r + 1), cfg.zipf_exponent);
    }
    std::discrete_distribution<std::size_t> unigram(weights.begin(), weights.end());

    std::vector<std::size_t> query_pool(cfg.query_pool_size());
    std::iota(query_pool.begin(), query_pool.end(), cfg.query_pool_begin());
    std::shuffle(query_pool.begin(), query_pool.end(), rng);

    auto background_sentence = [&] {
        std::vector<std::string> s(cfg.tokens_per_sentence);
        for (auto &w : s) {
            w = detail::word(unigram(rng));
        }
        return s;
    };

    SynthCorpus corpus;
    int const qwidth = static_cast<int>(std::to_string(cfg.num_queries).size());
    int const dwidth = static_cast<int>(std::to_string(cfg.num_queries * cfg.docs_per_query).size());
    std::size_t doc_counter = 0;
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    for (std::size_t qi = 0; qi < cfg.num_queries; ++qi) {
        std::string const qid = detail::numbered('q', qi + 1, qwidth);
        std::vector<std::string> terms;
        for (std::size_t t = 0; t < cfg.query_terms; ++t) {
            terms.push_back(detail::word(query_pool[qi * cfg.query_terms + t]));
        }
        corpus.queries.push_back(make_query(qid, detail::join_words(terms)));

        std::size_t const relevant_slot = std::uniform_int_distribution<std::size_t>(0, cfg.docs_per_query - 1)(rng);
        std::size_t const distractor_slot =
            cfg.docs_per_query > 1
                ? (relevant_slot + 1 + std::uniform_int_distribution<std::size_t>(0, cfg.docs_per_query - 2)(rng)) %
                      cfg.docs_per_query
                : relevant_slot;

        auto &pool = corpus.candidates[qid];
        for (std::size_t slot = 0; slot < cfg.docs_per_query; ++slot) {
            std::string const doc_id = detail::numbered('d', ++doc_counter, dwidth);
            std::vector<std::string> title_words;
            for (std::size_t t = 0; t < cfg.title_tokens; ++t) {
                title_words.push_back(detail::word(unigram(rng)));
            }
            std::vector<std::vector<std::string>> sentences;
            for (std::size_t s = 0; s < cfg.sentences_per_doc; ++s) {
                sentences.push_back(background_sentence());
            }
            std::string const title = detail::join_words(title_words);

            bool const relevant = slot == relevant_slot;
            bool const distractor = !relevant && slot == distractor_slot && cfg.distractor_overlap > 0.0;
            if (relevant || distractor) {
                // Token counts never change below, so this segmentation stays valid.
                auto const segs = training_segments(make_document(doc_id, title, detail::render_body(sentences)),
                                                    query_token_budget, policy);
                if (relevant) {
                    if (cfg.plant_end > segs.size()) {
                        throw UsageError("synth: plant range [" + std::to_string(cfg.plant_begin) + ", " +
                                         std::to_string(cfg.plant_end) + ") exceeds the " +
                                         std::to_string(segs.size()) + " training segments of " + doc_id);
                    }
                    std::size_t const g =
                        std::uniform_int_distribution<std::size_t>(cfg.plant_begin, cfg.plant_end - 1)(rng);
                    auto const span = segs[g].span;
                    std::size_t const s =
                        std::uniform_int_distribution<std::size_t>(span.start, span.end - 1)(rng);
                    std::size_t const offset = std::uniform_int_distribution<std::size_t>(
                        0, cfg.tokens_per_sentence - cfg.query_terms)(rng);
                    for (std::size_t t = 0; t < terms.size(); ++t) {
                        if (unit(rng) >= cfg.noise) {
                            sentences[s][offset + t] = terms[t];
                        }
                    }
                    corpus.gold[{qid, doc_id}] = g;
                    corpus.qrels.set(qid, doc_id, 1);
                } else {
                    auto leak_count = static_cast<std::size_t>(
                        std::lround(cfg.distractor_overlap * static_cast<double>(cfg.query_terms)));
                    leak_count = std::clamp<std::size_t>(leak_count, 1, cfg.query_terms);
                    std::vector<std::string> leaked;
                    std::sample(terms.begin(), terms.end(), std::back_inserter(leaked), leak_count, rng);
                    std::size_t const seg = std::uniform_int_distribution<std::size_t>(0, segs.size() - 1)(rng);
                    auto const span = segs[seg].span;
                    std::size_t const s =
                        std::uniform_int_distribution<std::size_t>(span.start, span.end - 1)(rng);
                    std::vector<std::size_t> positions(cfg.tokens_per_sentence);
                    std::iota(positions.begin(), positions.end(), 0);
                    std::shuffle(positions.begin(), positions.end(), rng);
                    for (std::size_t t = 0; t < leaked.size(); ++t) {
                        sentences[s][positions[t]] = leaked[t];
                    }
                    corpus.qrels.set(qid, doc_id, 0);
                }
            } else {
                corpus.qrels.set(qid, doc_id, 0);
            }

            CorpusRecord record{doc_id, title, detail::render_body(sentences)};
            corpus.documents.push_back(make_document(record.doc_id, record.title, record.body));
            corpus.records.push_back(std::move(record));
            pool.push_back(doc_id);
        }
    }
    return corpus;
}

} // namespace segtrain
