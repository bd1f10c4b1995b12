#pragma once

#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <string>

#include "segtrain/corpus.hpp"
#include "segtrain/error.hpp"
#include "segtrain/scorer.hpp"
#include "segtrain/synth.hpp"
#include "segtrain/training.hpp"

namespace segtrain {

/// Everything a pipeline run needs. Missing keys keep the defaults below.
struct PipelineConfig {
    TrainConfig train;
    SegmentationPolicy segmentation = SegmentationPolicy::training();
    std::size_t inference_max_tokens = 512;
    std::size_t query_token_budget = 16;
    SynthConfig synth;

    std::size_t mrr_cutoff = 10;
    std::size_t ndcg_k = 10;
    std::size_t rerank_depth = 100;
    std::size_t dev_queries = 0; // last N query ids (sorted) form the dev split
    std::size_t folds = 0;       // > 0: dev split is test fold `fold` of a k-fold split
    std::size_t fold = 0;
    std::string tag = "segtrain";

    std::string corpus;
    std::string queries;
    std::string qrels;
    std::string candidates;
    std::string gold;

    /// Sets the shared seed everywhere it is consumed.
    void set_seed(std::uint64_t seed)
    {
        train.seed = seed;
        segmentation.seed = seed;
        synth.seed = seed;
    }

    void set_threads(std::size_t threads) { train.threads = threads == 0 ? 1 : threads; }

    void validate() const
    {
        train.validate();
        segmentation.validate();
        if (inference_max_tokens == 0 || mrr_cutoff == 0 || ndcg_k == 0 || rerank_depth == 0) {
            throw UsageError("inference_max_tokens, mrr_cutoff, ndcg_k and rerank_depth must be positive");
        }
        if (folds == 1 || (folds > 0 && fold >= folds)) {
            throw UsageError("folds must be 0 or >= 2, with 0 <= fold < folds");
        }
    }
};

namespace detail {

inline std::uint64_t config_unsigned(std::string const &key, std::string const &value)
{
    try {
        std::size_t used = 0;
        if (!value.empty() && value[0] != '-') {
            auto v = std::stoull(value, &used);
            if (used == value.size()) {
                return v;
            }
        }
    } catch (std::exception const &) {
    }
    throw UsageError("config key '" + key + "': expected a non-negative integer, got '" + value + "'");
}

inline double config_real(std::string const &key, std::string const &value)
{
    char *end = nullptr;
    double v = std::strtod(value.c_str(), &end);
    if (value.empty() || *end != '\0' || !std::isfinite(v)) {
        throw UsageError("config key '" + key + "': expected a number, got '" + value + "'");
    }
    return v;
}

inline std::string trim(std::string s)
{
    auto const b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return {};
    }
    auto const e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

using ConfigSetter = std::function<void(PipelineConfig &, std::string const &key, std::string const &value)>;

inline std::map<std::string, ConfigSetter> const &config_setters()
{
    using C = PipelineConfig;
    auto size = [](auto member) {
        return ConfigSetter([member](C &c, std::string const &k, std::string const &v) {
            member(c) = static_cast<std::size_t>(config_unsigned(k, v));
        });
    };
    auto real = [](auto member) {
        return ConfigSetter([member](C &c, std::string const &k, std::string const &v) { member(c) = config_real(k, v); });
    };
    auto text = [](auto member) {
        return ConfigSetter([member](C &c, std::string const &, std::string const &v) { member(c) = v; });
    };
    static std::map<std::string, ConfigSetter> const setters = {
        // training
        {"loss", [](C &c, auto const &, auto const &v) { c.train.loss = parse_loss_kind(v); }},
        {"scorer", [](C &c, auto const &, auto const &v) { c.train.scorer = parse_scorer_kind(v); }},
        {"hidden", size([](C &c) -> std::size_t & { return c.train.hidden; })},
        {"learning_rate", real([](C &c) -> double & { return c.train.learning_rate; })},
        {"epochs", size([](C &c) -> std::size_t & { return c.train.epochs; })},
        {"batch_size", size([](C &c) -> std::size_t & { return c.train.batch_size; })},
        {"patience_epochs", size([](C &c) -> std::size_t & { return c.train.patience_epochs; })},
        {"max_segments",
         [](C &c, auto const &k, auto const &v) {
             c.train.max_segments = static_cast<std::size_t>(config_unsigned(k, v));
             c.segmentation.max_segments = c.train.max_segments;
         }},
        {"negatives_per_positive", size([](C &c) -> std::size_t & { return c.train.negatives_per_positive; })},
        {"max_iterations", size([](C &c) -> std::size_t & { return c.train.max_iterations; })},
        {"iteration_patience", size([](C &c) -> std::size_t & { return c.train.iteration_patience; })},
        {"seed", [](C &c, auto const &k, auto const &v) { c.set_seed(config_unsigned(k, v)); }},
        {"threads",
         [](C &c, auto const &k, auto const &v) { c.set_threads(static_cast<std::size_t>(config_unsigned(k, v))); }},
        // segmentation
        {"max_tokens", size([](C &c) -> std::size_t & { return c.segmentation.max_tokens; })},
        {"min_tokens", size([](C &c) -> std::size_t & { return c.segmentation.min_tokens; })},
        {"inference_max_tokens", size([](C &c) -> std::size_t & { return c.inference_max_tokens; })},
        {"query_token_budget", size([](C &c) -> std::size_t & { return c.query_token_budget; })},
        // synthetic collection
        {"num_queries", size([](C &c) -> std::size_t & { return c.synth.num_queries; })},
        {"docs_per_query", size([](C &c) -> std::size_t & { return c.synth.docs_per_query; })},
        {"sentences_per_doc", size([](C &c) -> std::size_t & { return c.synth.sentences_per_doc; })},
        {"tokens_per_sentence", size([](C &c) -> std::size_t & { return c.synth.tokens_per_sentence; })},
        {"title_tokens", size([](C &c) -> std::size_t & { return c.synth.title_tokens; })},
        {"vocab_size", size([](C &c) -> std::size_t & { return c.synth.vocab_size; })},
        {"query_terms", size([](C &c) -> std::size_t & { return c.synth.query_terms; })},
        {"plant_begin", size([](C &c) -> std::size_t & { return c.synth.plant_begin; })},
        {"plant_end", size([](C &c) -> std::size_t & { return c.synth.plant_end; })},
        {"distractor_overlap", real([](C &c) -> double & { return c.synth.distractor_overlap; })},
        {"noise", real([](C &c) -> double & { return c.synth.noise; })},
        {"zipf_exponent", real([](C &c) -> double & { return c.synth.zipf_exponent; })},
        {"query_vocab_begin", size([](C &c) -> std::size_t & { return c.synth.query_vocab_begin; })},
        // evaluation
        {"mrr_cutoff", size([](C &c) -> std::size_t & { return c.mrr_cutoff; })},
        {"ndcg_k", size([](C &c) -> std::size_t & { return c.ndcg_k; })},
        {"rerank_depth", size([](C &c) -> std::size_t & { return c.rerank_depth; })},
        {"dev_queries", size([](C &c) -> std::size_t & { return c.dev_queries; })},
        {"folds", size([](C &c) -> std::size_t & { return c.folds; })},
        {"fold", size([](C &c) -> std::size_t & { return c.fold; })},
        {"tag", text([](C &c) -> std::string & { return c.tag; })},
        // inputs
        {"corpus", text([](C &c) -> std::string & { return c.corpus; })},
        {"queries", text([](C &c) -> std::string & { return c.queries; })},
        {"qrels", text([](C &c) -> std::string & { return c.qrels; })},
        {"candidates", text([](C &c) -> std::string & { return c.candidates; })},
        {"gold", text([](C &c) -> std::string & { return c.gold; })},
    };
    return setters;
}

} // namespace detail

/// Applies one key=value assignment; unknown keys are rejected.
inline void apply_config_value(PipelineConfig &cfg, std::string const &key, std::string const &value)
{
    auto const &setters = detail::config_setters();
    auto it = setters.find(key);
    if (it == setters.end()) {
        throw UsageError("unknown config key '" + key + "'");
    }
    it->second(cfg, key, value);
}

/// key=value lines; '#' starts a comment.
inline PipelineConfig parse_config(std::istream &in, std::string const &source = "config",
                                   PipelineConfig cfg = PipelineConfig{})
{
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        line = detail::trim(line);
        if (line.empty()) {
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw UsageError(source + ":" + std::to_string(line_no) + ": expected key=value");
        }
        try {
            apply_config_value(cfg, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
        } catch (UsageError const &e) {
            throw UsageError(source + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return cfg;
}

inline std::vector<std::string> config_keys()
{
    std::vector<std::string> keys;
    for (auto const &[k, v] : detail::config_setters()) {
        keys.push_back(k);
    }
    return keys;
}

} // namespace segtrain
