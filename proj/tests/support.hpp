#pragma once

#include <cmath>
#include <fstream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "segtrain.hpp"

namespace testing_support {

using namespace segtrain;

/// n tokens "p0 p1 ..." terminated with a period.
inline std::string sentence_of(std::size_t n, std::string const &prefix = "t")
{
    std::string s;
    for (std::size_t i = 0; i < n; ++i) {
        if (i != 0) {
            s += ' ';
        }
        s += prefix + std::to_string(i);
    }
    return s + ".";
}

inline std::string body_of(std::size_t sentences, std::size_t tokens_each)
{
    std::string body;
    for (std::size_t s = 0; s < sentences; ++s) {
        if (s != 0) {
            body += ' ';
        }
        body += sentence_of(tokens_each, "s" + std::to_string(s) + "x");
    }
    return body;
}

/// Scorer evaluated straight from the parameter layout, without the library's score().
inline double oracle_score(ScorerParams const &p, FeatureVector const &x)
{
    if (p.kind == ScorerKind::linear) {
        double s = p.values[7];
        for (std::size_t j = 0; j < 7; ++j) {
            s += p.values[j] * x[j];
        }
        return s;
    }
    std::size_t const H = p.hidden;
    double s = p.values[H * 7 + 2 * H];
    for (std::size_t h = 0; h < H; ++h) {
        double a = p.values[H * 7 + h];
        for (std::size_t j = 0; j < 7; ++j) {
            a += p.values[h * 7 + j] * x[j];
        }
        s += p.values[H * 7 + H + h] * std::tanh(a);
    }
    return s;
}

/// First-segment pairwise hinge objective, averaged over every (q, d+, d-) triple.
inline double first_segment_hinge_oracle(ScorerParams const &p, TrainingSet const &set)
{
    double sum = 0.0;
    std::size_t n = 0;
    for (auto const &topic : set.topics) {
        for (auto const &pos : topic.positives) {
            double const yp = oracle_score(p, set.features.at({topic.query.id, pos}).at(0));
            for (auto const &neg : topic.negatives) {
                double const yn = oracle_score(p, set.features.at({topic.query.id, neg}).at(0));
                double const m = 1.0 - yp + yn;
                sum += m > 0.0 ? m : 0.0;
                ++n;
            }
        }
    }
    return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

inline ScorerParams random_params(Rng &rng, ScorerKind kind, std::size_t hidden = 8, double scale = 1.0)
{
    ScorerParams p(kind, hidden);
    std::uniform_real_distribution<double> u(-scale, scale);
    for (auto &v : p.values) {
        v = u(rng);
    }
    return p;
}

inline FeatureVector random_features(Rng &rng)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    FeatureVector f{};
    for (auto &v : f) {
        v = u(rng);
    }
    return f;
}

/// Relative error ||analytic - numeric|| / max(||analytic||, ||numeric||, 1e-8) of the
/// batch gradient against central differences at step h, for one random draw. Returns
/// nothing when a hinge margin sits within 1e-6 of the kink or the stencil crosses it.
inline std::optional<double> gradient_check(Rng &rng, ScorerKind kind, bool pairwise, std::size_t batch_size,
                                            double h = 1e-5)
{
    auto p = random_params(rng, kind, 4);
    std::vector<PairwiseExample> pairs;
    std::vector<PointwiseExample> points;
    for (std::size_t b = 0; b < batch_size; ++b) {
        pairs.push_back({"q", "p", "n", 0, 0, random_features(rng), random_features(rng)});
        points.push_back({"q", "d", 0, random_features(rng), static_cast<int>(b % 2)});
    }
    auto eval = [&](ScorerParams const &q) {
        return pairwise ? batch_loss_and_gradient(q, std::span<PairwiseExample const>(pairs))
                        : batch_loss_and_gradient(q, std::span<PointwiseExample const>(points));
    };
    auto margins = [&](ScorerParams const &q) {
        std::vector<double> m;
        for (auto const &ex : pairs) {
            m.push_back(1.0 - oracle_score(q, ex.pos) + oracle_score(q, ex.neg));
        }
        return m;
    };
    auto const analytic = eval(p).gradient.values;
    auto const m0 = margins(p);
    if (pairwise) {
        for (double m : m0) {
            if (std::abs(m) < 1e-6) {
                return std::nullopt;
            }
        }
    }
    double diff = 0.0, na = 0.0, nn = 0.0;
    for (std::size_t i = 0; i < p.values.size(); ++i) {
        auto plus = p, minus = p;
        plus.values[i] += h;
        minus.values[i] -= h;
        if (pairwise) {
            auto const mp = margins(plus), mm = margins(minus);
            for (std::size_t k = 0; k < m0.size(); ++k) {
                if ((mp[k] > 0.0) != (mm[k] > 0.0)) {
                    return std::nullopt;
                }
            }
        }
        double const numeric = (eval(plus).loss - eval(minus).loss) / (2.0 * h);
        diff += (analytic[i] - numeric) * (analytic[i] - numeric);
        na += analytic[i] * analytic[i];
        nn += numeric * numeric;
    }
    return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), 1e-8});
}

/// Training set with random cached features. With probability `dup`, a segment
/// copies an earlier segment's features so argmax ties occur.
inline TrainingSet random_training_set(Rng &rng, std::size_t topics, std::size_t max_negatives,
                                       std::size_t max_segments, double dup = 0.0)
{
    TrainingSet set;
    std::uniform_int_distribution<std::size_t> negs(1, max_negatives);
    std::uniform_int_distribution<std::size_t> segs(1, max_segments);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::size_t doc = 0;
    for (std::size_t t = 0; t < topics; ++t) {
        TrainingTopic topic{make_query("q" + std::to_string(t), "query"), {}, {}};
        std::size_t const n_neg = negs(rng);
        for (std::size_t d = 0; d < 1 + n_neg; ++d) {
            std::string const id = "d" + std::to_string(doc++);
            (d == 0 ? topic.positives : topic.negatives).push_back(id);
            std::vector<FeatureVector> f(segs(rng));
            for (std::size_t s = 0; s < f.size(); ++s) {
                if (s > 0 && unit(rng) < dup) {
                    f[s] = f[std::uniform_int_distribution<std::size_t>(0, s - 1)(rng)];
                } else {
                    f[s] = random_features(rng);
                }
            }
            set.features[{topic.query.id, id}] = std::move(f);
        }
        set.topics.push_back(std::move(topic));
    }
    return set;
}

/// A generated collection split into training and dev topics, with everything
/// the trainers need precomputed.
struct SynthExperiment {
    PipelineConfig cfg;
    SynthCorpus corpus;
    PipelineData data;
    QuerySplit split;
    TrainingSet train;
    TrainingSet dev_set; // training segmentation of the dev topics, for selection P@1
    EvalBundle dev;
    GoldSegments dev_gold;

    [[nodiscard]] double dev_p_at_1(ScorerParams const &params) const
    {
        return segment_p_at_1(select_segments(params, dev_set, cfg.train.max_segments), dev_gold);
    }
};

inline SynthExperiment make_experiment(PipelineConfig const &cfg)
{
    SynthExperiment e;
    e.cfg = cfg;
    e.corpus = generate_corpus(cfg.synth, cfg.segmentation, cfg.query_token_budget);
    e.data.documents = e.corpus.documents;
    e.data.store = make_document_store(e.data.documents);
    e.data.queries = e.corpus.queries;
    e.data.qrels = e.corpus.qrels;
    e.data.pools = e.corpus.candidates;
    e.data.gold = e.corpus.gold;
    e.data.stats = pipeline_stats(cfg, e.data.documents);
    e.split = split_queries(cfg, e.data.queries);
    e.train = pipeline_training_set(cfg, e.data, e.split.train);
    e.dev_set = pipeline_training_set(cfg, e.data, e.split.dev);
    e.dev = pipeline_eval_bundle(cfg, e.data, e.split.dev);
    for (auto const &[key, g] : e.corpus.gold) {
        if (e.split.dev.count(key.first) != 0) {
            e.dev_gold.emplace(key, g);
        }
    }
    return e;
}

inline PipelineConfig load_config(std::string const &path)
{
    std::ifstream in(path);
    if (!in) {
        throw UsageError("cannot open " + path);
    }
    return parse_config(in, path);
}

/// A small configuration that trains in well under a second.
inline PipelineConfig small_config(std::uint64_t seed)
{
    PipelineConfig cfg;
    cfg.set_seed(seed);
    cfg.synth.num_queries = 40;
    cfg.synth.docs_per_query = 4;
    cfg.synth.sentences_per_doc = 24;
    cfg.synth.tokens_per_sentence = 20;
    cfg.segmentation.max_tokens = 96;
    cfg.segmentation.min_tokens = 48;
    cfg.inference_max_tokens = 96;
    cfg.query_token_budget = 8;
    cfg.dev_queries = 10;
    cfg.train.epochs = 5;
    return cfg;
}

} // namespace testing_support
