#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <istream>
#include <ostream>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "segtrain/corpus.hpp"
#include "segtrain/error.hpp"

namespace segtrain {

inline constexpr std::size_t feature_dim = 7;

/// Query/segment features:
///   0 fraction of unique query terms present in the segment
///   1 sum of IDF over matched unique terms, divided by the unique query term count
///   2 BM25 of the segment body (k1=1.2, b=0.75, length relative to avg_segment_length)
///   3 log(1 + max term frequency of any query term)
///   4 fraction of query bigrams present as adjacent segment tokens
///   5 token_count / max_tokens
///   6 segment index / max_segments
using FeatureVector = std::array<double, feature_dim>;

inline constexpr double bm25_k1 = 1.2;
inline constexpr double bm25_b = 0.75;

inline double idf(std::size_t doc_count, std::size_t df)
{
    auto const n = static_cast<double>(doc_count);
    auto const d = static_cast<double>(df);
    return std::log(1.0 + (n - d + 0.5) / (d + 0.5));
}

inline FeatureVector extract_features(Query const &query, Segment const &segment, CorpusStats const &stats)
{
    FeatureVector f{};

    std::vector<Token const *> terms;
    {
        std::unordered_set<Token> seen;
        for (auto const &t : query.tokens) {
            if (seen.insert(t).second) {
                terms.push_back(&t);
            }
        }
    }

    std::unordered_map<std::string_view, std::size_t> tf;
    for (auto const &t : segment.tokens) {
        ++tf[t];
    }
    std::unordered_map<std::string_view, std::size_t> body_tf;
    for (auto const &t : segment.body()) {
        ++body_tf[t];
    }

    if (!terms.empty()) {
        auto const len = static_cast<double>(segment.token_count());
        double const norm = bm25_k1 * (1.0 - bm25_b + bm25_b * len / stats.avg_segment_length);
        std::size_t matched = 0;
        double idf_sum = 0.0;
        double bm25 = 0.0;
        std::size_t max_tf = 0;
        for (Token const *term : terms) {
            double const w = idf(stats.doc_count, stats.df(*term));
            if (auto it = tf.find(*term); it != tf.end()) {
                ++matched;
                idf_sum += w;
                max_tf = std::max(max_tf, it->second);
            }
            if (auto it = body_tf.find(*term); it != body_tf.end()) {
                auto const freq = static_cast<double>(it->second);
                bm25 += w * freq * (bm25_k1 + 1.0) / (freq + norm);
            }
        }
        auto const n_terms = static_cast<double>(terms.size());
        f[0] = static_cast<double>(matched) / n_terms;
        f[1] = idf_sum / n_terms;
        f[2] = bm25;
        f[3] = std::log1p(static_cast<double>(max_tf));
    }

    if (query.tokens.size() >= 2) {
        std::set<std::pair<std::string_view, std::string_view>> bigrams;
        for (std::size_t i = 0; i + 1 < query.tokens.size(); ++i) {
            bigrams.emplace(query.tokens[i], query.tokens[i + 1]);
        }
        std::set<std::pair<std::string_view, std::string_view>> present;
        for (std::size_t i = 0; i + 1 < segment.tokens.size(); ++i) {
            std::pair<std::string_view, std::string_view> bg{segment.tokens[i], segment.tokens[i + 1]};
            if (bigrams.count(bg) != 0) {
                present.insert(bg);
            }
        }
        f[4] = static_cast<double>(present.size()) / static_cast<double>(bigrams.size());
    }

    f[5] = static_cast<double>(segment.token_count()) / static_cast<double>(stats.max_tokens);
    f[6] = static_cast<double>(segment.index) / static_cast<double>(stats.max_segments);
    return f;
}

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

enum class ScorerKind { linear, mlp };

inline constexpr std::size_t default_hidden = 8;

inline char const *to_string(ScorerKind kind) { return kind == ScorerKind::linear ? "linear" : "mlp"; }

inline ScorerKind parse_scorer_kind(std::string_view s)
{
    if (s == "linear") {
        return ScorerKind::linear;
    }
    if (s == "mlp") {
        return ScorerKind::mlp;
    }
    throw UsageError("unknown scorer kind '" + std::string(s) + "'");
}

inline std::size_t parameter_count(ScorerKind kind, std::size_t hidden)
{
    return kind == ScorerKind::linear ? feature_dim + 1 : hidden * feature_dim + hidden + hidden + 1;
}

/// Flat parameter storage.
///   linear: w[0..7), bias
///   mlp:    W (hidden x 7, row-major), hidden bias (hidden), output weights (hidden), output bias
template <typename Tag>
struct ParameterBlock {
    ScorerKind kind = ScorerKind::linear;
    std::size_t hidden = 0;
    std::vector<double> values;

    ParameterBlock() = default;
    ParameterBlock(ScorerKind k, std::size_t h)
        : kind(k), hidden(k == ScorerKind::linear ? 0 : h), values(parameter_count(k, hidden), 0.0)
    {
        if (k == ScorerKind::mlp && h == 0) {
            throw UsageError("mlp scorer needs at least one hidden unit");
        }
    }

    template <typename Other>
    [[nodiscard]] bool same_shape(ParameterBlock<Other> const &o) const noexcept
    {
        return kind == o.kind && hidden == o.hidden && values.size() == o.values.size();
    }

    // linear view
    [[nodiscard]] double weight(std::size_t j) const { return values[j]; }
    [[nodiscard]] double &bias() { return values[feature_dim]; }
    [[nodiscard]] double bias() const { return values[feature_dim]; }

    // mlp view
    [[nodiscard]] std::size_t w_index(std::size_t h, std::size_t j) const noexcept { return h * feature_dim + j; }
    [[nodiscard]] std::size_t hb_index(std::size_t h) const noexcept { return hidden * feature_dim + h; }
    [[nodiscard]] std::size_t out_index(std::size_t h) const noexcept { return hidden * feature_dim + hidden + h; }
    [[nodiscard]] std::size_t out_bias_index() const noexcept { return values.size() - 1; }

    friend bool operator==(ParameterBlock const &, ParameterBlock const &) = default;
};

struct ParamsTag {};
struct GradientTag {};

using ScorerParams = ParameterBlock<ParamsTag>;
using Gradient = ParameterBlock<GradientTag>;

/// Weights uniform on [-0.1, 0.1] from a stream seeded with `seed`; biases zero.
inline ScorerParams init_params(ScorerKind kind, std::uint64_t seed, std::size_t hidden = default_hidden)
{
    ScorerParams p(kind, hidden);
    Rng rng(seed);
    std::uniform_real_distribution<double> u(-0.1, 0.1);
    if (kind == ScorerKind::linear) {
        for (std::size_t j = 0; j < feature_dim; ++j) {
            p.values[j] = u(rng);
        }
    } else {
        for (std::size_t h = 0; h < p.hidden; ++h) {
            for (std::size_t j = 0; j < feature_dim; ++j) {
                p.values[p.w_index(h, j)] = u(rng);
            }
        }
        for (std::size_t h = 0; h < p.hidden; ++h) {
            p.values[p.out_index(h)] = u(rng);
        }
    }
    return p;
}

namespace detail {

inline void check_shape(ScorerParams const &p)
{
    if (p.values.size() != parameter_count(p.kind, p.hidden)) {
        throw UsageError("scorer parameters have " + std::to_string(p.values.size()) + " values, expected " +
                         std::to_string(parameter_count(p.kind, p.hidden)));
    }
}

inline double mlp_pre(ScorerParams const &p, FeatureVector const &x, std::size_t h)
{
    double a = p.values[p.hb_index(h)];
    for (std::size_t j = 0; j < feature_dim; ++j) {
        a += p.values[p.w_index(h, j)] * x[j];
    }
    return a;
}

} // namespace detail

inline double score(ScorerParams const &params, FeatureVector const &x)
{
    detail::check_shape(params);
    if (params.kind == ScorerKind::linear) {
        double s = params.bias();
        for (std::size_t j = 0; j < feature_dim; ++j) {
            s += params.values[j] * x[j];
        }
        return s;
    }
    double s = params.values[params.out_bias_index()];
    for (std::size_t h = 0; h < params.hidden; ++h) {
        s += params.values[params.out_index(h)] * std::tanh(detail::mlp_pre(params, x, h));
    }
    return s;
}

/// Dimension-checked overload for externally supplied feature vectors.
inline double score(ScorerParams const &params, std::span<double const> x)
{
    if (x.size() != feature_dim) {
        throw UsageError("feature vector has " + std::to_string(x.size()) + " entries, expected " +
                         std::to_string(feature_dim));
    }
    FeatureVector f{};
    std::copy(x.begin(), x.end(), f.begin());
    return score(params, f);
}

/// Adds scale * d score(x) / d params into grad.
inline void accumulate_score_gradient(ScorerParams const &params, FeatureVector const &x, double scale,
                                      Gradient &grad)
{
    if (params.kind == ScorerKind::linear) {
        for (std::size_t j = 0; j < feature_dim; ++j) {
            grad.values[j] += scale * x[j];
        }
        grad.values[feature_dim] += scale;
        return;
    }
    for (std::size_t h = 0; h < params.hidden; ++h) {
        double const a = std::tanh(detail::mlp_pre(params, x, h));
        double const out = params.values[params.out_index(h)];
        double const delta = scale * out * (1.0 - a * a);
        for (std::size_t j = 0; j < feature_dim; ++j) {
            grad.values[params.w_index(h, j)] += delta * x[j];
        }
        grad.values[params.hb_index(h)] += delta;
        grad.values[params.out_index(h)] += scale * a;
    }
    grad.values[params.out_bias_index()] += scale;
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

enum class LossKind { pairwise_hinge, pointwise_cross_entropy };

inline char const *to_string(LossKind kind)
{
    return kind == LossKind::pairwise_hinge ? "pairwise_hinge" : "pointwise_cross_entropy";
}

inline LossKind parse_loss_kind(std::string_view s)
{
    if (s == "pairwise_hinge" || s == "hinge" || s == "pairwise") {
        return LossKind::pairwise_hinge;
    }
    if (s == "pointwise_cross_entropy" || s == "cross_entropy" || s == "pointwise") {
        return LossKind::pointwise_cross_entropy;
    }
    throw UsageError("unknown loss kind '" + std::string(s) + "'");
}

/// max(0, 1 - y_pos + y_neg)
inline double hinge_loss(double y_pos, double y_neg) { return std::max(0.0, 1.0 - y_pos + y_neg); }

/// log(1 + exp(z)) without overflow.
inline double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

inline double sigmoid(double z)
{
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    double const e = std::exp(z);
    return e / (1.0 + e);
}

/// Logistic cross-entropy on a raw score.
inline double pointwise_ce_loss(double y, int label) { return label != 0 ? softplus(-y) : softplus(y); }

struct PairwiseExample {
    std::string qid;
    std::string pos_doc;
    std::string neg_doc;
    std::size_t pos_segment = 0;
    std::size_t neg_segment = 0;
    FeatureVector pos{};
    FeatureVector neg{};
};

struct PointwiseExample {
    std::string qid;
    std::string doc;
    std::size_t segment = 0;
    FeatureVector x{};
    int label = 0;
};

struct LossAndGradient {
    double loss = 0.0;
    Gradient gradient;
};

/// Mean hinge loss and its gradient. At the kink (margin exactly 1) the subgradient is 0.
inline LossAndGradient batch_loss_and_gradient(ScorerParams const &params, std::span<PairwiseExample const> batch)
{
    if (batch.empty()) {
        throw UsageError("batch_loss_and_gradient: empty batch");
    }
    detail::check_shape(params);
    LossAndGradient out{0.0, Gradient(params.kind, params.hidden)};
    double const inv_n = 1.0 / static_cast<double>(batch.size());
    for (auto const &ex : batch) {
        double const l = hinge_loss(score(params, ex.pos), score(params, ex.neg));
        out.loss += l;
        if (l > 0.0) {
            accumulate_score_gradient(params, ex.pos, -inv_n, out.gradient);
            accumulate_score_gradient(params, ex.neg, inv_n, out.gradient);
        }
    }
    out.loss *= inv_n;
    return out;
}

/// Mean logistic cross-entropy and its gradient.
inline LossAndGradient batch_loss_and_gradient(ScorerParams const &params, std::span<PointwiseExample const> batch)
{
    if (batch.empty()) {
        throw UsageError("batch_loss_and_gradient: empty batch");
    }
    detail::check_shape(params);
    LossAndGradient out{0.0, Gradient(params.kind, params.hidden)};
    double const inv_n = 1.0 / static_cast<double>(batch.size());
    for (auto const &ex : batch) {
        double const y = score(params, ex.x);
        out.loss += pointwise_ce_loss(y, ex.label);
        double const dl_dy = sigmoid(y) - (ex.label != 0 ? 1.0 : 0.0);
        accumulate_score_gradient(params, ex.x, dl_dy * inv_n, out.gradient);
    }
    out.loss *= inv_n;
    return out;
}

inline ScorerParams sgd_step(ScorerParams const &params, Gradient const &grad, double lr)
{
    if (!params.same_shape(grad)) {
        throw UsageError("sgd_step: gradient shape does not match parameters");
    }
    for (double g : grad.values) {
        if (!std::isfinite(g)) {
            throw DataError("sgd_step: non-finite gradient");
        }
    }
    ScorerParams next = params;
    for (std::size_t i = 0; i < next.values.size(); ++i) {
        next.values[i] -= lr * grad.values[i];
    }
    return next;
}

// ---------------------------------------------------------------------------
// Model file
// ---------------------------------------------------------------------------

inline void write_model(ScorerParams const &params, std::ostream &out)
{
    detail::check_shape(params);
    out << "segtrain-model v1 kind=" << to_string(params.kind) << " dim=" << feature_dim
        << " hidden=" << params.hidden << '\n';
    char buf[64];
    for (double v : params.values) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out << buf << '\n';
    }
    if (!out) {
        throw DataError("write_model: stream failure");
    }
}

inline ScorerParams read_model(std::istream &in, std::string const &source = "model")
{
    std::string line;
    if (!std::getline(in, line)) {
        throw ParseError(source, 1, "missing header");
    }
    std::istringstream header(line);
    std::string magic, version, kind_field, dim_field, hidden_field;
    header >> magic >> version >> kind_field >> dim_field >> hidden_field;
    if (magic != "segtrain-model" || version != "v1" || kind_field.rfind("kind=", 0) != 0 ||
        dim_field.rfind("dim=", 0) != 0 || hidden_field.rfind("hidden=", 0) != 0) {
        throw ParseError(source, 1, "bad header '" + line + "'");
    }
    ScorerKind kind{};
    std::size_t dim = 0;
    std::size_t hidden = 0;
    try {
        kind = parse_scorer_kind(kind_field.substr(5));
        dim = std::stoul(dim_field.substr(4));
        hidden = std::stoul(hidden_field.substr(7));
    } catch (std::exception const &e) {
        throw ParseError(source, 1, std::string("bad header: ") + e.what());
    }
    if (dim != feature_dim) {
        throw ParseError(source, 1, "dim=" + std::to_string(dim) + " unsupported");
    }
    if ((kind == ScorerKind::linear) != (hidden == 0)) {
        throw ParseError(source, 1, "hidden size inconsistent with kind");
    }
    ScorerParams params(kind, hidden);
    std::size_t line_no = 1;
    for (double &v : params.values) {
        ++line_no;
        if (!std::getline(in, line)) {
            throw ParseError(source, line_no, "missing parameter");
        }
        char *end = nullptr;
        v = std::strtod(line.c_str(), &end);
        if (end == line.c_str() || *end != '\0') {
            throw ParseError(source, line_no, "bad parameter '" + line + "'");
        }
    }
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty()) {
            throw ParseError(source, line_no, "trailing data");
        }
    }
    return params;
}

} // namespace segtrain
