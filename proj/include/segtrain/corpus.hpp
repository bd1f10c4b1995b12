#pragma once

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "segtrain/error.hpp"
#include "segtrain/random.hpp"

namespace segtrain {

using Token = std::string;
using TokenSeq = std::vector<Token>;

// ---------------------------------------------------------------------------
// Tokenization
// ---------------------------------------------------------------------------

namespace detail {

inline bool is_token_byte(unsigned char c) noexcept
{
    // Bytes >= 0x80 are kept so UTF-8 words stay intact.
    return std::isalnum(c) != 0 || c >= 0x80;
}

inline bool is_terminator(char c) noexcept { return c == '.' || c == '!' || c == '?'; }

inline bool is_space(char c) noexcept { return std::isspace(static_cast<unsigned char>(c)) != 0; }

} // namespace detail

/// Lowercases and splits on anything that is not a letter or digit.
inline TokenSeq tokenize(std::string_view text)
{
    TokenSeq tokens;
    Token current;
    for (char ch : text) {
        auto const c = static_cast<unsigned char>(ch);
        if (detail::is_token_byte(c)) {
            current.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) {
        tokens.push_back(std::move(current));
    }
    return tokens;
}

/// Splits after '.', '!' or '?' when followed by whitespace or end of text.
/// Surrounding whitespace is trimmed; empty pieces are dropped.
inline std::vector<std::string> split_sentences(std::string_view text)
{
    std::vector<std::string> sentences;
    auto flush = [&](std::size_t begin, std::size_t end) {
        while (begin < end && detail::is_space(text[begin])) {
            ++begin;
        }
        while (end > begin && detail::is_space(text[end - 1])) {
            --end;
        }
        if (end > begin) {
            sentences.emplace_back(text.substr(begin, end - begin));
        }
    };
    std::size_t start = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (detail::is_terminator(text[i]) && (i + 1 == text.size() || detail::is_space(text[i + 1]))) {
            flush(start, i + 1);
            start = i + 1;
        }
    }
    flush(start, text.size());
    return sentences;
}

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

struct Query {
    std::string id;
    std::string text;
    TokenSeq tokens;
};

inline Query make_query(std::string id, std::string text)
{
    if (id.empty()) {
        throw DataError("query id must be non-empty");
    }
    auto tokens = tokenize(text);
    return Query{std::move(id), std::move(text), std::move(tokens)};
}

struct Document {
    std::string id;
    std::string title;
    TokenSeq title_tokens;
    std::vector<TokenSeq> sentences;
    std::size_t body_token_count = 0;

    [[nodiscard]] std::size_t sentence_count() const noexcept { return sentences.size(); }
};

/// Builds a document from raw title and body text. Sentences that contain no
/// tokens (e.g. a stray "...") are dropped so every span covers real content.
inline Document make_document(std::string id, std::string title, std::string_view body)
{
    if (id.empty()) {
        throw DataError("document id must be non-empty");
    }
    Document doc;
    doc.id = std::move(id);
    doc.title_tokens = tokenize(title);
    doc.title = std::move(title);
    for (auto const &sentence : split_sentences(body)) {
        auto tokens = tokenize(sentence);
        if (tokens.empty()) {
            continue;
        }
        doc.body_token_count += tokens.size();
        doc.sentences.push_back(std::move(tokens));
    }
    return doc;
}

struct SentenceSpan {
    std::size_t start = 0;
    std::size_t end = 0; // exclusive

    [[nodiscard]] std::size_t size() const noexcept { return end - start; }
    friend bool operator==(SentenceSpan const &, SentenceSpan const &) = default;
};

struct Segment {
    std::string doc_id;
    std::size_t index = 0;
    SentenceSpan span;
    std::size_t title_token_count = 0;
    TokenSeq tokens; // title tokens followed by the span's body tokens

    [[nodiscard]] std::size_t token_count() const noexcept { return tokens.size(); }
    [[nodiscard]] std::span<Token const> body() const noexcept
    {
        return std::span<Token const>(tokens).subspan(title_token_count);
    }
};

enum class SegmentationMode { training, inference };

inline constexpr std::size_t unbounded_segments = std::numeric_limits<std::size_t>::max();

struct SegmentationPolicy {
    SegmentationMode mode = SegmentationMode::training;
    std::size_t max_tokens = 512;
    std::size_t min_tokens = 128;
    std::size_t max_segments = 4;
    std::uint64_t seed = 0;

    static SegmentationPolicy training(std::uint64_t seed = 0)
    {
        return SegmentationPolicy{SegmentationMode::training, 512, 128, 4, seed};
    }

    static SegmentationPolicy inference(std::size_t max_tokens = 512)
    {
        return SegmentationPolicy{SegmentationMode::inference, max_tokens, std::min<std::size_t>(128, max_tokens),
                                  unbounded_segments, 0};
    }

    void validate() const
    {
        if (max_tokens == 0 || min_tokens == 0 || max_segments == 0) {
            throw UsageError("segmentation policy: max_tokens, min_tokens and max_segments must be positive");
        }
        if (min_tokens > max_tokens) {
            throw UsageError("segmentation policy: min_tokens must not exceed max_tokens");
        }
    }
};

// ---------------------------------------------------------------------------
// Segmentation
// ---------------------------------------------------------------------------

namespace detail {

inline Segment make_segment(Document const &doc, std::size_t index, SentenceSpan span)
{
    Segment seg;
    seg.doc_id = doc.id;
    seg.index = index;
    seg.span = span;
    seg.title_token_count = doc.title_tokens.size();
    seg.tokens = doc.title_tokens;
    for (std::size_t s = span.start; s < span.end; ++s) {
        seg.tokens.insert(seg.tokens.end(), doc.sentences[s].begin(), doc.sentences[s].end());
    }
    return seg;
}

inline std::size_t body_budget(std::size_t total, std::size_t overhead) noexcept
{
    return total > overhead ? total - overhead : 1;
}

/// Greedily packs whole sentences starting at `start` into at most `budget` body
/// tokens. Returns the exclusive end; a sentence longer than the budget is taken alone.
inline std::size_t pack_sentences(Document const &doc, std::size_t start, std::size_t budget)
{
    std::size_t end = start;
    std::size_t used = 0;
    while (end < doc.sentences.size()) {
        std::size_t const len = doc.sentences[end].size();
        if (end > start && used + len > budget) {
            break;
        }
        used += len;
        ++end;
        if (used >= budget) {
            break;
        }
    }
    return end;
}

} // namespace detail

/// Training segmentation: per-segment budgets are drawn uniformly from
/// [min_tokens, max_tokens], less the title and query overhead. Only the
/// leading policy.max_segments segments are produced.
inline std::vector<Segment> segment_for_training(Document const &doc, std::size_t query_token_budget,
                                                 SegmentationPolicy const &policy, Rng &rng)
{
    policy.validate();
    if (policy.mode != SegmentationMode::training) {
        throw UsageError("segment_for_training requires a training-mode policy");
    }
    std::vector<Segment> segments;
    if (doc.sentences.empty()) {
        segments.push_back(detail::make_segment(doc, 0, {0, 0}));
        return segments;
    }
    std::uniform_int_distribution<std::size_t> draw(policy.min_tokens, policy.max_tokens);
    std::size_t const overhead = doc.title_tokens.size() + query_token_budget;
    std::size_t start = 0;
    while (start < doc.sentences.size() && segments.size() < policy.max_segments) {
        std::size_t const budget = detail::body_budget(draw(rng), overhead);
        std::size_t const end = detail::pack_sentences(doc, start, budget);
        segments.push_back(detail::make_segment(doc, segments.size(), {start, end}));
        start = end;
    }
    return segments;
}

/// Training segmentation with the document's own stream, derived from policy.seed
/// and the document id. Every component that needs "the" training segmentation of a
/// document goes through here.
inline std::vector<Segment> training_segments(Document const &doc, std::size_t query_token_budget,
                                              SegmentationPolicy const &policy)
{
    Rng rng(derive_seed(policy.seed, doc.id));
    return segment_for_training(doc, query_token_budget, policy, rng);
}

/// Inference segmentation: non-overlapping sentence-aligned windows of at most
/// max_tokens tokens (title included) covering the whole body.
inline std::vector<Segment> segment_for_inference(Document const &doc, std::size_t max_tokens)
{
    if (max_tokens == 0) {
        throw UsageError("segment_for_inference: max_tokens must be positive");
    }
    std::vector<Segment> segments;
    if (doc.sentences.empty()) {
        segments.push_back(detail::make_segment(doc, 0, {0, 0}));
        return segments;
    }
    std::size_t const budget = detail::body_budget(max_tokens, doc.title_tokens.size());
    std::size_t start = 0;
    while (start < doc.sentences.size()) {
        std::size_t const end = detail::pack_sentences(doc, start, budget);
        segments.push_back(detail::make_segment(doc, segments.size(), {start, end}));
        start = end;
    }
    return segments;
}

// ---------------------------------------------------------------------------
// Corpus statistics
// ---------------------------------------------------------------------------

struct CorpusStats {
    std::size_t doc_count = 0;
    std::unordered_map<Token, std::size_t> document_frequency;
    double avg_segment_length = 1.0;
    // Normalizers for the positional features.
    std::size_t max_tokens = 512;
    std::size_t max_segments = 4;

    [[nodiscard]] std::size_t df(Token const &term) const
    {
        auto it = document_frequency.find(term);
        return it == document_frequency.end() ? 0 : it->second;
    }
};

/// Document frequencies over title and body tokens; the average segment length is
/// taken over the inference segmentation at `max_tokens`.
inline CorpusStats compute_corpus_stats(std::span<Document const> docs, std::size_t max_tokens = 512,
                                        std::size_t max_segments = 4)
{
    if (docs.empty()) {
        throw DataError("compute_corpus_stats: empty corpus");
    }
    CorpusStats stats;
    stats.doc_count = docs.size();
    stats.max_tokens = max_tokens;
    stats.max_segments = max_segments;
    std::size_t segment_tokens = 0;
    std::size_t segment_count = 0;
    std::unordered_set<Token> seen;
    for (auto const &doc : docs) {
        seen.clear();
        seen.insert(doc.title_tokens.begin(), doc.title_tokens.end());
        for (auto const &sentence : doc.sentences) {
            seen.insert(sentence.begin(), sentence.end());
        }
        for (auto const &term : seen) {
            ++stats.document_frequency[term];
        }
        for (auto const &seg : segment_for_inference(doc, max_tokens)) {
            segment_tokens += seg.token_count();
            ++segment_count;
        }
    }
    stats.avg_segment_length =
        segment_tokens == 0 ? 1.0 : static_cast<double>(segment_tokens) / static_cast<double>(segment_count);
    return stats;
}

} // namespace segtrain
