#pragma once

#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "segtrain/corpus.hpp"
#include "segtrain/error.hpp"
#include "segtrain/eval.hpp"
#include "segtrain/ranking.hpp"
#include "segtrain/selection.hpp"
#include "segtrain/synth.hpp"

namespace segtrain {

namespace detail {

inline std::vector<std::string> split_ws(std::string const &line)
{
    std::istringstream in(line);
    std::vector<std::string> fields;
    for (std::string f; in >> f;) {
        fields.push_back(f);
    }
    return fields;
}

inline bool is_blank(std::string const &line)
{
    return line.find_first_not_of(" \t\r\n") == std::string::npos;
}

inline long long parse_integer(std::string const &s, std::string const &source, std::size_t line, char const *what)
{
    try {
        std::size_t used = 0;
        long long v = std::stoll(s, &used);
        if (used == s.size()) {
            return v;
        }
    } catch (std::exception const &) {
    }
    throw ParseError(source, line, std::string("bad ") + what + " '" + s + "'");
}

inline double parse_real(std::string const &s, std::string const &source, std::size_t line, char const *what)
{
    char *end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (s.empty() || *end != '\0') {
        throw ParseError(source, line, std::string("bad ") + what + " '" + s + "'");
    }
    return v;
}

inline void strip_cr(std::string &line)
{
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
}

inline nlohmann::json parse_json_line(std::string const &line, std::string const &source, std::size_t line_no)
{
    try {
        auto j = nlohmann::json::parse(line);
        if (!j.is_object()) {
            throw ParseError(source, line_no, "expected a JSON object");
        }
        return j;
    } catch (nlohmann::json::exception const &e) {
        throw ParseError(source, line_no, e.what());
    }
}

template <typename T>
T json_field(nlohmann::json const &j, char const *key, std::string const &source, std::size_t line_no)
{
    auto it = j.find(key);
    if (it == j.end()) {
        throw ParseError(source, line_no, std::string("missing field '") + key + "'");
    }
    try {
        return it->get<T>();
    } catch (nlohmann::json::exception const &) {
        throw ParseError(source, line_no, std::string("field '") + key + "' has the wrong type");
    }
}

} // namespace detail

// ---------------------------------------------------------------------------
// qrels: "qid 0 docid grade"
// ---------------------------------------------------------------------------

inline Qrels parse_qrels(std::istream &in, std::string const &source = "qrels")
{
    Qrels qrels;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::is_blank(line)) {
            continue;
        }
        auto f = detail::split_ws(line);
        if (f.size() != 4) {
            throw ParseError(source, line_no, "expected 4 fields, got " + std::to_string(f.size()));
        }
        auto grade = detail::parse_integer(f[3], source, line_no, "grade");
        if (grade < 0) {
            throw ParseError(source, line_no, "negative grade");
        }
        qrels.set(f[0], f[2], static_cast<int>(grade));
    }
    return qrels;
}

inline void write_qrels(Qrels const &qrels, std::ostream &out)
{
    for (auto const &[qid, docs] : qrels.grades) {
        for (auto const &[doc, g] : docs) {
            out << qid << " 0 " << doc << ' ' << g << '\n';
        }
    }
}

// ---------------------------------------------------------------------------
// run: "qid Q0 docid rank score tag"
// ---------------------------------------------------------------------------

inline void write_run(Run const &run, std::string const &tag, std::ostream &out)
{
    char buf[64];
    for (auto const &[qid, list] : run) {
        for (auto const &e : list.entries) {
            std::snprintf(buf, sizeof buf, "%.6f", e.score);
            out << qid << " Q0 " << e.doc_id << ' ' << e.rank << ' ' << buf << ' ' << tag << '\n';
        }
    }
    if (!out) {
        throw DataError("write_run: stream failure");
    }
}

/// Entries are ordered by rank; scores must be non-increasing with rank.
inline Run parse_run(std::istream &in, std::string const &source = "run")
{
    Run run;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::is_blank(line)) {
            continue;
        }
        auto f = detail::split_ws(line);
        if (f.size() != 6) {
            throw ParseError(source, line_no, "expected 6 fields, got " + std::to_string(f.size()));
        }
        auto rank = detail::parse_integer(f[3], source, line_no, "rank");
        if (rank < 1) {
            throw ParseError(source, line_no, "rank must be >= 1");
        }
        auto &list = run[f[0]];
        list.query_id = f[0];
        list.entries.push_back({f[2], detail::parse_real(f[4], source, line_no, "score"),
                                static_cast<std::size_t>(rank)});
    }
    for (auto &[qid, list] : run) {
        std::stable_sort(list.entries.begin(), list.entries.end(),
                         [](auto const &a, auto const &b) { return a.rank < b.rank; });
        std::set<std::string_view> seen;
        for (auto const &e : list.entries) {
            if (!seen.insert(e.doc_id).second) {
                throw DataError(source + ": duplicate document " + e.doc_id + " for query " + qid);
            }
        }
    }
    return run;
}

// ---------------------------------------------------------------------------
// corpus (JSON lines {"doc_id","title","body"}) and queries (qid<TAB>text)
// ---------------------------------------------------------------------------

inline std::vector<CorpusRecord> parse_corpus_records(std::istream &in, std::string const &source = "corpus")
{
    std::vector<CorpusRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::is_blank(line)) {
            continue;
        }
        auto j = detail::parse_json_line(line, source, line_no);
        records.push_back({detail::json_field<std::string>(j, "doc_id", source, line_no),
                           detail::json_field<std::string>(j, "title", source, line_no),
                           detail::json_field<std::string>(j, "body", source, line_no)});
        if (records.back().doc_id.empty()) {
            throw ParseError(source, line_no, "empty doc_id");
        }
    }
    return records;
}

inline std::vector<Document> parse_corpus(std::istream &in, std::string const &source = "corpus")
{
    std::vector<Document> docs;
    for (auto &r : parse_corpus_records(in, source)) {
        docs.push_back(make_document(std::move(r.doc_id), std::move(r.title), r.body));
    }
    return docs;
}

inline void write_corpus(std::vector<CorpusRecord> const &records, std::ostream &out)
{
    for (auto const &r : records) {
        nlohmann::ordered_json j;
        j["doc_id"] = r.doc_id;
        j["title"] = r.title;
        j["body"] = r.body;
        out << j.dump() << '\n';
    }
}

inline std::vector<Query> parse_queries(std::istream &in, std::string const &source = "queries")
{
    std::vector<Query> queries;
    std::set<std::string> ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        detail::strip_cr(line);
        if (detail::is_blank(line)) {
            continue;
        }
        auto tab = line.find('\t');
        if (tab == std::string::npos || tab == 0) {
            throw ParseError(source, line_no, "expected 'qid<TAB>text'");
        }
        std::string id = line.substr(0, tab);
        if (!ids.insert(id).second) {
            throw ParseError(source, line_no, "duplicate query id '" + id + "'");
        }
        queries.push_back(make_query(std::move(id), line.substr(tab + 1)));
    }
    return queries;
}

inline void write_queries(std::vector<Query> const &queries, std::ostream &out)
{
    for (auto const &q : queries) {
        out << q.id << '\t' << q.text << '\n';
    }
}

// ---------------------------------------------------------------------------
// selection (JSON lines {qid, doc_id, segment_index, score}) and gold
// ---------------------------------------------------------------------------

/// One record per pair, sorted by (qid, doc_id). Scores keep full double precision.
inline void write_selection(SegmentIndexMap const &selection, std::ostream &out)
{
    for (auto const &[key, index] : selection.index) {
        nlohmann::ordered_json j;
        j["qid"] = key.first;
        j["doc_id"] = key.second;
        j["segment_index"] = index;
        auto s = selection.score.find(key);
        j["score"] = s == selection.score.end() ? 0.0 : s->second;
        out << j.dump() << '\n';
    }
}

inline SegmentIndexMap parse_selection(std::istream &in, std::string const &source = "selection")
{
    SegmentIndexMap selection;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::is_blank(line)) {
            continue;
        }
        auto j = detail::parse_json_line(line, source, line_no);
        QueryDocKey key{detail::json_field<std::string>(j, "qid", source, line_no),
                        detail::json_field<std::string>(j, "doc_id", source, line_no)};
        auto index = detail::json_field<std::size_t>(j, "segment_index", source, line_no);
        double score = j.contains("score") ? detail::json_field<double>(j, "score", source, line_no) : 0.0;
        if (selection.index.count(key) != 0) {
            throw ParseError(source, line_no, "duplicate pair (" + key.first + ", " + key.second + ")");
        }
        selection.set(key, index, score);
    }
    return selection;
}

inline void write_gold(GoldSegments const &gold, std::ostream &out)
{
    for (auto const &[key, index] : gold) {
        nlohmann::ordered_json j;
        j["qid"] = key.first;
        j["doc_id"] = key.second;
        j["gold_segment_index"] = index;
        out << j.dump() << '\n';
    }
}

inline GoldSegments parse_gold(std::istream &in, std::string const &source = "gold")
{
    GoldSegments gold;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::is_blank(line)) {
            continue;
        }
        auto j = detail::parse_json_line(line, source, line_no);
        gold[{detail::json_field<std::string>(j, "qid", source, line_no),
              detail::json_field<std::string>(j, "doc_id", source, line_no)}] =
            detail::json_field<std::size_t>(j, "gold_segment_index", source, line_no);
    }
    return gold;
}

// ---------------------------------------------------------------------------
// Segments (JSON lines), for inspection
// ---------------------------------------------------------------------------

inline void write_segments(std::vector<Segment> const &segments, std::ostream &out)
{
    for (auto const &s : segments) {
        nlohmann::ordered_json j;
        j["doc_id"] = s.doc_id;
        j["index"] = s.index;
        j["start"] = s.span.start;
        j["end"] = s.span.end;
        j["token_count"] = s.token_count();
        j["tokens"] = s.tokens;
        out << j.dump() << '\n';
    }
}

// ---------------------------------------------------------------------------
// File helpers
// ---------------------------------------------------------------------------

inline std::ifstream open_input(std::string const &path)
{
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open '" + path + "' for reading");
    }
    return in;
}

inline std::ofstream open_output(std::string const &path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw DataError("cannot open '" + path + "' for writing");
    }
    return out;
}

template <typename Parser>
auto read_file(std::string const &path, Parser &&parser)
{
    auto in = open_input(path);
    return parser(in, path);
}

} // namespace segtrain
