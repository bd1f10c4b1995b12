// segtrain: command-line driver for segment-selection training and evaluation.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "segtrain.hpp"

namespace fs = std::filesystem;
using namespace segtrain;

namespace {

constexpr int exit_usage = 1;
constexpr int exit_data = 2;

struct SharedOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> threads;
    std::string out;
    std::vector<std::string> overrides;
    std::string corpus, queries, qrels, candidates, gold;
};

void add_shared(CLI::App *cmd, SharedOptions &o, bool inputs = true)
{
    cmd->add_option("--config", o.config_path, "key=value configuration file");
    cmd->add_option("--seed", o.seed, "seed for every random stream");
    cmd->add_option("--threads", o.threads, "worker threads for feature extraction and selection");
    cmd->add_option("--out", o.out, "output path");
    cmd->add_option("--set", o.overrides, "override a config key (key=value), repeatable");
    if (inputs) {
        cmd->add_option("--corpus", o.corpus, "corpus JSON lines");
        cmd->add_option("--queries", o.queries, "queries TSV");
        cmd->add_option("--qrels", o.qrels, "TREC qrels");
        cmd->add_option("--candidates", o.candidates, "first-stage TREC run (re-ranking pools)");
        cmd->add_option("--gold", o.gold, "gold segment JSON lines");
    }
}

PipelineConfig resolve_config(SharedOptions const &o)
{
    PipelineConfig cfg;
    if (!o.config_path.empty()) {
        std::ifstream in(o.config_path);
        if (!in) {
            throw UsageError("cannot open config '" + o.config_path + "'");
        }
        cfg = parse_config(in, o.config_path);
    }
    for (auto const &kv : o.overrides) {
        auto eq = kv.find('=');
        if (eq == std::string::npos) {
            throw UsageError("--set expects key=value, got '" + kv + "'");
        }
        apply_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (o.seed) {
        cfg.set_seed(*o.seed);
    }
    if (o.threads) {
        cfg.set_threads(*o.threads);
    }
    auto set_path = [](std::string &dst, std::string const &src) {
        if (!src.empty()) {
            dst = src;
        }
    };
    set_path(cfg.corpus, o.corpus);
    set_path(cfg.queries, o.queries);
    set_path(cfg.qrels, o.qrels);
    set_path(cfg.candidates, o.candidates);
    set_path(cfg.gold, o.gold);
    cfg.validate();
    return cfg;
}

std::string require_out(SharedOptions const &o)
{
    if (o.out.empty()) {
        throw UsageError("--out is required");
    }
    return o.out;
}

template <typename Writer>
void write_to(std::string const &path, Writer &&writer)
{
    if (path.empty() || path == "-") {
        writer(std::cout);
        return;
    }
    auto out = open_output(path);
    writer(out);
}

std::set<std::string> all_query_ids(std::vector<Query> const &queries)
{
    std::set<std::string> ids;
    for (auto const &q : queries) {
        ids.insert(q.id);
    }
    return ids;
}

std::set<std::string> pick_split(PipelineConfig const &cfg, std::vector<Query> const &queries, std::string const &which)
{
    if (which == "all") {
        return all_query_ids(queries);
    }
    auto split = split_queries(cfg, queries);
    if (which == "train") {
        return split.train;
    }
    if (which == "dev") {
        return split.dev;
    }
    throw UsageError("--split must be train, dev or all");
}

// ---------------------------------------------------------------------------

int cmd_synth(SharedOptions const &o)
{
    auto cfg = resolve_config(o);
    auto corpus = generate_corpus(cfg.synth, cfg.segmentation, cfg.query_token_budget);
    write_synth_corpus(corpus, require_out(o));
    std::cerr << "synth: " << corpus.queries.size() << " queries, " << corpus.documents.size() << " documents\n";
    return 0;
}

int cmd_segment(SharedOptions const &o, std::string const &mode)
{
    auto cfg = resolve_config(o);
    if (cfg.corpus.empty()) {
        throw UsageError("missing input: corpus");
    }
    auto docs = read_file(cfg.corpus, [](auto &in, auto const &src) { return parse_corpus(in, src); });
    write_to(o.out, [&](std::ostream &out) {
        for (auto const &doc : docs) {
            if (mode == "training") {
                write_segments(training_segments(doc, cfg.query_token_budget, cfg.segmentation), out);
            } else if (mode == "inference") {
                write_segments(segment_for_inference(doc, cfg.inference_max_tokens), out);
            } else {
                throw UsageError("--mode must be training or inference");
            }
        }
    });
    return 0;
}

void write_history(std::string const &path, std::vector<std::tuple<std::size_t, double, std::size_t>> const &rows)
{
    auto out = open_output(path);
    out << "iteration\tvalidation_mrr\tepochs\n";
    char buf[64];
    for (auto const &[n, metric, epochs] : rows) {
        std::snprintf(buf, sizeof buf, "%.17g", metric);
        out << n << '\t' << buf << '\t' << epochs << '\n';
    }
}

int cmd_train(SharedOptions const &o, std::string const &mode)
{
    auto cfg = resolve_config(o);
    auto const dir = fs::path(require_out(o));
    bool const gold_mode = mode == "gold";
    auto data = load_pipeline_data(cfg, true, gold_mode);
    auto split = split_queries(cfg, data.queries);
    if (split.dev.empty()) {
        throw UsageError("training needs validation queries: set dev_queries or folds");
    }
    auto train_set = pipeline_training_set(cfg, data, split.train);
    auto dev = pipeline_eval_bundle(cfg, data, split.dev);

    ScorerParams model;
    SegmentIndexMap selection;
    std::vector<std::tuple<std::size_t, double, std::size_t>> history;
    if (mode == "best") {
        auto result = best_train(train_set, dev, cfg.train, [](IterationState const &s) {
            std::cerr << "iteration " << s.n << ": validation mrr " << s.validation_metric << " (" << s.epochs_run
                      << " epochs)\n";
        });
        history.emplace_back(0, result.theta0_metric, 0);
        for (auto const &s : result.history) {
            history.emplace_back(s.n, s.validation_metric, s.epochs_run);
        }
        model = result.best().params;
        selection = result.best().selection;
        std::cerr << "best iteration: " << result.best_iteration << '\n';
    } else if (mode == "theta0") {
        auto outcome = train_single(train_set, dev, AllSegments{}, cfg.train, cfg.train.seed);
        history.emplace_back(0, outcome.validation_metric, outcome.epochs_run);
        model = outcome.params;
        selection = select_segments(model, train_set, cfg.train.max_segments, cfg.train.threads);
    } else if (mode == "first" || gold_mode) {
        auto source = gold_mode ? SelectionSource::gold : SelectionSource::first;
        selection = gold_mode ? gold_selection(train_set, data.gold) : first_segment_selection(train_set);
        auto outcome = train_baseline(train_set, dev, source, cfg.train, &data.gold);
        history.emplace_back(1, outcome.validation_metric, outcome.epochs_run);
        model = outcome.params;
    } else {
        throw UsageError("--mode must be first, gold, best or theta0");
    }

    fs::create_directories(dir);
    {
        auto out = open_output((dir / "model.txt").string());
        write_model(model, out);
    }
    {
        auto out = open_output((dir / "selection.jsonl").string());
        write_selection(selection, out);
    }
    write_history((dir / "history.tsv").string(), history);
    return 0;
}

int cmd_select(SharedOptions const &o, std::string const &model_path, std::string const &which)
{
    auto cfg = resolve_config(o);
    auto model = read_file(model_path, [](auto &in, auto const &src) { return read_model(in, src); });
    auto data = load_pipeline_data(cfg, true, false);
    auto set = pipeline_training_set(cfg, data, pick_split(cfg, data.queries, which));
    auto selection = select_segments(model, set, cfg.train.max_segments, cfg.train.threads);
    write_to(o.out, [&](std::ostream &out) { write_selection(selection, out); });
    return 0;
}

int cmd_rerank(SharedOptions const &o, std::string const &model_path, std::string const &mode, std::string const &which)
{
    auto cfg = resolve_config(o);
    auto model = read_file(model_path, [](auto &in, auto const &src) { return read_model(in, src); });
    auto data = load_pipeline_data(cfg, false, false);
    auto const agg = parse_aggregation(mode);
    auto const ids = pick_split(cfg, data.queries, which);
    Run run;
    for (auto const &q : data.queries) {
        auto pool = data.pools.find(q.id);
        if (ids.count(q.id) == 0 || pool == data.pools.end() || pool->second.empty()) {
            continue;
        }
        std::vector<Document> candidates;
        for (auto const &d : pool->second) {
            auto it = data.store.find(d);
            if (it == data.store.end()) {
                throw DataError("candidate '" + d + "' for " + q.id + " is not in the corpus");
            }
            candidates.push_back(it->second);
        }
        run.emplace(q.id, rerank(model, q, candidates, agg, data.stats, cfg.train.threads));
    }
    write_to(o.out, [&](std::ostream &out) { write_run(run, cfg.tag, out); });
    return 0;
}

void write_per_query(std::string const &path, PerQuery const &mrr_q, PerQuery const &ndcg_q,
                     PerQuery const *base_mrr, PerQuery const *base_ndcg)
{
    auto out = open_output(path);
    out << "qid\tmrr\tndcg";
    if (base_mrr != nullptr) {
        out << "\tbaseline_mrr\tbaseline_ndcg";
    }
    out << '\n';
    char buf[64];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.6f", v);
        out << '\t' << buf;
    };
    for (auto const &[qid, v] : mrr_q) {
        out << qid;
        put(v);
        put(ndcg_q.at(qid));
        if (base_mrr != nullptr) {
            put(base_mrr->at(qid));
            put(base_ndcg->at(qid));
        }
        out << '\n';
    }
}

int cmd_eval(SharedOptions const &o, std::string const &run_path, std::string const &baseline_path,
             std::string const &per_query_path)
{
    auto cfg = resolve_config(o);
    if (cfg.qrels.empty()) {
        throw UsageError("missing input: qrels");
    }
    auto qrels = read_file(cfg.qrels, [](auto &in, auto const &src) { return parse_qrels(in, src); });
    auto run = read_file(run_path, [](auto &in, auto const &src) { return parse_run(in, src); });
    // Score only the queries the run covers, so a dev-split run is not diluted.
    Qrels judged;
    for (auto const &[qid, docs] : qrels.grades) {
        if (run.count(qid) != 0) {
            judged.grades[qid] = docs;
        }
    }
    auto const mrr_q = mrr_per_query(run, judged, cfg.mrr_cutoff);
    auto const ndcg_q = ndcg_per_query(run, judged, cfg.ndcg_k);

    std::optional<PerQuery> base_mrr;
    std::optional<PerQuery> base_ndcg;
    if (!baseline_path.empty()) {
        auto base = read_file(baseline_path, [](auto &in, auto const &src) { return parse_run(in, src); });
        base_mrr = mrr_per_query(base, judged, cfg.mrr_cutoff);
        base_ndcg = ndcg_per_query(base, judged, cfg.ndcg_k);
    }

    write_to(o.out, [&](std::ostream &out) {
        char buf[64];
        auto kv = [&](std::string const &key, double v, char const *format = "%.6f") {
            std::snprintf(buf, sizeof buf, format, v);
            out << key << '=' << buf << '\n';
        };
        out << "# mrr cutoff " << cfg.mrr_cutoff << " is a convention, not a measured setting\n";
        out << "queries=" << mrr_q.size() << '\n';
        kv("mrr@" + std::to_string(cfg.mrr_cutoff), detail::mean_of(mrr_q));
        kv("ndcg@" + std::to_string(cfg.ndcg_k), detail::mean_of(ndcg_q));
        if (base_mrr) {
            auto values = [](PerQuery const &p) {
                std::vector<double> v;
                for (auto const &[q, x] : p) {
                    v.push_back(x);
                }
                return v;
            };
            kv("baseline_mrr@" + std::to_string(cfg.mrr_cutoff), detail::mean_of(*base_mrr));
            kv("baseline_ndcg@" + std::to_string(cfg.ndcg_k), detail::mean_of(*base_ndcg));
            kv("ttest_p_mrr", paired_t_test(values(mrr_q), values(*base_mrr)), "%.6g");
            kv("ttest_p_ndcg", paired_t_test(values(ndcg_q), values(*base_ndcg)), "%.6g");
        }
    });
    if (!per_query_path.empty()) {
        write_per_query(per_query_path, mrr_q, ndcg_q, base_mrr ? &*base_mrr : nullptr,
                        base_ndcg ? &*base_ndcg : nullptr);
    }
    return 0;
}

int cmd_eval_selection(SharedOptions const &o, std::string const &selection_path)
{
    auto cfg = resolve_config(o);
    if (cfg.gold.empty()) {
        throw UsageError("missing input: gold");
    }
    auto selection = read_file(selection_path, [](auto &in, auto const &src) { return parse_selection(in, src); });
    auto gold = read_file(cfg.gold, [](auto &in, auto const &src) { return parse_gold(in, src); });
    GoldSegments covered;
    for (auto const &[key, g] : gold) {
        if (selection.index.count(key) != 0) {
            covered.emplace(key, g);
        }
    }
    if (covered.empty()) {
        throw DataError("selection covers none of the gold pairs");
    }
    write_to(o.out, [&](std::ostream &out) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.6f", segment_p_at_1(selection, covered));
        out << "pairs=" << covered.size() << '\n' << "p_at_1=" << buf << '\n';
    });
    return 0;
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"Segment-selection training and evaluation for length-limited rankers"};
    app.require_subcommand(1);

    SharedOptions o;
    std::string mode;
    std::string model_path;
    std::string run_path;
    std::string baseline_path;
    std::string per_query_path;
    std::string selection_path;
    std::string split = "all";

    auto *synth = app.add_subcommand("synth", "generate a synthetic collection with gold segments");
    add_shared(synth, o, false);

    auto *segment = app.add_subcommand("segment", "emit document segments as JSON lines");
    add_shared(segment, o);
    segment->add_option("--mode", mode, "training | inference")->required();

    auto *train = app.add_subcommand("train", "train a scorer");
    add_shared(train, o);
    train->add_option("--mode", mode, "first | gold | best | theta0")->required();

    auto *select = app.add_subcommand("select", "emit the selected segment per judged pair");
    add_shared(select, o);
    select->add_option("--model", model_path, "model file")->required();
    select->add_option("--split", split, "train | dev | all");

    auto *rerank_cmd = app.add_subcommand("rerank", "re-rank candidate pools into a TREC run");
    add_shared(rerank_cmd, o);
    rerank_cmd->add_option("--model", model_path, "model file")->required();
    rerank_cmd->add_option("--mode", mode, "firstp | maxp")->required();
    rerank_cmd->add_option("--split", split, "train | dev | all");

    auto *eval = app.add_subcommand("eval", "MRR / NDCG of a run, with an optional paired t-test");
    add_shared(eval, o);
    eval->add_option("--run", run_path, "run to evaluate")->required();
    eval->add_option("--baseline-run", baseline_path, "run to compare against");
    eval->add_option("--per-query", per_query_path, "per-query TSV output");

    auto *eval_sel = app.add_subcommand("eval-selection", "segment P@1 of a selection against gold");
    add_shared(eval_sel, o);
    eval_sel->add_option("--selection", selection_path, "selection JSON lines")->required();

    try {
        app.parse(argc, argv);
    } catch (CLI::ParseError const &e) {
        int code = app.exit(e);
        return code == 0 ? 0 : exit_usage;
    }

    try {
        if (synth->parsed()) {
            return cmd_synth(o);
        }
        if (segment->parsed()) {
            return cmd_segment(o, mode);
        }
        if (train->parsed()) {
            return cmd_train(o, mode);
        }
        if (select->parsed()) {
            return cmd_select(o, model_path, split);
        }
        if (rerank_cmd->parsed()) {
            return cmd_rerank(o, model_path, mode, split);
        }
        if (eval->parsed()) {
            return cmd_eval(o, run_path, baseline_path, per_query_path);
        }
        if (eval_sel->parsed()) {
            return cmd_eval_selection(o, selection_path);
        }
    } catch (UsageError const &e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (std::exception const &e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_data;
    }
    return exit_usage;
}
