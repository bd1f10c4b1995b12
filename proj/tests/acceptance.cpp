// Acceptance suite: one PASS/FAIL line per criterion. Exit status is non-zero if any fails.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include <unistd.h>

#include "support.hpp"

using namespace segtrain;
using namespace testing_support;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(char const *f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

PipelineConfig config_e(std::uint64_t seed)
{
    auto cfg = load_config(SEGTRAIN_SOURCE_DIR "/configs/config_e.conf");
    cfg.set_seed(seed);
    return cfg;
}

// 1. The selected-segment loss with every index 0 equals the first-segment objective.
Verdict ac1()
{
    auto t0 = Clock::now();
    Rng rng(101);
    double worst = 0.0;
    for (int draw = 0; draw < 100; ++draw) {
        auto set = random_training_set(rng, 8, 6, 6);
        auto p = random_params(rng, draw % 2 == 0 ? ScorerKind::linear : ScorerKind::mlp, 8, 2.0);
        SegmentIndexMap zeros;
        for (auto const &[key, f] : set.features) {
            zeros.set(key, 0);
        }
        double const got = loss_selected(p, set, zeros, LossKind::pairwise_hinge);
        worst = std::max(worst, std::abs(got - first_segment_hinge_oracle(p, set)));
    }
    double const secs = seconds_since(t0);
    return {worst <= 1e-12 && secs < 5.0, "max |diff| " + fmt("%.3g", worst) + ", " + fmt("%.2f", secs) + " s"};
}

// 2. Analytic gradients against central finite differences.
Verdict ac2()
{
    auto t0 = Clock::now();
    Rng rng(202);
    double worst = 0.0;
    int checked = 0;
    int skipped = 0;
    for (int draw = 0; draw < 1000; ++draw) {
        auto const kind = draw % 2 == 0 ? ScorerKind::linear : ScorerKind::mlp;
        bool const pairwise = draw % 4 < 2;
        auto rel = gradient_check(rng, kind, pairwise, 1 + draw % 8);
        if (!rel) {
            ++skipped;
            continue;
        }
        worst = std::max(worst, *rel);
        ++checked;
    }
    double const secs = seconds_since(t0);
    return {worst < 1e-4 && checked > 900 && secs < 30.0,
            std::to_string(checked) + " checked, " + std::to_string(skipped) + " near the hinge kink, max rel err " +
                fmt("%.3g", worst) + ", " + fmt("%.2f", secs) + " s"};
}

// 3. select_segments against exhaustive enumeration, ties included.
Verdict ac3()
{
    Rng rng(303);
    int cases = 0;
    int ties = 0;
    int mismatches = 0;
    while (cases < 1000) {
        auto set = random_training_set(rng, 10, 4, 8, 0.35);
        auto p = random_params(rng, cases % 2 == 0 ? ScorerKind::linear : ScorerKind::mlp, 5);
        std::size_t const k = 1 + static_cast<std::size_t>(cases) % 6;
        auto sel = select_segments(p, set, k, 1 + cases % 3);
        for (auto const &[key, f] : set.features) {
            if (cases == 1000) {
                break;
            }
            std::size_t const m = std::min(k, f.size());
            std::vector<double> s(m);
            for (std::size_t j = 0; j < m; ++j) {
                s[j] = oracle_score(p, f[j]);
            }
            double const top = *std::max_element(s.begin(), s.end());
            std::size_t const expected = static_cast<std::size_t>(std::find(s.begin(), s.end(), top) - s.begin());
            ties += std::count(s.begin(), s.end(), top) > 1 ? 1 : 0;
            mismatches += sel.index.at(key) == expected ? 0 : 1;
            ++cases;
        }
    }
    return {mismatches == 0 && ties > 0,
            std::to_string(cases) + " cases (" + std::to_string(ties) + " with ties), " + std::to_string(mismatches) +
                " mismatches"};
}

double t_quadrature(double t, double df)
{
    double const c = std::exp(std::lgamma((df + 1) / 2) - std::lgamma(df / 2)) / std::sqrt(df * M_PI);
    auto pdf = [&](double x) { return c * std::pow(1 + x * x / df, -(df + 1) / 2); };
    int const n = 20000;
    double const h = std::abs(t) / n;
    double sum = pdf(0) + pdf(std::abs(t));
    for (int i = 1; i < n; ++i) {
        sum += (i % 2 == 1 ? 4 : 2) * pdf(i * h);
    }
    return 1.0 - 2.0 * sum * h / 3.0;
}

RankedList ranked(std::string const &qid, std::vector<std::string> const &docs)
{
    std::vector<std::pair<std::string, double>> scored;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        scored.emplace_back(docs[i], static_cast<double>(docs.size() - i));
    }
    return rank_by_score(qid, scored);
}

// 4. Metric and loss unit values.
Verdict ac4()
{
    std::vector<std::string> failed;
    auto check = [&](std::string const &name, double got, double want, double tol = 1e-9) {
        if (!(std::abs(got - want) <= tol)) {
            failed.push_back(name + "=" + fmt("%.12g", got));
        }
    };
    check("hinge(1.5,0.2)", hinge_loss(1.5, 0.2), 0.0);
    check("hinge(0,0)", hinge_loss(0.0, 0.0), 1.0);
    check("hinge(-0.5,0.7)", hinge_loss(-0.5, 0.7), 2.2);
    check("ce(0,1)", pointwise_ce_loss(0.0, 1), std::log(2.0));
    check("ce(0,0)", pointwise_ce_loss(0.0, 0), std::log(2.0));
    check("ce(10,1)", pointwise_ce_loss(10.0, 1), std::log1p(std::exp(-10.0)));

    Qrels one{{{"q1", {{"a", 1}}}}};
    check("mrr rank1", mrr(Run{{"q1", ranked("q1", {"a", "b"})}}, one), 1.0);
    check("mrr rank3", mrr(Run{{"q1", ranked("q1", {"b", "c", "a"})}}, one), 1.0 / 3.0);
    Qrels two{{{"q1", {{"a", 1}}}, {"q2", {{"x", 1}}}}};
    check("mrr two", mrr(Run{{"q1", ranked("q1", {"b", "a"})}, {"q2", ranked("q2", {"u", "v", "w", "x"})}}, two),
          0.375);

    Qrels g{{{"q", {{"a", 1}, {"b", 0}, {"c", 1}}}}};
    check("ndcg [1,0,1]", ndcg_at_k(Run{{"q", ranked("q", {"a", "b", "c"})}}, g, 3), 1.5 / (1.0 + 1.0 / std::log2(3.0)));
    check("ndcg ideal", ndcg_at_k(Run{{"q", ranked("q", {"a", "c", "b"})}}, g, 10), 1.0, 0.0);
    check("ndcg none", ndcg_at_k(Run{{"q", ranked("q", {"b", "x"})}}, g, 3), 0.0);

    GoldSegments gold{{{"q", "a"}, 0}, {{"q", "b"}, 1}, {{"q", "c"}, 2}, {{"q", "d"}, 3}};
    SegmentIndexMap half;
    half.set({"q", "a"}, 0);
    half.set({"q", "b"}, 1);
    half.set({"q", "c"}, 0);
    half.set({"q", "d"}, 0);
    check("p@1 2/4", segment_p_at_1(half, gold), 0.5);

    std::vector<double> a{0.6, 0.4, 0.7, 0.3}, b{0.5, 0.5, 0.5, 0.4};
    double const p = paired_t_test(a, b);
    double const oracle = t_quadrature(1.0 / 3.0, 3.0);
    check("ttest vs quadrature", p, oracle, 0.01);
    check("ttest p~0.76", p, 0.76, 0.01);

    std::string detail = failed.empty() ? "all unit values reproduced" : "mismatch:";
    for (auto const &f : failed) {
        detail += " " + f;
    }
    return {failed.empty(), detail + ", t-test p " + fmt("%.4f", p) + " (quadrature " + fmt("%.4f", oracle) + ")"};
}

// Segment with the most distinct query terms among the first k; smallest index on ties.
SegmentIndexMap overlap_oracle(SynthExperiment const &e, TrainingSet const &set)
{
    std::map<std::string, Query const *> queries;
    for (auto const &topic : set.topics) {
        queries[topic.query.id] = &topic.query;
    }
    SegmentIndexMap out;
    for (auto const &[key, g] : e.dev_gold) {
        auto const &doc = e.data.store.at(key.second);
        auto policy = e.cfg.segmentation;
        policy.max_segments = e.cfg.train.max_segments;
        auto segs = training_segments(doc, e.cfg.query_token_budget, policy);
        std::size_t best = 0, best_count = 0;
        for (std::size_t i = 0; i < segs.size(); ++i) {
            std::set<std::string> present(segs[i].tokens.begin(), segs[i].tokens.end());
            std::set<std::string> terms(queries.at(key.first)->tokens.begin(), queries.at(key.first)->tokens.end());
            std::size_t count = 0;
            for (auto const &t : terms) {
                count += present.count(t);
            }
            if (count > best_count) {
                best_count = count;
                best = i;
            }
        }
        out.set(key, best);
    }
    return out;
}

// 5. End-to-end recovery on config E.
Verdict ac5()
{
    auto t0 = Clock::now();
    auto cfg = config_e(1);
    if (cfg.train.threads != 1) {
        return {false, "config E must run single-threaded"};
    }

    auto noiseless = cfg;
    noiseless.synth.noise = 0.0;
    auto clean = make_experiment(noiseless);
    double const oracle_p1 = segment_p_at_1(overlap_oracle(clean, clean.dev_set), clean.dev_gold);

    auto e = make_experiment(cfg);
    double const overlap_p1 = segment_p_at_1(overlap_oracle(e, e.dev_set), e.dev_gold);
    auto best = best_train(e.train, e.dev, cfg.train);
    double const best_p1 = e.dev_p_at_1(best.best().params);
    double const best_mrr = best.best().validation_metric;
    auto first = train_baseline(e.train, e.dev, SelectionSource::first, cfg.train);
    double const first_firstp_mrr =
        mrr(rank_bundle(first.params, e.dev, Aggregation::first_p), e.dev.qrels, cfg.mrr_cutoff);
    double const secs = seconds_since(t0);

    bool const oracle_ok = oracle_p1 == 1.0;
    bool const p1_ok = best_p1 >= 0.9 && best_p1 > 1.0 / 6.0;
    bool const gap_ok = best_mrr - first.validation_metric >= 0.05;
    bool const time_ok = secs < 120.0;
    std::string detail = "oracle P@1 at noise 0 " + fmt("%.3f", oracle_p1) + "; overlap oracle P@1 at noise " +
                         fmt("%.2g", cfg.synth.noise) + " " + fmt("%.3f", overlap_p1) + "; BeST iteration " +
                         std::to_string(best.best_iteration) + " dev P@1 " + fmt("%.3f", best_p1) +
                         (p1_ok ? " (ok)" : " (below 0.9)") + "; dev MRR BeST " + fmt("%.4f", best_mrr) +
                         " vs FirstP-trained " + fmt("%.4f", first.validation_metric) + ", gap " +
                         fmt("%.4f", best_mrr - first.validation_metric) + (gap_ok ? " (ok)" : " (needs >= 0.05)") +
                         "; FirstP-trained with FirstP ranking " + fmt("%.4f", first_firstp_mrr) + "; " +
                         fmt("%.1f", secs) + " s";
    return {oracle_ok && p1_ok && gap_ok && time_ok, detail};
}

// 6. P@1 from iteration 1 to 2 and best_iteration bookkeeping at noise 0.3.
Verdict ac6()
{
    int non_decreasing = 0;
    int bookkeeping = 0;
    std::string trace;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        auto cfg = config_e(seed);
        cfg.synth.noise = 0.3;
        auto e = make_experiment(cfg);
        auto r = best_train(e.train, e.dev, cfg.train);
        if (r.history.size() >= 2) {
            double const p1 = e.dev_p_at_1(r.history[0].params);
            double const p2 = e.dev_p_at_1(r.history[1].params);
            non_decreasing += p2 >= p1 ? 1 : 0;
            trace += " " + fmt("%.2f", p1) + "->" + fmt("%.2f", p2);
        } else {
            trace += " (1 iteration)";
        }
        std::size_t arg = 0;
        for (std::size_t i = 1; i < r.history.size(); ++i) {
            if (r.history[i].validation_metric > r.history[arg].validation_metric) {
                arg = i;
            }
        }
        bookkeeping += r.best_iteration == arg + 1 ? 1 : 0;
    }
    return {non_decreasing >= 8 && bookkeeping == 10,
            "P@1 non-decreasing 1->2 in " + std::to_string(non_decreasing) + "/10 seeds [" + trace.substr(1) +
                "]; best_iteration = argmax in " + std::to_string(bookkeeping) + "/10"};
}

// 7. FirstP <= GoldP and FirstP <= BeST on dev MRR.
Verdict ac7()
{
    int gold_ok = 0;
    int best_ok = 0;
    int both = 0;
    std::string trace;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        auto cfg = config_e(seed);
        auto e = make_experiment(cfg);
        double const f = train_baseline(e.train, e.dev, SelectionSource::first, cfg.train).validation_metric;
        double const g =
            train_baseline(e.train, e.dev, SelectionSource::gold, cfg.train, &e.corpus.gold).validation_metric;
        double const b = best_train(e.train, e.dev, cfg.train).best().validation_metric;
        gold_ok += f <= g ? 1 : 0;
        best_ok += f <= b ? 1 : 0;
        both += f <= g && f <= b ? 1 : 0;
        trace += " " + fmt("%.3f", f) + "/" + fmt("%.3f", g) + "/" + fmt("%.3f", b);
    }
    return {both >= 8, "both orderings hold in " + std::to_string(both) + "/10 seeds (FirstP<=GoldP " +
                           std::to_string(gold_ok) + ", FirstP<=BeST " + std::to_string(best_ok) +
                           "); first/gold/best:" + trace};
}

std::string slurp(fs::path const &p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

int run_cli(std::string const &args)
{
    std::string const cmd = std::string("\"") + SEGTRAIN_CLI + "\" " + args + " 2>/dev/null";
    return std::system(cmd.c_str());
}

// 8. Two full CLI pipelines with the same config give byte-identical outputs.
Verdict ac8()
{
    auto const root = fs::temp_directory_path() / ("segtrain_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(root);
    std::string const conf = SEGTRAIN_SOURCE_DIR "/configs/config_e.conf";
    std::vector<std::string> files{"model.txt", "selection.jsonl", "history.tsv", "dev.run", "dev_selection.jsonl"};
    for (auto const *name : {"a", "b"}) {
        auto const dir = root / name;
        auto const data = dir / "data";
        std::string const inputs = " --config \"" + conf + "\" --corpus \"" + (data / "corpus.jsonl").string() +
                                   "\" --queries \"" + (data / "queries.tsv").string() + "\" --qrels \"" +
                                   (data / "qrels.txt").string() + "\" --candidates \"" +
                                   (data / "candidates.run").string() + "\"";
        if (run_cli("synth --config \"" + conf + "\" --out \"" + data.string() + "\"") != 0 ||
            run_cli("train --mode best" + inputs + " --out \"" + dir.string() + "\"") != 0 ||
            run_cli("rerank --mode maxp --split dev --model \"" + (dir / "model.txt").string() + "\"" + inputs +
                    " --out \"" + (dir / "dev.run").string() + "\"") != 0 ||
            run_cli("select --split dev --model \"" + (dir / "model.txt").string() + "\"" + inputs + " --out \"" +
                    (dir / "dev_selection.jsonl").string() + "\"") != 0) {
            return {false, "CLI pipeline failed in run " + std::string(name)};
        }
    }
    std::string detail;
    bool same = true;
    for (auto const &f : files) {
        auto const a = slurp(root / "a" / f);
        bool const eq = !a.empty() && a == slurp(root / "b" / f);
        same = same && eq;
        detail += f + (eq ? " identical (" + std::to_string(a.size()) + " bytes); " : " DIFFERS; ");
    }
    for (auto const *f : {"corpus.jsonl", "gold.jsonl"}) {
        bool const eq = slurp(root / "a" / "data" / f) == slurp(root / "b" / "data" / f);
        same = same && eq;
        detail += std::string(f) + (eq ? " identical; " : " DIFFERS; ");
    }
    fs::remove_all(root);
    return {same, detail.substr(0, detail.size() - 2)};
}

} // namespace

int main()
{
    std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
        {"AC1 first-segment reduction", ac1},      {"AC2 gradient check", ac2},
        {"AC3 selection oracle", ac3},        {"AC4 metric oracles", ac4},
        {"AC5 synthetic recovery", ac5},      {"AC6 iteration dynamics", ac6},
        {"AC7 baseline ordering", ac7},       {"AC8 determinism", ac8},
    };
    int failures = 0;
    for (auto const &[name, fn] : criteria) {
        Verdict v;
        try {
            v = fn();
        } catch (std::exception const &e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        failures += v.pass ? 0 : 1;
        std::cout << (v.pass ? "PASS " : "FAIL ") << name << ": " << v.detail << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
