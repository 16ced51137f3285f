// Acceptance suite: one PASS/FAIL line per criterion.
//   acceptance              run every criterion
//   acceptance --criterion N

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cforge/ann_index.hpp"
#include "cforge/augmentation.hpp"
#include "cforge/experiment.hpp"
#include "cforge/log.hpp"
#include "cforge/pseudo_annotation.hpp"
#include "cforge/synthetic.hpp"
#include "cforge/training.hpp"
#include "cli.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace cforge;
namespace fs = std::filesystem;

namespace {

// Tolerances and budgets.
constexpr double kLossTolerance = 1e-9;
constexpr double kGradientEpsilon = 1e-4;
constexpr double kGradientRelTolerance = 1e-4;
constexpr std::size_t kGradientInstances = 20;
constexpr std::size_t kIndexVectors = 1000;
constexpr std::size_t kIndexDim = 64;
constexpr std::size_t kIndexQueries = 100;
constexpr std::size_t kScoringCorpora = 50;
constexpr int kAugmentThreshold = 10;
constexpr std::size_t kReplicationSeeds = 5;
constexpr double kRareGainPoints = 5.0;
constexpr double kCurveNoisePoints = 1.0;
constexpr double kReplicationLearningRate = 0.05;
constexpr std::size_t kReplicationEpochs = 10;

struct Verdict {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int number;
    const char* name;
    double budget_seconds;
    std::function<Verdict()> check;
};

std::string fmt(double v, int digits = 6)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

// -- 1 -----------------------------------------------------------------------

Verdict filter_oracles()
{
    std::string detail;
    bool pass = true;
    for (const auto& [name, fc] : {std::pair{"false abbreviation", fixture::false_abbreviation_case()},
                                   std::pair{"overlap", fixture::overlap_case()}}) {
        const auto kept = apply_filters(fc.doc, fc.anns, fc.kb, FilterSet{true, true, false});
        std::vector<Annotation> dropped;
        for (const auto& a : fc.anns) {
            if (std::find(kept.begin(), kept.end(), a) == kept.end()) {
                dropped.push_back(a);
            }
        }
        const bool ok = dropped.size() == 1 && dropped[0] == fc.expected_drop &&
                        kept.size() + 1 == fc.anns.size();
        pass = pass && ok;
        detail += std::string(name) + ": dropped " + std::to_string(dropped.size());
        for (const auto& d : dropped) {
            detail += " (\"" + d.mention + "\", " + d.concept_id.str() + ")";
        }
        detail += "; ";
    }
    return {pass, detail};
}

// -- 2 -----------------------------------------------------------------------

Verdict loss_examples()
{
    const std::vector<double> neg25(25, 0.7);
    const std::vector<double> pos_same{0.7};
    const std::vector<double> lone{0.3};
    const std::vector<double> p1{1.0};
    const std::vector<double> n1{-1.0};
    struct Case {
        double got;
        double expected;
        double oracle;
    };
    const std::vector<Case> cases{
        {infonce_loss(lone, {}, 1.0), 0.0, oracle::infonce(lone, {}, 1.0)},
        {infonce_loss(pos_same, neg25, 1.0), 3.258096538021482, oracle::infonce(pos_same, neg25, 1.0)},
        {infonce_loss(p1, n1, 1.0), 0.1269280110429725, oracle::infonce(p1, n1, 1.0)},
    };
    bool pass = true;
    std::string detail;
    for (const auto& c : cases) {
        const double err = std::max(std::abs(c.got - c.expected), std::abs(c.got - c.oracle));
        pass = pass && err <= kLossTolerance;
        detail += fmt(c.got, 10) + " (err " + fmt(err, 2) + ") ";
    }
    return {pass, detail};
}

// -- 3 -----------------------------------------------------------------------

Verdict gradient_check()
{
    double worst = 0.0;
    for (std::size_t t = 0; t < kGradientInstances; ++t) {
        const auto gc = fixture::random_gradient_case(1000 + t);
        EncoderGradient grad(gc.params);
        batch_loss_and_gradient(gc.params, gc.concepts, gc.examples, gc.negatives, gc.w_a, gc.tau,
                                &grad);
        const auto numeric = oracle::numeric_gradient(gc.params, gc.concepts, gc.examples,
                                                      gc.negatives, gc.w_a, gc.tau, kGradientEpsilon);
        const std::size_t d = gc.params.dim;
        const std::size_t table = gc.params.token_table.size();
        double diff = 0.0;
        double na = 0.0;
        double nn = 0.0;
        for (std::size_t i = 0; i < numeric.size(); ++i) {
            const double a = i < table ? grad.row(i / d)[i % d] : grad.projection()[i - table];
            diff += (a - numeric[i]) * (a - numeric[i]);
            na += a * a;
            nn += numeric[i] * numeric[i];
        }
        const double scale = std::max(std::sqrt(std::max(na, nn)), 1e-12);
        worst = std::max(worst, std::sqrt(diff) / scale);
    }
    return {worst <= kGradientRelTolerance,
            std::to_string(kGradientInstances) + " instances, worst relative error " + fmt(worst, 3)};
}

// -- shared synthetic data ---------------------------------------------------

SyntheticConfig benchmark_config(std::uint64_t seed)
{
    SyntheticConfig sc;
    sc.seed = seed;
    return sc;
}

std::string params_bytes(const EncoderParams& p)
{
    std::ostringstream out;
    p.save(out);
    return out.str();
}

// -- 4 -----------------------------------------------------------------------

Verdict wa_identity()
{
    SyntheticConfig sc = benchmark_config(11);
    sc.concepts = 60;
    sc.rare = 15;
    Experiment exp(ExperimentData::from_benchmark(make_synthetic_benchmark(sc)));
    ExperimentConfig cfg;
    cfg.aug.k = 10;
    const auto mixed = exp.augment(cfg).examples;

    std::vector<TrainingExample> manual;
    std::vector<std::size_t> manual_index(mixed.size(), SIZE_MAX);
    std::size_t pseudo = 0;
    for (std::size_t i = 0; i < mixed.size(); ++i) {
        if (mixed[i].source == Source::MANUAL) {
            manual_index[i] = manual.size();
            manual.push_back(mixed[i]);
        } else {
            ++pseudo;
        }
    }

    TrainConfig tc;
    tc.epochs = 3;
    tc.learning_rate = kReplicationLearningRate;
    tc.batch_size = 16;
    tc.seed = 5;
    tc.w_a = 0.0;
    // Batches over the mixed corpus in a fixed permutation per epoch; the
    // manual schedule is the same batches with pseudo examples removed.
    BatchSchedule mixed_schedule(tc.epochs);
    BatchSchedule manual_schedule(tc.epochs);
    for (std::size_t e = 0; e < tc.epochs; ++e) {
        std::vector<std::size_t> order(mixed.size());
        std::iota(order.begin(), order.end(), 0);
        auto rng = Rng::stream(tc.seed, "acceptance.schedule", e);
        rng.shuffle(std::span<std::size_t>(order));
        for (std::size_t b = 0; b < order.size(); b += tc.batch_size) {
            std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(b),
                                           order.begin() + static_cast<std::ptrdiff_t>(
                                                               std::min(order.size(), b + tc.batch_size)));
            std::vector<std::size_t> only;
            for (auto i : batch) {
                if (manual_index[i] != SIZE_MAX) {
                    only.push_back(manual_index[i]);
                }
            }
            mixed_schedule[e].push_back(std::move(batch));
            manual_schedule[e].push_back(std::move(only));
        }
    }

    const auto init = EncoderParams::initialize(exp.vocabulary(), 32, tc.seed);
    const auto concepts = precompute_concept_embeddings(init, exp.data().kb);
    const auto a = train(mixed, concepts, init, tc, &mixed_schedule);
    const auto b = train(manual, concepts, init, tc, &manual_schedule);
    const bool same = params_bytes(a.params) == params_bytes(b.params);
    const bool moved = params_bytes(a.params) != params_bytes(init);
    return {same && moved && pseudo > 0,
            std::to_string(manual.size()) + " manual + " + std::to_string(pseudo) +
                " pseudo examples, parameters " + (same ? "byte-identical" : "differ")};
}

// -- 5 -----------------------------------------------------------------------

Verdict index_equivalence()
{
    const auto vectors = fixture::random_unit_vectors(kIndexVectors, kIndexDim, 77);
    const auto queries = fixture::random_unit_vectors(kIndexQueries, kIndexDim, 78);
    std::vector<std::vector<SearchHit>> exact;
    for (std::size_t q = 0; q < queries.size(); ++q) {
        exact.push_back(exact_search(vectors, queries.row(q), 10));
    }

    const auto flat = IvfIndex::build(vectors, FineQuantizer::IDENTITY, 1);
    std::size_t equal = 0;
    for (std::size_t q = 0; q < queries.size(); ++q) {
        equal += flat.search(queries.row(q), {10, flat.num_lists()}) == exact[q];
    }

    const auto pq = IvfIndex::build(vectors, FineQuantizer::PRODUCT, 1, PqConfig{4, 16});
    std::vector<std::size_t> probes;
    for (std::size_t r = 1; r < pq.num_lists(); r *= 2) {
        probes.push_back(r);
    }
    probes.push_back(pq.num_lists());
    std::string curve;
    bool monotone = true;
    double prev = -1.0;
    for (auto r : probes) {
        double recall = 0.0;
        for (std::size_t q = 0; q < queries.size(); ++q) {
            const auto hits = pq.search(queries.row(q), {10, r});
            recall += recall_at_k(hits, exact[q]);
        }
        recall /= static_cast<double>(queries.size());
        monotone = monotone && recall >= prev;
        prev = recall;
        curve += std::to_string(r) + ":" + fmt(recall, 3) + " ";
    }
    return {equal == queries.size() && monotone,
            std::to_string(equal) + "/" + std::to_string(queries.size()) +
                " exact matches; recall@10 by lists probed " + curve};
}

// -- 6 -----------------------------------------------------------------------

Verdict metric_oracle()
{
    std::size_t equal = 0;
    std::size_t total = 0;
    for (std::uint64_t seed = 0; seed < kScoringCorpora; ++seed) {
        const auto sc = fixture::random_scoring_case(5000 + seed);
        CorpusStats stats;
        stats.training_doc_counts = sc.training_counts;
        for (bool macro : {false, true}) {
            ReportOptions opt;
            opt.macro = macro;
            const auto rep = split_report(sc.corpus, sc.preds, sc.kb, stats, opt);
            const auto ref = oracle::score(sc.corpus, sc.preds, sc.kb, sc.training_counts, macro,
                                           opt.rare_threshold, opt.k);
            equal += rep == ref;
            ++total;
        }
    }
    return {equal == total, std::to_string(equal) + "/" + std::to_string(total) +
                                " reports equal (micro and macro)"};
}

// -- 7 -----------------------------------------------------------------------

Verdict augmentation_contract()
{
    Experiment exp(ExperimentData::from_benchmark(make_synthetic_benchmark(benchmark_config(21))));
    const auto& data = exp.data();
    AugmentationConfig cfg;
    cfg.k = kAugmentThreshold;
    cfg.seed = 3;
    const auto& pseudo = exp.pseudo(FilterSet{});
    const auto targets = data.target_ids();
    auto pools = build_pools(data.kb, exp.manual_counts(), data.library, pseudo, targets, cfg);
    const auto pristine = pools;
    const auto result = augment_to_threshold(exp.manual_examples(), exp.manual_counts(), pools, cfg);

    std::map<ConceptId, int> pseudo_per_concept;
    std::size_t leaked = 0;
    for (const auto& e : result.examples) {
        if (e.source != Source::PSEUDO) {
            continue;
        }
        ++pseudo_per_concept[*e.anchor];
        leaked += targets.contains(e.segment.doc_id);
    }

    std::size_t count_errors = 0;
    std::size_t checked = 0;
    for (const auto& c : data.kb.concepts()) {
        if (!is_target_concept(c)) {
            continue;
        }
        const int manual = count_of(exp.manual_counts(), c.id);
        const int added = count_of(pseudo_per_concept, c.id);
        if (manual >= kAugmentThreshold) {
            count_errors += added != 0;
            continue;
        }
        ++checked;
        const auto p = pristine.find(c.id);
        const int pool = p == pristine.end() ? 0 : static_cast<int>(p->second.available());
        count_errors += manual + added != std::min(kAugmentThreshold, manual + pool);
    }

    // Balanced fill against the shared usage map: replay concepts in id
    // order; no selected paper may end more than one use above any pool
    // paper that still has unused segments.
    std::size_t balance_errors = 0;
    PaperUsage usage;
    for (const auto& [cid, pool] : pools) {
        std::map<std::string, int> remaining;
        std::map<std::string, int> chosen;
        for (const auto& s : pool.segments) {
            if (s.used) {
                ++chosen[s.paper_id];
            } else {
                ++remaining[s.paper_id];
            }
        }
        for (const auto& [paper, n] : chosen) {
            usage[paper] += n;
        }
        for (const auto& [paper, n] : chosen) {
            for (const auto& [other, left] : remaining) {
                balance_errors += left > 0 && usage[paper] > usage[other] + 1;
            }
        }
    }

    // Per-concept fill from fresh usage: chosen counts differ by at most one
    // across papers that still have segments left.
    std::size_t isolated_errors = 0;
    for (const auto& [cid, pool] : pristine) {
        std::map<ConceptId, CandidatePool> one{{cid, pool}};
        const ConceptCounts counts{{cid, count_of(exp.manual_counts(), cid)}};
        augment_to_threshold({}, counts, one, cfg);
        std::map<std::string, int> chosen;
        std::map<std::string, int> remaining;
        for (const auto& s : one.at(cid).segments) {
            chosen[s.paper_id] += s.used;
            remaining[s.paper_id] += !s.used;
        }
        int max_chosen = 0;
        for (const auto& [paper, n] : chosen) {
            max_chosen = std::max(max_chosen, n);
        }
        for (const auto& [paper, n] : chosen) {
            isolated_errors += remaining[paper] > 0 && n + 1 < max_chosen;
        }
    }

    return {count_errors == 0 && leaked == 0 && balance_errors == 0 && isolated_errors == 0 &&
                checked > 0,
            std::to_string(checked) + " under-threshold concepts, " + std::to_string(count_errors) +
                " count errors, " + std::to_string(leaked) + " leaked, " +
                std::to_string(balance_errors + isolated_errors) + " balance violations"};
}

// -- 8 -----------------------------------------------------------------------

Verdict directional_replication()
{
    const std::vector<double> wa_grid{0.2, 0.4, 0.6, 0.8, 1.0};
    const std::vector<int> k_grid{0, 2, 5, 10};
    std::vector<double> dev_rare(wa_grid.size(), 0.0);
    std::vector<double> test_rare_aug(wa_grid.size(), 0.0);
    std::vector<double> all_f1_k(k_grid.size(), 0.0);
    double base_rare = 0.0;
    std::vector<std::unique_ptr<Experiment>> experiments;
    for (std::size_t s = 0; s < kReplicationSeeds; ++s) {
        experiments.push_back(std::make_unique<Experiment>(
            ExperimentData::from_benchmark(make_synthetic_benchmark(benchmark_config(s)))));
    }
    auto config = [](std::uint64_t seed, int k, double wa) {
        ExperimentConfig cfg;
        cfg.aug.k = k;
        cfg.aug.w_a = wa;
        cfg.aug.seed = seed;
        cfg.train.seed = seed;
        cfg.train.epochs = kReplicationEpochs;
        cfg.train.learning_rate = kReplicationLearningRate;
        return cfg;
    };
    auto rare_f1 = [](const MetricsReport& r) { return r.rare ? r.rare->f1 : 0.0; };
    std::vector<std::vector<MetricsReport>> aug_test(kReplicationSeeds);
    for (std::size_t s = 0; s < kReplicationSeeds; ++s) {
        auto& exp = *experiments[s];
        const auto base = exp.run(config(s, 0, 0.0));
        base_rare += rare_f1(base.test);
        all_f1_k[0] += base.test.all.f1;
        for (std::size_t w = 0; w < wa_grid.size(); ++w) {
            const auto run = exp.run(config(s, 10, wa_grid[w]));
            dev_rare[w] += rare_f1(run.dev);
            test_rare_aug[w] += rare_f1(run.test);
            aug_test[s].push_back(run.test);
        }
    }
    std::size_t best = 0;
    for (std::size_t w = 1; w < wa_grid.size(); ++w) {
        if (dev_rare[w] > dev_rare[best]) {
            best = w;
        }
    }
    const double n = static_cast<double>(kReplicationSeeds);
    const double gain = 100.0 * (test_rare_aug[best] - base_rare) / n;

    for (std::size_t s = 0; s < kReplicationSeeds; ++s) {
        for (std::size_t ki = 1; ki < k_grid.size(); ++ki) {
            if (k_grid[ki] == 10) {
                all_f1_k[ki] += aug_test[s][best].all.f1;
            } else {
                all_f1_k[ki] += experiments[s]->run(config(s, k_grid[ki], wa_grid[best])).test.all.f1;
            }
        }
    }
    bool curve_ok = true;
    std::string curve;
    double running_max = -1.0;
    for (std::size_t ki = 0; ki < k_grid.size(); ++ki) {
        const double f1 = 100.0 * all_f1_k[ki] / n;
        curve_ok = curve_ok && f1 + kCurveNoisePoints >= running_max;
        running_max = std::max(running_max, f1);
        curve += "k=" + std::to_string(k_grid[ki]) + ":" + fmt(f1, 4) + " ";
    }
    return {gain >= kRareGainPoints && curve_ok,
            "w_a=" + fmt(wa_grid[best], 2) + ", rare f1@10 " + fmt(100.0 * base_rare / n, 4) + " -> " +
                fmt(100.0 * test_rare_aug[best] / n, 4) + " (gain " + fmt(gain, 3) +
                " points); all f1@10 " + curve};
}

// -- 9 -----------------------------------------------------------------------

std::map<std::string, std::string> read_tree(const fs::path& dir)
{
    std::map<std::string, std::string> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        std::ifstream in(entry.path(), std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        files[entry.path().filename().string()] = ss.str();
    }
    return files;
}

Verdict cli_determinism()
{
    const auto root = fs::temp_directory_path() / "cforge_acceptance_cli";
    fs::remove_all(root);
    SyntheticConfig sc = benchmark_config(9);
    sc.concepts = 40;
    sc.rare = 8;
    sc.library_docs_per_concept = 4;
    sc.leaked_docs = 4;
    write_synthetic_benchmark(make_synthetic_benchmark(sc), (root / "data").string());

    const std::vector<std::vector<std::string>> steps{
        {"ingest"},   {"annotate"},
        {"filter"},   {"augment", "--k", "5"},
        {"train"},    {"index", "--quantizer", "pq"},
        {"extract"},  {"evaluate"},
        {"sweep", "--sweep", "wa", "--grid", "0,0.5"},
    };
    std::vector<std::string> failures;
    std::vector<std::string> stdout_of[2];
    for (int rep = 0; rep < 2; ++rep) {
        const auto out = root / ("run" + std::to_string(rep));
        for (auto args : steps) {
            for (const auto& a : std::vector<std::string>{
                     "--kb", (root / "data" / "kb.jsonl").string(), "--corpus",
                     (root / "data" / "corpus").string(), "--library",
                     (root / "data" / "library").string(), "--out", out.string(), "--seed", "4",
                     "--dim", "16", "--epochs", "2", "--lr", "0.05"}) {
                args.push_back(a);
            }
            std::ostringstream o;
            std::ostringstream e;
            if (cli::run(args, o, e) != cli::kExitOk) {
                failures.push_back(args.front() + " failed: " + e.str());
            }
            stdout_of[rep].push_back(o.str());
        }
    }
    const auto a = read_tree(root / "run0");
    const auto b = read_tree(root / "run1");
    std::size_t identical = 0;
    for (const auto& [name, bytes] : a) {
        const auto it = b.find(name);
        if (it != b.end() && it->second == bytes) {
            ++identical;
        } else {
            failures.push_back(name + " differs");
        }
    }
    if (stdout_of[0] != stdout_of[1]) {
        failures.push_back("stdout differs");
    }
    std::string detail = std::to_string(identical) + "/" + std::to_string(a.size()) +
                         " artifacts byte-identical across " + std::to_string(steps.size()) +
                         " commands";
    for (const auto& f : failures) {
        detail += "; " + f;
    }
    return {failures.empty() && a.size() == b.size() && a.size() == 13, detail};
}

const std::vector<Criterion>& criteria()
{
    static const std::vector<Criterion> all{
        {1, "filter oracles", 1.0, filter_oracles},
        {2, "loss correctness", 1.0, loss_examples},
        {3, "gradient check", 10.0, gradient_check},
        {4, "w_a identity", 30.0, wa_identity},
        {5, "index equivalence", 30.0, index_equivalence},
        {6, "metric oracle", 10.0, metric_oracle},
        {7, "augmentation contract", 5.0, augmentation_contract},
        {8, "directional replication", 600.0, directional_replication},
        {9, "determinism", 120.0, cli_determinism},
    };
    return all;
}

}  // namespace

int main(int argc, char** argv)
{
    int only = 0;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) {
            only = std::atoi(argv[++i]);
        } else {
            std::cerr << "usage: acceptance [--criterion N]\n";
            return 2;
        }
    }
    log::set_level(log::Level::error);
    int failed = 0;
    int ran = 0;
    for (const auto& c : criteria()) {
        if (only != 0 && c.number != only) {
            continue;
        }
        ++ran;
        const auto start = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = c.check();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool in_budget = secs <= c.budget_seconds;
        const bool pass = v.pass && in_budget;
        failed += !pass;
        std::cout << (pass ? "PASS" : "FAIL") << "  " << c.number << ". " << c.name << ": "
                  << v.detail << " [" << fmt(secs, 3) << " s, budget " << fmt(c.budget_seconds, 3)
                  << " s" << (in_budget ? "" : ", over budget") << "]\n";
    }
    if (ran == 0) {
        std::cerr << "no criterion " << only << '\n';
        return 2;
    }
    return failed == 0 ? 0 : 1;
}
