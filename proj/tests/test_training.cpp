#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "cforge/errors.hpp"
#include "cforge/training.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace cforge;
using fixture::concept_of;
using fixture::id;

namespace {

struct SmallWorld {
    KnowledgeBase kb;
    std::vector<TrainingExample> examples;
    TokenVocabulary vocab;
};

SmallWorld small_world(std::size_t n_concepts)
{
    SmallWorld w;
    std::vector<Concept> cs;
    for (std::size_t i = 0; i < n_concepts; ++i) {
        const auto s = std::to_string(i);
        cs.push_back(concept_of("SYNTHETIC:K" + s, {"term" + s + " name" + s}, "desc" + s));
    }
    w.kb = KnowledgeBase(cs);
    for (std::size_t i = 0; i < 3 * n_concepts; ++i) {
        const auto c = i % n_concepts;
        TrainingExample ex;
        ex.segment = Segment{"doc" + std::to_string(i), 0,
                             {"term" + std::to_string(c), "filler", "name" + std::to_string(c)}, 0};
        ex.positives = {cs[c].id};
        ex.source = i % 3 == 2 ? Source::PSEUDO : Source::MANUAL;
        w.examples.push_back(ex);
    }
    w.vocab = build_vocabulary(w.examples, w.kb);
    return w;
}

ConceptEmbeddings table_of(const EncoderParams& p, const KnowledgeBase& kb)
{
    return precompute_concept_embeddings(p, kb);
}

}  // namespace

TEST_SUITE("training")
{
    TEST_CASE("infonce_loss worked examples")
    {
        const std::vector<double> one{0.3};
        CHECK(infonce_loss(one, {}, 1.0) == 0.0);
        const std::vector<double> neg25(25, 0.42);
        const std::vector<double> pos{0.42};
        CHECK(infonce_loss(pos, neg25, 1.0) == doctest::Approx(std::log(26.0)).epsilon(1e-12));
        const std::vector<double> p1{1.0};
        const std::vector<double> n1{-1.0};
        CHECK(infonce_loss(p1, n1, 1.0) ==
              doctest::Approx(std::log1p(std::exp(-2.0))).epsilon(1e-12));
    }

    TEST_CASE("infonce_loss agrees with the oracle, is positive and monotone")
    {
        Rng rng(4);
        for (int t = 0; t < 300; ++t) {
            std::vector<double> pos(1 + rng.below(3));
            std::vector<double> neg(rng.below(8));
            for (auto& x : pos) {
                x = rng.uniform(-1, 1);
            }
            for (auto& x : neg) {
                x = rng.uniform(-1, 1);
            }
            const double tau = rng.uniform(0.2, 2.0);
            const double l = infonce_loss(pos, neg, tau);
            CHECK(l == doctest::Approx(oracle::infonce(pos, neg, tau)).epsilon(1e-12));
            CHECK(l >= 0.0);
            if (neg.empty()) {
                CHECK(l == 0.0);
                continue;
            }
            CHECK(l > 0.0);
            auto harder = neg;
            harder[rng.below(harder.size())] += 0.1;
            CHECK(infonce_loss(pos, harder, tau) > l);
            auto easier = pos;
            easier[rng.below(easier.size())] += 0.1;
            CHECK(infonce_loss(easier, neg, tau) < l);
        }
    }

    TEST_CASE("infonce_loss embedding form")
    {
        const std::vector<double> doc{1, 0};
        const std::vector<EmbeddingVector> pos{{1, 0}};
        const std::vector<EmbeddingVector> neg{{-2, 0}};
        CHECK(infonce_loss(doc, pos, neg, 1.0) ==
              doctest::Approx(std::log1p(std::exp(-2.0))).epsilon(1e-12));
    }

    TEST_CASE("batch_loss weighting")
    {
        std::vector<TrainingExample> ex(2);
        ex[0].source = Source::MANUAL;
        ex[1].source = Source::PSEUDO;
        const std::vector<double> losses{2.0, 3.0};
        CHECK(batch_loss(ex, losses, 0.4) == doctest::Approx(3.2));
        CHECK(batch_loss(ex, losses, 0.0) == 2.0);
        CHECK(batch_loss(ex, losses, 1.0) == 5.0);
        // Affine in w_a with slope equal to the pseudo losses.
        const double b0 = batch_loss(ex, losses, 0.0);
        for (double w : {0.1, 0.5, 2.0}) {
            CHECK(batch_loss(ex, losses, w) == doctest::Approx(b0 + 3.0 * w));
        }
    }

    TEST_CASE("sample_negatives")
    {
        const auto vectors = fixture::random_unit_vectors(100, 8, 3);
        const auto query = vectors.row(0);
        const std::vector<std::size_t> positives{0, 7};
        Rng rng(5);
        const auto neg = sample_negatives(query, positives, vectors, rng);
        CHECK(neg.hard.size() == 20);
        CHECK(neg.random.size() == 5);
        std::set<std::size_t> seen;
        for (auto r : neg.hard) {
            seen.insert(r);
        }
        for (auto r : neg.random) {
            seen.insert(r);
        }
        CHECK(seen.size() == 25);
        CHECK_FALSE(seen.contains(0));
        CHECK_FALSE(seen.contains(7));

        // Hard negatives are the 20 most similar non-positives.
        std::vector<std::pair<double, std::size_t>> ranked;
        for (std::size_t i = 0; i < vectors.size(); ++i) {
            if (i != 0 && i != 7) {
                ranked.emplace_back(-cosine_sim(query, vectors.row(i)), i);
            }
        }
        std::sort(ranked.begin(), ranked.end());
        std::vector<std::size_t> expected;
        for (std::size_t i = 0; i < 20; ++i) {
            expected.push_back(ranked[i].second);
        }
        auto hard = neg.hard;
        std::sort(hard.begin(), hard.end());
        std::sort(expected.begin(), expected.end());
        CHECK(hard == expected);

        const auto small = fixture::random_unit_vectors(10, 4, 1);
        const std::vector<std::size_t> two{1, 2};
        Rng r2(0);
        const auto few = sample_negatives(small.row(0), two, small, r2);
        CHECK(few.size() == 8);
        CHECK(few.hard.size() == 8);
        CHECK(few.random.empty());
    }

    TEST_CASE("analytic gradient matches finite differences")
    {
        for (std::uint64_t seed = 100; seed < 105; ++seed) {
            const auto gc = fixture::random_gradient_case(seed);
            EncoderGradient grad(gc.params);
            const double loss = batch_loss_and_gradient(gc.params, gc.concepts, gc.examples,
                                                        gc.negatives, gc.w_a, gc.tau, &grad);
            CHECK(loss == doctest::Approx(oracle::batch_loss(gc.params, gc.concepts, gc.examples,
                                                             gc.negatives, gc.w_a, gc.tau))
                              .epsilon(1e-12));
            const auto numeric = oracle::numeric_gradient(gc.params, gc.concepts, gc.examples,
                                                          gc.negatives, gc.w_a, gc.tau, 1e-5);
            const std::size_t d = gc.params.dim;
            const std::size_t table = gc.params.token_table.size();
            for (std::size_t i = 0; i < numeric.size(); ++i) {
                const double analytic =
                    i < table ? grad.row(i / d)[i % d] : grad.projection()[i - table];
                CHECK(analytic == doctest::Approx(numeric[i]).epsilon(1e-5).scale(1e-3));
            }
        }
    }

    TEST_CASE("training with zero epochs returns the initial parameters")
    {
        const auto w = small_world(6);
        const auto init = EncoderParams::initialize(w.vocab, 8, 1);
        TrainConfig cfg;
        cfg.epochs = 0;
        const auto r = train(w.examples, table_of(init, w.kb), init, cfg);
        CHECK(r.params == init);
        CHECK(r.log.empty());
    }

    TEST_CASE("training is deterministic, order independent and leaves concepts frozen")
    {
        const auto w = small_world(8);
        TrainConfig cfg;
        cfg.epochs = 3;
        cfg.learning_rate = 0.5;
        cfg.batch_size = 4;
        cfg.seed = 12;
        const auto a = train(w.examples, w.kb, cfg, w.vocab, 8);
        const auto b = train(w.examples, w.kb, cfg, w.vocab, 8);
        CHECK(a.doc_encoder == b.doc_encoder);
        auto reversed = w.examples;
        std::reverse(reversed.begin(), reversed.end());
        const auto c = train(reversed, w.kb, cfg, w.vocab, 8);
        CHECK(c.doc_encoder == a.doc_encoder);

        const auto init = EncoderParams::initialize(w.vocab, 8, cfg.seed);
        CHECK(a.concepts == table_of(init, w.kb));
        CHECK_FALSE(a.doc_encoder == init);

        // Learning rate decays linearly to zero over the epochs.
        REQUIRE_FALSE(a.log.empty());
        for (const auto& row : a.log) {
            CHECK(row.lr == doctest::Approx(0.5 * static_cast<double>(3 - row.epoch) / 3.0));
            CHECK(std::isfinite(row.loss));
        }
        std::ostringstream csv;
        write_train_log(csv, a.log);
        CHECK(csv.str().rfind("epoch,batch,loss,lr,num_manual,num_pseudo\n", 0) == 0);

        cfg.seed = 13;
        const auto d = train(w.examples, w.kb, cfg, w.vocab, 8);
        CHECK_FALSE(d.doc_encoder == a.doc_encoder);
    }

    TEST_CASE("training lowers the loss on a learnable task")
    {
        const auto w = small_world(10);
        TrainConfig cfg;
        cfg.epochs = 20;
        cfg.learning_rate = 0.5;
        cfg.batch_size = 8;
        const auto m = train(w.examples, w.kb, cfg, w.vocab, 8);
        double first = 0.0;
        double last = 0.0;
        for (const auto& row : m.log) {
            if (row.epoch == 0) {
                first += row.loss;
            }
            if (row.epoch == 19) {
                last += row.loss;
            }
        }
        CHECK(last < first);
    }

    TEST_CASE("w_a = 0 equals manual-only training")
    {
        const auto w = small_world(8);
        TrainConfig cfg;
        cfg.epochs = 3;
        cfg.learning_rate = 0.5;
        cfg.batch_size = 4;
        cfg.w_a = 0.0;
        std::vector<TrainingExample> manual;
        for (const auto& e : w.examples) {
            if (e.source == Source::MANUAL) {
                manual.push_back(e);
            }
        }
        const auto mixed = train(w.examples, w.kb, cfg, w.vocab, 8);
        const auto only = train(manual, w.kb, cfg, w.vocab, 8);
        CHECK(mixed.doc_encoder == only.doc_encoder);
    }

    TEST_CASE("default schedule")
    {
        const auto w = small_world(5);
        TrainConfig cfg;
        cfg.epochs = 2;
        cfg.batch_size = 4;
        const auto s = default_schedule(w.examples, cfg);
        REQUIRE(s.size() == 2);
        std::size_t total = 0;
        for (const auto& b : s[0]) {
            CHECK(b.size() <= 4);
            total += b.size();
        }
        CHECK(total == w.examples.size());
        cfg.w_a = 0.0;
        std::size_t manual = 0;
        const auto manual_only = default_schedule(w.examples, cfg);
        for (const auto& b : manual_only[1]) {
            for (auto i : b) {
                CHECK(w.examples[i].source == Source::MANUAL);
                ++manual;
            }
        }
        CHECK(manual == 10);
    }

    TEST_CASE("non-finite parameters abort training")
    {
        const auto w = small_world(4);
        auto init = EncoderParams::initialize(w.vocab, 4, 0);
        const auto table = table_of(init, w.kb);
        init.projection[0] = std::numeric_limits<double>::quiet_NaN();
        TrainConfig cfg;
        cfg.epochs = 1;
        CHECK_THROWS_AS(train(w.examples, table, init, cfg), NonFiniteLoss);
    }

    TEST_CASE("unknown positives are dropped before training")
    {
        auto w = small_world(4);
        w.examples[0].positives = {id("MESH:NOPE")};
        w.examples[1].positives.push_back(id("MESH:NOPE2"));
        const auto init = EncoderParams::initialize(w.vocab, 4, 0);
        const auto table = table_of(init, w.kb);
        auto ex = w.examples;
        CHECK(restrict_positives(ex, table) == 2);
        CHECK(ex.size() == w.examples.size() - 1);
        CHECK_THROWS_AS(positive_rows(w.examples[0], table), UnknownConcept);
    }
}
