#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "cforge/ann_index.hpp"
#include "cforge/evaluation.hpp"
#include "cforge/rng.hpp"
#include "cforge/training.hpp"

using namespace cforge;

namespace {

ConceptEmbeddings random_table(std::size_t n, std::size_t dim, std::uint64_t seed)
{
    Rng rng(seed);
    std::vector<ConceptId> ids;
    std::vector<double> values(n * dim);
    for (std::size_t i = 0; i < n; ++i) {
        ids.push_back(ConceptId::parse("SYNTHETIC:B" + std::to_string(i)));
        for (std::size_t j = 0; j < dim; ++j) {
            values[i * dim + j] = rng.uniform(-1.0, 1.0);
        }
        normalize_in_place(std::span<double>(values.data() + i * dim, dim));
    }
    return ConceptEmbeddings(dim, std::move(ids), std::move(values));
}

std::vector<std::string> words(std::size_t n)
{
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back("w" + std::to_string(i % 500));
    }
    return out;
}

EncoderParams encoder(std::size_t dim)
{
    return EncoderParams::initialize(TokenVocabulary(words(500)), dim, 1);
}

void BM_EmbedSegment(benchmark::State& state)
{
    const auto params = encoder(static_cast<std::size_t>(state.range(0)));
    const auto tokens = words(256);
    for (auto _ : state) {
        benchmark::DoNotOptimize(embed_text(params, tokens));
    }
}
BENCHMARK(BM_EmbedSegment)->Arg(32)->Arg(128);

void BM_TrainingStep(benchmark::State& state)
{
    const std::size_t dim = 64;
    const auto params = encoder(dim);
    const auto concepts = random_table(2000, dim, 2);
    std::vector<TrainingExample> examples(16);
    std::vector<NegativeSet> negatives;
    Rng rng(3);
    for (std::size_t i = 0; i < examples.size(); ++i) {
        examples[i].segment = Segment{"d" + std::to_string(i), 0, words(128), 0};
        examples[i].positives = {concepts.ids()[i]};
        examples[i].source = i % 2 ? Source::PSEUDO : Source::MANUAL;
        const auto emb = embed_text(params, examples[i].segment.tokens);
        const std::vector<std::size_t> pos{i};
        negatives.push_back(sample_negatives(emb, pos, concepts, rng));
    }
    EncoderGradient grad(params);
    for (auto _ : state) {
        grad.clear();
        benchmark::DoNotOptimize(
            batch_loss_and_gradient(params, concepts, examples, negatives, 0.4, 1.0, &grad));
    }
}
BENCHMARK(BM_TrainingStep);

void BM_NegativeSampling(benchmark::State& state)
{
    const auto concepts = random_table(static_cast<std::size_t>(state.range(0)), 64, 4);
    const auto query = concepts.row(0);
    const std::vector<std::size_t> pos{0};
    Rng rng(5);
    for (auto _ : state) {
        benchmark::DoNotOptimize(sample_negatives(query, pos, concepts, rng));
    }
}
BENCHMARK(BM_NegativeSampling)->Arg(1000)->Arg(10000);

void BM_IndexSearch(benchmark::State& state)
{
    const auto table = random_table(10000, 64, 6);
    const auto fine = state.range(0) == 0 ? FineQuantizer::IDENTITY : FineQuantizer::PRODUCT;
    const auto index = IvfIndex::build(table, fine, 7);
    const auto queries = random_table(64, 64, 8);
    const SearchParams params{10, static_cast<std::size_t>(state.range(1))};
    std::size_t q = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(index.search(queries.row(q++ % queries.size()), params));
    }
}
BENCHMARK(BM_IndexSearch)->Args({0, 1})->Args({0, 8})->Args({1, 1})->Args({1, 8});

void BM_ExactSearch(benchmark::State& state)
{
    const auto table = random_table(10000, 64, 6);
    const auto queries = random_table(64, 64, 8);
    std::size_t q = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(exact_search(table, queries.row(q++ % queries.size()), 10));
    }
}
BENCHMARK(BM_ExactSearch);

void BM_PrfAtK(benchmark::State& state)
{
    PredictionSet preds{"d", {}, {}};
    std::set<ConceptId> gold;
    for (int i = 0; i < 10; ++i) {
        preds.concepts.push_back(ConceptId::parse("SYNTHETIC:B" + std::to_string(i)));
        gold.insert(ConceptId::parse("SYNTHETIC:B" + std::to_string(2 * i)));
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(prf_at_k(preds, gold));
    }
}
BENCHMARK(BM_PrfAtK);

}  // namespace

BENCHMARK_MAIN();
