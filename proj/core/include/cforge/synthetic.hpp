#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cforge/concept_kb.hpp"
#include "cforge/corpus.hpp"
#include "cforge/pseudo_annotation.hpp"

namespace cforge {

/// Generator settings for a self-contained benchmark: a KB of SYNTHETIC
/// concepts bridged by UMLS ids, PubTator train/dev/test splits, a library
/// and MMI annotator output over it.
struct SyntheticConfig {
    std::size_t concepts = 200;
    std::size_t rare = 30;
    int rare_min_manual = 1;
    int rare_max_manual = 3;
    int frequent_min_manual = 12;
    int frequent_max_manual = 20;
    std::size_t test_docs_rare = 4;
    std::size_t test_docs_frequent = 2;
    std::size_t dev_docs_rare = 2;
    std::size_t dev_docs_frequent = 1;
    std::size_t library_docs_per_concept = 12;
    std::size_t leaked_docs = 20;  // test documents copied into the library
    double label_noise = 0.15;     // annotator top candidate replaced
    double overlap_noise = 0.2;    // extra sub-span candidate on a name
    double abbreviation_share = 0.2;  // concepts with an abbreviation name
    double rare_noncanonical = 0.8;   // in dev/test
    double frequent_noncanonical = 0.5;
    double train_noncanonical = 0.5;
    std::size_t filler_words = 300;
    std::size_t filler_per_doc = 20;
    std::uint64_t seed = 0;
};

struct SyntheticBenchmark {
    KnowledgeBase kb;
    std::vector<PubtatorRecord> train;
    std::vector<PubtatorRecord> dev;
    std::vector<PubtatorRecord> test;
    std::vector<PubtatorRecord> library;
    std::vector<RawCandidateSet> mmi;
    std::vector<ConceptId> rare_concepts;
    std::vector<std::string> leaked_ids;
};

SyntheticBenchmark make_synthetic_benchmark(const SyntheticConfig& cfg);

/// kb.jsonl, corpus/{train,dev,test}.pubtator, library/{documents.pubtator,annotations.mmi}
void write_synthetic_benchmark(const SyntheticBenchmark& bench, const std::string& dir);

}  // namespace cforge
