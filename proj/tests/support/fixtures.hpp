#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cforge/concept_kb.hpp"
#include "cforge/corpus.hpp"
#include "cforge/evaluation.hpp"
#include "cforge/rng.hpp"
#include "cforge/training.hpp"

namespace fixture {

cforge::ConceptId id(const std::string& text);

cforge::Concept concept_of(const std::string& id, std::vector<std::string> names,
                           std::string description = "", std::string type = "Disease",
                           std::vector<std::string> cross_refs = {});

/// Annotation over tokens [begin, end) of `doc`, mention taken from the text.
cforge::Annotation annotate(const cforge::Document& doc, std::size_t begin, std::size_t end,
                            const std::string& concept_id, double score = 1.0,
                            cforge::Source source = cforge::Source::PSEUDO);

/// Token span of the first occurrence of `phrase` (space separated tokens).
cforge::TokenSpan find_phrase(const cforge::Document& doc, const std::string& phrase);

/// The two post-annotation filter examples: sentences, KB and annotator
/// output, each with extra correct annotations that must survive.
struct FilterCase {
    cforge::KnowledgeBase kb;
    cforge::Document doc;
    std::vector<cforge::Annotation> anns;
    cforge::Annotation expected_drop;
};
FilterCase false_abbreviation_case();
FilterCase overlap_case();

/// Small random training instance for gradient checks.
struct GradientCase {
    cforge::EncoderParams params;
    cforge::ConceptEmbeddings concepts;
    std::vector<cforge::TrainingExample> examples;
    std::vector<cforge::NegativeSet> negatives;
    double w_a = 0.5;
    double tau = 1.0;
};
GradientCase random_gradient_case(std::uint64_t seed);

/// Random scoring instance: KB, test corpus with gold, predictions and
/// training counts.
struct ScoringCase {
    cforge::KnowledgeBase kb;
    cforge::ParsedCorpus corpus;
    std::vector<cforge::PredictionSet> preds;
    cforge::ConceptCounts training_counts;
};
ScoringCase random_scoring_case(std::uint64_t seed);

/// Random unit vectors with ids SYNTHETIC:V0000...
cforge::ConceptEmbeddings random_unit_vectors(std::size_t n, std::size_t dim, std::uint64_t seed);

}  // namespace fixture
