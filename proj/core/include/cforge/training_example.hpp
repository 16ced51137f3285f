#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cforge/corpus.hpp"
#include "cforge/types.hpp"

namespace cforge {

/// One segment with its gold (or pseudo-gold) concepts.
struct TrainingExample {
    Segment segment;
    std::vector<ConceptId> positives;  // sorted, unique, non-empty
    Source source = Source::MANUAL;
    /// Concept this pseudo example was added for. In-memory only.
    std::optional<ConceptId> anchor;

    /// Stable identity used to derive per-example random streams.
    std::string key() const;
};

/// Segments of the training documents that carry at least one annotation.
/// Annotations attach to the segment holding their start token.
std::vector<TrainingExample> make_manual_examples(std::span<const Document> documents,
                                                  std::span<const Annotation> annotations,
                                                  std::size_t max_tokens = kMaxSegmentTokens);

/// JSON lines: doc_id, segment_index, tokens, positives, source, weight_class
/// ("manual" for weight 1, "augmented" for weight w_a).
void write_examples_jsonl(std::ostream& out, std::span<const TrainingExample> examples);
std::vector<TrainingExample> read_examples_jsonl(std::istream& in);

}  // namespace cforge
