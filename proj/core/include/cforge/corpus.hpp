#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cforge/concept_kb.hpp"
#include "cforge/types.hpp"

namespace cforge {

inline constexpr std::size_t kMaxSegmentTokens = 512;
inline constexpr int kUndertrainedThreshold = 10;

/// Maximal runs of non-whitespace characters.
std::vector<std::string> whitespace_tokens(std::string_view text);

class Document {
  public:
    Document() = default;
    Document(std::string doc_id, std::string title, std::string body);

    const std::string& doc_id() const noexcept { return doc_id_; }
    const std::string& title() const noexcept { return title_; }
    const std::string& body() const noexcept { return body_; }
    /// title + " " + body; PubTator character offsets index into this.
    const std::string& text() const noexcept { return text_; }
    const std::vector<std::string>& tokens() const noexcept { return tokens_; }

    /// Joined tokens of `span`, single-space separated.
    std::string span_text(const TokenSpan& span) const;

    /// Minimal token range covering characters [char_begin, char_end).
    /// `clipped` is set when either end falls inside a token.
    /// Throws OffsetError when the range is empty or covers no token.
    TokenSpan covering_span(std::size_t char_begin, std::size_t char_end, bool* clipped) const;

  private:
    std::string doc_id_;
    std::string title_;
    std::string body_;
    std::string text_;
    std::vector<std::string> tokens_;
    std::vector<std::size_t> token_begin_;
    std::vector<std::size_t> token_end_;
};

struct Segment {
    std::string doc_id;
    std::size_t index = 0;
    std::vector<std::string> tokens;
    std::size_t first_token = 0;  // offset of tokens[0] within the document
};

struct Annotation {
    std::string doc_id;
    TokenSpan span;
    std::string mention;
    ConceptId concept_id;
    double score = 1.0;
    Source source = Source::MANUAL;

    friend bool operator==(const Annotation&, const Annotation&) = default;
};

// -- PubTator ---------------------------------------------------------------

/// One raw annotation line, kept verbatim so a parsed file re-serializes
/// byte-identically.
struct PubtatorEntry {
    std::size_t char_begin = 0;
    std::size_t char_end = 0;
    std::string mention;
    std::string type;
    std::string concept_field;  // possibly composite, "MESH:D1|MESH:D2"
};

struct PubtatorRecord {
    std::string doc_id;
    std::string title;
    std::optional<std::string> abstract;
    std::vector<PubtatorEntry> entries;
    std::vector<std::string> relations;
};

std::vector<PubtatorRecord> read_pubtator(std::istream& in);
void write_pubtator(std::ostream& out, std::span<const PubtatorRecord> records);

struct ParsedCorpus {
    std::vector<Document> documents;
    std::vector<Annotation> annotations;
    std::vector<std::string> warnings;
};

/// Converts raw records to documents and token-span annotations (source
/// MANUAL). Composite concept ids split into one annotation each; the
/// "-1" placeholder id is skipped with a warning.
ParsedCorpus to_corpus(std::span<const PubtatorRecord> records);

/// read_pubtator followed by to_corpus. Throws ParseError / OffsetError.
ParsedCorpus parse_pubtator(std::istream& in);
ParsedCorpus load_pubtator(const std::string& path);

/// Tab-separated annotation table: doc_id, begin, end (token span),
/// mention, concept, score, source. Used between pipeline stages.
void write_annotations_tsv(std::ostream& out, std::span<const Annotation> anns);
std::vector<Annotation> read_annotations_tsv(std::istream& in);

// -- Segmentation and statistics --------------------------------------------

/// Greedy left-to-right chunks of at most max_tokens tokens.
std::vector<Segment> segment_document(const Document& doc,
                                      std::size_t max_tokens = kMaxSegmentTokens);

/// Index of the segment holding `token`, for a document split by max_tokens.
inline std::size_t segment_of(std::size_t token, std::size_t max_tokens = kMaxSegmentTokens)
{
    return token / max_tokens;
}

using ConceptCounts = std::map<ConceptId, int>;

/// Number of distinct documents with at least one annotation of each concept.
ConceptCounts concept_occurrence_counts(std::span<const Annotation> annotations);

inline int count_of(const ConceptCounts& counts, const ConceptId& id)
{
    const auto it = counts.find(id);
    return it == counts.end() ? 0 : it->second;
}

enum class MentionClass { CANONICAL, NON_CANONICAL };

/// CANONICAL iff the normalized mention equals the normalized form of any of
/// the concept's names. Throws UnknownConcept.
MentionClass classify_mention(const Annotation& ann, const KnowledgeBase& kb);

struct CorpusStats {
    ConceptCounts training_doc_counts;
    std::size_t evaluated_annotations = 0;
    double fraction_untrained = 0.0;
    double fraction_trained = 0.0;
    double fraction_undertrained = 0.0;  // fewer than kUndertrainedThreshold docs
    double fraction_non_canonical = 0.0;
};

/// Fractions are over `evaluated` annotations; counts come from `training`.
/// Annotations whose concept is missing from the KB count as non-canonical.
CorpusStats compute_corpus_stats(std::span<const Annotation> training,
                                 std::span<const Annotation> evaluated, const KnowledgeBase& kb);

}  // namespace cforge
