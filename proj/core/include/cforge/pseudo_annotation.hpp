#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "cforge/concept_kb.hpp"
#include "cforge/corpus.hpp"

namespace cforge {

struct Candidate {
    ConceptId concept_id;
    double score = 0.0;
    std::string preferred_name;
    std::string semantic_types;
};

/// Annotator output for one (document, span): candidates ranked by score
/// descending, ties by concept code ascending.
struct RawCandidateSet {
    std::string doc_id;
    TokenSpan span;
    std::string mention;  // empty until resolve_mentions
    std::vector<Candidate> candidates;
};

/// Lines `docId|MMI|score|preferredName|CUI|semTypes|startToken|endToken`.
/// Rows sharing (doc, span) merge into one set; sets keep first-seen order.
/// A bare CUI is read as a UMLS id; "VOCAB:CODE" is also accepted.
/// Throws ParseError, NegativeScore.
std::vector<RawCandidateSet> parse_mmi(std::istream& in);

/// Writes sets back as MMI lines, one per candidate.
void write_mmi(std::ostream& out, std::span<const RawCandidateSet> sets);

/// Fills `mention` from document tokens. Sets whose document is unknown or
/// whose span runs past the document are dropped and counted in the return
/// value.
std::size_t resolve_mentions(std::vector<RawCandidateSet>& sets,
                             std::span<const Document> documents);

/// Rank-0 candidate as a PSEUDO annotation.
Annotation select_top_candidate(const RawCandidateSet& raw);

/// True for a name written all upper-case (at least one letter) of at most
/// five characters, e.g. "WAS".
bool is_abbreviation_name(std::string_view name);

/// Drops annotations whose match went through an abbreviation name of the
/// concept while the document mention is not itself upper-case. Order kept.
std::vector<Annotation> filter_false_abbreviations(const Document& doc,
                                                   std::span<const Annotation> anns,
                                                   const KnowledgeBase& kb);

/// Which post-annotation filters run. Diversity applies during augmentation.
struct FilterSet {
    bool abbreviation = true;
    bool overlap = true;
    bool diversity = true;

    static FilterSet none() { return FilterSet{false, false, false}; }
    /// Comma-separated subset of "abbrev,overlap,diversity"; "" or "none"
    /// disables all. Throws FormatError on unknown names.
    static FilterSet parse(std::string_view list);
    std::string str() const;

    friend bool operator==(const FilterSet&, const FilterSet&) = default;
};

/// Within every group of overlapping spans keeps the longest one (then the
/// higher score, then the earlier start). Exact (span, concept) duplicates
/// collapse to one. Output sorted by start.
std::vector<Annotation> filter_overlaps(std::span<const Annotation> anns);

/// Abbreviation filter then overlap filter, each only if enabled.
std::vector<Annotation> apply_filters(const Document& doc, std::span<const Annotation> anns,
                                      const KnowledgeBase& kb, const FilterSet& filters);

}  // namespace cforge
