#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "cforge/concept_kb.hpp"
#include "cforge/corpus.hpp"
#include "cforge/pseudo_annotation.hpp"
#include "cforge/training_example.hpp"

namespace cforge {

struct AugmentationConfig {
    int k = 10;  // occurrence threshold
    std::size_t top_n_candidates = 50;
    double w_a = 0.4;
    std::uint64_t seed = 0;
    std::size_t max_tokens = kMaxSegmentTokens;
};

/// Normalized search terms: normalize_name, whitespace split, then leading
/// and trailing ASCII punctuation stripped from each term.
std::vector<std::string> search_terms(std::string_view text);

/// Local stand-in for a literature search engine over a document collection.
class Library {
  public:
    explicit Library(std::vector<Document> documents);

    const std::vector<Document>& documents() const noexcept { return documents_; }
    std::size_t size() const noexcept { return documents_.size(); }
    bool empty() const noexcept { return documents_.empty(); }
    const Document* find(std::string_view doc_id) const;

    struct Hit {
        std::size_t doc = 0;  // index into documents()
        std::size_t score = 0;
    };

    /// Documents containing every query term, scored by the total number of
    /// query-term occurrences; descending score, ties by doc_id.
    std::vector<Hit> search(std::string_view query, std::size_t top_n) const;

  private:
    std::vector<Document> documents_;
    std::unordered_map<std::string, std::vector<std::pair<std::size_t, std::size_t>>> postings_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

/// Query = the concept's rank-0 canonical name.
std::vector<const Document*> retrieve_candidates(const Concept& concept_id, const Library& library,
                                                 std::size_t top_n);

/// Drops candidates whose doc_id is part of the target dataset. Order kept.
std::vector<const Document*> exclude_leakage(std::span<const Document* const> candidates,
                                             const std::unordered_set<std::string>& target_ids);

/// Resolves UMLS ids through the KB cross references. Annotations with an
/// unmappable UMLS id are dropped; other vocabularies pass through.
std::vector<Annotation> map_to_target(const Document& doc, std::span<const Annotation> anns,
                                      const KnowledgeBase& kb);

struct PoolSegment {
    Segment segment;
    std::string paper_id;
    std::vector<Annotation> annotations;  // every pseudo annotation in the segment
    bool used = false;
};

struct CandidatePool {
    ConceptId concept_id;
    std::vector<PoolSegment> segments;  // retrieval rank order

    std::size_t available() const;
};

/// Segments of the retrieved papers that contain a pseudo annotation of
/// `concept`. `pseudo` maps doc_id to that document's (filtered, mapped)
/// annotations.
CandidatePool build_candidate_pool(
    const ConceptId& concept_id, std::span<const Document* const> ranked_docs,
    const std::unordered_map<std::string, std::vector<Annotation>>& pseudo,
    std::size_t max_tokens = kMaxSegmentTokens);

using PaperUsage = std::map<std::string, int>;

/// Takes an unused segment from the paper with the lowest usage count (ties:
/// smallest paper_id), marks it used and bumps the paper's usage.
/// Throws PoolExhausted.
const PoolSegment& select_diverse_segment(CandidatePool& pool, PaperUsage& usage);

/// Without the diversity filter: first unused segment in retrieval order.
const PoolSegment& select_ranked_segment(CandidatePool& pool, PaperUsage& usage);

struct AugmentationResult {
    std::vector<TrainingExample> examples;  // manual + pseudo, shuffled
    std::map<ConceptId, int> added;
    std::map<ConceptId, int> shortfall;
};

/// For every pooled concept with manual_counts[c] < cfg.k, adds up to
/// cfg.k - manual_counts[c] pseudo examples (all of the pool if it runs
/// dry). Concepts are processed in id order against one corpus-wide usage
/// map; the union with the manual examples is shuffled with cfg.seed.
AugmentationResult augment_to_threshold(std::span<const TrainingExample> manual,
                                        const ConceptCounts& manual_counts,
                                        std::map<ConceptId, CandidatePool>& pools,
                                        const AugmentationConfig& cfg, bool diversity = true);

/// Library side of the pipeline: top candidate per span, filters, target
/// mapping. Returns annotations grouped by doc_id.
std::unordered_map<std::string, std::vector<Annotation>> prepare_pseudo_annotations(
    const Library& library, std::vector<RawCandidateSet> sets, const KnowledgeBase& kb,
    const FilterSet& filters);

/// Retrieval, leakage exclusion and pool building for every target concept
/// whose manual count is below cfg.k.
std::map<ConceptId, CandidatePool> build_pools(
    const KnowledgeBase& kb, const ConceptCounts& manual_counts, const Library& library,
    const std::unordered_map<std::string, std::vector<Annotation>>& pseudo,
    const std::unordered_set<std::string>& target_ids, const AugmentationConfig& cfg);

}  // namespace cforge
