#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cforge/types.hpp"

namespace cforge {

/// Lower-cases, turns hyphens and commas into spaces, collapses runs of
/// space/tab/CR/LF and trims. Idempotent.
std::string normalize_name(std::string_view raw);

/// First original spelling of every distinct normalized form, in input order.
std::vector<std::string> dedup_names(std::span<const std::string> names);

struct Concept {
    ConceptId id;
    std::vector<std::string> names;  // rank 0 is the top canonical name
    std::string description;
    std::string semantic_type;
    std::vector<ConceptId> cross_refs;

    const std::string& canonical_name() const { return names.front(); }
};

/// Concepts that can be predicted: everything except UMLS bridge entries
/// (UMLS ids carrying cross references to a target vocabulary).
inline bool is_target_concept(const Concept& c)
{
    return c.id.vocabulary != Vocabulary::UMLS || c.cross_refs.empty();
}

struct ConceptText {
    ConceptId concept_id;
    std::string text;
};

/// "name; name | description", names normalized and deduplicated. An empty
/// description drops the " | " separator.
ConceptText build_concept_text(const Concept& concept_id);

/// Immutable concept collection loaded from JSON lines.
class KnowledgeBase {
  public:
    KnowledgeBase() = default;
    explicit KnowledgeBase(std::vector<Concept> concepts);

    /// One JSON object per line: id, names, description, semantic_type,
    /// cross_refs. Blank lines are skipped. Throws ParseError.
    static KnowledgeBase read_jsonl(std::istream& in);
    static KnowledgeBase load(const std::string& path);
    void write_jsonl(std::ostream& out) const;

    std::size_t size() const noexcept { return concepts_.size(); }
    bool empty() const noexcept { return concepts_.empty(); }
    const std::vector<Concept>& concepts() const noexcept { return concepts_; }
    const Concept& at(std::size_t i) const { return concepts_.at(i); }

    bool contains(const ConceptId& id) const { return by_id_.contains(id); }
    const Concept* find(const ConceptId& id) const;
    /// Throws UnknownConcept.
    const Concept& get(const ConceptId& id) const;
    std::optional<std::size_t> index_of(const ConceptId& id) const;

  private:
    std::vector<Concept> concepts_;
    std::unordered_map<ConceptId, std::size_t> by_id_;
};

/// Picks the target-vocabulary id for a UMLS concept. With several cross
/// references, the first (KB order) whose canonical name occurs in the
/// normalized document text wins; if none occurs, the smallest code.
/// Throws UnmappedConcept when the concept has no cross references.
ConceptId map_umls_to_target(const ConceptId& cui, std::string_view document_text,
                             const KnowledgeBase& kb);

}  // namespace cforge
