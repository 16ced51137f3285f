#include "cforge/augmentation.hpp"

#include <algorithm>

#include "cforge/errors.hpp"
#include "cforge/log.hpp"
#include "cforge/rng.hpp"

namespace cforge {

namespace {

bool is_ascii_punct(char c)
{
    const auto u = static_cast<unsigned char>(c);
    return u < 0x80 && !((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9'));
}

}  // namespace

std::vector<std::string> search_terms(std::string_view text)
{
    std::vector<std::string> out;
    for (auto& tok : whitespace_tokens(normalize_name(text))) {
        std::size_t b = 0;
        std::size_t e = tok.size();
        while (b < e && is_ascii_punct(tok[b])) {
            ++b;
        }
        while (e > b && is_ascii_punct(tok[e - 1])) {
            --e;
        }
        if (e > b) {
            out.push_back(tok.substr(b, e - b));
        }
    }
    return out;
}

Library::Library(std::vector<Document> documents) : documents_(std::move(documents))
{
    for (std::size_t i = 0; i < documents_.size(); ++i) {
        if (!by_id_.emplace(documents_[i].doc_id(), i).second) {
            throw FormatError("duplicate library document " + documents_[i].doc_id());
        }
        std::unordered_map<std::string, std::size_t> tf;
        for (auto& term : search_terms(documents_[i].text())) {
            ++tf[std::move(term)];
        }
        for (auto& [term, n] : tf) {
            postings_[term].emplace_back(i, n);
        }
    }
}

const Document* Library::find(std::string_view doc_id) const
{
    const auto it = by_id_.find(std::string(doc_id));
    return it == by_id_.end() ? nullptr : &documents_[it->second];
}

std::vector<Library::Hit> Library::search(std::string_view query, std::size_t top_n) const
{
    auto terms = search_terms(query);
    std::sort(terms.begin(), terms.end());
    terms.erase(std::unique(terms.begin(), terms.end()), terms.end());
    if (terms.empty() || top_n == 0) {
        return {};
    }
    std::vector<const std::vector<std::pair<std::size_t, std::size_t>>*> lists;
    for (const auto& t : terms) {
        const auto it = postings_.find(t);
        if (it == postings_.end()) {
            return {};
        }
        lists.push_back(&it->second);
    }
    // Postings are in document order; intersect by counting.
    std::unordered_map<std::size_t, std::pair<std::size_t, std::size_t>> acc;  // doc -> (terms, score)
    for (const auto* list : lists) {
        for (const auto& [doc, n] : *list) {
            auto& slot = acc[doc];
            ++slot.first;
            slot.second += n;
        }
    }
    std::vector<Hit> hits;
    for (const auto& [doc, slot] : acc) {
        if (slot.first == terms.size()) {
            hits.push_back(Hit{doc, slot.second});
        }
    }
    std::sort(hits.begin(), hits.end(), [&](const Hit& a, const Hit& b) {
        if (a.score != b.score) {
            return a.score > b.score;
        }
        return documents_[a.doc].doc_id() < documents_[b.doc].doc_id();
    });
    if (hits.size() > top_n) {
        hits.resize(top_n);
    }
    return hits;
}

std::vector<const Document*> retrieve_candidates(const Concept& concept_id, const Library& library,
                                                 std::size_t top_n)
{
    std::vector<const Document*> out;
    for (const auto& hit : library.search(concept_id.canonical_name(), top_n)) {
        out.push_back(&library.documents()[hit.doc]);
    }
    return out;
}

std::vector<const Document*> exclude_leakage(std::span<const Document* const> candidates,
                                             const std::unordered_set<std::string>& target_ids)
{
    std::vector<const Document*> out;
    for (const Document* d : candidates) {
        if (!target_ids.contains(d->doc_id())) {
            out.push_back(d);
        }
    }
    return out;
}

std::vector<Annotation> map_to_target(const Document& doc, std::span<const Annotation> anns,
                                      const KnowledgeBase& kb)
{
    std::vector<Annotation> out;
    out.reserve(anns.size());
    for (const auto& a : anns) {
        if (a.concept_id.vocabulary != Vocabulary::UMLS) {
            out.push_back(a);
            continue;
        }
        try {
            Annotation mapped = a;
            mapped.concept_id = map_umls_to_target(a.concept_id, doc.text(), kb);
            out.push_back(std::move(mapped));
        } catch (const UnmappedConcept&) {
            log::debug(doc.doc_id(), ": dropped unmapped ", a.concept_id.str());
        }
    }
    return out;
}

std::size_t CandidatePool::available() const
{
    return static_cast<std::size_t>(
        std::count_if(segments.begin(), segments.end(), [](const PoolSegment& s) { return !s.used; }));
}

CandidatePool build_candidate_pool(
    const ConceptId& concept_id, std::span<const Document* const> ranked_docs,
    const std::unordered_map<std::string, std::vector<Annotation>>& pseudo, std::size_t max_tokens)
{
    CandidatePool pool{concept_id, {}};
    for (const Document* doc : ranked_docs) {
        const auto it = pseudo.find(doc->doc_id());
        if (it == pseudo.end()) {
            continue;
        }
        std::map<std::size_t, std::vector<Annotation>> per_segment;
        for (const auto& a : it->second) {
            per_segment[segment_of(a.span.begin, max_tokens)].push_back(a);
        }
        std::vector<Segment> segments;
        for (auto& [index, anns] : per_segment) {
            const bool has_concept = std::any_of(anns.begin(), anns.end(),
                                                 [&](const Annotation& a) { return a.concept_id == concept_id; });
            if (!has_concept) {
                continue;
            }
            if (segments.empty()) {
                segments = segment_document(*doc, max_tokens);
            }
            if (index >= segments.size()) {
                continue;
            }
            pool.segments.push_back(PoolSegment{segments[index], doc->doc_id(), std::move(anns), false});
        }
    }
    return pool;
}

const PoolSegment& select_diverse_segment(CandidatePool& pool, PaperUsage& usage)
{
    PoolSegment* best = nullptr;
    int best_usage = 0;
    for (auto& s : pool.segments) {
        if (s.used) {
            continue;
        }
        const auto it = usage.find(s.paper_id);
        const int u = it == usage.end() ? 0 : it->second;
        if (best == nullptr || u < best_usage || (u == best_usage && s.paper_id < best->paper_id)) {
            best = &s;
            best_usage = u;
        }
    }
    if (best == nullptr) {
        throw PoolExhausted("candidate pool for " + pool.concept_id.str() + " is exhausted");
    }
    best->used = true;
    ++usage[best->paper_id];
    return *best;
}

const PoolSegment& select_ranked_segment(CandidatePool& pool, PaperUsage& usage)
{
    for (auto& s : pool.segments) {
        if (!s.used) {
            s.used = true;
            ++usage[s.paper_id];
            return s;
        }
    }
    throw PoolExhausted("candidate pool for " + pool.concept_id.str() + " is exhausted");
}

AugmentationResult augment_to_threshold(std::span<const TrainingExample> manual,
                                        const ConceptCounts& manual_counts,
                                        std::map<ConceptId, CandidatePool>& pools,
                                        const AugmentationConfig& cfg, bool diversity)
{
    if (cfg.k < 0) {
        throw std::invalid_argument("k must be >= 0");
    }
    AugmentationResult result;
    result.examples.assign(manual.begin(), manual.end());
    PaperUsage usage;
    for (auto& [concept_id, pool] : pools) {
        const int have = count_of(manual_counts, concept_id);
        if (have >= cfg.k) {
            continue;
        }
        const int need = cfg.k - have;
        int added = 0;
        while (added < need && pool.available() > 0) {
            const PoolSegment& chosen =
                diversity ? select_diverse_segment(pool, usage) : select_ranked_segment(pool, usage);
            std::vector<ConceptId> positives;
            for (const auto& a : chosen.annotations) {
                positives.push_back(a.concept_id);
            }
            std::sort(positives.begin(), positives.end());
            positives.erase(std::unique(positives.begin(), positives.end()), positives.end());
            result.examples.push_back(
                TrainingExample{chosen.segment, std::move(positives), Source::PSEUDO, concept_id});
            ++added;
        }
        if (added > 0) {
            result.added[concept_id] = added;
        }
        if (added < need) {
            result.shortfall[concept_id] = need - added;
            log::debug("pool for ", concept_id.str(), " exhausted: ", added, " of ", need, " added");
        }
    }
    auto rng = Rng::stream(cfg.seed, "augment.shuffle");
    rng.shuffle(std::span<TrainingExample>(result.examples));
    return result;
}

std::unordered_map<std::string, std::vector<Annotation>> prepare_pseudo_annotations(
    const Library& library, std::vector<RawCandidateSet> sets, const KnowledgeBase& kb,
    const FilterSet& filters)
{
    const std::size_t dropped = resolve_mentions(sets, library.documents());
    if (dropped > 0) {
        log::info(dropped, " annotator spans did not match a library document and were dropped");
    }
    std::unordered_map<std::string, std::vector<Annotation>> by_doc;
    for (const auto& s : sets) {
        by_doc[s.doc_id].push_back(select_top_candidate(s));
    }
    for (auto& [doc_id, anns] : by_doc) {
        const Document& doc = *library.find(doc_id);
        anns = map_to_target(doc, apply_filters(doc, anns, kb, filters), kb);
    }
    return by_doc;
}

std::map<ConceptId, CandidatePool> build_pools(
    const KnowledgeBase& kb, const ConceptCounts& manual_counts, const Library& library,
    const std::unordered_map<std::string, std::vector<Annotation>>& pseudo,
    const std::unordered_set<std::string>& target_ids, const AugmentationConfig& cfg)
{
    std::map<ConceptId, CandidatePool> pools;
    for (const auto& c : kb.concepts()) {
        if (!is_target_concept(c) || count_of(manual_counts, c.id) >= cfg.k) {
            continue;
        }
        const auto retrieved = retrieve_candidates(c, library, cfg.top_n_candidates);
        const auto clean = exclude_leakage(retrieved, target_ids);
        auto pool = build_candidate_pool(c.id, clean, pseudo, cfg.max_tokens);
        if (!pool.segments.empty()) {
            pools.emplace(c.id, std::move(pool));
        }
    }
    return pools;
}

}  // namespace cforge
