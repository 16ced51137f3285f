#include "fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace fixture {

using namespace cforge;

ConceptId id(const std::string& text) { return ConceptId::parse(text); }

Concept concept_of(const std::string& cid, std::vector<std::string> names, std::string description,
                   std::string type, std::vector<std::string> cross_refs)
{
    Concept c;
    c.id = id(cid);
    c.names = std::move(names);
    c.description = std::move(description);
    c.semantic_type = std::move(type);
    for (const auto& r : cross_refs) {
        c.cross_refs.push_back(id(r));
    }
    return c;
}

Annotation annotate(const Document& doc, std::size_t begin, std::size_t end,
                    const std::string& cid, double score, Source source)
{
    const TokenSpan span{begin, end};
    return Annotation{doc.doc_id(), span, doc.span_text(span), id(cid), score, source};
}

TokenSpan find_phrase(const Document& doc, const std::string& phrase)
{
    const auto words = whitespace_tokens(phrase);
    const auto& toks = doc.tokens();
    for (std::size_t i = 0; i + words.size() <= toks.size(); ++i) {
        if (std::equal(words.begin(), words.end(), toks.begin() + static_cast<std::ptrdiff_t>(i))) {
            return TokenSpan{i, i + words.size()};
        }
    }
    throw std::logic_error("phrase not in fixture: " + phrase);
}

namespace {

Annotation annotate_phrase(const Document& doc, const std::string& phrase, const std::string& cid,
                           double score)
{
    const auto s = find_phrase(doc, phrase);
    return annotate(doc, s.begin, s.end, cid, score);
}

}  // namespace

FilterCase false_abbreviation_case()
{
    FilterCase fc;
    fc.kb = KnowledgeBase({
        concept_of("UMLS:C0043194", {"Wiskott-Aldrich Syndrome", "WAS"}),
        concept_of("UMLS:C9100001", {"Gene defect"}),
        concept_of("UMLS:C9100002", {"Null allele"}, "", "Gene"),
        concept_of("UMLS:C9100003", {"Intron retention"}, "", "Process"),
    });
    fc.doc = Document("false-abbrev", "",
                      "This gene defect was shown to cause a null allele as the result of "
                      "complete intron retention.");
    fc.anns = {
        annotate_phrase(fc.doc, "gene defect", "UMLS:C9100001", 0.9),
        annotate_phrase(fc.doc, "was", "UMLS:C0043194", 0.8),
        annotate_phrase(fc.doc, "null allele", "UMLS:C9100002", 0.9),
        annotate_phrase(fc.doc, "intron retention.", "UMLS:C9100003", 0.7),
    };
    fc.expected_drop = fc.anns[1];
    return fc;
}

FilterCase overlap_case()
{
    FilterCase fc;
    fc.kb = KnowledgeBase({
        concept_of("UMLS:C1561643", {"Chronic Kidney Disease", "CKD"}),
        concept_of("UMLS:C0012634", {"Disease"}),
        concept_of("UMLS:C9100004", {"APRT deficiency"}),
        concept_of("UMLS:C9100005", {"Stone formation"}),
        concept_of("UMLS:C9100006", {"Infection"}),
    });
    fc.doc = Document("overlap", "",
                      "Signs and symptoms of APRT deficiency caused by stone formation in the "
                      "kidney that caused obstruction, infection, or chronic kidney disease.");
    fc.anns = {
        annotate_phrase(fc.doc, "APRT deficiency", "UMLS:C9100004", 0.9),
        annotate_phrase(fc.doc, "stone formation", "UMLS:C9100005", 0.8),
        annotate_phrase(fc.doc, "infection,", "UMLS:C9100006", 0.8),
        annotate_phrase(fc.doc, "chronic kidney disease.", "UMLS:C1561643", 0.9),
        annotate_phrase(fc.doc, "disease.", "UMLS:C0012634", 0.6),
    };
    fc.expected_drop = fc.anns[4];
    return fc;
}

namespace {

std::string word(std::size_t i)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "w%02zu", i);
    return buf;
}

}  // namespace

GradientCase random_gradient_case(std::uint64_t seed)
{
    Rng rng = Rng::stream(seed, "fixture.gradient");
    GradientCase gc;
    const std::size_t dim = 2 + rng.below(7);      // <= 8
    const std::size_t words = 4 + rng.below(16);   // |V| = words + 1 <= 20
    const std::size_t n_concepts = 4 + rng.below(9);
    std::vector<std::string> terms;
    for (std::size_t i = 0; i < words; ++i) {
        terms.push_back(word(i));
    }
    gc.params = EncoderParams::initialize(TokenVocabulary(terms), dim, seed);
    // Larger entries than the default init give the loss some curvature.
    for (auto& x : gc.params.token_table) {
        x = rng.uniform(-1.0, 1.0);
    }
    for (auto& x : gc.params.projection) {
        x = rng.uniform(-1.0, 1.0);
    }

    std::vector<ConceptId> ids;
    std::vector<double> values;
    for (std::size_t c = 0; c < n_concepts; ++c) {
        ids.push_back(ConceptId{Vocabulary::SYNTHETIC, "G" + std::to_string(100 + c)});
        std::vector<double> v(dim);
        double n = 0.0;
        for (auto& x : v) {
            x = rng.uniform(-1.0, 1.0);
            n += x * x;
        }
        for (auto& x : v) {
            values.push_back(x / std::sqrt(n));
        }
    }
    gc.concepts = ConceptEmbeddings(dim, ids, values);

    const std::size_t n_examples = 1 + rng.below(4);
    for (std::size_t e = 0; e < n_examples; ++e) {
        TrainingExample ex;
        ex.segment.doc_id = "g" + std::to_string(e);
        const std::size_t len = 1 + rng.below(8);
        for (std::size_t t = 0; t < len; ++t) {
            // Roughly one token in eight is out of vocabulary.
            ex.segment.tokens.push_back(rng.below(8) == 0 ? "oov" : word(rng.below(words)));
        }
        std::vector<std::size_t> rows(n_concepts);
        for (std::size_t i = 0; i < n_concepts; ++i) {
            rows[i] = i;
        }
        rng.shuffle(std::span<std::size_t>(rows));
        const std::size_t p = 1 + rng.below(3);                                // P <= 3
        const std::size_t n = std::min<std::size_t>(rng.below(7), n_concepts - p);  // N <= 6
        std::vector<std::size_t> pos(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(p));
        std::sort(pos.begin(), pos.end());
        for (auto r : pos) {
            ex.positives.push_back(ids[r]);
        }
        NegativeSet neg;
        for (std::size_t i = 0; i < n; ++i) {
            (i % 2 == 0 ? neg.hard : neg.random).push_back(rows[p + i]);
        }
        ex.source = rng.below(2) == 0 ? Source::MANUAL : Source::PSEUDO;
        gc.examples.push_back(std::move(ex));
        gc.negatives.push_back(std::move(neg));
    }
    gc.w_a = rng.uniform(0.0, 1.0);
    gc.tau = rng.uniform(0.5, 2.0);
    return gc;
}

ScoringCase random_scoring_case(std::uint64_t seed)
{
    Rng rng = Rng::stream(seed, "fixture.scoring");
    ScoringCase sc;
    static const char* kTypes[] = {"Disease", "Chemical", "Gene"};
    const std::size_t n_concepts = 5 + rng.below(20);
    std::vector<Concept> concepts;
    std::vector<ConceptId> all_ids;
    for (std::size_t c = 0; c < n_concepts; ++c) {
        const std::string code = "C" + std::to_string(1000 + c);
        concepts.push_back(concept_of("SYNTHETIC:" + code,
                                      {"name " + code, "Alt-Name " + code},
                                      "", kTypes[rng.below(3)]));
        all_ids.push_back(concepts.back().id);
    }
    // A few gold ids outside the KB.
    for (std::size_t c = 0; c < 2; ++c) {
        all_ids.push_back(ConceptId{Vocabulary::MESH, "D99" + std::to_string(c)});
    }
    sc.kb = KnowledgeBase(concepts);
    for (const auto& cid : all_ids) {
        if (rng.below(3) != 0) {
            sc.training_counts[cid] = static_cast<int>(rng.below(20));
        }
    }

    const std::size_t n_docs = 1 + rng.below(12);
    for (std::size_t d = 0; d < n_docs; ++d) {
        const std::string doc_id = "doc" + std::to_string(d);
        std::ostringstream text;
        std::vector<std::pair<std::size_t, std::size_t>> spans;
        std::vector<ConceptId> span_ids;
        std::size_t pos = 0;
        const std::size_t n_mentions = rng.below(6);  // 0 means no gold
        for (std::size_t m = 0; m < n_mentions; ++m) {
            const auto& cid = all_ids[rng.below(all_ids.size())];
            const std::string code = cid.code;
            std::string mention;
            switch (rng.below(3)) {
            case 0:
                mention = "name " + code;
                break;
            case 1:
                mention = "alt name " + code;
                break;
            default:
                mention = "other form";
                break;
            }
            text << "filler " << mention << ' ';
            pos += 1;
            const std::size_t len = whitespace_tokens(mention).size();
            spans.emplace_back(pos, pos + len);
            span_ids.push_back(cid);
            pos += len;
        }
        text << "end";
        Document doc(doc_id, "", text.str());
        for (std::size_t m = 0; m < spans.size(); ++m) {
            sc.corpus.annotations.push_back(Annotation{
                doc_id, TokenSpan{spans[m].first, spans[m].second},
                doc.span_text(TokenSpan{spans[m].first, spans[m].second}), span_ids[m], 1.0,
                Source::MANUAL});
        }
        sc.corpus.documents.push_back(std::move(doc));

        PredictionSet p{doc_id, {}, {}};
        auto pool = all_ids;
        rng.shuffle(std::span<ConceptId>(pool));
        const std::size_t n_pred = std::min<std::size_t>(rng.below(12), pool.size());
        for (std::size_t i = 0; i < n_pred; ++i) {
            p.concepts.push_back(pool[i]);
            p.distances.push_back(static_cast<double>(i));
        }
        sc.preds.push_back(std::move(p));
    }
    // Predictions in a different order than the corpus.
    rng.shuffle(std::span<PredictionSet>(sc.preds));
    return sc;
}

ConceptEmbeddings random_unit_vectors(std::size_t n, std::size_t dim, std::uint64_t seed)
{
    Rng rng = Rng::stream(seed, "fixture.vectors");
    std::vector<ConceptId> ids;
    std::vector<double> values;
    for (std::size_t i = 0; i < n; ++i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "V%05zu", i);
        ids.push_back(ConceptId{Vocabulary::SYNTHETIC, buf});
        std::vector<double> v(dim);
        double s = 0.0;
        for (auto& x : v) {
            // Sum of uniforms: close enough to Gaussian for a spread on the sphere.
            x = rng.unit() + rng.unit() + rng.unit() - 1.5;
            s += x * x;
        }
        for (auto x : v) {
            values.push_back(x / std::sqrt(s));
        }
    }
    return ConceptEmbeddings(dim, std::move(ids), std::move(values));
}

}  // namespace fixture
