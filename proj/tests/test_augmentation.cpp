#include <doctest.h>

#include <set>
#include <sstream>

#include "cforge/augmentation.hpp"
#include "cforge/errors.hpp"
#include "support/fixtures.hpp"

using namespace cforge;
using fixture::concept_of;
using fixture::id;

namespace {

CandidatePool make_pool(const std::string& cid, std::vector<std::pair<std::string, int>> papers)
{
    CandidatePool pool{id(cid), {}};
    for (const auto& [paper, n] : papers) {
        for (int i = 0; i < n; ++i) {
            Segment seg{paper, static_cast<std::size_t>(i), {"tok", paper}, 0};
            Annotation a{paper, TokenSpan{0, 1}, "tok", id(cid), 1.0, Source::PSEUDO};
            pool.segments.push_back(PoolSegment{seg, paper, {a}, false});
        }
    }
    return pool;
}

std::vector<TrainingExample> manual_for(const std::string& cid, int docs)
{
    std::vector<TrainingExample> out;
    for (int i = 0; i < docs; ++i) {
        out.push_back(TrainingExample{Segment{"m" + cid + std::to_string(i), 0, {"a"}, 0},
                                      {id(cid)}, Source::MANUAL, std::nullopt});
    }
    return out;
}

std::vector<std::string> ids_of(const std::vector<const Document*>& docs)
{
    std::vector<std::string> out;
    for (const auto* d : docs) {
        out.push_back(d->doc_id());
    }
    return out;
}

}  // namespace

TEST_SUITE("augmentation")
{
    TEST_CASE("search_terms")
    {
        CHECK(search_terms("Chronic Kidney-Disease, (CKD).") ==
              std::vector<std::string>{"chronic", "kidney", "disease", "ckd"});
        CHECK(search_terms("").empty());
    }

    TEST_CASE("retrieve_candidates ranks matching documents first")
    {
        std::vector<Document> docs;
        for (int i = 0; i < 10; ++i) {
            const bool match = i == 2 || i == 5 || i == 7;
            docs.emplace_back("doc" + std::to_string(i), "",
                              match ? std::string("the kidney disease case") : "nothing here");
        }
        docs[5] = Document("doc5", "", "kidney disease and more kidney disease");
        const Library lib(docs);
        const auto c = concept_of("MESH:K", {"Kidney Disease"});
        CHECK(ids_of(retrieve_candidates(c, lib, 50)) ==
              std::vector<std::string>{"doc5", "doc2", "doc7"});
        CHECK(ids_of(retrieve_candidates(c, lib, 2)) == std::vector<std::string>{"doc5", "doc2"});

        std::vector<Document> many;
        for (int i = 0; i < 80; ++i) {
            many.emplace_back("p" + std::to_string(100 + i), "", "kidney disease");
        }
        CHECK(retrieve_candidates(c, Library(many), 50).size() == 50);
        CHECK(retrieve_candidates(c, Library({}), 50).empty());
        CHECK_THROWS_AS(Library({Document("a", "", "x"), Document("a", "", "y")}), FormatError);
    }

    TEST_CASE("exclude_leakage")
    {
        const Document a("a", "", "x");
        const Document b("b", "", "x");
        const Document c("c", "", "x");
        const std::vector<const Document*> cands{&a, &b, &c};
        CHECK(ids_of(exclude_leakage(cands, {"b"})) == std::vector<std::string>{"a", "c"});
        CHECK(ids_of(exclude_leakage(cands, {"z"})) == std::vector<std::string>{"a", "b", "c"});
        CHECK(exclude_leakage(cands, {"a", "b", "c"}).empty());
    }

    TEST_CASE("select_diverse_segment")
    {
        auto pool = make_pool("MESH:X", {{"A", 2}, {"B", 2}});
        PaperUsage usage{{"A", 2}, {"B", 0}};
        CHECK(select_diverse_segment(pool, usage).paper_id == "B");
        CHECK(usage["B"] == 1);

        auto tied = make_pool("MESH:X", {{"B", 1}, {"A", 1}});
        PaperUsage even{{"A", 1}, {"B", 1}};
        CHECK(select_diverse_segment(tied, even).paper_id == "A");

        auto single = make_pool("MESH:X", {{"S", 1}});
        PaperUsage none;
        CHECK(select_diverse_segment(single, none).paper_id == "S");
        CHECK_THROWS_AS(select_diverse_segment(single, none), PoolExhausted);
    }

    TEST_CASE("augment_to_threshold counts")
    {
        AugmentationConfig cfg;
        cfg.k = 10;
        std::map<ConceptId, CandidatePool> pools;
        pools.emplace(id("MESH:A"), make_pool("MESH:A", {{"pa", 10}, {"pb", 10}}));
        pools.emplace(id("MESH:B"), make_pool("MESH:B", {{"pc", 20}}));
        pools.emplace(id("MESH:C"), make_pool("MESH:C", {{"pd", 2}, {"pe", 2}}));
        auto manual = manual_for("MESH:A", 3);
        for (auto& e : manual_for("MESH:B", 12)) {
            manual.push_back(e);
        }
        for (auto& e : manual_for("MESH:C", 3)) {
            manual.push_back(e);
        }
        const ConceptCounts counts{{id("MESH:A"), 3}, {id("MESH:B"), 12}, {id("MESH:C"), 3}};
        const auto r = augment_to_threshold(manual, counts, pools, cfg);
        CHECK(r.added.at(id("MESH:A")) == 7);
        CHECK_FALSE(r.added.contains(id("MESH:B")));
        CHECK(r.added.at(id("MESH:C")) == 4);
        CHECK(r.shortfall.at(id("MESH:C")) == 3);
        CHECK(r.examples.size() == manual.size() + 11);

        std::map<std::string, int> papers;
        for (const auto& e : r.examples) {
            if (e.anchor && *e.anchor == id("MESH:A")) {
                ++papers[e.segment.doc_id];
                CHECK(e.source == Source::PSEUDO);
            }
        }
        CHECK(papers == std::map<std::string, int>{{"pa", 4}, {"pb", 3}});
    }

    TEST_CASE("augmentation is deterministic for a seed and shuffles the mix")
    {
        auto run = [](std::uint64_t seed) {
            AugmentationConfig cfg;
            cfg.k = 10;
            cfg.seed = seed;
            std::map<ConceptId, CandidatePool> pools;
            pools.emplace(id("MESH:A"), make_pool("MESH:A", {{"pa", 5}, {"pb", 5}}));
            const auto manual = manual_for("MESH:A", 3);
            std::ostringstream out;
            write_examples_jsonl(out, augment_to_threshold(manual, {{id("MESH:A"), 3}}, pools, cfg).examples);
            return out.str();
        };
        CHECK(run(1) == run(1));
        CHECK(run(1) != run(2));
    }

    TEST_CASE("k = 0 adds nothing, negative k is rejected")
    {
        AugmentationConfig cfg;
        cfg.k = 0;
        std::map<ConceptId, CandidatePool> pools;
        pools.emplace(id("MESH:A"), make_pool("MESH:A", {{"pa", 5}}));
        const auto r = augment_to_threshold({}, {}, pools, cfg);
        CHECK(r.examples.empty());
        cfg.k = -1;
        CHECK_THROWS_AS(augment_to_threshold({}, {}, pools, cfg), std::invalid_argument);
    }

    TEST_CASE("ranked selection without diversity")
    {
        AugmentationConfig cfg;
        cfg.k = 3;
        std::map<ConceptId, CandidatePool> pools;
        pools.emplace(id("MESH:A"), make_pool("MESH:A", {{"pa", 5}, {"pb", 5}}));
        const auto r = augment_to_threshold({}, {}, pools, cfg, false);
        for (const auto& e : r.examples) {
            CHECK(e.segment.doc_id == "pa");
        }
    }

    TEST_CASE("map_to_target and candidate pools")
    {
        const KnowledgeBase kb({
            concept_of("UMLS:C1", {"kidney disease"}, "", "Disease", {"MESH:K"}),
            concept_of("UMLS:C2", {"orphan"}),
            concept_of("MESH:K", {"Kidney Disease"}),
        });
        const Document doc("lib1", "", "kidney disease and an orphan word");
        const std::vector<Annotation> anns{fixture::annotate(doc, 0, 2, "UMLS:C1"),
                                           fixture::annotate(doc, 4, 5, "UMLS:C2"),
                                           fixture::annotate(doc, 5, 6, "OMIM:1")};
        const auto mapped = map_to_target(doc, anns, kb);
        REQUIRE(mapped.size() == 2);
        CHECK(mapped[0].concept_id == id("MESH:K"));
        CHECK(mapped[1].concept_id == id("OMIM:1"));

        const std::unordered_map<std::string, std::vector<Annotation>> pseudo{{"lib1", mapped}};
        const std::vector<const Document*> ranked{&doc};
        const auto pool = build_candidate_pool(id("MESH:K"), ranked, pseudo, 3);
        REQUIRE(pool.segments.size() == 1);
        CHECK(pool.segments[0].segment.index == 0);
        CHECK(pool.segments[0].annotations.size() == 1);
        CHECK(build_candidate_pool(id("MESH:Z"), ranked, pseudo, 3).segments.empty());
    }

    TEST_CASE("examples JSON lines round trip")
    {
        std::vector<TrainingExample> ex{
            TrainingExample{Segment{"d1", 2, {"a", "b"}, 1024}, {id("MESH:A"), id("MESH:B")},
                            Source::PSEUDO, std::nullopt},
            TrainingExample{Segment{"d2", 0, {"c"}, 0}, {id("OMIM:1")}, Source::MANUAL,
                            std::nullopt}};
        std::stringstream ss;
        write_examples_jsonl(ss, ex);
        const auto text = ss.str();
        CHECK(text.find("\"weight_class\":\"augmented\"") != std::string::npos);
        CHECK(text.find("\"weight_class\":\"manual\"") != std::string::npos);
        const auto back = read_examples_jsonl(ss);
        REQUIRE(back.size() == 2);
        CHECK(back[0].segment.tokens == ex[0].segment.tokens);
        CHECK(back[0].positives == ex[0].positives);
        CHECK(back[0].source == Source::PSEUDO);
        CHECK(back[0].key() == ex[0].key());
        std::stringstream again;
        write_examples_jsonl(again, back);
        CHECK(again.str() == text);
    }
}
