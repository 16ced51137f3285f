#include "cforge/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "cforge/errors.hpp"
#include "cforge/rng.hpp"

namespace cforge {

namespace {

constexpr std::string_view kConsonants = "bdfgklmnprstvz";
constexpr std::string_view kVowels = "aeiou";

class WordMaker {
  public:
    explicit WordMaker(Rng& rng) : rng_(rng) {}

    std::string word(std::size_t syllables)
    {
        for (;;) {
            std::string w;
            for (std::size_t s = 0; s < syllables; ++s) {
                w += kConsonants[rng_.below(kConsonants.size())];
                w += kVowels[rng_.below(kVowels.size())];
            }
            w += kConsonants[rng_.below(kConsonants.size())];
            if (used_.insert(w).second) {
                return w;
            }
        }
    }

  private:
    Rng& rng_;
    std::set<std::string> used_;
};

struct ConceptWords {
    std::vector<std::vector<std::string>> names;  // canonical and synonym names, tokenized
    std::vector<std::string> cues;
    std::vector<std::string> context;
    std::string type;
};

struct Chunk {
    std::vector<std::string> words;
    int concept_index = -1;  // >= 0 for a mention
    bool canonical = false;
};

struct BuiltDoc {
    PubtatorRecord record;
    // token span and concept of every dictionary-name mention
    std::vector<std::pair<TokenSpan, int>> name_mentions;
    std::vector<std::string> tokens;
};

std::string upper(std::string s)
{
    for (char& c : s) {
        c = static_cast<char>(c - 'a' + 'A');
    }
    return s;
}

std::string join(const std::vector<std::string>& words)
{
    std::string out;
    for (const auto& w : words) {
        if (!out.empty()) {
            out += ' ';
        }
        out += w;
    }
    return out;
}

std::string code_of(std::size_t i, char prefix, int width)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%c%0*zu", prefix, width, i);
    return buf;
}

class Generator {
  public:
    explicit Generator(const SyntheticConfig& cfg)
        : cfg_(cfg), rng_(Rng::stream(cfg.seed, "synthetic")), words_(rng_)
    {}

    SyntheticBenchmark run()
    {
        if (cfg_.concepts < 2 || cfg_.rare > cfg_.concepts) {
            throw std::invalid_argument("synthetic benchmark needs >= 2 concepts and rare <= concepts");
        }
        make_vocabulary();
        SyntheticBenchmark out;
        out.kb = make_kb();
        pick_rare();
        for (std::size_t c : rare_) {
            out.rare_concepts.push_back(target_id(c));
        }
        std::sort(out.rare_concepts.begin(), out.rare_concepts.end());

        std::size_t next = 0;
        for (std::size_t c = 0; c < cfg_.concepts; ++c) {
            const bool rare = is_rare_[c];
            const int lo = rare ? cfg_.rare_min_manual : cfg_.frequent_min_manual;
            const int hi = rare ? cfg_.rare_max_manual : cfg_.frequent_max_manual;
            const auto n = static_cast<std::size_t>(lo + static_cast<int>(rng_.below(static_cast<std::uint64_t>(hi - lo + 1))));
            for (std::size_t i = 0; i < n; ++i) {
                out.train.push_back(
                    annotated_doc(std::to_string(1000000 + next++), c, cfg_.train_noncanonical).record);
            }
        }
        next = 0;
        for (std::size_t c = 0; c < cfg_.concepts; ++c) {
            const double nc = is_rare_[c] ? cfg_.rare_noncanonical : cfg_.frequent_noncanonical;
            const std::size_t n_dev = is_rare_[c] ? cfg_.dev_docs_rare : cfg_.dev_docs_frequent;
            for (std::size_t i = 0; i < n_dev; ++i) {
                out.dev.push_back(annotated_doc(std::to_string(2000000 + next++), c, nc).record);
            }
        }
        next = 0;
        for (std::size_t c = 0; c < cfg_.concepts; ++c) {
            const double nc = is_rare_[c] ? cfg_.rare_noncanonical : cfg_.frequent_noncanonical;
            const std::size_t n_test = is_rare_[c] ? cfg_.test_docs_rare : cfg_.test_docs_frequent;
            for (std::size_t i = 0; i < n_test; ++i) {
                out.test.push_back(annotated_doc(std::to_string(3000000 + next++), c, nc).record);
            }
        }

        next = 0;
        for (std::size_t c = 0; c < cfg_.concepts; ++c) {
            for (std::size_t i = 0; i < cfg_.library_docs_per_concept; ++i) {
                auto doc = library_doc(std::to_string(4000000 + next++), c);
                annotate(doc, out.mmi);
                out.library.push_back(std::move(doc.record));
            }
        }
        // Copies of test documents: retrievable, but must never be used.
        const std::size_t leaks = std::min(cfg_.leaked_docs, out.test.size());
        for (std::size_t i = 0; i < leaks; ++i) {
            const auto& t = out.test[(i * 7919) % out.test.size()];
            BuiltDoc doc;
            doc.record = PubtatorRecord{t.doc_id, t.title, t.abstract, {}, {}};
            doc.tokens = whitespace_tokens(t.title + " " + t.abstract.value_or(""));
            find_name_mentions(doc);
            annotate(doc, out.mmi);
            out.leaked_ids.push_back(t.doc_id);
            out.library.push_back(std::move(doc.record));
        }
        std::sort(out.leaked_ids.begin(), out.leaked_ids.end());
        out.leaked_ids.erase(std::unique(out.leaked_ids.begin(), out.leaked_ids.end()),
                             out.leaked_ids.end());
        return out;
    }

  private:
    ConceptId target_id(std::size_t c) const
    {
        return ConceptId{Vocabulary::SYNTHETIC, code_of(c + 1, 'S', 4)};
    }
    ConceptId bridge_id(std::size_t c) const
    {
        return ConceptId{Vocabulary::UMLS, code_of(9000000 + c + 1, 'C', 7)};
    }

    void make_vocabulary()
    {
        const std::size_t n_abbrev =
            static_cast<std::size_t>(cfg_.abbreviation_share * static_cast<double>(cfg_.concepts));
        for (std::size_t i = 0; i < n_abbrev; ++i) {
            abbrev_words_.push_back(words_.word(1));
        }
        filler_ = abbrev_words_;
        while (filler_.size() < cfg_.filler_words) {
            filler_.push_back(words_.word(2));
        }
        for (std::size_t c = 0; c < cfg_.concepts; ++c) {
            ConceptWords cw;
            const auto head = words_.word(2);
            cw.names.push_back({words_.word(2), head});
            cw.names.push_back({words_.word(2), head});
            for (int i = 0; i < 6; ++i) {
                cw.cues.push_back(words_.word(3));
            }
            for (int i = 0; i < 6; ++i) {
                cw.context.push_back(words_.word(3));
            }
            cw.type = c % 2 == 0 ? "Disease" : "Chemical";
            concepts_.push_back(std::move(cw));
        }
    }

    KnowledgeBase make_kb()
    {
        std::vector<Concept> out;
        const std::size_t n_abbrev = abbrev_words_.size();
        for (std::size_t c = 0; c < cfg_.concepts; ++c) {
            Concept t;
            t.id = target_id(c);
            for (const auto& n : concepts_[c].names) {
                t.names.push_back(join(n));
            }
            if (c < n_abbrev) {
                t.names.push_back(upper(abbrev_words_[c]));
            }
            t.description = std::string(concepts_[c].type == "Disease" ? "a disorder" : "a substance");
            t.semantic_type = concepts_[c].type;
            out.push_back(t);
        }
        for (std::size_t c = 0; c < cfg_.concepts; ++c) {
            Concept b = out[c];
            b.id = bridge_id(c);
            b.cross_refs = {target_id(c)};
            out.push_back(std::move(b));
        }
        return KnowledgeBase(std::move(out));
    }

    void pick_rare()
    {
        std::vector<std::size_t> order(cfg_.concepts);
        for (std::size_t i = 0; i < order.size(); ++i) {
            order[i] = i;
        }
        rng_.shuffle(std::span<std::size_t>(order));
        is_rare_.assign(cfg_.concepts, false);
        for (std::size_t i = 0; i < cfg_.rare; ++i) {
            rare_.push_back(order[i]);
            is_rare_[order[i]] = true;
        }
        for (std::size_t c = 0; c < cfg_.concepts; ++c) {
            if (!is_rare_[c]) {
                frequent_.push_back(c);
            }
        }
    }

    std::size_t other_frequent(std::size_t c)
    {
        if (frequent_.empty() || (frequent_.size() == 1 && frequent_[0] == c)) {
            return c;
        }
        for (;;) {
            const auto o = frequent_[rng_.below(frequent_.size())];
            if (o != c) {
                return o;
            }
        }
    }

    Chunk mention(std::size_t c, bool canonical, int name = -1)
    {
        Chunk ch;
        ch.concept_index = static_cast<int>(c);
        ch.canonical = canonical;
        const auto& cw = concepts_[c];
        if (canonical) {
            ch.words = cw.names[name >= 0 ? static_cast<std::size_t>(name) : rng_.below(cw.names.size())];
        } else {
            const auto a = rng_.below(cw.cues.size());
            auto b = rng_.below(cw.cues.size() - 1);
            if (b >= a) {
                ++b;
            }
            ch.words = {cw.cues[a], cw.cues[b]};
        }
        return ch;
    }

    void add_context(std::vector<Chunk>& chunks, std::size_t c, std::size_t n)
    {
        const auto& ctx = concepts_[c].context;
        for (std::size_t i = 0; i < n; ++i) {
            chunks.push_back(Chunk{{ctx[rng_.below(ctx.size())]}, -1, false});
        }
    }

    BuiltDoc assemble(const std::string& id, std::vector<Chunk> chunks, bool with_entries)
    {
        for (std::size_t i = 0; i < cfg_.filler_per_doc; ++i) {
            chunks.push_back(Chunk{{filler_[rng_.below(filler_.size())]}, -1, false});
        }
        rng_.shuffle(std::span<Chunk>(chunks));
        std::vector<std::string> title_words;
        for (int i = 0; i < 4; ++i) {
            title_words.push_back(filler_[rng_.below(filler_.size())]);
        }
        BuiltDoc doc;
        doc.record.doc_id = id;
        doc.record.title = join(title_words);
        doc.tokens = title_words;
        std::string body;
        std::size_t offset = doc.record.title.size() + 1;
        for (const auto& ch : chunks) {
            if (!body.empty()) {
                body += ' ';
            }
            const std::size_t begin_char = offset + body.size();
            const std::size_t begin_tok = doc.tokens.size();
            const auto text = join(ch.words);
            body += text;
            doc.tokens.insert(doc.tokens.end(), ch.words.begin(), ch.words.end());
            if (ch.concept_index < 0) {
                continue;
            }
            const auto c = static_cast<std::size_t>(ch.concept_index);
            if (with_entries) {
                doc.record.entries.push_back(PubtatorEntry{begin_char, begin_char + text.size(), text,
                                                           concepts_[c].type, target_id(c).str()});
            }
            if (ch.canonical) {
                doc.name_mentions.emplace_back(TokenSpan{begin_tok, doc.tokens.size()},
                                               ch.concept_index);
            }
        }
        doc.record.abstract = body;
        return doc;
    }

    BuiltDoc annotated_doc(const std::string& id, std::size_t c, double noncanonical)
    {
        std::vector<Chunk> chunks;
        chunks.push_back(mention(c, rng_.unit() >= noncanonical));
        add_context(chunks, c, 3);
        const auto o = other_frequent(c);
        if (o != c) {
            chunks.push_back(mention(o, rng_.unit() >= cfg_.frequent_noncanonical));
            add_context(chunks, o, 2);
        }
        return assemble(id, std::move(chunks), true);
    }

    BuiltDoc library_doc(const std::string& id, std::size_t c)
    {
        std::vector<Chunk> chunks;
        chunks.push_back(mention(c, true, 0));
        chunks.push_back(mention(c, false));
        add_context(chunks, c, 3);
        const auto o = other_frequent(c);
        if (o != c) {
            chunks.push_back(mention(o, rng_.unit() >= 0.5));
            add_context(chunks, o, 2);
        }
        return assemble(id, std::move(chunks), false);
    }

    // Dictionary-name matches in an existing token list.
    void find_name_mentions(BuiltDoc& doc)
    {
        for (std::size_t c = 0; c < concepts_.size(); ++c) {
            for (const auto& name : concepts_[c].names) {
                for (std::size_t i = 0; i + name.size() <= doc.tokens.size(); ++i) {
                    if (std::equal(name.begin(), name.end(), doc.tokens.begin() + static_cast<std::ptrdiff_t>(i))) {
                        doc.name_mentions.emplace_back(TokenSpan{i, i + name.size()}, static_cast<int>(c));
                    }
                }
            }
        }
        std::sort(doc.name_mentions.begin(), doc.name_mentions.end());
    }

    Candidate candidate(std::size_t c, double score) const
    {
        return Candidate{bridge_id(c), score, join(concepts_[c].names[0]),
                         concepts_[c].type == "Disease" ? "[dsyn]" : "[phsu]"};
    }

    std::size_t random_other(std::size_t c)
    {
        auto o = static_cast<std::size_t>(rng_.below(cfg_.concepts - 1));
        return o >= c ? o + 1 : o;
    }

    void annotate(const BuiltDoc& doc, std::vector<RawCandidateSet>& mmi)
    {
        const std::string& id = doc.record.doc_id;
        for (const auto& [span, ci] : doc.name_mentions) {
            const auto c = static_cast<std::size_t>(ci);
            const auto wrong = random_other(c);
            RawCandidateSet set{id, span, "", {}};
            if (rng_.unit() < cfg_.label_noise) {
                set.candidates = {candidate(wrong, 900.0), candidate(c, 600.0)};
            } else {
                set.candidates = {candidate(c, 900.0), candidate(wrong, 600.0)};
            }
            mmi.push_back(std::move(set));
            if (span.length() > 1 && rng_.unit() < cfg_.overlap_noise) {
                mmi.push_back(RawCandidateSet{
                    id, TokenSpan{span.end - 1, span.end}, "", {candidate(random_other(c), 500.0)}});
            }
        }
        for (std::size_t t = 0; t < doc.tokens.size(); ++t) {
            const auto it = std::find(abbrev_words_.begin(), abbrev_words_.end(), doc.tokens[t]);
            if (it != abbrev_words_.end()) {
                const auto c = static_cast<std::size_t>(it - abbrev_words_.begin());
                auto cand = candidate(c, 700.0);
                cand.preferred_name = upper(*it);
                mmi.push_back(RawCandidateSet{id, TokenSpan{t, t + 1}, "", {cand}});
            }
        }
    }

    const SyntheticConfig& cfg_;
    Rng rng_;
    WordMaker words_;
    std::vector<std::string> abbrev_words_;
    std::vector<std::string> filler_;
    std::vector<ConceptWords> concepts_;
    std::vector<std::size_t> rare_;
    std::vector<std::size_t> frequent_;
    std::vector<bool> is_rare_;
};

}  // namespace

SyntheticBenchmark make_synthetic_benchmark(const SyntheticConfig& cfg)
{
    return Generator(cfg).run();
}

void write_synthetic_benchmark(const SyntheticBenchmark& bench, const std::string& dir)
{
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir) / "corpus");
    fs::create_directories(fs::path(dir) / "library");
    auto open = [](const fs::path& p) {
        std::ofstream out(p, std::ios::binary);
        if (!out) {
            throw Error("cannot write '" + p.string() + "'");
        }
        return out;
    };
    {
        auto out = open(fs::path(dir) / "kb.jsonl");
        bench.kb.write_jsonl(out);
    }
    {
        auto out = open(fs::path(dir) / "corpus" / "train.pubtator");
        write_pubtator(out, bench.train);
    }
    {
        auto out = open(fs::path(dir) / "corpus" / "dev.pubtator");
        write_pubtator(out, bench.dev);
    }
    {
        auto out = open(fs::path(dir) / "corpus" / "test.pubtator");
        write_pubtator(out, bench.test);
    }
    {
        auto out = open(fs::path(dir) / "library" / "documents.pubtator");
        write_pubtator(out, bench.library);
    }
    {
        auto out = open(fs::path(dir) / "library" / "annotations.mmi");
        write_mmi(out, bench.mmi);
    }
}

}  // namespace cforge
