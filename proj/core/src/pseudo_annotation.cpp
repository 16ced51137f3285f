#include "cforge/pseudo_annotation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <unordered_map>

#include "cforge/errors.hpp"

namespace cforge {

namespace {

std::vector<std::string_view> split_bars(std::string_view s)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (auto pos = s.find('|'); pos != std::string_view::npos; pos = s.find('|', start)) {
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
    out.push_back(s.substr(start));
    return out;
}

template <typename T>
bool parse_number(std::string_view s, T& value)
{
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, value);
    return !s.empty() && ec == std::errc{} && ptr == end;
}

std::vector<std::string_view> split_commas(std::string_view s)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        auto pos = s.find(',', start);
        if (pos == std::string_view::npos) {
            pos = s.size();
        }
        if (pos > start) {
            out.push_back(s.substr(start, pos - start));
        }
        start = pos + 1;
    }
    return out;
}

bool candidate_before(const Candidate& a, const Candidate& b)
{
    if (a.score != b.score) {
        return a.score > b.score;
    }
    return a.concept_id.code < b.concept_id.code;
}

bool is_upper_text(std::string_view s)
{
    bool letter = false;
    for (char c : s) {
        if (c >= 'a' && c <= 'z') {
            return false;
        }
        letter = letter || (c >= 'A' && c <= 'Z');
    }
    return letter;
}

}  // namespace

std::vector<RawCandidateSet> parse_mmi(std::istream& in)
{
    std::vector<RawCandidateSet> sets;
    std::map<std::tuple<std::string, std::size_t, std::size_t>, std::size_t> slot;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        const auto f = split_bars(line);
        if (f.size() != 8) {
            throw ParseError(lineno, "expected 8 '|'-separated fields, got " + std::to_string(f.size()));
        }
        if (f[0].empty()) {
            throw ParseError(lineno, "empty document id");
        }
        if (f[1] != "MMI") {
            throw ParseError(lineno, "second field must be 'MMI'");
        }
        double score = 0.0;
        if (!parse_number(f[2], score) || !std::isfinite(score)) {
            throw ParseError(lineno, "bad score '" + std::string(f[2]) + "'");
        }
        if (score < 0.0) {
            throw NegativeScore(lineno, "negative score " + std::string(f[2]));
        }
        std::size_t begin = 0;
        std::size_t end = 0;
        if (!parse_number(f[6], begin) || !parse_number(f[7], end) || begin >= end) {
            throw ParseError(lineno, "bad token span");
        }
        if (f[4].empty()) {
            throw ParseError(lineno, "empty concept id");
        }
        ConceptId id;
        if (f[4].find(':') == std::string_view::npos) {
            id = ConceptId{Vocabulary::UMLS, std::string(f[4])};
        } else {
            try {
                id = ConceptId::parse(f[4]);
            } catch (const FormatError& e) {
                throw ParseError(lineno, e.what());
            }
        }
        auto key = std::make_tuple(std::string(f[0]), begin, end);
        auto [it, inserted] = slot.try_emplace(std::move(key), sets.size());
        if (inserted) {
            sets.push_back(RawCandidateSet{std::string(f[0]), TokenSpan{begin, end}, {}, {}});
        }
        sets[it->second].candidates.push_back(
            Candidate{std::move(id), score, std::string(f[3]), std::string(f[5])});
    }
    for (auto& s : sets) {
        std::stable_sort(s.candidates.begin(), s.candidates.end(), candidate_before);
    }
    return sets;
}

void write_mmi(std::ostream& out, std::span<const RawCandidateSet> sets)
{
    for (const auto& s : sets) {
        for (const auto& c : s.candidates) {
            char buf[64];
            const auto res = std::to_chars(buf, buf + sizeof buf, c.score);
            const std::string code =
                c.concept_id.vocabulary == Vocabulary::UMLS ? c.concept_id.code : c.concept_id.str();
            out << s.doc_id << "|MMI|" << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf))
                << '|' << c.preferred_name << '|' << code << '|' << c.semantic_types << '|'
                << s.span.begin << '|' << s.span.end << '\n';
        }
    }
}

std::size_t resolve_mentions(std::vector<RawCandidateSet>& sets, std::span<const Document> documents)
{
    std::unordered_map<std::string_view, const Document*> by_id;
    for (const auto& d : documents) {
        by_id.emplace(d.doc_id(), &d);
    }
    std::size_t dropped = 0;
    std::vector<RawCandidateSet> kept;
    kept.reserve(sets.size());
    for (auto& s : sets) {
        const auto it = by_id.find(s.doc_id);
        if (it == by_id.end() || s.span.end > it->second->tokens().size()) {
            ++dropped;
            continue;
        }
        s.mention = it->second->span_text(s.span);
        kept.push_back(std::move(s));
    }
    sets = std::move(kept);
    return dropped;
}

Annotation select_top_candidate(const RawCandidateSet& raw)
{
    const Candidate& top = raw.candidates.front();
    return Annotation{raw.doc_id, raw.span, raw.mention, top.concept_id, top.score, Source::PSEUDO};
}

bool is_abbreviation_name(std::string_view name)
{
    return name.size() <= 5 && is_upper_text(name);
}

std::vector<Annotation> filter_false_abbreviations(const Document& doc,
                                                   std::span<const Annotation> anns,
                                                   const KnowledgeBase& kb)
{
    std::vector<Annotation> out;
    out.reserve(anns.size());
    for (const auto& a : anns) {
        const std::string surface =
            a.span.end <= doc.tokens().size() ? doc.span_text(a.span) : a.mention;
        bool drop = false;
        if (const Concept* c = kb.find(a.concept_id); c != nullptr && !is_upper_text(surface)) {
            // The name the annotator matched: exact spelling first, then the
            // first name with the same normalized form.
            const std::string norm = normalize_name(surface);
            const std::string* matched = nullptr;
            for (const auto& n : c->names) {
                if (n == surface) {
                    matched = &n;
                    break;
                }
            }
            if (matched == nullptr) {
                for (const auto& n : c->names) {
                    if (normalize_name(n) == norm) {
                        matched = &n;
                        break;
                    }
                }
            }
            drop = matched != nullptr && is_abbreviation_name(*matched);
        }
        if (!drop) {
            out.push_back(a);
        }
    }
    return out;
}

std::vector<Annotation> filter_overlaps(std::span<const Annotation> anns)
{
    std::vector<std::size_t> order(anns.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        const auto& a = anns[i];
        const auto& b = anns[j];
        if (a.span.length() != b.span.length()) {
            return a.span.length() > b.span.length();
        }
        if (a.score != b.score) {
            return a.score > b.score;
        }
        if (a.span.begin != b.span.begin) {
            return a.span.begin < b.span.begin;
        }
        return a.concept_id < b.concept_id;
    });
    std::vector<Annotation> kept;
    for (const std::size_t i : order) {
        const auto& a = anns[i];
        const bool clash = std::any_of(kept.begin(), kept.end(),
                                       [&](const Annotation& k) { return k.span.overlaps(a.span); });
        if (!clash) {
            kept.push_back(a);
        }
    }
    std::stable_sort(kept.begin(), kept.end(), [](const Annotation& a, const Annotation& b) {
        return a.span.begin < b.span.begin;
    });
    return kept;
}

std::vector<Annotation> apply_filters(const Document& doc, std::span<const Annotation> anns,
                                      const KnowledgeBase& kb, const FilterSet& filters)
{
    std::vector<Annotation> out(anns.begin(), anns.end());
    if (filters.abbreviation) {
        out = filter_false_abbreviations(doc, out, kb);
    }
    if (filters.overlap) {
        out = filter_overlaps(out);
    }
    return out;
}

FilterSet FilterSet::parse(std::string_view list)
{
    FilterSet f = none();
    if (list.empty() || list == "none") {
        return f;
    }
    for (const auto part : split_commas(list)) {
        if (part == "abbrev") {
            f.abbreviation = true;
        } else if (part == "overlap") {
            f.overlap = true;
        } else if (part == "diversity") {
            f.diversity = true;
        } else {
            throw FormatError("unknown filter '" + std::string(part) + "'");
        }
    }
    return f;
}

std::string FilterSet::str() const
{
    std::string out;
    auto add = [&](bool on, const char* name) {
        if (on) {
            out += out.empty() ? "" : ",";
            out += name;
        }
    };
    add(abbreviation, "abbrev");
    add(overlap, "overlap");
    add(diversity, "diversity");
    return out.empty() ? "none" : out;
}

}  // namespace cforge
