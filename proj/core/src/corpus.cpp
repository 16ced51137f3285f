#include "cforge/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>

#include "cforge/errors.hpp"
#include "cforge/log.hpp"

namespace cforge {

namespace {

bool is_space(char c)
{
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

std::vector<std::string_view> split(std::string_view s, char sep)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(s.substr(start));
            return out;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

std::optional<std::size_t> parse_index(std::string_view s)
{
    std::size_t value = 0;
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, value);
    if (ec != std::errc{} || ptr != end || s.empty()) {
        return std::nullopt;
    }
    return value;
}

}  // namespace

std::vector<std::string> whitespace_tokens(std::string_view text)
{
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && is_space(text[i])) {
            ++i;
        }
        const std::size_t start = i;
        while (i < text.size() && !is_space(text[i])) {
            ++i;
        }
        if (i > start) {
            out.emplace_back(text.substr(start, i - start));
        }
    }
    return out;
}

Document::Document(std::string doc_id, std::string title, std::string body)
    : doc_id_(std::move(doc_id)), title_(std::move(title)), body_(std::move(body))
{
    text_ = title_ + " " + body_;
    std::size_t i = 0;
    while (i < text_.size()) {
        while (i < text_.size() && is_space(text_[i])) {
            ++i;
        }
        const std::size_t start = i;
        while (i < text_.size() && !is_space(text_[i])) {
            ++i;
        }
        if (i > start) {
            tokens_.push_back(text_.substr(start, i - start));
            token_begin_.push_back(start);
            token_end_.push_back(i);
        }
    }
}

std::string Document::span_text(const TokenSpan& span) const
{
    std::string out;
    for (std::size_t t = span.begin; t < span.end && t < tokens_.size(); ++t) {
        if (t > span.begin) {
            out += ' ';
        }
        out += tokens_[t];
    }
    return out;
}

TokenSpan Document::covering_span(std::size_t char_begin, std::size_t char_end, bool* clipped) const
{
    if (char_begin >= char_end || char_end > text_.size()) {
        throw OffsetError("document " + doc_id_ + ": invalid character span [" +
                          std::to_string(char_begin) + ", " + std::to_string(char_end) + ")");
    }
    // First token ending after char_begin, last token starting before char_end.
    const auto first = static_cast<std::size_t>(
        std::upper_bound(token_end_.begin(), token_end_.end(), char_begin) - token_end_.begin());
    const auto last = static_cast<std::size_t>(
        std::lower_bound(token_begin_.begin(), token_begin_.end(), char_end) - token_begin_.begin());
    if (first >= last) {
        throw OffsetError("document " + doc_id_ + ": character span [" +
                          std::to_string(char_begin) + ", " + std::to_string(char_end) +
                          ") covers no token");
    }
    if (clipped != nullptr) {
        *clipped = token_begin_[first] < char_begin || token_end_[last - 1] > char_end;
    }
    return TokenSpan{first, last};
}

std::vector<PubtatorRecord> read_pubtator(std::istream& in)
{
    std::vector<PubtatorRecord> records;
    std::optional<PubtatorRecord> current;
    std::string line;
    std::size_t lineno = 0;

    auto flush = [&] {
        if (current) {
            records.push_back(std::move(*current));
            current.reset();
        }
    };

    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            flush();
            continue;
        }
        const auto tab = line.find('\t');
        const auto bar = line.find('|');
        if (bar != std::string::npos && (tab == std::string::npos || bar < tab) &&
            line.size() >= bar + 3 && line[bar + 2] == '|') {
            const std::string id = line.substr(0, bar);
            const char kind = line[bar + 1];
            std::string content = line.substr(bar + 3);
            if (id.empty()) {
                throw ParseError(lineno, "empty document id");
            }
            if (kind == 't') {
                flush();
                current = PubtatorRecord{id, std::move(content), std::nullopt, {}, {}};
            } else if (kind == 'a') {
                if (!current || current->doc_id != id) {
                    throw ParseError(lineno, "abstract line without matching title for " + id);
                }
                if (current->abstract || !current->entries.empty()) {
                    throw ParseError(lineno, "unexpected abstract line for " + id);
                }
                current->abstract = std::move(content);
            } else {
                throw ParseError(lineno, std::string("unknown section '") + kind + "'");
            }
            continue;
        }
        if (tab == std::string::npos) {
            throw ParseError(lineno, "expected a title, abstract or annotation line");
        }
        const auto fields = split(line, '\t');
        if (!current || fields[0] != current->doc_id) {
            throw ParseError(lineno, "annotation line does not belong to the current document");
        }
        if (fields.size() == 4 && !parse_index(fields[1])) {
            // Relation line (BC5CDR "CID" records); not used, kept verbatim.
            current->relations.push_back(line);
            continue;
        }
        if (fields.size() != 6) {
            throw ParseError(lineno, "annotation line has " + std::to_string(fields.size()) +
                                         " fields, expected 6");
        }
        const auto begin = parse_index(fields[1]);
        const auto end = parse_index(fields[2]);
        if (!begin || !end) {
            throw ParseError(lineno, "non-numeric character offset");
        }
        if (*begin >= *end) {
            throw ParseError(lineno, "empty or reversed character span");
        }
        if (fields[5].empty()) {
            throw ParseError(lineno, "empty concept id");
        }
        current->entries.push_back(PubtatorEntry{*begin, *end, std::string(fields[3]),
                                                 std::string(fields[4]), std::string(fields[5])});
    }
    flush();
    return records;
}

void write_pubtator(std::ostream& out, std::span<const PubtatorRecord> records)
{
    for (const auto& r : records) {
        out << r.doc_id << "|t|" << r.title << '\n';
        if (r.abstract) {
            out << r.doc_id << "|a|" << *r.abstract << '\n';
        }
        for (const auto& e : r.entries) {
            out << r.doc_id << '\t' << e.char_begin << '\t' << e.char_end << '\t' << e.mention
                << '\t' << e.type << '\t' << e.concept_field << '\n';
        }
        for (const auto& rel : r.relations) {
            out << rel << '\n';
        }
        out << '\n';
    }
}

ParsedCorpus to_corpus(std::span<const PubtatorRecord> records)
{
    ParsedCorpus corpus;
    std::set<std::string> ids;
    for (const auto& r : records) {
        if (!ids.insert(r.doc_id).second) {
            throw FormatError("duplicate document id " + r.doc_id);
        }
        Document doc(r.doc_id, r.title, r.abstract.value_or(""));
        for (const auto& e : r.entries) {
            bool clipped = false;
            const TokenSpan span = doc.covering_span(e.char_begin, e.char_end, &clipped);
            if (clipped) {
                corpus.warnings.push_back(r.doc_id + ": span [" + std::to_string(e.char_begin) +
                                          ", " + std::to_string(e.char_end) +
                                          ") expanded to token boundaries");
            }
            if (span.length() > kMaxSegmentTokens) {
                corpus.warnings.push_back(r.doc_id + ": annotation longer than a segment dropped");
                continue;
            }
            for (const auto part : split(e.concept_field, '|')) {
                if (part == "-1" || part.empty()) {
                    corpus.warnings.push_back(r.doc_id + ": annotation '" + e.mention +
                                              "' without concept id skipped");
                    continue;
                }
                ConceptId id;
                try {
                    id = ConceptId::parse(part);
                } catch (const FormatError& err) {
                    throw OffsetError(r.doc_id + ": " + err.what());
                }
                corpus.annotations.push_back(
                    Annotation{r.doc_id, span, doc.span_text(span), std::move(id), 1.0, Source::MANUAL});
            }
        }
        corpus.documents.push_back(std::move(doc));
    }
    for (const auto& w : corpus.warnings) {
        log::debug(w);
    }
    return corpus;
}

ParsedCorpus parse_pubtator(std::istream& in)
{
    const auto records = read_pubtator(in);
    return to_corpus(records);
}

ParsedCorpus load_pubtator(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open corpus file '" + path + "'");
    }
    return parse_pubtator(in);
}

std::vector<Segment> segment_document(const Document& doc, std::size_t max_tokens)
{
    if (max_tokens < 1) {
        throw std::invalid_argument("max_tokens must be >= 1");
    }
    std::vector<Segment> out;
    const auto& tokens = doc.tokens();
    for (std::size_t start = 0, index = 0; start < tokens.size(); start += max_tokens, ++index) {
        const std::size_t stop = std::min(tokens.size(), start + max_tokens);
        out.push_back(Segment{doc.doc_id(), index,
                              std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(start),
                                                       tokens.begin() + static_cast<std::ptrdiff_t>(stop)),
                              start});
    }
    return out;
}

ConceptCounts concept_occurrence_counts(std::span<const Annotation> annotations)
{
    std::set<std::pair<ConceptId, std::string>> seen;
    ConceptCounts counts;
    for (const auto& a : annotations) {
        if (seen.emplace(a.concept_id, a.doc_id).second) {
            ++counts[a.concept_id];
        }
    }
    return counts;
}

MentionClass classify_mention(const Annotation& ann, const KnowledgeBase& kb)
{
    const Concept& concept_id = kb.get(ann.concept_id);
    const std::string mention = normalize_name(ann.mention);
    for (const auto& name : concept_id.names) {
        if (normalize_name(name) == mention) {
            return MentionClass::CANONICAL;
        }
    }
    return MentionClass::NON_CANONICAL;
}

CorpusStats compute_corpus_stats(std::span<const Annotation> training,
                                 std::span<const Annotation> evaluated, const KnowledgeBase& kb)
{
    CorpusStats stats;
    stats.training_doc_counts = concept_occurrence_counts(training);
    stats.evaluated_annotations = evaluated.size();
    if (evaluated.empty()) {
        return stats;
    }
    std::size_t untrained = 0;
    std::size_t undertrained = 0;
    std::size_t non_canonical = 0;
    for (const auto& a : evaluated) {
        const int n = count_of(stats.training_doc_counts, a.concept_id);
        untrained += n == 0 ? 1 : 0;
        undertrained += n < kUndertrainedThreshold ? 1 : 0;
        if (!kb.contains(a.concept_id) || classify_mention(a, kb) == MentionClass::NON_CANONICAL) {
            ++non_canonical;
        }
    }
    const auto total = static_cast<double>(evaluated.size());
    stats.fraction_untrained = static_cast<double>(untrained) / total;
    stats.fraction_trained = static_cast<double>(evaluated.size() - untrained) / total;
    stats.fraction_undertrained = static_cast<double>(undertrained) / total;
    stats.fraction_non_canonical = static_cast<double>(non_canonical) / total;
    return stats;
}

void write_annotations_tsv(std::ostream& out, std::span<const Annotation> anns)
{
    for (const auto& a : anns) {
        char buf[64];
        const auto res = std::to_chars(buf, buf + sizeof buf, a.score);
        out << a.doc_id << '\t' << a.span.begin << '\t' << a.span.end << '\t' << a.mention << '\t'
            << a.concept_id.str() << '\t' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf))
            << '\t' << to_string(a.source) << '\n';
    }
}

std::vector<Annotation> read_annotations_tsv(std::istream& in)
{
    std::vector<Annotation> out;
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
        const auto f = split(line, '\t');
        if (f.size() != 7) {
            throw ParseError(lineno, "expected 7 tab-separated fields, got " + std::to_string(f.size()));
        }
        const auto b = parse_index(f[1]);
        const auto e = parse_index(f[2]);
        if (!b || !e || *e <= *b) {
            throw ParseError(lineno, "bad token span");
        }
        double score = 0.0;
        const auto res = std::from_chars(f[5].data(), f[5].data() + f[5].size(), score);
        if (res.ec != std::errc{} || res.ptr != f[5].data() + f[5].size()) {
            throw ParseError(lineno, "bad score '" + std::string(f[5]) + "'");
        }
        Source source;
        if (f[6] == "manual") {
            source = Source::MANUAL;
        } else if (f[6] == "pseudo") {
            source = Source::PSEUDO;
        } else {
            throw ParseError(lineno, "bad source '" + std::string(f[6]) + "'");
        }
        try {
            out.push_back(Annotation{std::string(f[0]), TokenSpan{*b, *e}, std::string(f[3]),
                                     ConceptId::parse(f[4]), score, source});
        } catch (const FormatError& err) {
            throw ParseError(lineno, err.what());
        }
    }
    return out;
}

}  // namespace cforge
