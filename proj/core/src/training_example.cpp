#include "cforge/training_example.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <nlohmann/json.hpp>
#include <ostream>
#include <unordered_map>

#include "cforge/errors.hpp"

namespace cforge {

std::string TrainingExample::key() const
{
    return std::string(to_string(source)) + '|' + segment.doc_id + '|' +
           std::to_string(segment.index);
}

std::vector<TrainingExample> make_manual_examples(std::span<const Document> documents,
                                                  std::span<const Annotation> annotations,
                                                  std::size_t max_tokens)
{
    std::unordered_map<std::string_view, std::vector<const Annotation*>> by_doc;
    for (const auto& a : annotations) {
        by_doc[a.doc_id].push_back(&a);
    }
    std::vector<TrainingExample> out;
    for (const auto& doc : documents) {
        const auto it = by_doc.find(doc.doc_id());
        if (it == by_doc.end()) {
            continue;
        }
        std::map<std::size_t, std::vector<ConceptId>> per_segment;
        for (const Annotation* a : it->second) {
            per_segment[segment_of(a->span.begin, max_tokens)].push_back(a->concept_id);
        }
        auto segments = segment_document(doc, max_tokens);
        for (auto& [index, concepts] : per_segment) {
            if (index >= segments.size()) {
                continue;
            }
            std::sort(concepts.begin(), concepts.end());
            concepts.erase(std::unique(concepts.begin(), concepts.end()), concepts.end());
            out.push_back(TrainingExample{std::move(segments[index]), std::move(concepts),
                                          Source::MANUAL, std::nullopt});
        }
    }
    return out;
}

void write_examples_jsonl(std::ostream& out, std::span<const TrainingExample> examples)
{
    for (const auto& ex : examples) {
        nlohmann::ordered_json obj;
        obj["doc_id"] = ex.segment.doc_id;
        obj["segment_index"] = ex.segment.index;
        obj["tokens"] = ex.segment.tokens;
        auto positives = nlohmann::ordered_json::array();
        for (const auto& p : ex.positives) {
            positives.push_back(p.str());
        }
        obj["positives"] = std::move(positives);
        obj["source"] = std::string(to_string(ex.source));
        obj["weight_class"] = ex.source == Source::MANUAL ? "manual" : "augmented";
        out << obj.dump() << '\n';
    }
}

std::vector<TrainingExample> read_examples_jsonl(std::istream& in)
{
    std::vector<TrainingExample> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        try {
            const auto obj = nlohmann::json::parse(line);
            TrainingExample ex;
            ex.segment.doc_id = obj.at("doc_id").get<std::string>();
            ex.segment.index = obj.at("segment_index").get<std::size_t>();
            ex.segment.tokens = obj.at("tokens").get<std::vector<std::string>>();
            for (const auto& p : obj.at("positives")) {
                ex.positives.push_back(ConceptId::parse(p.get<std::string>()));
            }
            const auto source = obj.at("source").get<std::string>();
            if (source == "manual") {
                ex.source = Source::MANUAL;
            } else if (source == "pseudo") {
                ex.source = Source::PSEUDO;
            } else {
                throw ParseError(lineno, "unknown source '" + source + "'");
            }
            if (ex.positives.empty()) {
                throw ParseError(lineno, "example without positives");
            }
            std::sort(ex.positives.begin(), ex.positives.end());
            ex.positives.erase(std::unique(ex.positives.begin(), ex.positives.end()),
                               ex.positives.end());
            out.push_back(std::move(ex));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(lineno, e.what());
        } catch (const FormatError& e) {
            throw ParseError(lineno, e.what());
        }
    }
    return out;
}

}  // namespace cforge
