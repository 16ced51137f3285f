#include "cforge/concept_kb.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <nlohmann/json.hpp>
#include <ostream>
#include <unordered_set>

#include "cforge/errors.hpp"

namespace cforge {

namespace {

bool is_blank(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }

ConceptId parse_id_field(const nlohmann::json& value, std::size_t line, const char* field)
{
    if (!value.is_string()) {
        throw ParseError(line, std::string(field) + " must be a string");
    }
    try {
        return ConceptId::parse(value.get<std::string>());
    } catch (const FormatError& e) {
        throw ParseError(line, e.what());
    }
}

}  // namespace

std::string normalize_name(std::string_view raw)
{
    std::string out;
    out.reserve(raw.size());
    bool pending_space = false;
    for (char c : raw) {
        if (c == '-' || c == ',' || is_blank(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out += ' ';
            pending_space = false;
        }
        if (c >= 'A' && c <= 'Z') {
            c = static_cast<char>(c - 'A' + 'a');
        }
        out += c;
    }
    return out;
}

std::vector<std::string> dedup_names(std::span<const std::string> names)
{
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    for (const auto& name : names) {
        if (seen.insert(normalize_name(name)).second) {
            out.push_back(name);
        }
    }
    return out;
}

ConceptText build_concept_text(const Concept& concept_id)
{
    std::string text;
    for (const auto& name : dedup_names(concept_id.names)) {
        if (!text.empty()) {
            text += "; ";
        }
        text += normalize_name(name);
    }
    if (!concept_id.description.empty()) {
        text += " | ";
        text += concept_id.description;
    }
    return ConceptText{concept_id.id, std::move(text)};
}

KnowledgeBase::KnowledgeBase(std::vector<Concept> concepts) : concepts_(std::move(concepts))
{
    by_id_.reserve(concepts_.size());
    for (std::size_t i = 0; i < concepts_.size(); ++i) {
        const auto& c = concepts_[i];
        if (c.id.code.empty()) {
            throw FormatError("concept with empty code");
        }
        if (c.names.empty()) {
            throw FormatError("concept " + c.id.str() + " has no names");
        }
        if (!by_id_.emplace(c.id, i).second) {
            throw FormatError("duplicate concept id " + c.id.str());
        }
    }
}

KnowledgeBase KnowledgeBase::read_jsonl(std::istream& in)
{
    std::vector<Concept> concepts;
    std::unordered_set<ConceptId> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (std::all_of(line.begin(), line.end(), is_blank)) {
            continue;
        }
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(lineno, e.what());
        }
        if (!obj.is_object() || !obj.contains("id") || !obj.contains("names")) {
            throw ParseError(lineno, "expected an object with 'id' and 'names'");
        }
        Concept c;
        c.id = parse_id_field(obj["id"], lineno, "id");
        const auto& names = obj["names"];
        if (!names.is_array() || names.empty()) {
            throw ParseError(lineno, "'names' must be a non-empty array");
        }
        for (const auto& n : names) {
            if (!n.is_string()) {
                throw ParseError(lineno, "'names' entries must be strings");
            }
            c.names.push_back(n.get<std::string>());
        }
        c.description = obj.value("description", std::string{});
        c.semantic_type = obj.value("semantic_type", std::string{});
        if (obj.contains("cross_refs")) {
            const auto& refs = obj["cross_refs"];
            if (!refs.is_array()) {
                throw ParseError(lineno, "'cross_refs' must be an array");
            }
            for (const auto& r : refs) {
                c.cross_refs.push_back(parse_id_field(r, lineno, "cross_refs"));
            }
        }
        if (!seen.insert(c.id).second) {
            throw ParseError(lineno, "duplicate concept id " + c.id.str());
        }
        concepts.push_back(std::move(c));
    }
    return KnowledgeBase(std::move(concepts));
}

KnowledgeBase KnowledgeBase::load(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open knowledge base '" + path + "'");
    }
    return read_jsonl(in);
}

void KnowledgeBase::write_jsonl(std::ostream& out) const
{
    for (const auto& c : concepts_) {
        nlohmann::ordered_json obj;
        obj["id"] = c.id.str();
        obj["names"] = c.names;
        obj["description"] = c.description;
        obj["semantic_type"] = c.semantic_type;
        auto refs = nlohmann::ordered_json::array();
        for (const auto& r : c.cross_refs) {
            refs.push_back(r.str());
        }
        obj["cross_refs"] = std::move(refs);
        out << obj.dump() << '\n';
    }
}

const Concept* KnowledgeBase::find(const ConceptId& id) const
{
    const auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : &concepts_[it->second];
}

const Concept& KnowledgeBase::get(const ConceptId& id) const
{
    if (const auto* c = find(id)) {
        return *c;
    }
    throw UnknownConcept("concept " + id.str() + " not in knowledge base");
}

std::optional<std::size_t> KnowledgeBase::index_of(const ConceptId& id) const
{
    const auto it = by_id_.find(id);
    if (it == by_id_.end()) {
        return std::nullopt;
    }
    return it->second;
}

ConceptId map_umls_to_target(const ConceptId& cui, std::string_view document_text,
                             const KnowledgeBase& kb)
{
    const Concept* source = kb.find(cui);
    if (source == nullptr || source->cross_refs.empty()) {
        throw UnmappedConcept("no target mapping for " + cui.str());
    }
    const auto& refs = source->cross_refs;
    if (refs.size() == 1) {
        return refs.front();
    }
    const std::string doc = normalize_name(document_text);
    for (const auto& ref : refs) {
        const Concept* target = kb.find(ref);
        if (target == nullptr) {
            continue;
        }
        const std::string name = normalize_name(target->canonical_name());
        if (!name.empty() && doc.find(name) != std::string::npos) {
            return ref;
        }
    }
    return *std::min_element(refs.begin(), refs.end(), [](const ConceptId& a, const ConceptId& b) {
        return a.code < b.code;
    });
}

}  // namespace cforge
