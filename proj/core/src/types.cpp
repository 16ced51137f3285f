#include "cforge/types.hpp"

#include <array>
#include <utility>

#include "cforge/errors.hpp"

namespace cforge {

namespace {

constexpr std::array<std::pair<std::string_view, Vocabulary>, 4> kVocabNames{{
    {"UMLS", Vocabulary::UMLS},
    {"MESH", Vocabulary::MESH},
    {"OMIM", Vocabulary::OMIM},
    {"SYNTHETIC", Vocabulary::SYNTHETIC},
}};

}  // namespace

std::string_view to_string(Vocabulary v) noexcept
{
    for (const auto& [name, value] : kVocabNames) {
        if (value == v) {
            return name;
        }
    }
    return "?";
}

std::string_view to_string(Source s) noexcept
{
    return s == Source::MANUAL ? "manual" : "pseudo";
}

ConceptId ConceptId::parse(std::string_view text)
{
    const auto colon = text.find(':');
    if (colon == std::string_view::npos) {
        if (text.empty()) {
            throw FormatError("empty concept id");
        }
        return ConceptId{Vocabulary::MESH, std::string(text)};
    }
    const auto prefix = text.substr(0, colon);
    const auto code = text.substr(colon + 1);
    if (code.empty()) {
        throw FormatError("concept id '" + std::string(text) + "' has an empty code");
    }
    for (const auto& [name, value] : kVocabNames) {
        if (name == prefix) {
            return ConceptId{value, std::string(code)};
        }
    }
    throw FormatError("unknown vocabulary prefix in '" + std::string(text) + "'");
}

std::string ConceptId::str() const
{
    std::string out(to_string(vocabulary));
    out += ':';
    out += code;
    return out;
}

MissingPredictions::MissingPredictions(std::vector<std::string> doc_ids)
    : Error([&] {
          std::string msg = "missing predictions for " + std::to_string(doc_ids.size()) +
                            " document(s):";
          for (const auto& id : doc_ids) {
              msg += ' ';
              msg += id;
          }
          return msg;
      }()),
      doc_ids_(std::move(doc_ids))
{}

}  // namespace cforge
