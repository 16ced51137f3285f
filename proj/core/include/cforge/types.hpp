#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>

namespace cforge {

enum class Vocabulary : std::uint8_t { UMLS, MESH, OMIM, SYNTHETIC };

std::string_view to_string(Vocabulary v) noexcept;

/// Identifier of a concept within one vocabulary, written "VOCAB:CODE".
struct ConceptId {
    Vocabulary vocabulary = Vocabulary::SYNTHETIC;
    std::string code;

    /// Accepts "MESH:D007674", "OMIM:123456", "UMLS:C0012634", "SYNTHETIC:x".
    /// A bare code without a prefix is read as MESH (NCBI-Disease writes some
    /// MeSH ids that way). Throws FormatError on an empty code or unknown prefix.
    static ConceptId parse(std::string_view text);

    std::string str() const;

    friend bool operator==(const ConceptId&, const ConceptId&) = default;
    friend auto operator<=>(const ConceptId&, const ConceptId&) = default;
};

enum class Source : std::uint8_t { MANUAL, PSEUDO };

std::string_view to_string(Source s) noexcept;

/// Half-open token range [begin, end).
struct TokenSpan {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t length() const noexcept { return end - begin; }
    bool overlaps(const TokenSpan& o) const noexcept { return begin < o.end && o.begin < end; }

    friend bool operator==(const TokenSpan&, const TokenSpan&) = default;
    friend auto operator<=>(const TokenSpan&, const TokenSpan&) = default;
};

}  // namespace cforge

template <>
struct std::hash<cforge::ConceptId> {
    std::size_t operator()(const cforge::ConceptId& id) const noexcept
    {
        return std::hash<std::string>{}(id.code) * 31u + static_cast<std::size_t>(id.vocabulary);
    }
};
