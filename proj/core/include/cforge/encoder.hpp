#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cforge/concept_kb.hpp"
#include "cforge/training_example.hpp"

namespace cforge {

inline constexpr std::size_t kDefaultDim = 64;

using EmbeddingVector = std::vector<double>;

/// Terms the encoder sees for raw tokens: each token normalized like a
/// concept name, split, and stripped of surrounding ASCII punctuation.
std::vector<std::string> encoder_terms(std::span<const std::string> tokens);

/// Term -> row index. Row 0 is the unknown-term row.
class TokenVocabulary {
  public:
    static constexpr std::size_t kUnk = 0;
    static constexpr std::string_view kUnkToken = "<unk>";

    TokenVocabulary();
    /// Sorted, deduplicated terms; "<unk>" is always row 0.
    explicit TokenVocabulary(std::vector<std::string> terms);

    std::size_t size() const noexcept { return terms_.size(); }
    const std::vector<std::string>& terms() const noexcept { return terms_; }
    std::size_t index_of(std::string_view term) const;
    /// Row indices for raw tokens (after encoder_terms).
    std::vector<std::size_t> lookup(std::span<const std::string> tokens) const;

    friend bool operator==(const TokenVocabulary& a, const TokenVocabulary& b)
    {
        return a.terms_ == b.terms_;
    }

  private:
    std::vector<std::string> terms_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Vocabulary over the training segments and the concept texts.
TokenVocabulary build_vocabulary(std::span<const TrainingExample> examples, const KnowledgeBase& kb);
/// Vocabulary over whole documents and the concept texts.
TokenVocabulary build_vocabulary(std::span<const Document> documents, const KnowledgeBase& kb);

/// Mean-pooled token table followed by a D x D projection.
struct EncoderParams {
    std::size_t dim = kDefaultDim;
    TokenVocabulary vocab;
    std::vector<double> token_table;  // |V| x D, row-major
    std::vector<double> projection;   // D x D, row-major; h = P m

    /// Entries uniform in [-0.1, 0.1] from `seed`.
    static EncoderParams initialize(TokenVocabulary vocab, std::size_t dim, std::uint64_t seed);

    std::span<const double> row(std::size_t i) const { return {token_table.data() + i * dim, dim}; }
    bool finite() const;

    /// Binary checkpoint: "CFG1", D, |V|, vocabulary, token table,
    /// projection; little-endian u64 / f64.
    void save(std::ostream& out) const;
    static EncoderParams load(std::istream& in);
    void save(const std::string& path) const;
    static EncoderParams load(const std::string& path);

    friend bool operator==(const EncoderParams&, const EncoderParams&) = default;
};

/// Intermediate values of one forward pass, kept for backprop.
struct EncodeTrace {
    std::vector<std::size_t> ids;
    std::vector<double> mean;       // m
    std::vector<double> projected;  // h = P m
    double norm = 0.0;              // |h|
    EmbeddingVector output;         // h / |h|
};

EncodeTrace encode_ids(const EncoderParams& params, std::span<const std::size_t> ids);

/// Unit-norm embedding of a token list. The empty list (and a zero
/// projection) maps to the constant vector with entries 1/sqrt(D).
EmbeddingVector embed_text(const EncoderParams& params, std::span<const std::string> tokens);

/// u.v / (|u| |v|), clamped to [-1, 1]. Throws ZeroVector.
double cosine_sim(std::span<const double> u, std::span<const double> v);

double dot(std::span<const double> u, std::span<const double> v);
double l2_norm(std::span<const double> u);
void normalize_in_place(std::span<double> u);

/// Accumulated gradient: dense projection part, token rows touched so far.
class EncoderGradient {
  public:
    explicit EncoderGradient(const EncoderParams& params);

    void clear();
    std::span<double> projection() { return projection_; }
    std::span<const double> projection() const { return projection_; }
    std::span<double> row(std::size_t i);
    std::span<const double> row(std::size_t i) const;
    const std::vector<std::size_t>& touched_rows() const noexcept { return touched_; }

  private:
    std::size_t dim_;
    std::vector<double> projection_;
    std::vector<double> table_;
    std::vector<std::size_t> touched_;
    std::vector<char> is_touched_;
};

/// Adds scale * dL/dparams given dL/d(output) for one forward pass.
void backprop(const EncoderParams& params, const EncodeTrace& trace,
              std::span<const double> grad_output, double scale, EncoderGradient& grad);

/// Frozen concept embedding table, rows in KB order.
class ConceptEmbeddings {
  public:
    ConceptEmbeddings() = default;
    ConceptEmbeddings(std::size_t dim, std::vector<ConceptId> ids, std::vector<double> values);

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return ids_.size(); }
    const std::vector<ConceptId>& ids() const noexcept { return ids_; }
    const std::vector<double>& values() const noexcept { return values_; }
    std::span<const double> row(std::size_t i) const { return {values_.data() + i * dim_, dim_}; }
    std::optional<std::size_t> index_of(const ConceptId& id) const;

    /// "CEM1", N, D, ids, values.
    void save(std::ostream& out) const;
    static ConceptEmbeddings load(std::istream& in);

    friend bool operator==(const ConceptEmbeddings& a, const ConceptEmbeddings& b)
    {
        return a.dim_ == b.dim_ && a.ids_ == b.ids_ && a.values_ == b.values_;
    }

  private:
    std::size_t dim_ = 0;
    std::vector<ConceptId> ids_;
    std::vector<double> values_;
    std::unordered_map<ConceptId, std::size_t> index_;
};

/// Embeds build_concept_text of every target concept with `concept_encoder`.
ConceptEmbeddings precompute_concept_embeddings(const EncoderParams& concept_encoder,
                                                const KnowledgeBase& kb);

}  // namespace cforge
