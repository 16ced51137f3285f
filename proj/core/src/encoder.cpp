#include "cforge/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "cforge/augmentation.hpp"
#include "cforge/binary_io.hpp"
#include "cforge/errors.hpp"
#include "cforge/rng.hpp"

namespace cforge {

std::vector<std::string> encoder_terms(std::span<const std::string> tokens)
{
    std::vector<std::string> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) {
        for (auto& term : search_terms(t)) {
            out.push_back(std::move(term));
        }
    }
    return out;
}

TokenVocabulary::TokenVocabulary() : TokenVocabulary(std::vector<std::string>{}) {}

TokenVocabulary::TokenVocabulary(std::vector<std::string> terms)
{
    std::erase(terms, std::string(kUnkToken));
    std::sort(terms.begin(), terms.end());
    terms.erase(std::unique(terms.begin(), terms.end()), terms.end());
    terms_.reserve(terms.size() + 1);
    terms_.emplace_back(kUnkToken);
    for (auto& t : terms) {
        terms_.push_back(std::move(t));
    }
    for (std::size_t i = 0; i < terms_.size(); ++i) {
        index_.emplace(terms_[i], i);
    }
}

std::size_t TokenVocabulary::index_of(std::string_view term) const
{
    const auto it = index_.find(std::string(term));
    return it == index_.end() ? kUnk : it->second;
}

std::vector<std::size_t> TokenVocabulary::lookup(std::span<const std::string> tokens) const
{
    std::vector<std::size_t> ids;
    for (const auto& term : encoder_terms(tokens)) {
        ids.push_back(index_of(term));
    }
    return ids;
}

namespace {

TokenVocabulary with_kb_terms(std::set<std::string> terms, const KnowledgeBase& kb)
{
    for (const auto& c : kb.concepts()) {
        const auto text = build_concept_text(c).text;
        for (auto& t : encoder_terms(whitespace_tokens(text))) {
            terms.insert(std::move(t));
        }
    }
    return TokenVocabulary(std::vector<std::string>(terms.begin(), terms.end()));
}

}  // namespace

TokenVocabulary build_vocabulary(std::span<const TrainingExample> examples, const KnowledgeBase& kb)
{
    std::set<std::string> terms;
    for (const auto& ex : examples) {
        for (auto& t : encoder_terms(ex.segment.tokens)) {
            terms.insert(std::move(t));
        }
    }
    return with_kb_terms(std::move(terms), kb);
}

TokenVocabulary build_vocabulary(std::span<const Document> documents, const KnowledgeBase& kb)
{
    std::set<std::string> terms;
    for (const auto& doc : documents) {
        for (auto& t : encoder_terms(doc.tokens())) {
            terms.insert(std::move(t));
        }
    }
    return with_kb_terms(std::move(terms), kb);
}

EncoderParams EncoderParams::initialize(TokenVocabulary vocab, std::size_t dim, std::uint64_t seed)
{
    if (dim == 0) {
        throw std::invalid_argument("embedding dimension must be positive");
    }
    EncoderParams p;
    p.dim = dim;
    p.vocab = std::move(vocab);
    auto rng = Rng::stream(seed, "encoder.init");
    p.token_table.resize(p.vocab.size() * dim);
    for (double& v : p.token_table) {
        v = rng.uniform(-0.1, 0.1);
    }
    p.projection.resize(dim * dim);
    for (double& v : p.projection) {
        v = rng.uniform(-0.1, 0.1);
    }
    return p;
}

bool EncoderParams::finite() const
{
    auto ok = [](double v) { return std::isfinite(v); };
    return std::all_of(token_table.begin(), token_table.end(), ok) &&
           std::all_of(projection.begin(), projection.end(), ok);
}

void EncoderParams::save(std::ostream& out) const
{
    out.write("CFG1", 4);
    binary::write_u64(out, dim);
    binary::write_u64(out, vocab.size());
    for (const auto& t : vocab.terms()) {
        binary::write_string(out, t);
    }
    binary::write_f64s(out, token_table);
    binary::write_f64s(out, projection);
}

EncoderParams EncoderParams::load(std::istream& in)
{
    binary::expect_magic(in, "CFG1");
    EncoderParams p;
    p.dim = binary::read_u64(in);
    const auto n = binary::read_u64(in);
    if (p.dim == 0 || p.dim > 4096 || n == 0 || n > (1u << 26)) {
        throw FormatError("checkpoint header out of range");
    }
    std::vector<std::string> terms;
    terms.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        terms.push_back(binary::read_string(in));
    }
    if (terms.front() != TokenVocabulary::kUnkToken) {
        throw FormatError("checkpoint vocabulary does not start with the unknown-term row");
    }
    p.vocab = TokenVocabulary(terms);
    if (p.vocab.terms() != terms) {
        throw FormatError("checkpoint vocabulary is not sorted and unique");
    }
    p.token_table.resize(n * p.dim);
    binary::read_f64s(in, p.token_table);
    p.projection.resize(p.dim * p.dim);
    binary::read_f64s(in, p.projection);
    return p;
}

void EncoderParams::save(const std::string& path) const
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot write checkpoint '" + path + "'");
    }
    save(out);
}

EncoderParams EncoderParams::load(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open checkpoint '" + path + "'");
    }
    return load(in);
}

double dot(std::span<const double> u, std::span<const double> v)
{
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        s += u[i] * v[i];
    }
    return s;
}

double l2_norm(std::span<const double> u) { return std::sqrt(dot(u, u)); }

void normalize_in_place(std::span<double> u)
{
    const double n = l2_norm(u);
    if (n == 0.0) {
        const double c = 1.0 / std::sqrt(static_cast<double>(u.size()));
        std::fill(u.begin(), u.end(), c);
        return;
    }
    for (double& x : u) {
        x /= n;
    }
}

EncodeTrace encode_ids(const EncoderParams& params, std::span<const std::size_t> ids)
{
    const std::size_t d = params.dim;
    EncodeTrace t;
    t.ids.assign(ids.begin(), ids.end());
    t.mean.assign(d, 0.0);
    t.projected.assign(d, 0.0);
    t.output.assign(d, 1.0 / std::sqrt(static_cast<double>(d)));
    if (ids.empty()) {
        return t;
    }
    for (const std::size_t id : ids) {
        const auto r = params.row(id);
        for (std::size_t j = 0; j < d; ++j) {
            t.mean[j] += r[j];
        }
    }
    const double inv = 1.0 / static_cast<double>(ids.size());
    for (double& x : t.mean) {
        x *= inv;
    }
    for (std::size_t i = 0; i < d; ++i) {
        t.projected[i] = dot({params.projection.data() + i * d, d}, t.mean);
    }
    t.norm = l2_norm(t.projected);
    if (t.norm > 0.0 || !std::isfinite(t.norm)) {
        for (std::size_t i = 0; i < d; ++i) {
            t.output[i] = t.projected[i] / t.norm;
        }
    }
    return t;
}

EmbeddingVector embed_text(const EncoderParams& params, std::span<const std::string> tokens)
{
    const auto ids = params.vocab.lookup(tokens);
    return encode_ids(params, ids).output;
}

double cosine_sim(std::span<const double> u, std::span<const double> v)
{
    const double nu = l2_norm(u);
    const double nv = l2_norm(v);
    if (nu == 0.0 || nv == 0.0) {
        throw ZeroVector("cosine similarity of a zero vector");
    }
    return std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0);
}

EncoderGradient::EncoderGradient(const EncoderParams& params)
    : dim_(params.dim),
      projection_(params.dim * params.dim, 0.0),
      table_(params.token_table.size(), 0.0),
      is_touched_(params.vocab.size(), 0)
{}

void EncoderGradient::clear()
{
    std::fill(projection_.begin(), projection_.end(), 0.0);
    for (const std::size_t r : touched_) {
        std::fill_n(table_.begin() + static_cast<std::ptrdiff_t>(r * dim_), dim_, 0.0);
        is_touched_[r] = 0;
    }
    touched_.clear();
}

std::span<double> EncoderGradient::row(std::size_t i)
{
    if (!is_touched_[i]) {
        is_touched_[i] = 1;
        touched_.push_back(i);
    }
    return {table_.data() + i * dim_, dim_};
}

std::span<const double> EncoderGradient::row(std::size_t i) const
{
    return {table_.data() + i * dim_, dim_};
}

void backprop(const EncoderParams& params, const EncodeTrace& trace,
              std::span<const double> grad_output, double scale, EncoderGradient& grad)
{
    if (trace.ids.empty() || trace.norm == 0.0) {
        return;  // constant output
    }
    const std::size_t d = params.dim;
    // d out / d h = (I - v v^T) / |h|
    const double vg = dot(trace.output, grad_output);
    std::vector<double> gh(d);
    for (std::size_t i = 0; i < d; ++i) {
        gh[i] = scale * (grad_output[i] - trace.output[i] * vg) / trace.norm;
    }
    auto gp = grad.projection();
    std::vector<double> gm(d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
        const double* prow = params.projection.data() + i * d;
        double* grow = gp.data() + i * d;
        for (std::size_t j = 0; j < d; ++j) {
            grow[j] += gh[i] * trace.mean[j];
            gm[j] += prow[j] * gh[i];
        }
    }
    const double inv = 1.0 / static_cast<double>(trace.ids.size());
    for (const std::size_t id : trace.ids) {
        auto r = grad.row(id);
        for (std::size_t j = 0; j < d; ++j) {
            r[j] += gm[j] * inv;
        }
    }
}

ConceptEmbeddings::ConceptEmbeddings(std::size_t dim, std::vector<ConceptId> ids,
                                     std::vector<double> values)
    : dim_(dim), ids_(std::move(ids)), values_(std::move(values))
{
    if (values_.size() != ids_.size() * dim_) {
        throw FormatError("concept embedding table has the wrong size");
    }
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        if (!index_.emplace(ids_[i], i).second) {
            throw FormatError("duplicate concept " + ids_[i].str() + " in embedding table");
        }
    }
}

std::optional<std::size_t> ConceptEmbeddings::index_of(const ConceptId& id) const
{
    const auto it = index_.find(id);
    if (it == index_.end()) {
        return std::nullopt;
    }
    return it->second;
}

void ConceptEmbeddings::save(std::ostream& out) const
{
    out.write("CEM1", 4);
    binary::write_u64(out, ids_.size());
    binary::write_u64(out, dim_);
    for (const auto& id : ids_) {
        binary::write_string(out, id.str());
    }
    binary::write_f64s(out, values_);
}

ConceptEmbeddings ConceptEmbeddings::load(std::istream& in)
{
    binary::expect_magic(in, "CEM1");
    const auto n = binary::read_u64(in);
    const auto d = binary::read_u64(in);
    if (d == 0 || d > 4096 || n > (1u << 26)) {
        throw FormatError("concept table header out of range");
    }
    std::vector<ConceptId> ids;
    ids.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        ids.push_back(ConceptId::parse(binary::read_string(in)));
    }
    std::vector<double> values(n * d);
    binary::read_f64s(in, values);
    return ConceptEmbeddings(d, std::move(ids), std::move(values));
}

ConceptEmbeddings precompute_concept_embeddings(const EncoderParams& concept_encoder,
                                                const KnowledgeBase& kb)
{
    std::vector<ConceptId> ids;
    std::vector<double> values;
    for (const auto& c : kb.concepts()) {
        if (!is_target_concept(c)) {
            continue;
        }
        const auto text = build_concept_text(c);
        const auto v = embed_text(concept_encoder, whitespace_tokens(text.text));
        ids.push_back(c.id);
        values.insert(values.end(), v.begin(), v.end());
    }
    return ConceptEmbeddings(concept_encoder.dim, std::move(ids), std::move(values));
}

}  // namespace cforge
