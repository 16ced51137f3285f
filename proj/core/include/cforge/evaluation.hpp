#pragma once

#include <array>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "cforge/ann_index.hpp"
#include "cforge/concept_kb.hpp"
#include "cforge/corpus.hpp"
#include "cforge/encoder.hpp"

namespace cforge {

inline constexpr std::size_t kTopK = 10;

struct PredictionSet {
    std::string doc_id;
    std::vector<ConceptId> concepts;  // best first, no duplicates
    std::vector<double> distances;    // aligned with concepts when known

    friend bool operator==(const PredictionSet&, const PredictionSet&) = default;
};

/// Mean of the segment embeddings, renormalized.
EmbeddingVector embed_document(const EncoderParams& doc_encoder, const Document& doc,
                               std::size_t max_tokens = kMaxSegmentTokens);

/// nprobe 0 probes every list.
PredictionSet predict_top10(const EncoderParams& doc_encoder, const IvfIndex& index,
                            const Document& doc, std::size_t nprobe = 0, std::size_t k = kTopK);

struct Prf {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;

    friend bool operator==(const Prf&, const Prf&) = default;
};

/// Harmonic mean, 0 when p + r = 0.
double f1_of(double p, double r);

/// P = hits / k, R = hits / |gold| over the first k predictions.
/// Throws std::invalid_argument on empty gold.
Prf prf_at_k(const PredictionSet& preds, const std::set<ConceptId>& gold, std::size_t k = kTopK);

/// Absent optionals are empty splits, reported as N/A.
struct MetricsReport {
    Prf all;
    std::optional<Prf> rare;
    std::optional<double> noncanonical_recall5;
    std::optional<double> noncanonical_recall10;
    std::map<std::string, Prf> per_type;
    std::size_t documents = 0;  // with non-empty gold

    friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

struct ReportOptions {
    bool macro = false;
    int rare_threshold = kUndertrainedThreshold;
    std::size_t k = kTopK;
};

/// All / rare / non-canonical / per-type metrics over the documents of
/// `corpus` that carry gold annotations. Rare gold is restricted to
/// concepts with fewer than rare_threshold training documents. A gold
/// concept is non-canonical in a document when none of its mentions
/// there is canonical. Throws MissingPredictions.
MetricsReport split_report(const ParsedCorpus& corpus, std::span<const PredictionSet> preds,
                           const KnowledgeBase& kb, const CorpusStats& stats,
                           const ReportOptions& options = {});

/// Shortest round-trip decimal form.
std::string format_number(double v);

/// `split,metric,value` rows; empty splits print N/A.
void write_report_csv(std::ostream& out, const MetricsReport& report);
void write_report_json(std::ostream& out, const MetricsReport& report);

/// (split, metric, value) triples in CSV order.
std::vector<std::array<std::string, 3>> report_rows(const MetricsReport& report);

/// `doc_id<TAB>rank<TAB>concept<TAB>distance`, rank from 1.
void write_predictions(std::ostream& out, std::span<const PredictionSet> preds);
/// Inverse of write_predictions; documents keep first-seen order.
/// Throws ParseError.
std::vector<PredictionSet> read_predictions(std::istream& in);

}  // namespace cforge
