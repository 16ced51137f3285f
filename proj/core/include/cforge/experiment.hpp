#pragma once

#include <iosfwd>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "cforge/ann_index.hpp"
#include "cforge/augmentation.hpp"
#include "cforge/evaluation.hpp"
#include "cforge/synthetic.hpp"
#include "cforge/training.hpp"

namespace cforge {

/// Everything one train+eval run reads.
struct ExperimentData {
    KnowledgeBase kb;
    ParsedCorpus train;
    ParsedCorpus dev;
    ParsedCorpus test;
    Library library{{}};
    std::vector<RawCandidateSet> mmi;  // annotator output over the library

    static ExperimentData from_benchmark(const SyntheticBenchmark& bench);
    /// Doc ids of train, dev and test.
    std::unordered_set<std::string> target_ids() const;
};

struct ExperimentConfig {
    AugmentationConfig aug;
    TrainConfig train;
    FilterSet filters;
    std::size_t dim = kDefaultDim;
    FineQuantizer fine = FineQuantizer::IDENTITY;
    PqConfig pq;
    std::size_t nprobe = 0;  // 0 probes every list
    ReportOptions report;
};

struct ExperimentRun {
    Model model;
    std::map<ConceptId, int> added;
    std::map<ConceptId, int> shortfall;
    std::size_t num_examples = 0;
    MetricsReport dev;
    MetricsReport test;
};

/// Full pipeline over fixed data. Pseudo annotations are cached per filter
/// setting; the encoder vocabulary covers train, library and KB texts and
/// does not depend on the configuration.
class Experiment {
  public:
    explicit Experiment(ExperimentData data);

    const ExperimentData& data() const noexcept { return data_; }
    const std::vector<TrainingExample>& manual_examples() const noexcept { return manual_; }
    const ConceptCounts& manual_counts() const noexcept { return manual_counts_; }
    const TokenVocabulary& vocabulary() const noexcept { return vocab_; }

    /// Filtered, target-mapped pseudo annotations by library doc id.
    const std::unordered_map<std::string, std::vector<Annotation>>& pseudo(const FilterSet& filters);

    /// Manual examples plus pseudo examples up to cfg.aug.k.
    AugmentationResult augment(const ExperimentConfig& cfg);

    /// Augment, train (w_a from cfg.aug), index, predict, report.
    ExperimentRun run(const ExperimentConfig& cfg);

    /// Predictions for every document of `split`.
    std::vector<PredictionSet> predict(const Model& model, const IvfIndex& index,
                                       const ParsedCorpus& split, std::size_t nprobe,
                                       std::size_t k = kTopK) const;

  private:
    ExperimentData data_;
    std::vector<TrainingExample> manual_;
    ConceptCounts manual_counts_;
    TokenVocabulary vocab_;
    CorpusStats dev_stats_;
    CorpusStats test_stats_;
    std::map<std::string, std::unordered_map<std::string, std::vector<Annotation>>> pseudo_cache_;
};

enum class SweepKind { K_SWEEP, WA_SWEEP, FILTER_ABLATION };

/// "k", "wa", "filters".
SweepKind parse_sweep_kind(std::string_view name);

/// {0, 2, 5, 10}; {0, 0.2, 0.4, 0.6, 0.8, 1}; {none, abbrev, abbrev+overlap, all}.
std::vector<std::string> default_grid(SweepKind kind);

/// Applies one grid value to a copy of `base`.
ExperimentConfig apply_grid_value(SweepKind kind, const std::string& value, ExperimentConfig base);

struct SweepRow {
    std::string grid_value;
    MetricsReport report;  // test split
};

/// One run per grid value. Throws SweepError naming the failing value.
std::vector<SweepRow> sweep(Experiment& experiment, SweepKind kind,
                            std::span<const std::string> grid, const ExperimentConfig& base);

/// `grid_value,split,metric,value`
void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows);

}  // namespace cforge
