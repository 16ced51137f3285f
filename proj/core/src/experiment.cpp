#include "cforge/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <ostream>

#include "cforge/errors.hpp"
#include "cforge/log.hpp"

namespace cforge {

ExperimentData ExperimentData::from_benchmark(const SyntheticBenchmark& bench)
{
    ExperimentData d;
    d.kb = bench.kb;
    d.train = to_corpus(bench.train);
    d.dev = to_corpus(bench.dev);
    d.test = to_corpus(bench.test);
    d.library = Library(to_corpus(bench.library).documents);
    d.mmi = bench.mmi;
    return d;
}

std::unordered_set<std::string> ExperimentData::target_ids() const
{
    std::unordered_set<std::string> ids;
    for (const auto* split : {&train, &dev, &test}) {
        for (const auto& doc : split->documents) {
            ids.insert(doc.doc_id());
        }
    }
    return ids;
}

Experiment::Experiment(ExperimentData data) : data_(std::move(data))
{
    manual_ = make_manual_examples(data_.train.documents, data_.train.annotations);
    manual_counts_ = concept_occurrence_counts(data_.train.annotations);
    std::vector<Document> docs = data_.train.documents;
    docs.insert(docs.end(), data_.library.documents().begin(), data_.library.documents().end());
    vocab_ = build_vocabulary(docs, data_.kb);
    dev_stats_ = compute_corpus_stats(data_.train.annotations, data_.dev.annotations, data_.kb);
    test_stats_ = compute_corpus_stats(data_.train.annotations, data_.test.annotations, data_.kb);
}

const std::unordered_map<std::string, std::vector<Annotation>>& Experiment::pseudo(
    const FilterSet& filters)
{
    FilterSet key = filters;
    key.diversity = false;
    const auto name = key.str();
    auto it = pseudo_cache_.find(name);
    if (it == pseudo_cache_.end()) {
        it = pseudo_cache_
                 .emplace(name, prepare_pseudo_annotations(data_.library, data_.mmi, data_.kb, key))
                 .first;
    }
    return it->second;
}

AugmentationResult Experiment::augment(const ExperimentConfig& cfg)
{
    std::map<ConceptId, CandidatePool> pools;
    if (cfg.aug.k > 0) {
        pools = build_pools(data_.kb, manual_counts_, data_.library, pseudo(cfg.filters),
                            data_.target_ids(), cfg.aug);
    }
    return augment_to_threshold(manual_, manual_counts_, pools, cfg.aug, cfg.filters.diversity);
}

std::vector<PredictionSet> Experiment::predict(const Model& model, const IvfIndex& index,
                                               const ParsedCorpus& split, std::size_t nprobe,
                                               std::size_t k) const
{
    std::vector<PredictionSet> preds;
    preds.reserve(split.documents.size());
    for (const auto& doc : split.documents) {
        preds.push_back(predict_top10(model.doc_encoder, index, doc, nprobe, k));
    }
    return preds;
}

ExperimentRun Experiment::run(const ExperimentConfig& cfg)
{
    auto aug = augment(cfg);
    TrainConfig tc = cfg.train;
    tc.w_a = cfg.aug.w_a;
    ExperimentRun out;
    out.added = std::move(aug.added);
    out.shortfall = std::move(aug.shortfall);
    out.num_examples = aug.examples.size();
    out.model = train(aug.examples, data_.kb, tc, vocab_, cfg.dim);
    const auto index = IvfIndex::build(out.model.concepts, cfg.fine, cfg.train.seed, cfg.pq);
    out.dev = split_report(data_.dev, predict(out.model, index, data_.dev, cfg.nprobe, cfg.report.k), data_.kb,
                           dev_stats_, cfg.report);
    out.test = split_report(data_.test, predict(out.model, index, data_.test, cfg.nprobe, cfg.report.k),
                            data_.kb, test_stats_, cfg.report);
    return out;
}

SweepKind parse_sweep_kind(std::string_view name)
{
    if (name == "k") {
        return SweepKind::K_SWEEP;
    }
    if (name == "wa") {
        return SweepKind::WA_SWEEP;
    }
    if (name == "filters") {
        return SweepKind::FILTER_ABLATION;
    }
    throw FormatError("unknown sweep '" + std::string(name) + "' (expected k, wa or filters)");
}

std::vector<std::string> default_grid(SweepKind kind)
{
    switch (kind) {
    case SweepKind::K_SWEEP:
        return {"0", "2", "5", "10"};
    case SweepKind::WA_SWEEP:
        return {"0", "0.2", "0.4", "0.6", "0.8", "1"};
    case SweepKind::FILTER_ABLATION:
        return {"none", "abbrev", "abbrev+overlap", "abbrev+overlap+diversity"};
    }
    return {};
}

ExperimentConfig apply_grid_value(SweepKind kind, const std::string& value, ExperimentConfig base)
{
    switch (kind) {
    case SweepKind::K_SWEEP: {
        int k = 0;
        const auto res = std::from_chars(value.data(), value.data() + value.size(), k);
        if (res.ec != std::errc() || res.ptr != value.data() + value.size() || k < 0) {
            throw FormatError("bad k value '" + value + "'");
        }
        base.aug.k = k;
        break;
    }
    case SweepKind::WA_SWEEP: {
        double w = 0.0;
        const auto res = std::from_chars(value.data(), value.data() + value.size(), w);
        if (res.ec != std::errc() || res.ptr != value.data() + value.size() || !(w >= 0.0)) {
            throw FormatError("bad w_a value '" + value + "'");
        }
        base.aug.w_a = w;
        break;
    }
    case SweepKind::FILTER_ABLATION: {
        std::string list = value;
        std::replace(list.begin(), list.end(), '+', ',');
        base.filters = FilterSet::parse(list);
        break;
    }
    }
    return base;
}

std::vector<SweepRow> sweep(Experiment& experiment, SweepKind kind,
                            std::span<const std::string> grid, const ExperimentConfig& base)
{
    if (grid.empty()) {
        throw std::invalid_argument("sweep grid is empty");
    }
    std::vector<SweepRow> rows;
    for (const auto& value : grid) {
        try {
            const auto cfg = apply_grid_value(kind, value, base);
            auto run = experiment.run(cfg);
            log::info("sweep ", value, ": all f1 ", run.test.all.f1);
            rows.push_back(SweepRow{value, std::move(run.test)});
        } catch (const Error& e) {
            throw SweepError(value, e.what());
        }
    }
    return rows;
}

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows)
{
    out << "grid_value,split,metric,value\n";
    for (const auto& row : rows) {
        for (const auto& r : report_rows(row.report)) {
            out << row.grid_value << ',' << r[0] << ',' << r[1] << ',' << r[2] << '\n';
        }
    }
}

}  // namespace cforge
