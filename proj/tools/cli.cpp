#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <unordered_map>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cforge/errors.hpp"
#include "cforge/experiment.hpp"
#include "cforge/log.hpp"
#include "pipeline_config.hpp"

namespace cforge::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kSplits[] = {"train", "dev", "test"};

struct Context {
    std::string command;
    PipelineConfig cfg;
    bool dry_run = false;
    std::string input;  // extract --input
    std::ostream& out;
    bool computing = false;
    std::vector<std::string> outputs;

    /// Inputs are loaded; returns false under --dry-run.
    bool begin(std::vector<std::string> artifacts)
    {
        outputs = std::move(artifacts);
        computing = true;
        return !dry_run;
    }

    fs::path artifact(const std::string& name) const { return fs::path(cfg.out) / name; }
};

void write_artifact(const Context& ctx, const std::string& name,
                    const std::function<void(std::ostream&)>& body)
{
    fs::create_directories(ctx.cfg.out);
    const auto path = ctx.artifact(name);
    const auto tmp = fs::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error("cannot write '" + tmp.string() + "'");
        }
        body(out);
        out.flush();
        if (!out) {
            throw Error("write failed for '" + tmp.string() + "'");
        }
    }
    fs::rename(tmp, path);
}

std::ifstream open_input(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open '" + path.string() + "'");
    }
    return in;
}

void require_file(const fs::path& path, const std::string& what)
{
    if (!fs::is_regular_file(path)) {
        throw FormatError(what + ": file not found: " + path.string());
    }
}

void require_path_set(const std::string& value, const std::string& flag)
{
    if (value.empty()) {
        throw FormatError(flag + " is required for this command");
    }
}

fs::path split_path(const PipelineConfig& cfg, std::string_view split)
{
    return fs::path(cfg.corpus) / (std::string(split) + ".pubtator");
}

fs::path library_documents(const PipelineConfig& cfg)
{
    return fs::path(cfg.library) / "documents.pubtator";
}

fs::path library_annotations(const PipelineConfig& cfg)
{
    return fs::path(cfg.library) / "annotations.mmi";
}

// -- input checks ------------------------------------------------------------

void need_kb(const PipelineConfig& cfg)
{
    require_path_set(cfg.kb, "--kb");
    require_file(cfg.kb, "--kb");
}

void need_corpus(const PipelineConfig& cfg, std::initializer_list<std::string_view> splits)
{
    require_path_set(cfg.corpus, "--corpus");
    for (const auto s : splits) {
        require_file(split_path(cfg, s), "--corpus");
    }
}

void need_library(const PipelineConfig& cfg, bool annotations)
{
    require_path_set(cfg.library, "--library");
    require_file(library_documents(cfg), "--library");
    if (annotations) {
        require_file(library_annotations(cfg), "--library");
    }
}

void need_artifact(const Context& ctx, const std::string& name, const std::string& producer)
{
    if (!fs::is_regular_file(ctx.artifact(name))) {
        throw FormatError("missing " + ctx.artifact(name).string() + " (run `" + producer +
                          "` first)");
    }
}

// -- loaders -----------------------------------------------------------------

ParsedCorpus load_split(const PipelineConfig& cfg, std::string_view split)
{
    auto corpus = load_pubtator(split_path(cfg, split).string());
    for (const auto& w : corpus.warnings) {
        log::info(split, ": ", w);
    }
    return corpus;
}

std::vector<Document> load_library_documents(const PipelineConfig& cfg)
{
    auto corpus = load_pubtator(library_documents(cfg).string());
    return std::move(corpus.documents);
}

std::vector<RawCandidateSet> load_mmi(const PipelineConfig& cfg)
{
    auto in = open_input(library_annotations(cfg));
    return parse_mmi(in);
}

std::vector<Annotation> load_annotations(const Context& ctx, const std::string& name)
{
    auto in = open_input(ctx.artifact(name));
    return read_annotations_tsv(in);
}

/// Groups by doc_id in first-seen order.
std::vector<std::pair<std::string, std::vector<Annotation>>> group_by_doc(
    std::vector<Annotation> anns)
{
    std::vector<std::pair<std::string, std::vector<Annotation>>> groups;
    std::unordered_map<std::string, std::size_t> slot;
    for (auto& a : anns) {
        auto [it, fresh] = slot.emplace(a.doc_id, groups.size());
        if (fresh) {
            groups.emplace_back(a.doc_id, std::vector<Annotation>{});
        }
        groups[it->second].second.push_back(std::move(a));
    }
    return groups;
}

const Document& find_doc(const Library& library, const std::string& doc_id)
{
    const Document* doc = library.find(doc_id);
    if (doc == nullptr) {
        throw Error("annotation refers to unknown library document '" + doc_id + "'");
    }
    return *doc;
}

std::unordered_set<std::string> target_ids(const std::vector<ParsedCorpus>& splits)
{
    std::unordered_set<std::string> ids;
    for (const auto& s : splits) {
        for (const auto& d : s.documents) {
            ids.insert(d.doc_id());
        }
    }
    return ids;
}

std::vector<std::string> split_list(const std::string& text)
{
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string v;
    while (std::getline(in, v, ',')) {
        if (!v.empty()) {
            out.push_back(v);
        }
    }
    return out;
}

// -- commands ----------------------------------------------------------------

void cmd_ingest(Context& ctx)
{
    const auto& cfg = ctx.cfg;
    need_kb(cfg);
    need_corpus(cfg, {"train", "dev", "test"});
    const auto kb = KnowledgeBase::load(cfg.kb);
    std::map<std::string, ParsedCorpus> splits;
    for (const auto* s : kSplits) {
        splits.emplace(s, load_split(cfg, s));
    }
    const auto& train = splits.at("train");
    const auto manual = make_manual_examples(train.documents, train.annotations);
    if (!ctx.begin({"stats.json", "manual.jsonl"})) {
        return;
    }

    nlohmann::ordered_json j;
    j["concepts"] = kb.size();
    j["manual_examples"] = manual.size();
    for (const auto* s : kSplits) {
        const auto& c = splits.at(s);
        nlohmann::ordered_json e;
        e["documents"] = c.documents.size();
        e["annotations"] = c.annotations.size();
        e["warnings"] = c.warnings.size();
        if (std::string_view(s) != "train") {
            const auto st = compute_corpus_stats(train.annotations, c.annotations, kb);
            e["untrained"] = st.fraction_untrained;
            e["trained"] = st.fraction_trained;
            e["undertrained"] = st.fraction_undertrained;
            e["non_canonical"] = st.fraction_non_canonical;
        }
        j["splits"][s] = std::move(e);
    }
    write_artifact(ctx, "stats.json", [&](std::ostream& o) { o << j.dump(2) << '\n'; });
    write_artifact(ctx, "manual.jsonl", [&](std::ostream& o) { write_examples_jsonl(o, manual); });
    ctx.out << "ingest: " << kb.size() << " concepts, " << train.documents.size() << " train / "
            << splits.at("dev").documents.size() << " dev / " << splits.at("test").documents.size()
            << " test documents, " << manual.size() << " manual examples\n";
}

void cmd_annotate(Context& ctx)
{
    need_library(ctx.cfg, true);
    const auto docs = load_library_documents(ctx.cfg);
    auto sets = load_mmi(ctx.cfg);
    const std::size_t raw_sets = sets.size();
    const std::size_t dropped = resolve_mentions(sets, docs);
    std::vector<Annotation> anns;
    anns.reserve(sets.size());
    for (const auto& s : sets) {
        anns.push_back(select_top_candidate(s));
    }
    if (!ctx.begin({"pseudo_raw.tsv"})) {
        return;
    }
    write_artifact(ctx, "pseudo_raw.tsv", [&](std::ostream& o) { write_annotations_tsv(o, anns); });
    ctx.out << "annotate: " << anns.size() << " pseudo annotations from " << raw_sets
            << " annotator spans over " << docs.size() << " library documents (" << dropped
            << " dropped)\n";
}

void cmd_filter(Context& ctx)
{
    need_kb(ctx.cfg);
    need_library(ctx.cfg, false);
    need_artifact(ctx, "pseudo_raw.tsv", "annotate");
    const auto filters = FilterSet::parse(ctx.cfg.filters);
    const auto kb = KnowledgeBase::load(ctx.cfg.kb);
    const Library library(load_library_documents(ctx.cfg));
    auto raw = load_annotations(ctx, "pseudo_raw.tsv");
    const std::size_t before = raw.size();
    std::vector<Annotation> kept;
    if (!filters.abbreviation && !filters.overlap) {
        kept = std::move(raw);
    } else {
        for (auto& [doc_id, anns] : group_by_doc(std::move(raw))) {
            const auto out = apply_filters(find_doc(library, doc_id), anns, kb, filters);
            kept.insert(kept.end(), out.begin(), out.end());
        }
    }
    if (!ctx.begin({"pseudo_filtered.tsv"})) {
        return;
    }
    write_artifact(ctx, "pseudo_filtered.tsv",
                   [&](std::ostream& o) { write_annotations_tsv(o, kept); });
    ctx.out << "filter: kept " << kept.size() << " of " << before << " pseudo annotations (filters "
            << filters.str() << ")\n";
}

void cmd_augment(Context& ctx)
{
    const auto& cfg = ctx.cfg;
    need_kb(cfg);
    need_corpus(cfg, {"train", "dev", "test"});
    need_library(cfg, false);
    need_artifact(ctx, "pseudo_filtered.tsv", "filter");
    const auto ecfg = cfg.experiment();
    const auto kb = KnowledgeBase::load(cfg.kb);
    std::vector<ParsedCorpus> splits;
    for (const auto* s : kSplits) {
        splits.push_back(load_split(cfg, s));
    }
    const Library library(load_library_documents(cfg));
    std::unordered_map<std::string, std::vector<Annotation>> pseudo;
    for (auto& [doc_id, anns] : group_by_doc(load_annotations(ctx, "pseudo_filtered.tsv"))) {
        pseudo[doc_id] = map_to_target(find_doc(library, doc_id), anns, kb);
    }
    const auto& train = splits.front();
    const auto manual = make_manual_examples(train.documents, train.annotations);
    const auto counts = concept_occurrence_counts(train.annotations);
    if (!ctx.begin({"augmented.jsonl"})) {
        return;
    }
    std::map<ConceptId, CandidatePool> pools;
    if (ecfg.aug.k > 0) {
        pools = build_pools(kb, counts, library, pseudo, target_ids(splits), ecfg.aug);
    }
    const auto result =
        augment_to_threshold(manual, counts, pools, ecfg.aug, ecfg.filters.diversity);
    write_artifact(ctx, "augmented.jsonl",
                   [&](std::ostream& o) { write_examples_jsonl(o, result.examples); });
    std::size_t added = 0;
    for (const auto& [id, n] : result.added) {
        added += static_cast<std::size_t>(n);
    }
    ctx.out << "augment: " << result.examples.size() << " examples (" << manual.size()
            << " manual, " << added << " pseudo), " << result.shortfall.size()
            << " concepts short of k=" << ecfg.aug.k << '\n';
}

void cmd_train(Context& ctx)
{
    const auto& cfg = ctx.cfg;
    need_kb(cfg);
    need_corpus(cfg, {"train"});
    need_library(cfg, false);
    need_artifact(ctx, "augmented.jsonl", "augment");
    const auto ecfg = cfg.experiment();
    const auto kb = KnowledgeBase::load(cfg.kb);
    auto docs = load_split(cfg, "train").documents;
    const auto library = load_library_documents(cfg);
    docs.insert(docs.end(), library.begin(), library.end());
    std::vector<TrainingExample> examples;
    {
        auto in = open_input(ctx.artifact("augmented.jsonl"));
        examples = read_examples_jsonl(in);
    }
    auto vocab = build_vocabulary(docs, kb);
    if (!ctx.begin({"model.cfg1", "concepts.cem1", "train_log.csv"})) {
        return;
    }
    const auto model = train(examples, kb, ecfg.train, std::move(vocab), ecfg.dim);
    write_artifact(ctx, "model.cfg1", [&](std::ostream& o) { model.doc_encoder.save(o); });
    write_artifact(ctx, "concepts.cem1", [&](std::ostream& o) { model.concepts.save(o); });
    write_artifact(ctx, "train_log.csv", [&](std::ostream& o) { write_train_log(o, model.log); });
    ctx.out << "train: " << examples.size() << " examples, " << ecfg.train.epochs << " epochs, "
            << model.log.size() << " batches, last loss "
            << (model.log.empty() ? std::string("N/A") : format_number(model.log.back().loss))
            << '\n';
}

void cmd_index(Context& ctx)
{
    need_artifact(ctx, "concepts.cem1", "train");
    const auto ecfg = ctx.cfg.experiment();
    ConceptEmbeddings concepts;
    {
        auto in = open_input(ctx.artifact("concepts.cem1"));
        concepts = ConceptEmbeddings::load(in);
    }
    if (!ctx.begin({"concepts.ivf"})) {
        return;
    }
    const auto index = IvfIndex::build(concepts, ecfg.fine, ecfg.train.seed, ecfg.pq);
    write_artifact(ctx, "concepts.ivf", [&](std::ostream& o) { index.save(o); });
    ctx.out << "index: " << index.size() << " concepts in " << index.num_lists() << " lists ("
            << ctx.cfg.quantizer << ")\n";
}

void cmd_extract(Context& ctx)
{
    const auto& cfg = ctx.cfg;
    need_artifact(ctx, "model.cfg1", "train");
    need_artifact(ctx, "concepts.ivf", "index");
    std::vector<Document> docs;
    std::string source;
    if (!ctx.input.empty()) {
        require_file(ctx.input, "--input");
        docs = load_pubtator(ctx.input).documents;
        source = ctx.input;
    } else {
        need_corpus(cfg, {cfg.split});
        docs = load_split(cfg, cfg.split).documents;
        source = cfg.split + " split";
    }
    EncoderParams model;
    {
        auto in = open_input(ctx.artifact("model.cfg1"));
        model = EncoderParams::load(in);
    }
    IvfIndex index;
    {
        auto in = open_input(ctx.artifact("concepts.ivf"));
        index = IvfIndex::load(in);
    }
    if (model.dim != index.dim()) {
        throw FormatError("model dimension " + std::to_string(model.dim) +
                          " does not match index dimension " + std::to_string(index.dim()));
    }
    if (!ctx.begin({"predictions.tsv"})) {
        return;
    }
    std::vector<PredictionSet> preds;
    preds.reserve(docs.size());
    for (const auto& d : docs) {
        preds.push_back(predict_top10(model, index, d, cfg.nprobe, cfg.topk));
    }
    write_artifact(ctx, "predictions.tsv", [&](std::ostream& o) { write_predictions(o, preds); });
    write_predictions(ctx.out, preds);
    ctx.out << "extract: top " << cfg.topk << " concepts for " << preds.size()
            << " documents of " << source << '\n';
}

void cmd_evaluate(Context& ctx)
{
    const auto& cfg = ctx.cfg;
    need_kb(cfg);
    need_corpus(cfg, {"train", cfg.split});
    need_artifact(ctx, "predictions.tsv", "extract");
    const auto ecfg = cfg.experiment();
    const auto kb = KnowledgeBase::load(cfg.kb);
    const auto train = load_split(cfg, "train");
    const auto split = cfg.split == "train" ? train : load_split(cfg, cfg.split);
    std::vector<PredictionSet> preds;
    {
        auto in = open_input(ctx.artifact("predictions.tsv"));
        preds = read_predictions(in);
    }
    if (!ctx.begin({"report.csv", "report.json"})) {
        return;
    }
    const auto stats = compute_corpus_stats(train.annotations, split.annotations, kb);
    const auto report = split_report(split, preds, kb, stats, ecfg.report);
    write_artifact(ctx, "report.csv", [&](std::ostream& o) { write_report_csv(o, report); });
    write_artifact(ctx, "report.json", [&](std::ostream& o) { write_report_json(o, report); });
    ctx.out << "evaluate " << cfg.split << ": f1@" << cfg.topk << " "
            << format_number(report.all.f1) << ", rare f1@" << cfg.topk << " "
            << (report.rare ? format_number(report.rare->f1) : std::string("N/A")) << " over "
            << report.documents << " documents\n";
}

void cmd_sweep(Context& ctx)
{
    const auto& cfg = ctx.cfg;
    need_kb(cfg);
    need_corpus(cfg, {"train", "dev", "test"});
    need_library(cfg, true);
    const auto kind = parse_sweep_kind(cfg.sweep);
    auto grid = split_list(cfg.grid);
    if (grid.empty()) {
        grid = default_grid(kind);
    }
    const auto base = cfg.experiment();
    ExperimentData data;
    data.kb = KnowledgeBase::load(cfg.kb);
    data.train = load_split(cfg, "train");
    data.dev = load_split(cfg, "dev");
    data.test = load_split(cfg, "test");
    data.library = Library(load_library_documents(cfg));
    data.mmi = load_mmi(cfg);
    if (!ctx.begin({"sweep.csv"})) {
        return;
    }
    Experiment experiment(std::move(data));
    const auto rows = sweep(experiment, kind, grid, base);
    write_artifact(ctx, "sweep.csv", [&](std::ostream& o) { write_sweep_csv(o, rows); });
    ctx.out << "sweep " << cfg.sweep << ": " << rows.size() << " grid points, test f1@"
            << cfg.topk << " " << format_number(rows.front().report.all.f1) << " -> "
            << format_number(rows.back().report.all.f1) << '\n';
}

struct CommandInfo {
    const char* name;
    const char* help;
    void (*fn)(Context&);
};

constexpr CommandInfo kCommands[] = {
    {"ingest", "Parse KB and corpus; write stats.json and manual.jsonl", cmd_ingest},
    {"annotate", "Top annotator candidate per library span; write pseudo_raw.tsv", cmd_annotate},
    {"filter", "Abbreviation and overlap filters; write pseudo_filtered.tsv", cmd_filter},
    {"augment", "Pseudo examples up to k per concept; write augmented.jsonl", cmd_augment},
    {"train", "Train the document encoder; write model.cfg1, concepts.cem1, train_log.csv",
     cmd_train},
    {"index", "Build the concept index; write concepts.ivf", cmd_index},
    {"extract", "Top-k concepts per document; write predictions.tsv", cmd_extract},
    {"evaluate", "Score predictions; write report.csv and report.json", cmd_evaluate},
    {"sweep", "Train and evaluate over a grid; write sweep.csv", cmd_sweep},
};

struct Binding {
    const char* flag;
    const char* key;
    const char* help;
    std::string value;
};

std::vector<Binding> make_bindings()
{
    return {
        {"--kb", "paths.kb", "Knowledge base (JSON lines)", {}},
        {"--corpus", "paths.corpus", "Directory with train/dev/test .pubtator files", {}},
        {"--library", "paths.library", "Directory with documents.pubtator and annotations.mmi", {}},
        {"--out", "paths.out", "Output directory", {}},
        {"--k", "augmentation.k", "Occurrence threshold", {}},
        {"--wa", "augmentation.wa", "Loss weight of pseudo examples", {}},
        {"--seed", "seed", "Root random seed", {}},
        {"--filters", "augmentation.filters", "Subset of abbrev,overlap,diversity or none", {}},
        {"--nprobe", "index.nprobe", "Lists probed per query (0 = all)", {}},
        {"--topk", "index.topk", "Predictions per document", {}},
        {"--dim", "training.dim", "Embedding dimension", {}},
        {"--epochs", "training.epochs", "Training epochs", {}},
        {"--lr", "training.learning_rate", "Initial learning rate", {}},
        {"--batch-size", "training.batch_size", "Examples per batch", {}},
        {"--quantizer", "index.quantizer", "identity or pq", {}},
        {"--split", "evaluation.split", "train, dev or test", {}},
        {"--sweep", "sweep.kind", "k, wa or filters", {}},
        {"--grid", "sweep.grid", "Comma separated grid values", {}},
    };
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Concept extraction pipeline with pseudo-annotation augmentation",
                 "concept-forge"};
    app.require_subcommand(1, 1);
    auto bindings = make_bindings();
    std::string config_path;
    std::string input;
    bool dry_run = false;
    bool macro = false;
    std::map<const CLI::App*, const CommandInfo*> by_app;
    for (const auto& info : kCommands) {
        auto* sub = app.add_subcommand(info.name, info.help);
        by_app.emplace(sub, &info);
        sub->add_option("--config", config_path, "Config file ([section] key=value)");
        for (auto& b : bindings) {
            sub->add_option(b.flag, b.value, b.help);
        }
        sub->add_flag("--macro", macro, "Macro-average metrics");
        sub->add_flag("--dry-run", dry_run, "Validate and read inputs without writing");
        if (std::string_view(info.name) == "extract") {
            sub->add_option("--input", input, "PubTator file to extract from instead of a split");
        }
    }

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    const auto* sub = app.get_subcommands().front();
    const CommandInfo& info = *by_app.at(sub);
    Context ctx{info.name, {}, dry_run, input, out, false, {}};
    try {
        if (!config_path.empty()) {
            ctx.cfg = PipelineConfig::load(config_path);
        }
        for (const auto& b : bindings) {
            if (sub->count(b.flag) > 0) {
                try {
                    ctx.cfg.set(b.key, b.value);
                } catch (const FormatError& e) {
                    throw FormatError(std::string(b.flag) + ": " + e.what());
                }
            }
        }
        if (macro) {
            ctx.cfg.macro = true;
        }
        ctx.cfg.validate();
        info.fn(ctx);
    } catch (const std::exception& e) {
        err << info.name << ": error: " << e.what() << '\n';
        return ctx.computing ? kExitRuntime : kExitUsage;
    }
    if (ctx.dry_run) {
        out << info.name << ": dry run ok, would write";
        for (const auto& o : ctx.outputs) {
            out << ' ' << ctx.artifact(o).string();
        }
        out << '\n';
    }
    return kExitOk;
}

}  // namespace cforge::cli
