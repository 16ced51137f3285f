#include "cforge/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "cforge/errors.hpp"

namespace cforge {

EmbeddingVector embed_document(const EncoderParams& doc_encoder, const Document& doc,
                               std::size_t max_tokens)
{
    const auto segments = segment_document(doc, max_tokens);
    if (segments.size() == 1) {
        return embed_text(doc_encoder, segments.front().tokens);
    }
    EmbeddingVector sum(doc_encoder.dim, 0.0);
    for (const auto& s : segments) {
        const auto v = embed_text(doc_encoder, s.tokens);
        for (std::size_t j = 0; j < sum.size(); ++j) {
            sum[j] += v[j];
        }
    }
    normalize_in_place(sum);
    return sum;
}

PredictionSet predict_top10(const EncoderParams& doc_encoder, const IvfIndex& index,
                            const Document& doc, std::size_t nprobe, std::size_t k)
{
    const auto emb = embed_document(doc_encoder, doc);
    SearchParams params{k, nprobe == 0 ? index.num_lists() : nprobe};
    PredictionSet out{doc.doc_id(), {}, {}};
    for (const auto& hit : index.search(emb, params)) {
        out.concepts.push_back(hit.concept_id);
        out.distances.push_back(hit.distance);
    }
    return out;
}

double f1_of(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

namespace {

std::size_t hits_in_top(const PredictionSet& preds, const std::set<ConceptId>& gold, std::size_t k)
{
    std::size_t hits = 0;
    const std::size_t n = std::min(k, preds.concepts.size());
    for (std::size_t i = 0; i < n; ++i) {
        hits += gold.count(preds.concepts[i]);
    }
    return hits;
}

// Per-document tallies for one split.
struct Tally {
    std::size_t docs = 0;
    double hits = 0.0;
    double gold = 0.0;
    double sum_p = 0.0;
    double sum_r = 0.0;

    void add(std::size_t h, std::size_t g, std::size_t k)
    {
        ++docs;
        hits += static_cast<double>(h);
        gold += static_cast<double>(g);
        sum_p += static_cast<double>(h) / static_cast<double>(k);
        sum_r += static_cast<double>(h) / static_cast<double>(g);
    }

    Prf prf(std::size_t k, bool macro) const
    {
        Prf out;
        if (docs == 0) {
            return out;
        }
        if (macro) {
            out.precision = sum_p / static_cast<double>(docs);
            out.recall = sum_r / static_cast<double>(docs);
        } else {
            out.precision = hits / (static_cast<double>(k) * static_cast<double>(docs));
            out.recall = hits / gold;
        }
        out.f1 = f1_of(out.precision, out.recall);
        return out;
    }

    double recall(bool macro) const
    {
        return macro ? sum_r / static_cast<double>(docs) : hits / gold;
    }
};

}  // namespace

Prf prf_at_k(const PredictionSet& preds, const std::set<ConceptId>& gold, std::size_t k)
{
    if (gold.empty()) {
        throw std::invalid_argument("gold set is empty");
    }
    if (k == 0) {
        throw std::invalid_argument("k must be >= 1");
    }
    const auto hits = static_cast<double>(hits_in_top(preds, gold, k));
    Prf out;
    out.precision = hits / static_cast<double>(k);
    out.recall = hits / static_cast<double>(gold.size());
    out.f1 = f1_of(out.precision, out.recall);
    return out;
}

MetricsReport split_report(const ParsedCorpus& corpus, std::span<const PredictionSet> preds,
                           const KnowledgeBase& kb, const CorpusStats& stats,
                           const ReportOptions& options)
{
    const std::size_t k = options.k;
    std::unordered_map<std::string, const PredictionSet*> by_doc;
    for (const auto& p : preds) {
        by_doc.emplace(p.doc_id, &p);
    }
    std::vector<std::string> missing;
    for (const auto& d : corpus.documents) {
        if (!by_doc.contains(d.doc_id())) {
            missing.push_back(d.doc_id());
        }
    }
    if (!missing.empty()) {
        throw MissingPredictions(std::move(missing));
    }

    // doc -> concept -> every mention canonical?  (false once one is not)
    std::map<std::string, std::map<ConceptId, bool>> all_noncanonical;
    for (const auto& a : corpus.annotations) {
        bool nc = true;
        if (kb.contains(a.concept_id)) {
            nc = classify_mention(a, kb) == MentionClass::NON_CANONICAL;
        }
        auto [it, fresh] = all_noncanonical[a.doc_id].emplace(a.concept_id, nc);
        if (!fresh) {
            it->second = it->second && nc;
        }
    }

    Tally all;
    Tally rare;
    Tally nc5;
    Tally nc10;
    std::map<std::string, Tally> per_type;
    for (const auto& d : corpus.documents) {
        const auto g = all_noncanonical.find(d.doc_id());
        if (g == all_noncanonical.end()) {
            continue;  // no gold
        }
        const PredictionSet& p = *by_doc.at(d.doc_id());
        std::set<ConceptId> gold;
        std::set<ConceptId> gold_rare;
        std::set<ConceptId> gold_nc;
        std::map<std::string, std::set<ConceptId>> gold_by_type;
        for (const auto& [id, nc] : g->second) {
            gold.insert(id);
            if (count_of(stats.training_doc_counts, id) < options.rare_threshold) {
                gold_rare.insert(id);
            }
            if (nc) {
                gold_nc.insert(id);
            }
            const Concept* c = kb.find(id);
            gold_by_type[c ? c->semantic_type : std::string("unknown")].insert(id);
        }
        all.add(hits_in_top(p, gold, k), gold.size(), k);
        if (!gold_rare.empty()) {
            rare.add(hits_in_top(p, gold_rare, k), gold_rare.size(), k);
        }
        if (!gold_nc.empty()) {
            nc5.add(hits_in_top(p, gold_nc, 5), gold_nc.size(), 5);
            nc10.add(hits_in_top(p, gold_nc, 10), gold_nc.size(), 10);
        }
        for (const auto& [type, ids] : gold_by_type) {
            per_type[type].add(hits_in_top(p, ids, k), ids.size(), k);
        }
    }

    MetricsReport report;
    report.documents = all.docs;
    report.all = all.prf(k, options.macro);
    if (rare.docs > 0) {
        report.rare = rare.prf(k, options.macro);
    }
    if (nc10.docs > 0) {
        report.noncanonical_recall5 = nc5.recall(options.macro);
        report.noncanonical_recall10 = nc10.recall(options.macro);
    }
    for (const auto& [type, t] : per_type) {
        report.per_type[type] = t.prf(k, options.macro);
    }
    return report;
}

std::string format_number(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::vector<std::array<std::string, 3>> report_rows(const MetricsReport& report)
{
    std::vector<std::array<std::string, 3>> rows;
    auto num = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string("N/A"); };
    auto prf = [&](const std::string& split, const std::optional<Prf>& p) {
        rows.push_back({split, "precision@10", num(p ? std::optional(p->precision) : std::nullopt)});
        rows.push_back({split, "recall@10", num(p ? std::optional(p->recall) : std::nullopt)});
        rows.push_back({split, "f1@10", num(p ? std::optional(p->f1) : std::nullopt)});
    };
    prf("all", report.all);
    prf("rare", report.rare);
    rows.push_back({"noncanonical", "recall@5", num(report.noncanonical_recall5)});
    rows.push_back({"noncanonical", "recall@10", num(report.noncanonical_recall10)});
    for (const auto& [type, p] : report.per_type) {
        prf("type:" + type, p);
    }
    return rows;
}

void write_report_csv(std::ostream& out, const MetricsReport& report)
{
    out << "split,metric,value\n";
    for (const auto& r : report_rows(report)) {
        out << r[0] << ',' << r[1] << ',' << r[2] << '\n';
    }
}

void write_report_json(std::ostream& out, const MetricsReport& report)
{
    using nlohmann::ordered_json;
    auto value = [](const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); };
    auto prf = [](const Prf& p) {
        return ordered_json{{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1}};
    };
    ordered_json j;
    j["documents"] = report.documents;
    j["all"] = prf(report.all);
    j["rare"] = report.rare ? prf(*report.rare) : ordered_json(nullptr);
    j["noncanonical"] = ordered_json{{"recall@5", value(report.noncanonical_recall5)},
                                     {"recall@10", value(report.noncanonical_recall10)}};
    ordered_json types = ordered_json::object();
    for (const auto& [type, p] : report.per_type) {
        types[type] = prf(p);
    }
    j["per_type"] = std::move(types);
    out << j.dump(2) << '\n';
}

void write_predictions(std::ostream& out, std::span<const PredictionSet> preds)
{
    for (const auto& p : preds) {
        for (std::size_t i = 0; i < p.concepts.size(); ++i) {
            out << p.doc_id << '\t' << (i + 1) << '\t' << p.concepts[i].str() << '\t'
                << (i < p.distances.size() ? format_number(p.distances[i]) : std::string("N/A"))
                << '\n';
        }
    }
}

std::vector<PredictionSet> read_predictions(std::istream& in)
{
    std::vector<PredictionSet> out;
    std::unordered_map<std::string, std::size_t> index;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> f;
        std::size_t start = 0;
        for (;;) {
            const auto tab = line.find('\t', start);
            f.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
            if (tab == std::string::npos) {
                break;
            }
            start = tab + 1;
        }
        if (f.size() != 4) {
            throw ParseError(lineno, "expected doc_id, rank, concept, distance");
        }
        auto [it, fresh] = index.emplace(f[0], out.size());
        if (fresh) {
            out.push_back(PredictionSet{f[0], {}, {}});
        }
        auto& p = out[it->second];
        std::size_t rank = 0;
        const auto r = std::from_chars(f[1].data(), f[1].data() + f[1].size(), rank);
        if (r.ec != std::errc{} || r.ptr != f[1].data() + f[1].size() || rank != p.concepts.size() + 1) {
            throw ParseError(lineno, "ranks must run 1, 2, ... per document");
        }
        double dist = 0.0;
        const auto d = std::from_chars(f[3].data(), f[3].data() + f[3].size(), dist);
        if (d.ec != std::errc{} || d.ptr != f[3].data() + f[3].size()) {
            throw ParseError(lineno, "bad distance '" + f[3] + "'");
        }
        try {
            p.concepts.push_back(ConceptId::parse(f[2]));
        } catch (const FormatError& e) {
            throw ParseError(lineno, e.what());
        }
        p.distances.push_back(dist);
    }
    return out;
}

}  // namespace cforge
