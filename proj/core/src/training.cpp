#include "cforge/training.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "cforge/errors.hpp"
#include "cforge/log.hpp"

namespace cforge {

NegativeSet sample_negatives(std::span<const double> doc_embedding,
                             std::span<const std::size_t> positives,
                             const ConceptEmbeddings& concepts, Rng& rng, std::size_t num_hard,
                             std::size_t num_random)
{
    std::vector<char> is_positive(concepts.size(), 0);
    for (const std::size_t p : positives) {
        is_positive.at(p) = 1;
    }
    std::vector<std::pair<double, std::size_t>> ranked;
    ranked.reserve(concepts.size());
    for (std::size_t i = 0; i < concepts.size(); ++i) {
        if (!is_positive[i]) {
            ranked.emplace_back(cosine_sim(doc_embedding, concepts.row(i)), i);
        }
    }
    const auto by_sim = [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    };
    NegativeSet out;
    const std::size_t n_hard = std::min(num_hard, ranked.size());
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(n_hard),
                      ranked.end(), by_sim);
    for (std::size_t i = 0; i < n_hard; ++i) {
        out.hard.push_back(ranked[i].second);
    }
    std::vector<std::size_t> rest;
    for (std::size_t i = n_hard; i < ranked.size(); ++i) {
        rest.push_back(ranked[i].second);
    }
    std::sort(rest.begin(), rest.end());
    const std::size_t n_random = std::min(num_random, rest.size());
    // partial Fisher-Yates
    for (std::size_t i = 0; i < n_random; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.below(rest.size() - i));
        std::swap(rest[i], rest[j]);
        out.random.push_back(rest[i]);
    }
    return out;
}

NegativeSet sample_negatives(const TrainingExample& example, const EncoderParams& doc_encoder,
                             const ConceptEmbeddings& concepts, Rng& rng, std::size_t num_hard,
                             std::size_t num_random)
{
    const auto emb = embed_text(doc_encoder, example.segment.tokens);
    const auto pos = positive_rows(example, concepts);
    return sample_negatives(emb, pos, concepts, rng, num_hard, num_random);
}

namespace {

double log_sum_exp(double z, std::span<const double> zs)
{
    double m = z;
    for (double x : zs) {
        m = std::max(m, x);
    }
    double s = std::exp(z - m);
    for (double x : zs) {
        s += std::exp(x - m);
    }
    return m + std::log(s);
}

// Loss and d loss / d sim for every positive and negative similarity.
double infonce_with_grad(std::span<const double> pos_sims, std::span<const double> neg_sims,
                         double temperature, std::vector<double>* d_pos,
                         std::vector<double>* d_neg)
{
    if (pos_sims.empty()) {
        throw std::invalid_argument("InfoNCE needs at least one positive");
    }
    if (!(temperature > 0.0)) {
        throw std::invalid_argument("temperature must be positive");
    }
    const double inv_p = 1.0 / static_cast<double>(pos_sims.size());
    std::vector<double> zn(neg_sims.size());
    for (std::size_t i = 0; i < zn.size(); ++i) {
        zn[i] = neg_sims[i] / temperature;
    }
    if (d_pos) {
        d_pos->assign(pos_sims.size(), 0.0);
    }
    if (d_neg) {
        d_neg->assign(neg_sims.size(), 0.0);
    }
    double loss = 0.0;
    for (std::size_t p = 0; p < pos_sims.size(); ++p) {
        const double zp = pos_sims[p] / temperature;
        const double lse = log_sum_exp(zp, zn);
        loss += lse - zp;
        if (d_pos) {
            (*d_pos)[p] = inv_p * (std::exp(zp - lse) - 1.0) / temperature;
        }
        if (d_neg) {
            for (std::size_t i = 0; i < zn.size(); ++i) {
                (*d_neg)[i] += inv_p * std::exp(zn[i] - lse) / temperature;
            }
        }
    }
    return loss * inv_p;
}

// d cos(v, e) / d v
void add_cosine_grad(std::span<const double> v, std::span<const double> e, double coef,
                     std::span<double> out)
{
    const double nv = l2_norm(v);
    const double ne = l2_norm(e);
    const double c = dot(v, e) / (nv * ne);
    for (std::size_t j = 0; j < v.size(); ++j) {
        out[j] += coef * (e[j] / ne - c * v[j] / nv) / nv;
    }
}

double weight_of(const TrainingExample& ex, double w_a)
{
    return ex.source == Source::PSEUDO ? w_a : 1.0;
}

}  // namespace

double infonce_loss(std::span<const double> pos_sims, std::span<const double> neg_sims,
                    double temperature)
{
    return infonce_with_grad(pos_sims, neg_sims, temperature, nullptr, nullptr);
}

double infonce_loss(std::span<const double> doc_embedding,
                    std::span<const EmbeddingVector> positives,
                    std::span<const EmbeddingVector> negatives, double temperature)
{
    std::vector<double> ps;
    std::vector<double> ns;
    for (const auto& p : positives) {
        ps.push_back(cosine_sim(doc_embedding, p));
    }
    for (const auto& n : negatives) {
        ns.push_back(cosine_sim(doc_embedding, n));
    }
    return infonce_loss(ps, ns, temperature);
}

double batch_loss(std::span<const TrainingExample> examples,
                  std::span<const double> per_example_losses, double w_a)
{
    if (examples.size() != per_example_losses.size()) {
        throw std::invalid_argument("examples and losses are not aligned");
    }
    double manual = 0.0;
    double pseudo = 0.0;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        (examples[i].source == Source::PSEUDO ? pseudo : manual) += per_example_losses[i];
    }
    return w_a * pseudo + manual;
}

ExampleLoss example_loss(std::span<const double> doc_embedding,
                         std::span<const std::size_t> positives, const NegativeSet& negatives,
                         const ConceptEmbeddings& concepts, double temperature)
{
    std::vector<std::size_t> negs(negatives.hard);
    negs.insert(negs.end(), negatives.random.begin(), negatives.random.end());
    std::vector<double> ps;
    std::vector<double> ns;
    for (const std::size_t p : positives) {
        ps.push_back(cosine_sim(doc_embedding, concepts.row(p)));
    }
    for (const std::size_t n : negs) {
        ns.push_back(cosine_sim(doc_embedding, concepts.row(n)));
    }
    std::vector<double> dp;
    std::vector<double> dn;
    ExampleLoss out;
    out.loss = infonce_with_grad(ps, ns, temperature, &dp, &dn);
    out.grad_embedding.assign(doc_embedding.size(), 0.0);
    for (std::size_t i = 0; i < positives.size(); ++i) {
        add_cosine_grad(doc_embedding, concepts.row(positives[i]), dp[i], out.grad_embedding);
    }
    for (std::size_t i = 0; i < negs.size(); ++i) {
        add_cosine_grad(doc_embedding, concepts.row(negs[i]), dn[i], out.grad_embedding);
    }
    return out;
}

std::vector<std::size_t> positive_rows(const TrainingExample& example,
                                       const ConceptEmbeddings& concepts)
{
    std::vector<std::size_t> rows;
    for (const auto& id : example.positives) {
        const auto r = concepts.index_of(id);
        if (!r) {
            throw UnknownConcept("positive " + id.str() + " has no concept embedding");
        }
        rows.push_back(*r);
    }
    return rows;
}

double batch_loss_and_gradient(const EncoderParams& doc_encoder,
                               const ConceptEmbeddings& concepts,
                               std::span<const TrainingExample> examples,
                               std::span<const NegativeSet> negatives, double w_a,
                               double temperature, EncoderGradient* grad)
{
    if (examples.size() != negatives.size()) {
        throw std::invalid_argument("examples and negative sets are not aligned");
    }
    std::vector<double> losses;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        const auto ids = doc_encoder.vocab.lookup(examples[i].segment.tokens);
        const auto trace = encode_ids(doc_encoder, ids);
        const auto pos = positive_rows(examples[i], concepts);
        const auto el = example_loss(trace.output, pos, negatives[i], concepts, temperature);
        losses.push_back(el.loss);
        const double w = weight_of(examples[i], w_a);
        if (grad && w != 0.0) {
            backprop(doc_encoder, trace, el.grad_embedding, w, *grad);
        }
    }
    return batch_loss(examples, losses, w_a);
}

void write_train_log(std::ostream& out, std::span<const TrainLogRow> rows)
{
    out << "epoch,batch,loss,lr,num_manual,num_pseudo\n";
    const auto old = out.precision(17);
    for (const auto& r : rows) {
        out << r.epoch << ',' << r.batch << ',' << r.loss << ',' << r.lr << ',' << r.num_manual
            << ',' << r.num_pseudo << '\n';
    }
    out.precision(old);
}

namespace {

std::vector<std::size_t> key_order(std::span<const TrainingExample> examples,
                                   std::vector<std::string>& keys)
{
    keys.clear();
    for (const auto& ex : examples) {
        keys.push_back(ex.key());
    }
    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
    return order;
}

}  // namespace

BatchSchedule default_schedule(std::span<const TrainingExample> examples, const TrainConfig& cfg)
{
    if (cfg.batch_size == 0) {
        throw std::invalid_argument("batch size must be >= 1");
    }
    std::vector<std::string> keys;
    std::vector<std::size_t> active;
    for (const std::size_t i : key_order(examples, keys)) {
        if (weight_of(examples[i], cfg.w_a) != 0.0) {
            active.push_back(i);
        }
    }
    BatchSchedule schedule(cfg.epochs);
    for (std::size_t e = 0; e < cfg.epochs; ++e) {
        auto order = active;
        auto rng = Rng::stream(cfg.seed, "train.schedule", e);
        rng.shuffle(std::span<std::size_t>(order));
        for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
            const auto end = std::min(order.size(), b + cfg.batch_size);
            schedule[e].emplace_back(order.begin() + static_cast<std::ptrdiff_t>(b),
                                     order.begin() + static_cast<std::ptrdiff_t>(end));
        }
    }
    return schedule;
}

TrainResult train(std::span<const TrainingExample> examples, const ConceptEmbeddings& concepts,
                  EncoderParams init, const TrainConfig& cfg, const BatchSchedule* schedule)
{
    if (cfg.w_a < 0.0) {
        throw std::invalid_argument("w_a must be >= 0");
    }
    if (cfg.batch_size == 0) {
        throw std::invalid_argument("batch size must be >= 1");
    }
    if (init.dim != concepts.dim()) {
        throw std::invalid_argument("encoder and concept table dimensions differ");
    }
    TrainResult result{std::move(init), {}};
    EncoderParams& params = result.params;
    if (cfg.epochs == 0) {
        return result;
    }
    if (examples.empty()) {
        throw std::invalid_argument("training corpus is empty");
    }

    BatchSchedule own;
    if (schedule == nullptr) {
        own = default_schedule(examples, cfg);
        schedule = &own;
    }
    if (schedule->size() != cfg.epochs) {
        throw std::invalid_argument("batch schedule does not cover every epoch");
    }

    // Per-example stream labels: key plus occurrence among equal keys.
    std::vector<std::string> keys;
    const auto order = key_order(examples, keys);
    std::vector<std::string> labels(examples.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        const std::size_t idx = order[i];
        std::size_t occurrence = 0;
        for (std::size_t j = i; j > 0 && keys[order[j - 1]] == keys[idx]; --j) {
            ++occurrence;
        }
        labels[idx] = "train.negatives|" + keys[idx] + "#" + std::to_string(occurrence);
    }

    std::vector<std::vector<std::size_t>> token_ids(examples.size());
    std::vector<std::vector<std::size_t>> pos_rows(examples.size());
    for (std::size_t i = 0; i < examples.size(); ++i) {
        token_ids[i] = params.vocab.lookup(examples[i].segment.tokens);
        pos_rows[i] = positive_rows(examples[i], concepts);
    }

    EncoderGradient grad(params);
    const std::size_t d = params.dim;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = cfg.learning_rate * static_cast<double>(cfg.epochs - epoch) /
                          static_cast<double>(cfg.epochs);
        std::map<std::size_t, NegativeSet> drawn;  // epoch-level negative sets
        double epoch_loss = 0.0;
        std::size_t batch_no = 0;
        for (const auto& batch : (*schedule)[epoch]) {
            if (batch.empty()) {
                continue;
            }
            grad.clear();
            double manual = 0.0;
            double pseudo = 0.0;
            TrainLogRow row{epoch, batch_no, 0.0, lr, 0, 0};
            for (const std::size_t i : batch) {
                const auto& ex = examples[i];
                const auto trace = encode_ids(params, token_ids[i]);
                NegativeSet negs;
                const auto it = drawn.find(i);
                if (it != drawn.end() && !cfg.resample_every_batch) {
                    negs = it->second;
                } else {
                    auto rng = Rng::stream(cfg.seed, labels[i],
                                           cfg.resample_every_batch ? epoch * 1000003u + batch_no
                                                                    : epoch);
                    negs = sample_negatives(trace.output, pos_rows[i], concepts, rng, cfg.num_hard,
                                            cfg.num_random);
                    drawn[i] = negs;
                }
                const auto el =
                    example_loss(trace.output, pos_rows[i], negs, concepts, cfg.temperature);
                const double w = weight_of(ex, cfg.w_a);
                if (ex.source == Source::PSEUDO) {
                    pseudo += el.loss;
                    ++row.num_pseudo;
                } else {
                    manual += el.loss;
                    ++row.num_manual;
                }
                if (w != 0.0) {
                    backprop(params, trace, el.grad_embedding, w, grad);
                }
            }
            row.loss = cfg.w_a * pseudo + manual;
            if (!std::isfinite(row.loss)) {
                throw NonFiniteLoss(epoch, batch_no);
            }
            const auto gp = grad.projection();
            for (std::size_t k = 0; k < gp.size(); ++k) {
                params.projection[k] -= lr * gp[k];
            }
            for (const std::size_t r : grad.touched_rows()) {
                const auto g = std::as_const(grad).row(r);
                double* p = params.token_table.data() + r * d;
                for (std::size_t j = 0; j < d; ++j) {
                    p[j] -= lr * g[j];
                }
            }
            epoch_loss += row.loss;
            result.log.push_back(row);
            ++batch_no;
        }
        log::debug("epoch ", epoch, ": loss ", epoch_loss, ", lr ", lr, ", batches ", batch_no);
    }
    return result;
}

std::size_t restrict_positives(std::vector<TrainingExample>& examples,
                               const ConceptEmbeddings& concepts)
{
    std::size_t dropped = 0;
    for (auto& ex : examples) {
        const auto before = ex.positives.size();
        std::erase_if(ex.positives, [&](const ConceptId& id) { return !concepts.index_of(id); });
        dropped += before - ex.positives.size();
    }
    std::erase_if(examples, [](const TrainingExample& ex) { return ex.positives.empty(); });
    return dropped;
}

Model train(std::span<const TrainingExample> examples, const KnowledgeBase& kb,
            const TrainConfig& cfg, TokenVocabulary vocab, std::size_t dim)
{
    auto init = EncoderParams::initialize(std::move(vocab), dim, cfg.seed);
    auto concepts = precompute_concept_embeddings(init, kb);
    std::vector<TrainingExample> usable(examples.begin(), examples.end());
    const auto dropped = restrict_positives(usable, concepts);
    if (dropped > 0) {
        log::info(dropped, " positives without a target concept were dropped");
    }
    auto result = train(usable, concepts, std::move(init), cfg);
    return Model{std::move(result.params), std::move(concepts), std::move(result.log)};
}

}  // namespace cforge
