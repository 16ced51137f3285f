#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "cforge/concept_kb.hpp"
#include "cforge/encoder.hpp"
#include "cforge/rng.hpp"
#include "cforge/training_example.hpp"

namespace cforge {

inline constexpr std::size_t kHardNegatives = 20;
inline constexpr std::size_t kRandomNegatives = 5;

struct TrainConfig {
    double w_a = 0.4;
    double learning_rate = 1e-4;
    std::size_t batch_size = 16;
    double temperature = 1.0;
    std::size_t epochs = 1;
    std::uint64_t seed = 0;
    std::size_t num_hard = kHardNegatives;
    std::size_t num_random = kRandomNegatives;
    /// Draw a fresh negative set every time an example is scheduled rather
    /// than once per epoch. Only differs for schedules that repeat an example
    /// within an epoch.
    bool resample_every_batch = false;
};

/// Row indices into a ConceptEmbeddings table.
struct NegativeSet {
    std::vector<std::size_t> hard;
    std::vector<std::size_t> random;

    std::size_t size() const noexcept { return hard.size() + random.size(); }
};

/// Hard negatives are the highest-cosine non-positive concepts for
/// `doc_embedding` (ties by table order); random ones are drawn without
/// replacement from the rest. When fewer than num_hard + num_random
/// candidates exist every candidate is returned and the random bucket
/// shrinks first. `positives` are table rows.
NegativeSet sample_negatives(std::span<const double> doc_embedding,
                             std::span<const std::size_t> positives,
                             const ConceptEmbeddings& concepts, Rng& rng,
                             std::size_t num_hard = kHardNegatives,
                             std::size_t num_random = kRandomNegatives);

/// Same, embedding the example's segment with `doc_encoder`.
NegativeSet sample_negatives(const TrainingExample& example, const EncoderParams& doc_encoder,
                             const ConceptEmbeddings& concepts, Rng& rng,
                             std::size_t num_hard = kHardNegatives,
                             std::size_t num_random = kRandomNegatives);

/// -(1/P) sum_p log(E_p / (E_p + E_N)), E = exp(sim / temperature).
double infonce_loss(std::span<const double> pos_sims, std::span<const double> neg_sims,
                    double temperature);

/// Embedding form: similarities are cosine_sim(doc, x).
double infonce_loss(std::span<const double> doc_embedding,
                    std::span<const EmbeddingVector> positives,
                    std::span<const EmbeddingVector> negatives, double temperature);

/// w_a * (sum over PSEUDO) + (sum over MANUAL).
double batch_loss(std::span<const TrainingExample> examples,
                  std::span<const double> per_example_losses, double w_a);

/// Loss of one example plus d loss / d doc_embedding.
struct ExampleLoss {
    double loss = 0.0;
    std::vector<double> grad_embedding;
};

ExampleLoss example_loss(std::span<const double> doc_embedding,
                         std::span<const std::size_t> positives, const NegativeSet& negatives,
                         const ConceptEmbeddings& concepts, double temperature);

/// Table rows of an example's positives. Throws UnknownConcept.
std::vector<std::size_t> positive_rows(const TrainingExample& example,
                                       const ConceptEmbeddings& concepts);

/// batch_loss for fixed negative sets. When `grad` is given, adds the
/// gradient of that loss with respect to the document encoder.
double batch_loss_and_gradient(const EncoderParams& doc_encoder,
                               const ConceptEmbeddings& concepts,
                               std::span<const TrainingExample> examples,
                               std::span<const NegativeSet> negatives, double w_a,
                               double temperature, EncoderGradient* grad);

struct TrainLogRow {
    std::size_t epoch = 0;
    std::size_t batch = 0;
    double loss = 0.0;
    double lr = 0.0;
    std::size_t num_manual = 0;
    std::size_t num_pseudo = 0;
};

void write_train_log(std::ostream& out, std::span<const TrainLogRow> rows);

/// schedule[epoch][batch] lists example indices.
using BatchSchedule = std::vector<std::vector<std::vector<std::size_t>>>;

/// Examples with a non-zero loss weight, ordered by key and shuffled per
/// epoch from `seed`, cut into batches of batch_size. Independent of the
/// order of `examples`.
BatchSchedule default_schedule(std::span<const TrainingExample> examples, const TrainConfig& cfg);

struct TrainResult {
    EncoderParams params;
    std::vector<TrainLogRow> log;
};

/// Mini-batch gradient descent on batch_loss. The learning rate of epoch e
/// is learning_rate * (1 - e / epochs). Negatives are drawn when an
/// example's batch starts, from the document embedding at that point.
/// Empty batches are skipped. Throws NonFiniteLoss.
TrainResult train(std::span<const TrainingExample> examples, const ConceptEmbeddings& concepts,
                  EncoderParams init, const TrainConfig& cfg,
                  const BatchSchedule* schedule = nullptr);

struct Model {
    EncoderParams doc_encoder;
    ConceptEmbeddings concepts;
    std::vector<TrainLogRow> log;
};

/// Both towers start from the same parameters drawn from cfg.seed; the
/// concept table is frozen from that initial state and only the document
/// tower is trained.
Model train(std::span<const TrainingExample> examples, const KnowledgeBase& kb,
            const TrainConfig& cfg, TokenVocabulary vocab, std::size_t dim = kDefaultDim);

/// Drops positives missing from the concept table and examples left with
/// none. Returns the number of dropped positives.
std::size_t restrict_positives(std::vector<TrainingExample>& examples,
                               const ConceptEmbeddings& concepts);

}  // namespace cforge
