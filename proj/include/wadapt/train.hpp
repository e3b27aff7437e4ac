#pragma once

// Two-stage training: source pre-training, then weighted adversarial
// adaptation towards the unpaired target recipes. Also the named method
// variants and the ablation / pool-size grid runner.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "wadapt/adam.hpp"
#include "wadapt/dataset.hpp"
#include "wadapt/encoders.hpp"
#include "wadapt/errors.hpp"
#include "wadapt/keyvalue.hpp"
#include "wadapt/losses.hpp"
#include "wadapt/metrics.hpp"
#include "wadapt/selection.hpp"

namespace wadapt {

struct TrainConfig {
    std::size_t batch_size = 32;
    // Source subset pool size as a multiple of the batch size, in 1..5.
    std::size_t pool_multiple = 2;
    std::size_t pretrain_epochs = 30;
    std::size_t adapt_epochs = 30;
    std::uint64_t seed = 42;
    // Adversarial weight above the loss default; see README.
    LossConfig loss{.margin = 0.3, .beta = 0.03, .lambda = 0.002};
    double learning_rate = 1e-3;        // source pre-training
    double adapt_learning_rate = 3e-4;  // both optimizers during adaptation
    NegativeMining mining = NegativeMining::kAverage;

    bool sbs_off = false;
    bool w_triplet_off = false;
    bool w_adv_off = false;
    bool warm_start_off = false;

    // 0 disables early stopping; otherwise the last `validation_count` source
    // pairs are held out and training stops after `patience` epochs without
    // a validation MedR improvement, restoring the best epoch.
    std::size_t early_stop_patience = 0;
    std::size_t validation_count = 200;

    std::size_t eval_pool = 100;
    std::size_t eval_repeats = 10;
    RetrievalDirection eval_direction = RetrievalDirection::kImageToRecipe;

    std::size_t pool_size() const { return pool_multiple * batch_size; }
    // K = 2 once the pool holds at least two batches.
    std::size_t top_k() const { return pool_size() >= 2 * batch_size ? 2 : 1; }
    bool selection_active() const { return !sbs_off && pool_multiple > 1; }

    void validate() const;
    void write(KeyValues& kv) const;
    // Missing keys keep their defaults.
    static TrainConfig from(const KeyValues& kv);
};

/// Per-step output destinations; any member may be null.
struct TrainSinks {
    std::ostream* log = nullptr;    // training_log.tsv rows
    std::ostream* trace = nullptr;  // selection trace (W1, subset, weights)
};

void write_training_log_header(std::ostream& out);

/// Thrown when a loss or gradient turns non-finite. Carries the state at the
/// start of the failing epoch.
class NumericalFailure : public TrainingError {
   public:
    NumericalFailure(const std::string& what, std::shared_ptr<const ModelState> last_good)
        : TrainingError(what), last_good_(std::move(last_good)) {}
    const std::shared_ptr<const ModelState>& last_good() const { return last_good_; }

   private:
    std::shared_ptr<const ModelState> last_good_;
};

struct PretrainResult {
    ModelState model;
    FrozenRecipeEncoder frozen;
};

/// Unweighted triplet + regularizer on source pairs only. The final recipe
/// encoder becomes the frozen source encoder. Training starts from `initial`
/// when given, otherwise from a fresh seeded initialization.
PretrainResult pretrain_source(const DatasetBundle& bundle, const TrainConfig& config,
                               const TrainSinks& sinks = {}, const ModelState* initial = nullptr);

/// Supervised upper bound: the same objective on source pairs plus the target
/// training recipes with their images.
PretrainResult train_oracle(const DatasetBundle& bundle, const TrainConfig& config,
                            const TrainSinks& sinks = {}, const ModelState* initial = nullptr);

/// One adaptation batch with the weights already resolved per loss term.
struct AdaptBatch {
    std::vector<const Pair*> source;
    std::vector<const RecipeSample*> target;
    WeightVector triplet_weights;
    WeightVector adversarial_weights;
};

/// One encoder update on a source batch: weighted triplet + lambda * regularizer.
LossBreakdown source_step(ModelState& model, Adam& encoder_opt, const std::vector<const Pair*>& batch,
                          const WeightVector& weights, const TrainConfig& config);

/// Discriminator update, then encoder update on the full objective.
LossBreakdown adapt_step(ModelState& model, Adam& encoder_opt, Adam& disc_opt,
                         const AdaptBatch& batch, const TrainConfig& config);

/// Frozen-encoder features of every source and target training recipe. The
/// frozen encoder never changes, so these are computed once per adaptation run.
struct FrozenFeatures {
    Matrix source;  // one row per bundle.source_pairs entry
    Matrix target;  // one row per bundle.target_recipes entry
};

FrozenFeatures precompute_frozen_features(const DatasetBundle& bundle,
                                          const FrozenRecipeEncoder& frozen);

/// Draws a source pool from the first `source_limit` source pairs, runs the
/// selector against the given target batch and derives the weights. W1 and the
/// subset are copied out when the pointers are non-null.
AdaptBatch draw_adapt_batch(const DatasetBundle& bundle, const FrozenFeatures& features,
                            const std::vector<std::size_t>& target_positions,
                            std::size_t source_limit, const TrainConfig& config, Rng& rng,
                            SimilarityMatrix* w1_out = nullptr, SelectedSubset* subset_out = nullptr);

ModelState adapt(const DatasetBundle& bundle, ModelState model, const FrozenRecipeEncoder& frozen,
                 const TrainConfig& config, const TrainSinks& sinks = {});

// ---------------------------------------------------------------------------

enum class Variant {
    kSourceOnly,
    kUnweightedAdversarial,  // adversarial alignment without selection or weights
    kProposed,
    kNoSelection,
    kNoWeightedTriplet,
    kNoWeightedAdversarial,
    kOracle,
};

const char* variant_name(Variant v);
Variant parse_variant(const std::string& name);
const std::vector<Variant>& table_variants();  // the six rows compared in the ablation table

/// Flags a variant implies on top of `base`.
TrainConfig configure_variant(TrainConfig base, Variant v);

struct RunResult {
    std::string run_id;
    Variant variant = Variant::kProposed;
    std::uint64_t seed = 0;
    std::size_t pool_size = 0;
    MetricsReport metrics;
};

struct AblationGrid {
    TrainConfig base;
    std::vector<Variant> variants;
    std::vector<std::uint64_t> seeds;
    // Pool multiples to sweep; empty means base.pool_multiple only.
    std::vector<std::size_t> pool_multiples;
    std::size_t workers = 1;
};

/// Pre-trains once per seed, then adapts and evaluates every (variant, pool)
/// cell from that shared starting point. Results are ordered by seed, then
/// pool multiple, then variant, independent of `workers`.
std::vector<RunResult> run_ablation(const DatasetBundle& bundle, const AblationGrid& grid);

/// Adapts (or not, for source-only) from a pre-trained state and evaluates on
/// the target test pairs.
RunResult run_variant(const DatasetBundle& bundle, const PretrainResult& pretrained, Variant v,
                      const TrainConfig& config);

std::string config_hash(const TrainConfig& config);

void write_metrics_header(std::ostream& out);
void write_metrics_row(std::ostream& out, const RunResult& r);

}  // namespace wadapt
