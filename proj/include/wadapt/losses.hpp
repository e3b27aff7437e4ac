#pragma once

#include <span>

#include "wadapt/autodiff.hpp"
#include "wadapt/encoders.hpp"
#include "wadapt/selection.hpp"

namespace wadapt {

struct LossConfig {
    double margin = 0.3;   // triplet margin alpha
    double beta = 0.01;    // adversarial trade-off
    double lambda = 0.002; // regularizer trade-off

    void validate() const;
    friend bool operator==(const LossConfig&, const LossConfig&) = default;
};

enum class NegativeMining {
    kAverage,  // mean hinge over all in-batch negatives
    kHardest,  // largest hinge in the batch
};

/// Lower bound applied to probabilities (and 1 - p) before taking logs.
inline constexpr double kProbabilityFloor = 1e-7;

/// 1 - cos(u, v), in [0, 2].
double cosine_distance(std::span<const double> u, std::span<const double> v);

/// Bidirectional hinge over in-batch negatives with d = 1 - cos:
///   sum_i w_i * (recipe-anchor term_i + image-anchor term_i) / n
/// Row i of `recipes` and `images` is the same dish. Rows are normalized inside.
Var weighted_triplet_loss(Var recipes, Var images, const WeightVector& weights, double margin,
                          NegativeMining mining = NegativeMining::kAverage);

/// Same hinge, averaged over anchors without weights.
Var triplet_loss(Var recipes, Var images, double margin,
                 NegativeMining mining = NegativeMining::kAverage);

struct AdversarialLosses {
    Var discriminator;  // minimized over discriminator parameters
    Var encoder;        // minimized over recipe encoder parameters
};

/// -(1/n) sum_i w_i [log D(s_i) + log(1 - D(t_i))]. Embeddings are detached:
/// gradients only reach the discriminator.
Var weighted_discriminator_loss(Tape& t, Var source, Var target, const WeightVector& weights,
                                Discriminator& disc);

/// -(1/n) sum_i w_i log D(t_i), with the discriminator held constant.
Var weighted_encoder_adversarial_loss(Tape& t, Var target, const WeightVector& weights,
                                      const Discriminator& disc);

AdversarialLosses weighted_adversarial_losses(Tape& t, Var source, Var target,
                                              const WeightVector& weights, Discriminator& disc);

/// Unweighted counterparts: plain batch means.
AdversarialLosses adversarial_losses(Tape& t, Var source, Var target, Discriminator& disc);

/// Loss terms computed from discriminator probabilities directly.
Var discriminator_loss_from_probs(Var p_source, Var p_target, const WeightVector& weights);
Var encoder_adversarial_loss_from_probs(Var p_target, const WeightVector& weights);

struct RegularizerLosses {
    Var classification;  // mean binary cross-entropy of the ingredient head
    Var reconstruction;  // mean squared error of the reconstructed image features
};

RegularizerLosses regularizer(Tape& t, Var image_embeddings, const Matrix& ingredient_labels,
                              Var recipe_embeddings, const Matrix& raw_image_features, Heads& heads);

/// Same terms from head outputs directly.
Var binary_cross_entropy(Var probabilities, const Matrix& labels);
Var mean_squared_error(Var predicted, const Matrix& target);

struct LossBreakdown {
    double w_triplet = 0.0;
    double w_adv_encoder = 0.0;
    double w_adv_discriminator = 0.0;
    double reg_classification = 0.0;
    double reg_reconstruction = 0.0;
    double total = 0.0;
};

/// total = triplet + beta * adv_encoder + lambda * (classification + reconstruction).
/// Throws TrainingError on a non-finite part.
LossBreakdown total_loss(const LossBreakdown& parts, const LossConfig& config);

/// Graph form of the same combination; `adv_encoder` may be null (no Var tape).
Var total_objective(Var triplet, Var adv_encoder, const RegularizerLosses& reg,
                    const LossConfig& config);

}  // namespace wadapt
