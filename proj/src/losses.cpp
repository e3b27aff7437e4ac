#include "wadapt/losses.hpp"

#include <cmath>
#include <numeric>

#include "wadapt/errors.hpp"

namespace wadapt {

void LossConfig::validate() const {
    if (!(margin > 0.0) || !std::isfinite(margin)) throw ConfigError("margin must be > 0");
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw ConfigError("beta must be >= 0");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be >= 0");
}

double cosine_distance(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) {
        throw DimensionError("cosine_distance: lengths " + std::to_string(u.size()) + " and " +
                             std::to_string(v.size()));
    }
    const double uu = std::inner_product(u.begin(), u.end(), u.begin(), 0.0);
    const double vv = std::inner_product(v.begin(), v.end(), v.begin(), 0.0);
    if (uu == 0.0 || vv == 0.0) throw DegenerateInputError("cosine_distance: zero vector");
    const double uv = std::inner_product(u.begin(), u.end(), v.begin(), 0.0);
    return 1.0 - uv / (std::sqrt(uu) * std::sqrt(vv));
}

namespace {

void check_pair_batch(Var recipes, Var images, const char* who) {
    if (!recipes.value().same_shape(images.value())) {
        throw DimensionError(std::string(who) + ": recipe embeddings " +
                             recipes.value().shape_string() + " vs image embeddings " +
                             images.value().shape_string());
    }
    if (recipes.rows() < 2) {
        throw ContractError(std::string(who) + ": need at least 2 samples for in-batch negatives");
    }
}

// n×1 per-anchor hinge sums for both directions (recipe anchors, image anchors).
Var per_anchor_hinge(Var recipes, Var images, double margin, NegativeMining mining) {
    Tape& t = *recipes.tape();
    const std::size_t n = recipes.rows();
    Var r = ad::l2_normalize_rows(recipes);
    Var v = ad::l2_normalize_rows(images);
    // cos(r_i, v_j); the diagonal holds the positives.
    Var sim = ad::matmul(r, ad::transpose(v));
    Var pos = ad::row_dot(r, v);
    Var off_diag = t.constant([&] {
        Matrix m(n, n, 1.0);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 0.0;
        return m;
    }());
    // d(a, p) - d(a, n) + margin = cos(a, n) - cos(a, p) + margin
    Var recipe_anchor = ad::mul(ad::relu(ad::add_scalar(ad::sub(sim, pos), margin)), off_diag);
    Var image_anchor =
        ad::mul(ad::relu(ad::add_scalar(ad::sub(ad::transpose(sim), pos), margin)), off_diag);
    if (mining == NegativeMining::kHardest) {
        return ad::add(ad::row_max(recipe_anchor), ad::row_max(image_anchor));
    }
    const double inv = 1.0 / static_cast<double>(n - 1);
    return ad::scale(ad::add(ad::row_sum(recipe_anchor), ad::row_sum(image_anchor)), inv);
}

Var one_minus(Var p) { return ad::add_scalar(ad::scale(p, -1.0), 1.0); }

Var clamp_prob(Var p) { return ad::clamp(p, kProbabilityFloor, 1.0 - kProbabilityFloor); }

void check_weights(const WeightVector& w, std::size_t n, const char* who) {
    if (w.size() != n) {
        throw DimensionError(std::string(who) + ": " + std::to_string(w.size()) +
                             " weights for a batch of " + std::to_string(n));
    }
}

void check_finite(Var v, const char* who) {
    if (!v.value().all_finite()) throw TrainingError(std::string(who) + ": non-finite value");
}

}  // namespace

Var weighted_triplet_loss(Var recipes, Var images, const WeightVector& weights, double margin,
                          NegativeMining mining) {
    check_pair_batch(recipes, images, "weighted_triplet_loss");
    const std::size_t n = recipes.rows();
    check_weights(weights, n, "weighted_triplet_loss");
    Tape& t = *recipes.tape();
    Var per_anchor = per_anchor_hinge(recipes, images, margin, mining);
    Var weighted = ad::mul(per_anchor, t.constant(weights.as_column()));
    return ad::scale(ad::sum(weighted), 1.0 / static_cast<double>(n));
}

Var triplet_loss(Var recipes, Var images, double margin, NegativeMining mining) {
    check_pair_batch(recipes, images, "triplet_loss");
    return ad::mean(per_anchor_hinge(recipes, images, margin, mining));
}

Var discriminator_loss_from_probs(Var p_source, Var p_target, const WeightVector& weights) {
    const std::size_t n = p_source.rows();
    if (p_target.rows() != n) throw DimensionError("discriminator loss: batch sizes differ");
    check_weights(weights, n, "discriminator loss");
    Tape& t = *p_source.tape();
    Var terms = ad::add(ad::log(clamp_prob(p_source)), ad::log(one_minus(clamp_prob(p_target))));
    Var loss = ad::scale(ad::sum(ad::mul(terms, t.constant(weights.as_column()))),
                         -1.0 / static_cast<double>(n));
    check_finite(loss, "discriminator loss");
    return loss;
}

Var encoder_adversarial_loss_from_probs(Var p_target, const WeightVector& weights) {
    const std::size_t n = p_target.rows();
    check_weights(weights, n, "encoder adversarial loss");
    Tape& t = *p_target.tape();
    Var loss = ad::scale(ad::sum(ad::mul(ad::log(clamp_prob(p_target)), t.constant(weights.as_column()))),
                         -1.0 / static_cast<double>(n));
    check_finite(loss, "encoder adversarial loss");
    return loss;
}

Var weighted_discriminator_loss(Tape& t, Var source, Var target, const WeightVector& weights,
                                Discriminator& disc) {
    if (source.rows() != target.rows()) {
        throw DimensionError("adversarial loss: source batch " + std::to_string(source.rows()) +
                             " vs target batch " + std::to_string(target.rows()));
    }
    Var ps = disc.forward(t, t.constant(source.value()));
    Var pt = disc.forward(t, t.constant(target.value()));
    return discriminator_loss_from_probs(ps, pt, weights);
}

Var weighted_encoder_adversarial_loss(Tape& t, Var target, const WeightVector& weights,
                                      const Discriminator& disc) {
    return encoder_adversarial_loss_from_probs(disc.forward_frozen(t, target), weights);
}

AdversarialLosses weighted_adversarial_losses(Tape& t, Var source, Var target,
                                              const WeightVector& weights, Discriminator& disc) {
    return {weighted_discriminator_loss(t, source, target, weights, disc),
            weighted_encoder_adversarial_loss(t, target, weights, disc)};
}

AdversarialLosses adversarial_losses(Tape& t, Var source, Var target, Discriminator& disc) {
    if (source.rows() != target.rows()) throw DimensionError("adversarial loss: batch sizes differ");
    Var ps = clamp_prob(disc.forward(t, t.constant(source.value())));
    Var pt = clamp_prob(disc.forward(t, t.constant(target.value())));
    Var d_loss = ad::scale(ad::add(ad::mean(ad::log(ps)), ad::mean(ad::log(one_minus(pt)))), -1.0);
    Var e_loss = ad::scale(ad::mean(ad::log(clamp_prob(disc.forward_frozen(t, target)))), -1.0);
    check_finite(d_loss, "discriminator loss");
    check_finite(e_loss, "encoder adversarial loss");
    return {d_loss, e_loss};
}

Var binary_cross_entropy(Var probabilities, const Matrix& labels) {
    if (!probabilities.value().same_shape(labels)) {
        throw DimensionError("binary_cross_entropy: predictions " +
                             probabilities.value().shape_string() + " vs labels " +
                             labels.shape_string());
    }
    Tape& t = *probabilities.tape();
    Matrix inverse(labels.rows(), labels.cols());
    for (std::size_t i = 0; i < labels.size(); ++i) inverse.data()[i] = 1.0 - labels.data()[i];
    Var p = clamp_prob(probabilities);
    Var ll = ad::add(ad::mul(ad::log(p), t.constant(labels)),
                     ad::mul(ad::log(one_minus(p)), t.constant(std::move(inverse))));
    return ad::scale(ad::mean(ll), -1.0);
}

Var mean_squared_error(Var predicted, const Matrix& target) {
    if (!predicted.value().same_shape(target)) {
        throw DimensionError("mean_squared_error: predictions " + predicted.value().shape_string() +
                             " vs target " + target.shape_string());
    }
    Var diff = ad::sub(predicted, predicted.tape()->constant(target));
    return ad::mean(ad::mul(diff, diff));
}

RegularizerLosses regularizer(Tape& t, Var image_embeddings, const Matrix& ingredient_labels,
                              Var recipe_embeddings, const Matrix& raw_image_features, Heads& heads) {
    return {binary_cross_entropy(heads.ingredients(t, image_embeddings), ingredient_labels),
            mean_squared_error(heads.reconstruct(t, recipe_embeddings), raw_image_features)};
}

LossBreakdown total_loss(const LossBreakdown& parts, const LossConfig& config) {
    for (double v : {parts.w_triplet, parts.w_adv_encoder, parts.w_adv_discriminator,
                     parts.reg_classification, parts.reg_reconstruction}) {
        if (!std::isfinite(v)) throw TrainingError("total_loss: non-finite loss component");
    }
    LossBreakdown out = parts;
    out.total = parts.w_triplet + config.beta * parts.w_adv_encoder +
                config.lambda * (parts.reg_classification + parts.reg_reconstruction);
    return out;
}

Var total_objective(Var triplet, Var adv_encoder, const RegularizerLosses& reg,
                    const LossConfig& config) {
    Var total = ad::add(triplet, ad::scale(ad::add(reg.classification, reg.reconstruction), config.lambda));
    if (adv_encoder.tape() != nullptr) total = ad::add(total, ad::scale(adv_encoder, config.beta));
    check_finite(total, "total loss");
    return total;
}

}  // namespace wadapt
