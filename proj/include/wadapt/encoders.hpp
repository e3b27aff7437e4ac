#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "wadapt/autodiff.hpp"
#include "wadapt/dataset.hpp"
#include "wadapt/rng.hpp"

namespace wadapt {

struct ModelDims {
    std::size_t title = 20;
    std::size_t ingredients = 20;
    std::size_t steps = 20;
    std::size_t image = 32;
    std::size_t vocab = 50;
    std::size_t section_hidden = 24;  // per-section recipe sub-encoder width
    std::size_t image_hidden = 32;
    std::size_t embed = 32;
    std::size_t disc_hidden = 32;

    static ModelDims for_data(const GenConfig& cfg);
    friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

/// Feature matrices of a recipe batch, one row per sample.
struct RecipeBatch {
    Matrix title;
    Matrix ingredients;
    Matrix steps;
    Matrix labels;

    std::size_t size() const { return title.rows(); }
};

RecipeBatch make_recipe_batch(const std::vector<const RecipeSample*>& samples);
Matrix make_image_batch(const std::vector<const ImageSample*>& samples);

/// Fully connected layer y = x W + b.
struct Dense {
    Parameter weight;  // in × out
    Parameter bias;    // 1 × out

    Dense() = default;
    // Xavier-uniform weights, zero bias.
    Dense(std::string name, std::size_t in, std::size_t out, Rng& rng);

    Var forward(Tape& t, Var x);
    Var forward_frozen(Tape& t, Var x) const;
};

/// Three per-section tanh sub-encoders, a linear fusion layer over their
/// concatenation, then row l2-normalization.
class RecipeEncoder {
   public:
    RecipeEncoder() = default;
    RecipeEncoder(const ModelDims& dims, Rng& rng);

    Var forward(Tape& t, const RecipeBatch& batch);
    Var forward_frozen(Tape& t, const RecipeBatch& batch) const;

    std::vector<Parameter*> parameters();
    std::vector<const Parameter*> parameters() const;

   private:
    template <typename Self>
    static Var run(Self& self, Tape& t, const RecipeBatch& batch, bool frozen);

    Dense title_, ingredients_, steps_, fusion_;
};

/// relu hidden layer, linear output, row l2-normalization.
class ImageEncoder {
   public:
    ImageEncoder() = default;
    ImageEncoder(const ModelDims& dims, Rng& rng);

    Var forward(Tape& t, const Matrix& images);
    std::vector<Parameter*> parameters();
    std::vector<const Parameter*> parameters() const;

   private:
    Dense hidden_, out_;
};

/// Three-layer perceptron emitting P(source) for each embedding row.
class Discriminator {
   public:
    Discriminator() = default;
    Discriminator(const ModelDims& dims, Rng& rng);

    // Trainable binding: gradients reach the discriminator.
    Var forward(Tape& t, Var embeddings);
    // Constant binding: gradients only flow back into `embeddings`.
    Var forward_frozen(Tape& t, Var embeddings) const;

    std::vector<Parameter*> parameters();
    std::vector<const Parameter*> parameters() const;

   private:
    Dense l1_, l2_, l3_;
};

/// Regularizer heads: ingredient multi-label classifier on image embeddings
/// and image-feature reconstruction from recipe embeddings.
class Heads {
   public:
    Heads() = default;
    Heads(const ModelDims& dims, Rng& rng);

    Var ingredients(Tape& t, Var image_embeddings);  // sigmoid probabilities
    Var reconstruct(Tape& t, Var recipe_embeddings);  // linear

    std::vector<Parameter*> parameters();
    std::vector<const Parameter*> parameters() const;

   private:
    Dense ingredient_, reconstruction_;
};

/// Immutable snapshot of a recipe encoder; encodes without recording gradients.
class FrozenRecipeEncoder {
   public:
    FrozenRecipeEncoder() = default;
    explicit FrozenRecipeEncoder(RecipeEncoder snapshot) : encoder_(std::move(snapshot)) {}

    Matrix encode(const RecipeBatch& batch) const;
    const RecipeEncoder& encoder() const { return encoder_; }
    // Hash over the raw parameter bytes.
    std::uint64_t digest() const;

   private:
    RecipeEncoder encoder_;
};

/// Everything learnable in the two-stage pipeline.
struct ModelState {
    ModelDims dims;
    RecipeEncoder recipe;
    ImageEncoder image;
    Discriminator discriminator;
    Heads heads;

    ModelState() = default;
    ModelState(const ModelDims& dims, std::uint64_t seed);

    // E_R, E_V and the heads; the discriminator is optimized separately.
    std::vector<Parameter*> encoder_parameters();
    std::vector<Parameter*> discriminator_parameters() { return discriminator.parameters(); }
    std::vector<const Parameter*> all_parameters() const;
};

std::uint64_t parameter_digest(const std::vector<const Parameter*>& params);

/// Image and recipe embeddings for evaluation, no gradient tracking.
Matrix embed_recipes(const ModelState& model, const RecipeBatch& batch);
Matrix embed_images(const ModelState& model, const Matrix& images);

/// Checkpoint text file: a header with the model dims, then for each tensor a
/// `tensor <name> <rows> <cols>` line followed by one line of comma-separated
/// values (17 significant digits). Loading validates names and shapes.
void save_checkpoint(const ModelState& model, const FrozenRecipeEncoder* frozen,
                     const std::filesystem::path& file);
ModelState load_checkpoint(const std::filesystem::path& file, FrozenRecipeEncoder* frozen);

}  // namespace wadapt
