#pragma once

// Synthetic two-domain recipe/image data.
//
// Every dish has a latent concept z ~ N(0, I_L). A recipe is three feature
// blocks (title, ingredients, steps) and an image is one block; each block is
// a fixed linear map of z plus Gaussian noise. Target dishes differ in three
// ways: z leans along a fixed concept direction, every block is rotated by
// `shift_angle` inside a fixed 2-plane of its signal subspace, and every block
// is offset inside its noise-only subspace. A fraction of source dishes
// ("distinctive") lean the opposite way along the concept direction.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "wadapt/keyvalue.hpp"

namespace wadapt {

struct RecipeSample {
    std::int64_t id = 0;
    std::vector<double> title;
    std::vector<double> ingredients;
    std::vector<double> steps;
    std::vector<std::uint8_t> labels;  // multi-hot over the ingredient vocabulary

    friend bool operator==(const RecipeSample&, const RecipeSample&) = default;
};

struct ImageSample {
    std::int64_t id = 0;
    std::vector<double> features;

    friend bool operator==(const ImageSample&, const ImageSample&) = default;
};

struct Pair {
    RecipeSample recipe;
    ImageSample image;
    bool distinctive = false;

    friend bool operator==(const Pair&, const Pair&) = default;
};

struct GenConfig {
    std::size_t source_count = 2000;
    std::size_t target_count = 1000;
    std::size_t target_test_count = 500;
    std::size_t latent_dim = 16;
    std::size_t title_dim = 20;
    std::size_t ingredient_dim = 20;
    std::size_t steps_dim = 20;
    std::size_t image_dim = 32;
    std::size_t vocab = 50;
    std::size_t active_labels = 5;
    double shift_angle = 0.6;       // radians, in [0, pi/2]
    double noise_scale = 1.5;
    // Latent mean shift of target dishes along a fixed unit direction.
    double concept_shift = 1.0;
    // Norm of the per-block target offset inside the block's noise-only subspace.
    double target_offset = 2.0;
    double image_shift = 0.0;       // image block rotation/offset relative to recipe blocks
    double distinctive_fraction = 0.2;
    // Latent shift of distinctive source dishes, opposite to the target shift.
    double distinctive_offset = 3.0;

    void validate() const;
    void write(KeyValues& kv) const;
    // Missing keys keep their defaults.
    static GenConfig from(const KeyValues& kv);

    friend bool operator==(const GenConfig&, const GenConfig&) = default;
};

struct GenerationManifest {
    std::uint64_t seed = 0;
    GenConfig config;
    // Digest over the latent vector shared by each source pair, in order.
    std::uint64_t source_latent_digest = 0;

    friend bool operator==(const GenerationManifest&, const GenerationManifest&) = default;
};

struct DatasetBundle {
    std::vector<Pair> source_pairs;
    std::vector<RecipeSample> target_recipes;
    // Held-out target pairs; never used for training.
    std::vector<Pair> target_test;
    // Images of the target training recipes, same order. Only the oracle
    // upper-bound run may look at these.
    std::vector<ImageSample> target_train_images;
    GenerationManifest manifest;

    friend bool operator==(const DatasetBundle&, const DatasetBundle&) = default;
};

DatasetBundle generate(const GenConfig& config, std::uint64_t seed);

/// Same as generate(), also returning the latent vector of every source pair.
DatasetBundle generate(const GenConfig& config, std::uint64_t seed,
                       std::vector<std::vector<double>>* source_latents);

/// Writes manifest.txt, source_pairs.tsv, target_recipes.tsv, target_test.tsv
/// and target_train_images.tsv into `dir` (created if needed).
void save(const DatasetBundle& bundle, const std::filesystem::path& dir);
DatasetBundle load(const std::filesystem::path& dir);

/// Digest of the dataset files as written by save(); used in run manifests.
std::uint64_t dataset_digest(const std::filesystem::path& dir);

}  // namespace wadapt
