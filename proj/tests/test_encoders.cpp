#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "test_util.hpp"
#include "wadapt/adam.hpp"
#include "wadapt/encoders.hpp"
#include "wadapt/errors.hpp"
#include "wadapt/losses.hpp"

using namespace wadapt;
using wadapt::testing::random_matrix;

namespace {

ModelDims tiny_dims() {
    ModelDims d;
    d.title = 3;
    d.ingredients = 2;
    d.steps = 2;
    d.image = 4;
    d.vocab = 5;
    d.section_hidden = 3;
    d.image_hidden = 4;
    d.embed = 3;
    d.disc_hidden = 4;
    return d;
}

RecipeBatch random_batch(const ModelDims& d, std::size_t n, std::mt19937_64& rng) {
    RecipeBatch b;
    b.title = random_matrix(n, d.title, rng);
    b.ingredients = random_matrix(n, d.ingredients, rng);
    b.steps = random_matrix(n, d.steps, rng);
    b.labels = Matrix(n, d.vocab, 0.0);
    for (std::size_t i = 0; i < n; ++i) b.labels(i, i % d.vocab) = 1.0;
    return b;
}

RecipeBatch permute(const RecipeBatch& b, const std::vector<std::size_t>& order) {
    auto rows = [&](const Matrix& m) {
        Matrix out(m.rows(), m.cols());
        for (std::size_t i = 0; i < order.size(); ++i)
            for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = m(order[i], j);
        return out;
    };
    return {rows(b.title), rows(b.ingredients), rows(b.steps), rows(b.labels)};
}

void expect_unit_rows(const Matrix& m) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
        double s = 0.0;
        for (double v : m.row(i)) s += v * v;
        EXPECT_NEAR(std::sqrt(s), 1.0, 1e-9);
    }
}

}  // namespace

TEST(Encoders, EmbeddingsAreUnitNorm) {
    std::mt19937_64 rng(1);
    const ModelDims d = ModelDims{};
    const ModelState m(d, 1);
    expect_unit_rows(embed_recipes(m, random_batch(d, 9, rng)));
    expect_unit_rows(embed_images(m, random_matrix(9, d.image, rng, 100.0)));
}

TEST(Encoders, IdenticalSamplesGiveIdenticalRows) {
    std::mt19937_64 rng(2);
    const ModelDims d = ModelDims{};
    const ModelState m(d, 2);
    const RecipeBatch b = permute(random_batch(d, 3, rng), {1, 1, 0});
    const Matrix e = embed_recipes(m, b);
    for (std::size_t j = 0; j < e.cols(); ++j) EXPECT_EQ(e(0, j), e(1, j));
}

TEST(Encoders, PermutingBatchPermutesRows) {
    std::mt19937_64 rng(3);
    const ModelDims d = ModelDims{};
    const ModelState m(d, 3);
    const RecipeBatch b = random_batch(d, 5, rng);
    const std::vector<std::size_t> order = {3, 0, 4, 1, 2};
    const Matrix e = embed_recipes(m, b);
    const Matrix p = embed_recipes(m, permute(b, order));
    for (std::size_t i = 0; i < order.size(); ++i)
        for (std::size_t j = 0; j < e.cols(); ++j) EXPECT_EQ(p(i, j), e(order[i], j));

    const Matrix img = random_matrix(5, d.image, rng);
    Matrix img_p(5, d.image);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < d.image; ++j) img_p(i, j) = img(order[i], j);
    const Matrix ei = embed_images(m, img);
    const Matrix ep = embed_images(m, img_p);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < ei.cols(); ++j) EXPECT_EQ(ep(i, j), ei(order[i], j));
}

TEST(Encoders, EncoderGradientsMatchFiniteDifferences) {
    std::mt19937_64 rng(4);
    const ModelDims d = tiny_dims();
    ModelState m(d, 4);
    wadapt::testing::jitter(m.discriminator_parameters(), rng);
    wadapt::testing::jitter(m.heads.parameters(), rng);
    const RecipeBatch b = random_batch(d, 4, rng);
    const Matrix images = random_matrix(4, d.image, rng);
    auto build = [&](Tape& t) {
        Var r = m.recipe.forward(t, b);
        Var v = m.image.forward(t, images);
        Var p = m.discriminator.forward(t, r);
        Var cls = binary_cross_entropy(m.heads.ingredients(t, v), b.labels);
        Var rec = mean_squared_error(m.heads.reconstruct(t, r), images);
        return ad::add(ad::add(ad::sum(ad::mul(r, v)), ad::mean(ad::log(p))), ad::add(cls, rec));
    };
    std::vector<Parameter*> params = m.encoder_parameters();
    for (Parameter* p : m.discriminator_parameters()) params.push_back(p);
    EXPECT_LT(wadapt::testing::max_gradient_error(params, build), 1e-4);
}

TEST(Encoders, FreshDiscriminatorNearChance) {
    std::mt19937_64 rng(5);
    const ModelDims d = ModelDims{};
    ModelState m(d, 5);
    Tape t;
    Var x = ad::l2_normalize_rows(t.constant(random_matrix(64, d.embed, rng)));
    for (double p : m.discriminator.forward(t, x).value().data()) EXPECT_NEAR(p, 0.5, 0.2);
}

TEST(Encoders, DiscriminatorBoundedForLargeInputs) {
    std::mt19937_64 rng(6);
    const ModelDims d = ModelDims{};
    ModelState m(d, 6);
    Tape t;
    Var x = t.constant(random_matrix(64, d.embed, rng, 1e3));
    for (double p : m.discriminator.forward(t, x).value().data()) {
        EXPECT_GE(p, 0.0);
        EXPECT_LE(p, 1.0);
        EXPECT_TRUE(std::isfinite(p));
    }
}

TEST(Encoders, DiscriminatorSeparatesClusters) {
    std::mt19937_64 rng(7);
    const ModelDims d = ModelDims{};
    ModelState m(d, 7);
    Adam opt(m.discriminator_parameters(), AdamOptions{1e-3});
    auto cluster = [&](double sign) {
        Matrix x = random_matrix(32, d.embed, rng, 0.3);
        for (std::size_t i = 0; i < x.rows(); ++i) x(i, 0) += sign;
        return x;
    };
    for (int step = 0; step < 200; ++step) {
        Tape t;
        Var s = t.constant(cluster(1.0));
        Var g = t.constant(cluster(-1.0));
        t.backward(weighted_discriminator_loss(t, s, g, WeightVector::ones(32), m.discriminator));
        opt.step();
    }
    Tape t;
    const Matrix ps = m.discriminator.forward(t, t.constant(cluster(1.0))).value();
    const Matrix pt = m.discriminator.forward(t, t.constant(cluster(-1.0))).value();
    double correct = 0.0;
    for (double p : ps.data()) correct += p > 0.5;
    for (double p : pt.data()) correct += p < 0.5;
    EXPECT_GT(correct / 64.0, 0.95);
}

TEST(Encoders, FrozenEncoderUnaffectedByTraining) {
    std::mt19937_64 rng(8);
    const ModelDims d = ModelDims{};
    ModelState m(d, 8);
    const FrozenRecipeEncoder frozen(m.recipe);
    const RecipeBatch probe = random_batch(d, 6, rng);
    const Matrix before = frozen.encode(probe);
    const auto digest = frozen.digest();
    Adam opt(m.encoder_parameters(), AdamOptions{1e-2});
    for (int step = 0; step < 50; ++step) {
        Tape t;
        const RecipeBatch b = random_batch(d, 8, rng);
        Var r = m.recipe.forward(t, b);
        Var v = m.image.forward(t, random_matrix(8, d.image, rng));
        t.backward(triplet_loss(r, v, 0.3));
        opt.step();
    }
    EXPECT_EQ(frozen.encode(probe), before);
    EXPECT_EQ(frozen.digest(), digest);
    // The live encoder did move.
    EXPECT_NE(embed_recipes(m, probe), before);
}

TEST(Encoders, CheckpointRoundTrip) {
    const ModelDims d = tiny_dims();
    ModelState m(d, 9);
    ModelState other(d, 10);
    const FrozenRecipeEncoder frozen(other.recipe);
    const auto file = std::filesystem::temp_directory_path() / "wadapt_test_ckpt.ckpt";
    save_checkpoint(m, &frozen, file);
    FrozenRecipeEncoder loaded_frozen;
    const ModelState loaded = load_checkpoint(file, &loaded_frozen);
    EXPECT_EQ(loaded.dims, d);
    EXPECT_EQ(parameter_digest(loaded.all_parameters()), parameter_digest(m.all_parameters()));
    EXPECT_EQ(loaded_frozen.digest(), frozen.digest());

    save_checkpoint(m, nullptr, file);
    EXPECT_NO_THROW(load_checkpoint(file, nullptr));
    EXPECT_THROW(load_checkpoint(file, &loaded_frozen), MissingInputError);
    EXPECT_THROW(load_checkpoint(file.string() + ".absent", nullptr), MissingInputError);
}

TEST(Encoders, CorruptCheckpointRejected) {
    const ModelDims d = tiny_dims();
    const ModelState m(d, 9);
    const auto file = std::filesystem::temp_directory_path() / "wadapt_test_ckpt_bad.ckpt";
    save_checkpoint(m, nullptr, file);
    std::filesystem::resize_file(file, std::filesystem::file_size(file) / 2);
    EXPECT_THROW(load_checkpoint(file, nullptr), ParseError);
}
