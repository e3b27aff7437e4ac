#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>

#include "test_util.hpp"
#include "wadapt/dataset.hpp"
#include "wadapt/errors.hpp"
#include "wadapt/metrics.hpp"
#include "wadapt/train.hpp"

using namespace wadapt;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("wadapt_test_" + name);
    fs::remove_all(p);
    return p;
}

// Residual norm of the least-squares fit of `features` (one row per sample)
// from `latents` plus an intercept, relative to the feature norm.
double linear_fit_residual(const std::vector<std::vector<double>>& latents,
                           const std::vector<std::vector<double>>& features) {
    const auto n = static_cast<Eigen::Index>(latents.size());
    const auto l = static_cast<Eigen::Index>(latents[0].size());
    const auto d = static_cast<Eigen::Index>(features[0].size());
    Eigen::MatrixXd x(n, l + 1), y(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index k = 0; k < l; ++k) x(i, k) = latents[i][k];
        x(i, l) = 1.0;
        for (Eigen::Index k = 0; k < d; ++k) y(i, k) = features[i][k];
    }
    const Eigen::MatrixXd coef = x.colPivHouseholderQr().solve(y);
    return (x * coef - y).norm() / y.norm();
}

}  // namespace

TEST(Dataset, SameSeedIsIdentical) {
    const GenConfig g = wadapt::testing::small_gen();
    EXPECT_EQ(generate(g, 7), generate(g, 7));
    EXPECT_NE(generate(g, 7).source_pairs, generate(g, 8).source_pairs);
}

TEST(Dataset, CountsIdsAndLabels) {
    const GenConfig g = wadapt::testing::small_gen();
    const DatasetBundle b = generate(g, 1);
    ASSERT_EQ(b.source_pairs.size(), g.source_count);
    ASSERT_EQ(b.target_recipes.size(), g.target_count);
    ASSERT_EQ(b.target_test.size(), g.target_test_count);
    ASSERT_EQ(b.target_train_images.size(), g.target_count);
    std::size_t distinctive = 0;
    for (const Pair& p : b.source_pairs) {
        EXPECT_EQ(p.recipe.id, p.image.id);
        EXPECT_EQ(p.recipe.labels.size(), g.vocab);
        std::size_t active = 0;
        for (auto v : p.recipe.labels) active += v;
        EXPECT_EQ(active, g.active_labels);
        distinctive += p.distinctive;
    }
    EXPECT_EQ(distinctive, static_cast<std::size_t>(std::llround(g.distinctive_fraction * g.source_count)));
}

TEST(Dataset, NoTargetTestLeakage) {
    const DatasetBundle b = generate(wadapt::testing::small_gen(), 2);
    std::set<std::int64_t> train_ids;
    for (const RecipeSample& r : b.target_recipes) train_ids.insert(r.id);
    for (const Pair& p : b.source_pairs) train_ids.insert(p.recipe.id);
    for (const Pair& p : b.target_test) EXPECT_EQ(train_ids.count(p.recipe.id), 0u);
}

TEST(Dataset, PairsShareTheirLatent) {
    GenConfig g = wadapt::testing::small_gen();
    g.noise_scale = 0.0;
    g.distinctive_fraction = 0.0;
    std::vector<std::vector<double>> z;
    const DatasetBundle b = generate(g, 4, &z);
    std::vector<std::vector<double>> image, recipe;
    for (const Pair& p : b.source_pairs) {
        image.push_back(p.image.features);
        std::vector<double> r = p.recipe.title;
        r.insert(r.end(), p.recipe.ingredients.begin(), p.recipe.ingredients.end());
        r.insert(r.end(), p.recipe.steps.begin(), p.recipe.steps.end());
        recipe.push_back(std::move(r));
    }
    EXPECT_LT(linear_fit_residual(z, image), 1e-9);
    EXPECT_LT(linear_fit_residual(z, recipe), 1e-9);
    // Mismatched latents cannot explain the features.
    std::rotate(z.begin(), z.begin() + 1, z.end());
    EXPECT_GT(linear_fit_residual(z, image), 0.5);
}

TEST(Dataset, RejectsOutOfRangeAngle) {
    GenConfig g;
    g.shift_angle = std::numbers::pi / 2 + 0.01;
    EXPECT_THROW(generate(g, 1), ConfigError);
    g.shift_angle = -0.1;
    EXPECT_THROW(generate(g, 1), ConfigError);
    g.shift_angle = 0.6;
    g.latent_dim = 0;
    EXPECT_THROW(generate(g, 1), ConfigError);
}

TEST(Dataset, SaveLoadRoundTrip) {
    const DatasetBundle b = generate(wadapt::testing::small_gen(), 5);
    const fs::path dir = fresh_dir("roundtrip");
    save(b, dir);
    EXPECT_EQ(load(dir), b);
    const auto digest = dataset_digest(dir);
    save(generate(wadapt::testing::small_gen(), 5), dir);
    EXPECT_EQ(dataset_digest(dir), digest);
}

TEST(Dataset, TruncatedFileIsParseError) {
    const fs::path dir = fresh_dir("truncated");
    save(generate(wadapt::testing::small_gen(), 5), dir);
    const fs::path file = dir / "source_pairs.tsv";
    const auto size = fs::file_size(file);
    fs::resize_file(file, size / 2);
    EXPECT_THROW(load(dir), ParseError);
}

TEST(Dataset, MissingDirectoryIsMissingInput) {
    EXPECT_THROW(load(fresh_dir("absent")), MissingInputError);
}

TEST(Dataset, HandWrittenFixture) {
    const fs::path dir = fresh_dir("fixture");
    fs::create_directories(dir);
    {
        std::ofstream m(dir / "manifest.txt");
        m << "format_version = 1\nseed = 9\n"
          << "title_dim = 2\ningredient_dim = 1\nsteps_dim = 1\nimage_dim = 3\n"
          << "vocab = 3\nactive_labels = 1\nlatent_dim = 2\n"
          << "rows.source_pairs = 2\nrows.target_recipes = 1\nrows.target_test = 1\n";
    }
    {
        std::ofstream s(dir / "source_pairs.tsv");
        s << "# id distinctive title ingredients steps labels image\n"
          << "0\t0\t1.5,-2\t0.25\t3\t1,0,0\t1,2,3\n"
          << "1\t1\t0,0\t-1e-3\t4.5\t0,1,1\t-1,-2,-3\n";
    }
    { std::ofstream(dir / "target_recipes.tsv") << "2\t7,8\t9\t10\t0,0,1\n"; }
    { std::ofstream(dir / "target_test.tsv") << "3\t1,1\t1\t1\t1,0,0\t0.5,0.5,0.5\n"; }

    const DatasetBundle b = load(dir);
    EXPECT_EQ(b.manifest.seed, 9u);
    ASSERT_EQ(b.source_pairs.size(), 2u);
    const Pair& a = b.source_pairs[0];
    EXPECT_EQ(a.recipe.id, 0);
    EXPECT_FALSE(a.distinctive);
    EXPECT_EQ(a.recipe.title, (std::vector<double>{1.5, -2.0}));
    EXPECT_EQ(a.recipe.ingredients, (std::vector<double>{0.25}));
    EXPECT_EQ(a.recipe.steps, (std::vector<double>{3.0}));
    EXPECT_EQ(a.recipe.labels, (std::vector<std::uint8_t>{1, 0, 0}));
    EXPECT_EQ(a.image.features, (std::vector<double>{1.0, 2.0, 3.0}));
    EXPECT_EQ(a.image.id, 0);
    const Pair& c = b.source_pairs[1];
    EXPECT_TRUE(c.distinctive);
    EXPECT_EQ(c.recipe.ingredients, (std::vector<double>{-1e-3}));
    EXPECT_EQ(c.recipe.labels, (std::vector<std::uint8_t>{0, 1, 1}));
    ASSERT_EQ(b.target_recipes.size(), 1u);
    EXPECT_EQ(b.target_recipes[0].id, 2);
    EXPECT_EQ(b.target_recipes[0].title, (std::vector<double>{7.0, 8.0}));
    ASSERT_EQ(b.target_test.size(), 1u);
    EXPECT_EQ(b.target_test[0].image.features, (std::vector<double>{0.5, 0.5, 0.5}));
    EXPECT_TRUE(b.target_train_images.empty());
}

TEST(Dataset, MalformedLineReportsLocation) {
    const fs::path dir = fresh_dir("malformed");
    save(generate(wadapt::testing::small_gen(), 5), dir);
    std::ofstream(dir / "target_test.tsv", std::ios::app) << "oops\n";
    try {
        load(dir);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("target_test.tsv:151"), std::string::npos) << e.what();
    }
}

TEST(Dataset, ConfigKeyValueRoundTrip) {
    GenConfig g;
    g.shift_angle = 0.123456789;
    g.concept_shift = 0.7;
    KeyValues kv;
    g.write(kv);
    EXPECT_EQ(GenConfig::from(kv), g);
}

// With every shift knob at zero the domains coincide, so a source-trained
// model retrieves target pairs as well as held-out source pairs.
TEST(Dataset, ZeroShiftTransfersFully) {
    GenConfig g = wadapt::testing::small_gen();
    g.shift_angle = 0.0;
    g.noise_scale = 0.0;
    g.concept_shift = 0.0;
    g.target_offset = 0.0;
    g.distinctive_fraction = 0.0;
    DatasetBundle b = generate(g, 3);
    const std::vector<Pair> held(b.source_pairs.end() - 150, b.source_pairs.end());
    b.source_pairs.resize(b.source_pairs.size() - 150);
    TrainConfig c = wadapt::testing::quick_train();
    c.pretrain_epochs = 10;
    const PretrainResult r = pretrain_source(b, c);
    const MetricsReport source = evaluate(r.model, held, 100, 10, 1);
    const MetricsReport target = evaluate(r.model, b.target_test, 100, 10, 1);
    EXPECT_NEAR(source.medr, target.medr, 1.0);
}

TEST(Dataset, LargerAngleHurtsSourceOnlyTransfer) {
    double medr_small = 0.0, medr_large = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        for (double angle : {0.1, std::numbers::pi / 4}) {
            GenConfig g = wadapt::testing::small_gen();
            g.shift_angle = angle;
            const DatasetBundle b = generate(g, seed);
            TrainConfig c = wadapt::testing::quick_train();
            c.seed = seed;
            c.pretrain_epochs = 10;
            const PretrainResult r = pretrain_source(b, c);
            const double medr = evaluate(r.model, b.target_test, 100, 5, seed).medr;
            (angle < 0.5 ? medr_small : medr_large) += medr / 10.0;
        }
    }
    EXPECT_GT(medr_large, medr_small);
}
