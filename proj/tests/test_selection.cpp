#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <map>
#include <set>
#include <sstream>

#include "test_util.hpp"
#include "wadapt/errors.hpp"
#include "wadapt/selection.hpp"

using namespace wadapt;
using wadapt::testing::brute_topk;
using wadapt::testing::random_matrix;

namespace {

std::vector<double> row_sums(const Matrix& m) {
    std::vector<double> s(m.rows(), 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (double v : m.row(i)) s[i] += v;
    return s;
}

}  // namespace

TEST(Similarity, IdenticalVectorsGiveOne) {
    const Matrix v = Matrix::from_rows({{0.3, -1.2, 4.0}});
    EXPECT_NEAR(compute_w1(v, v).values(0, 0), 1.0, 1e-15);
}

TEST(Similarity, OrthogonalVectorsGiveZero) {
    EXPECT_EQ(compute_w1(Matrix::from_rows({{1.0, 0.0}}), Matrix::from_rows({{0.0, 2.0}})).values(0, 0), 0.0);
}

TEST(Similarity, HandEvaluatedPair) {
    // (1*2 + 2*1) / (sqrt5 * sqrt5) = 4/5
    const double v = compute_w1(Matrix::from_rows({{1.0, 2.0}}), Matrix::from_rows({{2.0, 1.0}})).values(0, 0);
    EXPECT_NEAR(v, 0.8, 1e-15);
}

TEST(Similarity, ZeroRowNamed) {
    try {
        compute_w1(Matrix::from_rows({{1.0, 0.0}}), Matrix::from_rows({{1.0, 1.0}, {0.0, 0.0}}));
        FAIL();
    } catch (const DegenerateInputError& e) {
        EXPECT_NE(std::string(e.what()).find("source row 1"), std::string::npos);
    }
}

TEST(Similarity, ShapeMismatch) {
    EXPECT_THROW(compute_w1(Matrix(2, 3, 1.0), Matrix(2, 4, 1.0)), DimensionError);
}

TEST(TopK, SingleTargetFullKSelectsEverything) {
    std::mt19937_64 rng(1);
    const SelectedSubset s = select_topk({random_matrix(1, 7, rng)}, 7);
    EXPECT_EQ(s.indices, (std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6}));
}

TEST(TopK, DistinctPeaksWithKOne) {
    Matrix w(3, 6, 0.1);
    w(0, 4) = 0.9;
    w(1, 1) = 0.8;
    w(2, 5) = 0.7;
    const SelectedSubset s = select_topk({w}, 1);
    EXPECT_EQ(s.indices, (std::vector<std::size_t>{1, 4, 5}));
    EXPECT_EQ(s.provenance[0], (std::vector<std::size_t>{1}));
    EXPECT_EQ(s.provenance[1], (std::vector<std::size_t>{0}));
}

TEST(TopK, TiesPreferLowerIndex) {
    const Matrix w = Matrix::from_rows({{0.5, 0.2, 0.5, 0.5}});
    EXPECT_EQ(select_topk({w}, 2).indices, (std::vector<std::size_t>{0, 2}));
}

TEST(TopK, MatchesFullSortOracle) {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 200; ++trial) {
        Matrix w = random_matrix(4, 16, rng);
        // Quantize to force ties.
        for (double& v : w.data()) v = std::round(v * 4.0) / 4.0;
        EXPECT_EQ(select_topk({w}, 2).indices, brute_topk(w, 2));
    }
}

TEST(TopK, KOutOfRange) {
    EXPECT_THROW(select_topk({Matrix(2, 3, 0.0)}, 0), ConfigError);
    EXPECT_THROW(select_topk({Matrix(2, 3, 0.0)}, 4), ConfigError);
}

TEST(BatchSampling, FullSubsetIsPermutation) {
    Rng rng = make_rng(1, "test");
    SelectedSubset s;
    s.indices = {2, 5, 9, 11};
    auto b = sample_source_batch(s, 4, rng);
    std::sort(b.begin(), b.end());
    EXPECT_EQ(b, s.indices);
}

TEST(BatchSampling, SeedFixesBatch) {
    SelectedSubset s;
    s.indices = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    Rng a = make_rng(3, "test"), b = make_rng(3, "test");
    EXPECT_EQ(sample_source_batch(s, 5, a), sample_source_batch(s, 5, b));
}

TEST(BatchSampling, SmallSubsetDrawsUniformlyWithReplacement) {
    SelectedSubset s;
    s.indices = {4, 7, 19};
    Rng rng = make_rng(5, "test");
    std::map<std::size_t, double> counts;
    const int draws = 10000 / 8 + 1;
    double total = 0.0;
    for (int d = 0; d < draws; ++d) {
        for (std::size_t i : sample_source_batch(s, 8, rng)) {
            ASSERT_TRUE(i == 4 || i == 7 || i == 19);
            counts[i] += 1.0;
            total += 1.0;
        }
    }
    // Binomial count per cell: mean total/3, sd sqrt(total * 1/3 * 2/3).
    const double mean = total / 3.0;
    const double sd = std::sqrt(total * (1.0 / 3.0) * (2.0 / 3.0));
    double chi2 = 0.0;
    for (const auto& [i, c] : counts) {
        EXPECT_LT(std::abs(c - mean), 3.0 * sd);
        chi2 += (c - mean) * (c - mean) / mean;
    }
    EXPECT_LT(chi2, 13.8);  // chi-square, 2 dof, p = 0.001
}

TEST(BatchSampling, EmptySubsetRejected) {
    Rng rng = make_rng(1, "test");
    EXPECT_THROW(sample_source_batch({}, 3, rng), SelectionError);
}

TEST(W2, LeadingBatchIsTransposedBlock) {
    std::mt19937_64 rng(3);
    const SimilarityMatrix w1{random_matrix(4, 10, rng)};
    const Matrix w2 = extract_w2(w1, {0, 1, 2, 3});
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(w2(i, j), w1.values(j, i));
}

TEST(W2, RepeatedIndexGivesEqualRows) {
    std::mt19937_64 rng(4);
    const SimilarityMatrix w1{random_matrix(3, 10, rng)};
    const Matrix w2 = extract_w2(w1, {6, 6, 6});
    EXPECT_EQ(w2.transposed(), Matrix(3, 3, std::vector<double>{
        w1.values(0, 6), w1.values(0, 6), w1.values(0, 6),
        w1.values(1, 6), w1.values(1, 6), w1.values(1, 6),
        w1.values(2, 6), w1.values(2, 6), w1.values(2, 6)}));
}

TEST(W2, RandomMatchesDirectLookup) {
    std::mt19937_64 rng(5);
    const SimilarityMatrix w1{random_matrix(5, 12, rng)};
    const std::vector<std::size_t> batch = {11, 3, 3, 0, 7};
    const Matrix w2 = extract_w2(w1, batch);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(w2(i, j), w1.values(j, batch[i]));
}

TEST(W2, SizeMismatchRejected) {
    EXPECT_THROW(extract_w2({Matrix(3, 5)}, {0, 1}), ContractError);
    EXPECT_THROW(extract_w2({Matrix(2, 5)}, {0, 5}), ContractError);
}

TEST(Weights, IdenticalRowsGiveOnes) {
    const Matrix w2 = Matrix::from_rows({{0.2, 0.4}, {0.2, 0.4}, {0.2, 0.4}});
    EXPECT_EQ(compute_weight_vector(w2).weights, (std::vector<double>{1.0, 1.0, 1.0}));
}

TEST(Weights, TwoSampleHandCase) {
    // Row sums (0, 1) -> u = (0, 1) -> w = (0, 2).
    const Matrix w2 = Matrix::from_rows({{0.5, -0.5}, {0.25, 0.75}});
    const WeightVector w = compute_weight_vector(w2);
    EXPECT_DOUBLE_EQ(w.weights[0], 0.0);
    EXPECT_DOUBLE_EQ(w.weights[1], 2.0);
}

TEST(Weights, RandomPropertyOracle) {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + trial % 31;
        Matrix w2 = random_matrix(n, n, rng);
        for (double& v : w2.data()) v = std::clamp(v, -1.0, 1.0);
        const WeightVector w = compute_weight_vector(w2);
        const std::vector<double> s = row_sums(w2);
        EXPECT_NEAR(w.sum(), static_cast<double>(n), 1e-9);
        const auto lo = static_cast<std::size_t>(std::min_element(s.begin(), s.end()) - s.begin());
        EXPECT_EQ(w.weights[lo], 0.0);
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = 0; b < n; ++b)
                if (s[a] < s[b]) EXPECT_LT(w.weights[a], w.weights[b]);
    }
}

TEST(Weights, TraceLines) {
    std::ostringstream out;
    write_selection_trace(out, 3, {Matrix::from_rows({{0.5, 1.0}})}, {{1}, {{0}}}, WeightVector::ones(1));
    EXPECT_EQ(out.str(), "3\tw1_shape\t1,2\n3\tw1\t0.5,1\n3\tsubset\t1\n3\tweights\t1\n");
}
