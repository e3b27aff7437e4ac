#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "wadapt/dataset.hpp"
#include "wadapt/encoders.hpp"
#include "wadapt/matrix.hpp"

namespace wadapt {

enum class RetrievalDirection { kImageToRecipe, kRecipeToImage };

struct RankMetrics {
    double medr = 0.0;
    double r1 = 0.0;
    double r5 = 0.0;
    double r10 = 0.0;
};

struct MetricsReport {
    double medr = 0.0;  // mean over repeats
    double r1 = 0.0;
    double r5 = 0.0;
    double r10 = 0.0;
    std::vector<RankMetrics> per_repeat;
    std::size_t pool_size = 0;
    std::size_t repeats = 0;
};

/// 1-based rank of candidate q for query row q of `scores` (higher = better).
/// Candidates scoring equal to the true one rank ahead of it only if their
/// index is lower.
std::vector<std::size_t> ranks_from_scores(const Matrix& scores);

/// Median of the ranks (mean of the two middle values for an even count) and
/// the fraction of ranks <= 1, 5, 10.
RankMetrics metrics_from_ranks(const std::vector<std::size_t>& ranks);

/// For each repeat, samples `pool_size` test pairs, ranks every pool candidate
/// for every query by cosine similarity of the embeddings and records the rank
/// of the true partner. Throws ConfigError if the pool exceeds the test set.
MetricsReport evaluate(const ModelState& model, const std::vector<Pair>& test_pairs,
                       std::size_t pool_size, std::size_t repeats, std::uint64_t seed,
                       RetrievalDirection direction = RetrievalDirection::kImageToRecipe);

}  // namespace wadapt
