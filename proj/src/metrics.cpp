#include "wadapt/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "wadapt/errors.hpp"
#include "wadapt/rng.hpp"

namespace wadapt {

std::vector<std::size_t> ranks_from_scores(const Matrix& scores) {
    if (scores.rows() != scores.cols()) {
        throw DimensionError("ranks_from_scores: score matrix must be square, got " +
                             scores.shape_string());
    }
    std::vector<std::size_t> ranks(scores.rows());
    for (std::size_t q = 0; q < scores.rows(); ++q) {
        const double truth = scores(q, q);
        std::size_t ahead = 0;
        for (std::size_t c = 0; c < scores.cols(); ++c) {
            const double s = scores(q, c);
            if (s > truth || (s == truth && c < q)) ++ahead;
        }
        ranks[q] = ahead + 1;
    }
    return ranks;
}

RankMetrics metrics_from_ranks(const std::vector<std::size_t>& ranks) {
    if (ranks.empty()) throw ContractError("metrics_from_ranks: no ranks");
    std::vector<std::size_t> sorted = ranks;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    RankMetrics m;
    m.medr = n % 2 == 1 ? static_cast<double>(sorted[n / 2])
                        : 0.5 * static_cast<double>(sorted[n / 2 - 1] + sorted[n / 2]);
    auto recall = [&](std::size_t k) {
        const auto hits = std::count_if(ranks.begin(), ranks.end(), [k](std::size_t r) { return r <= k; });
        return static_cast<double>(hits) / static_cast<double>(n);
    };
    m.r1 = recall(1);
    m.r5 = recall(5);
    m.r10 = recall(10);
    return m;
}

MetricsReport evaluate(const ModelState& model, const std::vector<Pair>& test_pairs,
                       std::size_t pool_size, std::size_t repeats, std::uint64_t seed,
                       RetrievalDirection direction) {
    if (pool_size == 0 || pool_size > test_pairs.size()) {
        throw ConfigError("evaluate: pool size " + std::to_string(pool_size) +
                          " must lie in [1, " + std::to_string(test_pairs.size()) + "]");
    }
    if (repeats == 0) throw ConfigError("evaluate: repeats must be positive");

    // Embed the whole test set once; pools index into it.
    std::vector<const RecipeSample*> recipes;
    std::vector<const ImageSample*> images;
    for (const Pair& p : test_pairs) {
        recipes.push_back(&p.recipe);
        images.push_back(&p.image);
    }
    const Matrix recipe_emb = embed_recipes(model, make_recipe_batch(recipes));
    const Matrix image_emb = embed_images(model, make_image_batch(images));
    const Matrix& queries = direction == RetrievalDirection::kImageToRecipe ? image_emb : recipe_emb;
    const Matrix& candidates = direction == RetrievalDirection::kImageToRecipe ? recipe_emb : image_emb;

    Rng rng = make_rng(seed, "eval");
    MetricsReport report;
    report.pool_size = pool_size;
    report.repeats = repeats;
    std::vector<std::size_t> order(test_pairs.size());
    for (std::size_t rep = 0; rep < repeats; ++rep) {
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        std::vector<std::size_t> pool(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(pool_size));
        std::sort(pool.begin(), pool.end());
        Matrix scores(pool_size, pool_size);
        for (std::size_t q = 0; q < pool_size; ++q) {
            const auto qv = queries.row(pool[q]);
            for (std::size_t c = 0; c < pool_size; ++c) {
                const auto cv = candidates.row(pool[c]);
                scores(q, c) = std::inner_product(qv.begin(), qv.end(), cv.begin(), 0.0);
            }
        }
        report.per_repeat.push_back(metrics_from_ranks(ranks_from_scores(scores)));
    }
    for (const auto& m : report.per_repeat) {
        report.medr += m.medr;
        report.r1 += m.r1;
        report.r5 += m.r5;
        report.r10 += m.r10;
    }
    const double k = static_cast<double>(repeats);
    report.medr /= k;
    report.r1 /= k;
    report.r5 /= k;
    report.r10 /= k;
    return report;
}

}  // namespace wadapt
