#pragma once

// Source batch selection and per-sample importance weights.
//
// Pipeline for one adaptation step:
//   W1 = cosine(target batch, source pool) under the frozen source encoder
//   subset = union over target rows of the K most similar pool entries
//   batch = uniform draw of n entries from the subset
//   W2(i, j) = W1(j, batch[i])
//   weights = rescaled min-max normalized row sums of W2, summing to n

#include <cstddef>
#include <iosfwd>
#include <vector>

#include "wadapt/matrix.hpp"
#include "wadapt/rng.hpp"

namespace wadapt {

struct SimilarityMatrix {
    Matrix values;  // n_target × n_source, entries in [-1, 1]
};

struct SelectedSubset {
    std::vector<std::size_t> indices;                  // ascending source-pool positions
    std::vector<std::vector<std::size_t>> provenance;  // target rows that picked each index
};

struct WeightVector {
    std::vector<double> weights;

    std::size_t size() const { return weights.size(); }
    double sum() const;
    Matrix as_column() const;
    static WeightVector ones(std::size_t n) { return {std::vector<double>(n, 1.0)}; }
};

/// Throws DegenerateInputError naming the first zero-norm row.
SimilarityMatrix compute_w1(const Matrix& target_features, const Matrix& source_features);

/// Ties broken towards the lower source index. Throws ConfigError unless
/// 1 <= k <= number of source columns.
SelectedSubset select_topk(const SimilarityMatrix& w1, std::size_t k);

/// Uniform draw of `n` subset members: without replacement if the subset is
/// large enough, with replacement otherwise. Returns source-pool positions.
std::vector<std::size_t> sample_source_batch(const SelectedSubset& subset, std::size_t n, Rng& rng);

/// Row i is source batch member i, column j is target row j.
Matrix extract_w2(const SimilarityMatrix& w1, const std::vector<std::size_t>& batch);

/// Row-sum, min-max normalize, rescale to sum n. All-equal row sums give all ones.
WeightVector compute_weight_vector(const Matrix& w2);

/// One `step<TAB>kind<TAB>values` line per artifact, for the selection trace.
void write_selection_trace(std::ostream& out, std::size_t step, const SimilarityMatrix& w1,
                           const SelectedSubset& subset, const WeightVector& weights);

}  // namespace wadapt
