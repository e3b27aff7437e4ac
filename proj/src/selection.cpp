#include "wadapt/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "wadapt/errors.hpp"
#include "wadapt/keyvalue.hpp"

namespace wadapt {

double WeightVector::sum() const { return std::accumulate(weights.begin(), weights.end(), 0.0); }

Matrix WeightVector::as_column() const { return Matrix(weights.size(), 1, weights); }

namespace {

std::vector<double> row_norms(const Matrix& m, const char* side) {
    std::vector<double> norms(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        double s = 0.0;
        for (double v : m.row(i)) s += v * v;
        norms[i] = std::sqrt(s);
        if (norms[i] == 0.0) {
            throw DegenerateInputError(std::string(side) + " row " + std::to_string(i) +
                                       " has zero norm");
        }
    }
    return norms;
}

}  // namespace

SimilarityMatrix compute_w1(const Matrix& target, const Matrix& source) {
    if (target.cols() != source.cols()) {
        throw DimensionError("compute_w1: target features " + target.shape_string() +
                             " vs source features " + source.shape_string());
    }
    const auto tn = row_norms(target, "target");
    const auto sn = row_norms(source, "source");
    SimilarityMatrix w1{Matrix(target.rows(), source.rows())};
    for (std::size_t j = 0; j < target.rows(); ++j) {
        const auto t = target.row(j);
        for (std::size_t i = 0; i < source.rows(); ++i) {
            const auto s = source.row(i);
            const double dot = std::inner_product(t.begin(), t.end(), s.begin(), 0.0);
            w1.values(j, i) = std::clamp(dot / (tn[j] * sn[i]), -1.0, 1.0);
        }
    }
    return w1;
}

SelectedSubset select_topk(const SimilarityMatrix& w1, std::size_t k) {
    const std::size_t n_src = w1.values.cols();
    if (k < 1 || k > n_src) {
        throw ConfigError("select_topk: K=" + std::to_string(k) + " outside [1, " +
                          std::to_string(n_src) + "]");
    }
    std::vector<std::vector<std::size_t>> picked_by(n_src);
    std::vector<std::size_t> order(n_src);
    for (std::size_t j = 0; j < w1.values.rows(); ++j) {
        const auto row = w1.values.row(j);
        std::iota(order.begin(), order.end(), 0);
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                          [&](std::size_t a, std::size_t b) {
                              return row[a] > row[b] || (row[a] == row[b] && a < b);
                          });
        for (std::size_t r = 0; r < k; ++r) picked_by[order[r]].push_back(j);
    }
    SelectedSubset subset;
    for (std::size_t i = 0; i < n_src; ++i) {
        if (!picked_by[i].empty()) {
            subset.indices.push_back(i);
            subset.provenance.push_back(std::move(picked_by[i]));
        }
    }
    return subset;
}

std::vector<std::size_t> sample_source_batch(const SelectedSubset& subset, std::size_t n, Rng& rng) {
    if (subset.indices.empty()) throw SelectionError("sample_source_batch: empty subset");
    std::vector<std::size_t> batch;
    batch.reserve(n);
    if (subset.indices.size() >= n) {
        std::vector<std::size_t> shuffled = subset.indices;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        batch.assign(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n));
    } else {
        std::uniform_int_distribution<std::size_t> pick(0, subset.indices.size() - 1);
        for (std::size_t i = 0; i < n; ++i) batch.push_back(subset.indices[pick(rng)]);
    }
    return batch;
}

Matrix extract_w2(const SimilarityMatrix& w1, const std::vector<std::size_t>& batch) {
    const std::size_t n = batch.size();
    if (w1.values.rows() != n) {
        throw ContractError("extract_w2: target batch has " + std::to_string(w1.values.rows()) +
                            " rows but source batch has " + std::to_string(n));
    }
    Matrix w2(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        if (batch[i] >= w1.values.cols()) {
            throw ContractError("extract_w2: source index " + std::to_string(batch[i]) +
                                " out of bounds for " + std::to_string(w1.values.cols()) + " columns");
        }
        for (std::size_t j = 0; j < n; ++j) w2(i, j) = w1.values(j, batch[i]);
    }
    return w2;
}

WeightVector compute_weight_vector(const Matrix& w2) {
    const std::size_t n = w2.rows();
    if (n == 0) throw ContractError("compute_weight_vector: empty W2");
    if (!w2.all_finite()) throw ContractError("compute_weight_vector: non-finite W2");
    std::vector<double> s(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (double v : w2.row(i)) s[i] += v;
    const auto [lo, hi] = std::minmax_element(s.begin(), s.end());
    const double min_s = *lo, max_s = *hi;
    if (max_s == min_s) return WeightVector::ones(n);
    std::vector<double> u(n);
    for (std::size_t i = 0; i < n; ++i) u[i] = (s[i] - min_s) / (max_s - min_s);
    const double total = std::accumulate(u.begin(), u.end(), 0.0);
    WeightVector w;
    w.weights.resize(n);
    for (std::size_t i = 0; i < n; ++i) w.weights[i] = static_cast<double>(n) * u[i] / total;
    return w;
}

void write_selection_trace(std::ostream& out, std::size_t step, const SimilarityMatrix& w1,
                           const SelectedSubset& subset, const WeightVector& weights) {
    out << step << "\tw1_shape\t" << w1.values.rows() << ',' << w1.values.cols() << '\n';
    out << step << "\tw1\t";
    for (std::size_t i = 0; i < w1.values.size(); ++i) {
        if (i) out << ',';
        out << format_double(w1.values.data()[i]);
    }
    out << '\n' << step << "\tsubset\t";
    for (std::size_t i = 0; i < subset.indices.size(); ++i) {
        if (i) out << ',';
        out << subset.indices[i];
    }
    out << '\n' << step << "\tweights\t";
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (i) out << ',';
        out << format_double(weights.weights[i]);
    }
    out << '\n';
}

}  // namespace wadapt
