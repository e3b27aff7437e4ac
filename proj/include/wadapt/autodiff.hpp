#pragma once

// Define-by-run reverse-mode differentiation over dense matrices.
//
// A Tape records every forward op as a Node; Var is a cheap handle into it.
// Nodes only reference parents with smaller ids, so reverse id order is a
// valid topological order for the backward sweep. A Tape is meant to be
// rebuilt for every training step.

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "wadapt/matrix.hpp"

namespace wadapt {

/// A learnable tensor. `grad` is written by Tape::backward.
struct Parameter {
    std::string name;
    Matrix value;
    Matrix grad;

    Parameter() = default;
    Parameter(std::string n, Matrix v)
        : name(std::move(n)), value(std::move(v)), grad(value.rows(), value.cols()) {}
};

enum class Op {
    kLeaf,
    kMatmul,
    kTranspose,
    kAdd,
    kSub,
    kMul,
    kScale,
    kAddScalar,
    kRelu,
    kTanh,
    kSigmoid,
    kLog,
    kClamp,
    kConcatCols,
    kL2NormalizeRows,
    kSum,
    kMean,
    kRowSum,
    kRowMax,
    kRowDot,
};

class Tape;

class Var {
   public:
    Var() = default;

    const Matrix& value() const;
    const Matrix& grad() const;
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }
    // Convenience for 1×1 nodes.
    double scalar() const;

    Tape* tape() const { return tape_; }
    std::size_t id() const { return id_; }

   private:
    friend class Tape;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

class Tape {
   public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Leaf that never receives gradient.
    Var constant(Matrix value);
    /// Leaf bound to a learnable parameter; binding the same parameter twice
    /// returns the same node.
    Var param(Parameter& p);

    /// Zeroes every gradient on the tape and on bound parameters, then
    /// propagates d(loss)/d(node). `loss` must be 1×1.
    void backward(Var loss);

    std::size_t size() const { return nodes_.size(); }

    // Used by the op free functions below.
    Var record(Op op, Matrix value, std::vector<std::size_t> parents, double aux0 = 0.0,
               double aux1 = 0.0, std::vector<std::size_t> indices = {});

   private:
    friend class Var;

    struct Node {
        Op op = Op::kLeaf;
        Matrix value;
        Matrix grad;
        std::vector<std::size_t> parents;
        bool requires_grad = false;
        Parameter* param = nullptr;
        double aux0 = 0.0;
        double aux1 = 0.0;
        std::vector<std::size_t> indices;
    };

    void propagate(std::size_t id);

    std::vector<Node> nodes_;
    std::unordered_map<const Parameter*, std::size_t> bound_;
};

namespace ad {

Var matmul(Var a, Var b);
Var transpose(Var a);

// add/sub/mul accept b shaped like a, or as a 1×cols row vector, an rows×1
// column vector, or a 1×1 scalar; b is broadcast to a's shape.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);

Var scale(Var a, double k);
Var add_scalar(Var a, double k);

Var relu(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
Var log(Var a);
// Gradient passes only where lo < x < hi.
Var clamp(Var a, double lo, double hi);

Var concat_cols(const std::vector<Var>& parts);
Var l2_normalize_rows(Var a);

Var sum(Var a);
Var mean(Var a);
// n×m -> n×1
Var row_sum(Var a);
// n×m -> n×1; gradient routed to the first maximal entry of each row.
Var row_max(Var a);
// n×m, n×m -> n×1 of per-row inner products.
Var row_dot(Var a, Var b);

}  // namespace ad

}  // namespace wadapt
