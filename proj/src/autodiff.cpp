#include "wadapt/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "wadapt/errors.hpp"

namespace wadapt {

namespace {

enum Broadcast : int { kSame = 0, kRowVec = 1, kColVec = 2, kScalar = 3 };

Broadcast broadcast_kind(const Matrix& a, const Matrix& b, const char* op) {
    if (a.same_shape(b)) return kSame;
    if (b.rows() == 1 && b.cols() == 1) return kScalar;
    if (b.rows() == 1 && b.cols() == a.cols()) return kRowVec;
    if (b.cols() == 1 && b.rows() == a.rows()) return kColVec;
    throw DimensionError(std::string(op) + ": cannot broadcast " + b.shape_string() + " to " +
                         a.shape_string());
}

inline double bcast_at(const Matrix& b, Broadcast kind, std::size_t r, std::size_t c) {
    switch (kind) {
        case kSame:
            return b(r, c);
        case kRowVec:
            return b(0, c);
        case kColVec:
            return b(r, 0);
        case kScalar:
            return b(0, 0);
    }
    return 0.0;
}

inline double& bcast_ref(Matrix& b, Broadcast kind, std::size_t r, std::size_t c) {
    switch (kind) {
        case kSame:
            return b(r, c);
        case kRowVec:
            return b(0, c);
        case kColVec:
            return b(r, 0);
        case kScalar:
            break;
    }
    return b(0, 0);
}

Tape& same_tape(Var a, Var b) {
    if (a.tape() == nullptr || a.tape() != b.tape()) {
        throw ContractError("operands belong to different tapes");
    }
    return *a.tape();
}

Tape& tape_of(Var a) {
    if (a.tape() == nullptr) throw ContractError("operation on an unbound Var");
    return *a.tape();
}

template <typename F>
Matrix map_values(const Matrix& x, F f) {
    Matrix out(x.rows(), x.cols());
    const auto& in = x.data();
    auto& o = out.data();
    for (std::size_t i = 0; i < in.size(); ++i) o[i] = f(in[i]);
    return out;
}

}  // namespace

const Matrix& Var::value() const { return tape_->nodes_.at(id_).value; }
const Matrix& Var::grad() const { return tape_->nodes_.at(id_).grad; }

double Var::scalar() const {
    const Matrix& v = value();
    if (v.rows() != 1 || v.cols() != 1) {
        throw ContractError("scalar() on non-scalar node of shape " + v.shape_string());
    }
    return v(0, 0);
}

Var Tape::constant(Matrix value) {
    Node n;
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
}

Var Tape::param(Parameter& p) {
    if (auto it = bound_.find(&p); it != bound_.end()) return Var(this, it->second);
    Node n;
    n.value = p.value;
    n.requires_grad = true;
    n.param = &p;
    nodes_.push_back(std::move(n));
    bound_.emplace(&p, nodes_.size() - 1);
    return Var(this, nodes_.size() - 1);
}

Var Tape::record(Op op, Matrix value, std::vector<std::size_t> parents, double aux0, double aux1,
                 std::vector<std::size_t> indices) {
    Node n;
    n.op = op;
    n.value = std::move(value);
    n.requires_grad = std::any_of(parents.begin(), parents.end(),
                                  [&](std::size_t p) { return nodes_[p].requires_grad; });
    n.parents = std::move(parents);
    n.aux0 = aux0;
    n.aux1 = aux1;
    n.indices = std::move(indices);
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
}

void Tape::backward(Var loss) {
    if (loss.tape() != this) throw ContractError("backward: loss belongs to another tape");
    const Matrix& lv = nodes_.at(loss.id()).value;
    if (lv.rows() != 1 || lv.cols() != 1) {
        throw ContractError("backward: loss must be 1x1, got " + lv.shape_string());
    }
    for (auto& n : nodes_) {
        if (n.requires_grad) {
            n.grad = Matrix(n.value.rows(), n.value.cols());
        } else {
            n.grad = Matrix();
        }
        if (n.param != nullptr) n.param->grad = Matrix(n.value.rows(), n.value.cols());
    }
    if (!nodes_[loss.id()].requires_grad) return;
    nodes_[loss.id()].grad(0, 0) = 1.0;
    for (std::size_t id = loss.id() + 1; id-- > 0;) {
        if (nodes_[id].requires_grad) propagate(id);
    }
    for (auto& n : nodes_) {
        if (n.param != nullptr) n.param->grad = n.grad;
    }
}

void Tape::propagate(std::size_t id) {
    Node& n = nodes_[id];
    const Matrix& g = n.grad;
    auto wants = [&](std::size_t k) { return nodes_[n.parents[k]].requires_grad; };
    auto pgrad = [&](std::size_t k) -> Matrix& { return nodes_[n.parents[k]].grad; };
    auto pval = [&](std::size_t k) -> const Matrix& { return nodes_[n.parents[k]].value; };

    switch (n.op) {
        case Op::kLeaf:
            return;
        case Op::kMatmul: {
            const Matrix& a = pval(0);
            const Matrix& b = pval(1);
            const std::size_t r = a.rows(), k = a.cols(), c = b.cols();
            if (wants(0)) {
                Matrix& ga = pgrad(0);
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t p = 0; p < k; ++p) {
                        double acc = 0.0;
                        for (std::size_t j = 0; j < c; ++j) acc += g(i, j) * b(p, j);
                        ga(i, p) += acc;
                    }
            }
            if (wants(1)) {
                Matrix& gb = pgrad(1);
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t p = 0; p < k; ++p) {
                        const double av = a(i, p);
                        if (av == 0.0) continue;
                        for (std::size_t j = 0; j < c; ++j) gb(p, j) += av * g(i, j);
                    }
            }
            return;
        }
        case Op::kTranspose: {
            Matrix& ga = pgrad(0);
            for (std::size_t i = 0; i < g.rows(); ++i)
                for (std::size_t j = 0; j < g.cols(); ++j) ga(j, i) += g(i, j);
            return;
        }
        case Op::kAdd:
        case Op::kSub: {
            const auto kind = static_cast<Broadcast>(static_cast<int>(n.aux0));
            const double sign = n.op == Op::kAdd ? 1.0 : -1.0;
            if (wants(0)) {
                auto& ga = pgrad(0).data();
                for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g.data()[i];
            }
            if (wants(1)) {
                Matrix& gb = pgrad(1);
                for (std::size_t i = 0; i < g.rows(); ++i)
                    for (std::size_t j = 0; j < g.cols(); ++j)
                        bcast_ref(gb, kind, i, j) += sign * g(i, j);
            }
            return;
        }
        case Op::kMul: {
            const auto kind = static_cast<Broadcast>(static_cast<int>(n.aux0));
            const Matrix& a = pval(0);
            const Matrix& b = pval(1);
            if (wants(0)) {
                Matrix& ga = pgrad(0);
                for (std::size_t i = 0; i < g.rows(); ++i)
                    for (std::size_t j = 0; j < g.cols(); ++j)
                        ga(i, j) += g(i, j) * bcast_at(b, kind, i, j);
            }
            if (wants(1)) {
                Matrix& gb = pgrad(1);
                for (std::size_t i = 0; i < g.rows(); ++i)
                    for (std::size_t j = 0; j < g.cols(); ++j)
                        bcast_ref(gb, kind, i, j) += g(i, j) * a(i, j);
            }
            return;
        }
        case Op::kScale: {
            auto& ga = pgrad(0).data();
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += n.aux0 * g.data()[i];
            return;
        }
        case Op::kAddScalar: {
            auto& ga = pgrad(0).data();
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g.data()[i];
            return;
        }
        case Op::kRelu: {
            auto& ga = pgrad(0).data();
            const auto& x = pval(0).data();
            for (std::size_t i = 0; i < ga.size(); ++i)
                if (x[i] > 0.0) ga[i] += g.data()[i];
            return;
        }
        case Op::kTanh: {
            auto& ga = pgrad(0).data();
            const auto& y = n.value.data();
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g.data()[i] * (1.0 - y[i] * y[i]);
            return;
        }
        case Op::kSigmoid: {
            auto& ga = pgrad(0).data();
            const auto& y = n.value.data();
            for (std::size_t i = 0; i < ga.size(); ++i)
                ga[i] += g.data()[i] * y[i] * (1.0 - y[i]);
            return;
        }
        case Op::kLog: {
            auto& ga = pgrad(0).data();
            const auto& x = pval(0).data();
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g.data()[i] / x[i];
            return;
        }
        case Op::kClamp: {
            auto& ga = pgrad(0).data();
            const auto& x = pval(0).data();
            for (std::size_t i = 0; i < ga.size(); ++i)
                if (x[i] > n.aux0 && x[i] < n.aux1) ga[i] += g.data()[i];
            return;
        }
        case Op::kConcatCols: {
            std::size_t offset = 0;
            for (std::size_t k = 0; k < n.parents.size(); ++k) {
                const std::size_t w = pval(k).cols();
                if (wants(k)) {
                    Matrix& gp = pgrad(k);
                    for (std::size_t i = 0; i < g.rows(); ++i)
                        for (std::size_t j = 0; j < w; ++j) gp(i, j) += g(i, offset + j);
                }
                offset += w;
            }
            return;
        }
        case Op::kL2NormalizeRows: {
            // y = x/|x|  =>  dx = (g - y (g.y)) / |x|
            const Matrix& x = pval(0);
            Matrix& ga = pgrad(0);
            const Matrix& y = n.value;
            for (std::size_t i = 0; i < x.rows(); ++i) {
                double norm = 0.0, gy = 0.0;
                for (std::size_t j = 0; j < x.cols(); ++j) {
                    norm += x(i, j) * x(i, j);
                    gy += g(i, j) * y(i, j);
                }
                norm = std::sqrt(norm);
                for (std::size_t j = 0; j < x.cols(); ++j)
                    ga(i, j) += (g(i, j) - y(i, j) * gy) / norm;
            }
            return;
        }
        case Op::kSum:
        case Op::kMean: {
            auto& ga = pgrad(0).data();
            const double s = n.op == Op::kSum ? g(0, 0) : g(0, 0) / static_cast<double>(ga.size());
            for (double& v : ga) v += s;
            return;
        }
        case Op::kRowSum: {
            Matrix& ga = pgrad(0);
            for (std::size_t i = 0; i < ga.rows(); ++i)
                for (std::size_t j = 0; j < ga.cols(); ++j) ga(i, j) += g(i, 0);
            return;
        }
        case Op::kRowMax: {
            Matrix& ga = pgrad(0);
            for (std::size_t i = 0; i < ga.rows(); ++i) ga(i, n.indices[i]) += g(i, 0);
            return;
        }
        case Op::kRowDot: {
            const Matrix& a = pval(0);
            const Matrix& b = pval(1);
            if (wants(0)) {
                Matrix& ga = pgrad(0);
                for (std::size_t i = 0; i < a.rows(); ++i)
                    for (std::size_t j = 0; j < a.cols(); ++j) ga(i, j) += g(i, 0) * b(i, j);
            }
            if (wants(1)) {
                Matrix& gb = pgrad(1);
                for (std::size_t i = 0; i < a.rows(); ++i)
                    for (std::size_t j = 0; j < a.cols(); ++j) gb(i, j) += g(i, 0) * a(i, j);
            }
            return;
        }
    }
}

namespace ad {

Var matmul(Var a, Var b) {
    Tape& t = same_tape(a, b);
    const Matrix& x = a.value();
    const Matrix& y = b.value();
    if (x.cols() != y.rows()) {
        throw DimensionError("matmul: " + x.shape_string() + " times " + y.shape_string());
    }
    Matrix out(x.rows(), y.cols());
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t p = 0; p < x.cols(); ++p) {
            const double xv = x(i, p);
            if (xv == 0.0) continue;
            for (std::size_t j = 0; j < y.cols(); ++j) out(i, j) += xv * y(p, j);
        }
    return t.record(Op::kMatmul, std::move(out), {a.id(), b.id()});
}

Var transpose(Var a) {
    Tape& t = tape_of(a);
    return t.record(Op::kTranspose, a.value().transposed(), {a.id()});
}

namespace {

template <typename F>
Var elementwise_binary(Op op, Var a, Var b, const char* name, F f) {
    Tape& t = same_tape(a, b);
    const Matrix& x = a.value();
    const Matrix& y = b.value();
    const Broadcast kind = broadcast_kind(x, y, name);
    Matrix out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) = f(x(i, j), bcast_at(y, kind, i, j));
    return t.record(op, std::move(out), {a.id(), b.id()}, static_cast<double>(kind));
}

}  // namespace

Var add(Var a, Var b) {
    return elementwise_binary(Op::kAdd, a, b, "add", [](double x, double y) { return x + y; });
}

Var sub(Var a, Var b) {
    return elementwise_binary(Op::kSub, a, b, "sub", [](double x, double y) { return x - y; });
}

Var mul(Var a, Var b) {
    return elementwise_binary(Op::kMul, a, b, "mul", [](double x, double y) { return x * y; });
}

Var scale(Var a, double k) {
    Tape& t = tape_of(a);
    return t.record(Op::kScale, map_values(a.value(), [k](double v) { return k * v; }), {a.id()},
                    k);
}

Var add_scalar(Var a, double k) {
    Tape& t = tape_of(a);
    return t.record(Op::kAddScalar, map_values(a.value(), [k](double v) { return v + k; }),
                    {a.id()});
}

Var relu(Var a) {
    Tape& t = tape_of(a);
    return t.record(Op::kRelu, map_values(a.value(), [](double v) { return v > 0.0 ? v : 0.0; }),
                    {a.id()});
}

Var tanh(Var a) {
    Tape& t = tape_of(a);
    return t.record(Op::kTanh, map_values(a.value(), [](double v) { return std::tanh(v); }),
                    {a.id()});
}

Var sigmoid(Var a) {
    Tape& t = tape_of(a);
    auto f = [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
    };
    return t.record(Op::kSigmoid, map_values(a.value(), f), {a.id()});
}

Var log(Var a) {
    Tape& t = tape_of(a);
    for (double v : a.value().data()) {
        if (!(v > 0.0)) throw DegenerateInputError("log: non-positive input " + std::to_string(v));
    }
    return t.record(Op::kLog, map_values(a.value(), [](double v) { return std::log(v); }),
                    {a.id()});
}

Var clamp(Var a, double lo, double hi) {
    if (!(lo < hi)) throw ContractError("clamp: lower bound must be below upper bound");
    Tape& t = tape_of(a);
    return t.record(Op::kClamp, map_values(a.value(), [=](double v) { return std::clamp(v, lo, hi); }),
                    {a.id()}, lo, hi);
}

Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw ContractError("concat_cols: no inputs");
    Tape& t = tape_of(parts.front());
    const std::size_t rows = parts.front().rows();
    std::size_t cols = 0;
    std::vector<std::size_t> ids;
    for (const Var& p : parts) {
        if (p.tape() != &t) throw ContractError("concat_cols: operands belong to different tapes");
        if (p.rows() != rows) {
            throw DimensionError("concat_cols: " + parts.front().value().shape_string() + " and " +
                                 p.value().shape_string());
        }
        cols += p.cols();
        ids.push_back(p.id());
    }
    Matrix out(rows, cols);
    std::size_t offset = 0;
    for (const Var& p : parts) {
        const Matrix& v = p.value();
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < v.cols(); ++j) out(i, offset + j) = v(i, j);
        offset += v.cols();
    }
    return t.record(Op::kConcatCols, std::move(out), std::move(ids));
}

Var l2_normalize_rows(Var a) {
    Tape& t = tape_of(a);
    const Matrix& x = a.value();
    Matrix out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        double norm = 0.0;
        for (double v : x.row(i)) norm += v * v;
        norm = std::sqrt(norm);
        if (norm == 0.0) {
            throw DegenerateInputError("l2_normalize_rows: row " + std::to_string(i) +
                                       " has zero norm");
        }
        for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) = x(i, j) / norm;
    }
    return t.record(Op::kL2NormalizeRows, std::move(out), {a.id()});
}

Var sum(Var a) {
    Tape& t = tape_of(a);
    double s = 0.0;
    for (double v : a.value().data()) s += v;
    return t.record(Op::kSum, Matrix(1, 1, s), {a.id()});
}

Var mean(Var a) {
    Tape& t = tape_of(a);
    if (a.value().empty()) throw ContractError("mean of an empty matrix");
    double s = 0.0;
    for (double v : a.value().data()) s += v;
    return t.record(Op::kMean, Matrix(1, 1, s / static_cast<double>(a.value().size())), {a.id()});
}

Var row_sum(Var a) {
    Tape& t = tape_of(a);
    const Matrix& x = a.value();
    Matrix out(x.rows(), 1);
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (double v : x.row(i)) out(i, 0) += v;
    return t.record(Op::kRowSum, std::move(out), {a.id()});
}

Var row_max(Var a) {
    Tape& t = tape_of(a);
    const Matrix& x = a.value();
    if (x.cols() == 0) throw ContractError("row_max: matrix has no columns");
    Matrix out(x.rows(), 1);
    std::vector<std::size_t> arg(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        auto r = x.row(i);
        arg[i] = static_cast<std::size_t>(std::max_element(r.begin(), r.end()) - r.begin());
        out(i, 0) = r[arg[i]];
    }
    return t.record(Op::kRowMax, std::move(out), {a.id()}, 0.0, 0.0, std::move(arg));
}

Var row_dot(Var a, Var b) {
    Tape& t = same_tape(a, b);
    const Matrix& x = a.value();
    const Matrix& y = b.value();
    if (!x.same_shape(y)) {
        throw DimensionError("row_dot: " + x.shape_string() + " and " + y.shape_string());
    }
    Matrix out(x.rows(), 1);
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) out(i, 0) += x(i, j) * y(i, j);
    return t.record(Op::kRowDot, std::move(out), {a.id(), b.id()});
}

}  // namespace ad

}  // namespace wadapt
