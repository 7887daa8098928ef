// SPDX-License-Identifier: Apache-2.0
#include "seqdx/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace seqdx {

std::int64_t shape_numel(const Shape& shape) {
    std::int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

namespace {

void validate_shape(const Shape& shape) {
    if (shape.empty()) throw ShapeError("invalid shape: empty dimension list");
    for (int d : shape) {
        if (d < 1) throw ShapeError("invalid shape: non-positive dimension in " + shape_str(shape));
    }
}

TensorPtr make_tensor(const Shape& shape, bool requires_grad) {
    validate_shape(shape);
    auto t = std::make_shared<Tensor>();
    t->shape = shape;
    t->data.assign(static_cast<std::size_t>(shape_numel(shape)), 0.0f);
    t->requires_grad = requires_grad;
    return t;
}

float sigmoid_scalar(float x) {
    if (x >= 0.0f) {
        float e = std::exp(-x);
        return 1.0f / (1.0f + e);
    }
    float e = std::exp(x);
    return e / (1.0f + e);
}

void check_same_shape(const TensorPtr& a, const TensorPtr& b, const char* op) {
    if (a->shape != b->shape) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a->shape) + " vs " +
                         shape_str(b->shape));
    }
}

bool should_record(const Tape* tape, std::initializer_list<const TensorPtr*> inputs) {
    if (!tape) return false;
    for (const TensorPtr* t : inputs) {
        if (*t && (*t)->requires_grad) return true;
    }
    return false;
}

}  // namespace

TensorPtr tensor_zeros(const Shape& shape, bool requires_grad) {
    return make_tensor(shape, requires_grad);
}

TensorPtr tensor_ones(const Shape& shape, bool requires_grad) {
    return tensor_full(shape, 1.0f, requires_grad);
}

TensorPtr tensor_full(const Shape& shape, float value, bool requires_grad) {
    auto t = make_tensor(shape, requires_grad);
    std::fill(t->data.begin(), t->data.end(), value);
    return t;
}

TensorPtr tensor_uniform(const Shape& shape, float lo, float hi, Rng& rng, bool requires_grad) {
    if (!(lo < hi)) throw Error("tensor_uniform: requires lo < hi");
    auto t = make_tensor(shape, requires_grad);
    for (float& v : t->data) v = rng.uniform(lo, hi);
    return t;
}

TensorPtr tensor_normal(const Shape& shape, float mu, float sigma, Rng& rng, bool requires_grad) {
    if (sigma < 0.0f) throw Error("tensor_normal: requires sigma >= 0");
    auto t = make_tensor(shape, requires_grad);
    for (float& v : t->data) v = rng.normal(mu, sigma);
    return t;
}

TensorPtr tensor_from(const Shape& shape, std::vector<float> values, bool requires_grad) {
    validate_shape(shape);
    if (static_cast<std::int64_t>(values.size()) != shape_numel(shape)) {
        throw ShapeError("tensor_from: " + std::to_string(values.size()) +
                         " values for shape " + shape_str(shape));
    }
    auto t = std::make_shared<Tensor>();
    t->shape = shape;
    t->data = std::move(values);
    t->requires_grad = requires_grad;
    return t;
}

void Tape::record(std::vector<TensorPtr> inputs, TensorPtr output, std::function<void()> fn) {
    nodes_.push_back(TapeNode{std::move(inputs), std::move(output), std::move(fn)});
}

void backward(const TensorPtr& loss, Tape& tape) {
    if (tape.consumed_) throw Error("backward: tape already consumed (tapes are single-use)");
    if (loss->shape != Shape{1}) {
        throw ShapeError("backward: loss must have shape [1], got " + shape_str(loss->shape));
    }
    bool found = false;
    for (const TapeNode& n : tape.nodes_) {
        if (n.output == loss) {
            found = true;
            break;
        }
    }
    if (!found) throw Error("backward: tape does not contain the op that produced the loss");

    loss->ensure_grad();
    loss->grad[0] = 1.0f;
    for (auto it = tape.nodes_.rbegin(); it != tape.nodes_.rend(); ++it) {
        it->backward();
    }
    tape.consumed_ = true;
}

TensorPtr add(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
    check_same_shape(a, b, "add");
    auto out = make_tensor(a->shape, false);
    const std::size_t n = out->data.size();
    for (std::size_t i = 0; i < n; ++i) out->data[i] = a->data[i] + b->data[i];
    if (should_record(tape, {&a, &b})) {
        out->requires_grad = true;
        tape->record({a, b}, out, [a, b, out]() {
            if (out->grad.empty()) return;
            if (a->requires_grad) {
                a->ensure_grad();
                for (std::size_t i = 0; i < out->grad.size(); ++i) a->grad[i] += out->grad[i];
            }
            if (b->requires_grad) {
                b->ensure_grad();
                for (std::size_t i = 0; i < out->grad.size(); ++i) b->grad[i] += out->grad[i];
            }
        });
    }
    return out;
}

TensorPtr sub(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
    check_same_shape(a, b, "sub");
    auto out = make_tensor(a->shape, false);
    const std::size_t n = out->data.size();
    for (std::size_t i = 0; i < n; ++i) out->data[i] = a->data[i] - b->data[i];
    if (should_record(tape, {&a, &b})) {
        out->requires_grad = true;
        tape->record({a, b}, out, [a, b, out]() {
            if (out->grad.empty()) return;
            if (a->requires_grad) {
                a->ensure_grad();
                for (std::size_t i = 0; i < out->grad.size(); ++i) a->grad[i] += out->grad[i];
            }
            if (b->requires_grad) {
                b->ensure_grad();
                for (std::size_t i = 0; i < out->grad.size(); ++i) b->grad[i] -= out->grad[i];
            }
        });
    }
    return out;
}

TensorPtr mul(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
    check_same_shape(a, b, "mul");
    auto out = make_tensor(a->shape, false);
    const std::size_t n = out->data.size();
    for (std::size_t i = 0; i < n; ++i) out->data[i] = a->data[i] * b->data[i];
    if (should_record(tape, {&a, &b})) {
        out->requires_grad = true;
        tape->record({a, b}, out, [a, b, out]() {
            if (out->grad.empty()) return;
            if (a->requires_grad) {
                a->ensure_grad();
                for (std::size_t i = 0; i < out->grad.size(); ++i)
                    a->grad[i] += out->grad[i] * b->data[i];
            }
            if (b->requires_grad) {
                b->ensure_grad();
                for (std::size_t i = 0; i < out->grad.size(); ++i)
                    b->grad[i] += out->grad[i] * a->data[i];
            }
        });
    }
    return out;
}

TensorPtr relu(Tape* tape, const TensorPtr& a) {
    auto out = make_tensor(a->shape, false);
    const std::size_t n = out->data.size();
    for (std::size_t i = 0; i < n; ++i) out->data[i] = a->data[i] > 0.0f ? a->data[i] : 0.0f;
    if (should_record(tape, {&a})) {
        out->requires_grad = true;
        tape->record({a}, out, [a, out]() {
            if (out->grad.empty() || !a->requires_grad) return;
            a->ensure_grad();
            for (std::size_t i = 0; i < out->grad.size(); ++i) {
                if (a->data[i] > 0.0f) a->grad[i] += out->grad[i];
            }
        });
    }
    return out;
}

TensorPtr sigmoid(Tape* tape, const TensorPtr& a) {
    auto out = make_tensor(a->shape, false);
    const std::size_t n = out->data.size();
    for (std::size_t i = 0; i < n; ++i) out->data[i] = sigmoid_scalar(a->data[i]);
    if (should_record(tape, {&a})) {
        out->requires_grad = true;
        tape->record({a}, out, [a, out]() {
            if (out->grad.empty() || !a->requires_grad) return;
            a->ensure_grad();
            for (std::size_t i = 0; i < out->grad.size(); ++i) {
                float s = out->data[i];
                a->grad[i] += out->grad[i] * s * (1.0f - s);
            }
        });
    }
    return out;
}

TensorPtr tanh_op(Tape* tape, const TensorPtr& a) {
    auto out = make_tensor(a->shape, false);
    const std::size_t n = out->data.size();
    for (std::size_t i = 0; i < n; ++i) out->data[i] = std::tanh(a->data[i]);
    if (should_record(tape, {&a})) {
        out->requires_grad = true;
        tape->record({a}, out, [a, out]() {
            if (out->grad.empty() || !a->requires_grad) return;
            a->ensure_grad();
            for (std::size_t i = 0; i < out->grad.size(); ++i) {
                float t = out->data[i];
                a->grad[i] += out->grad[i] * (1.0f - t * t);
            }
        });
    }
    return out;
}

TensorPtr elementwise(Tape* tape, EwOp op, const TensorPtr& a, const TensorPtr& b) {
    const bool binary = (op == EwOp::Add || op == EwOp::Sub || op == EwOp::Mul);
    if (binary && !b) throw Error("elementwise: binary op requires a second operand");
    if (!binary && b) throw Error("elementwise: unary op takes a single operand");
    switch (op) {
        case EwOp::Add: return add(tape, a, b);
        case EwOp::Sub: return sub(tape, a, b);
        case EwOp::Mul: return mul(tape, a, b);
        case EwOp::Relu: return relu(tape, a);
        case EwOp::Sigmoid: return sigmoid(tape, a);
        case EwOp::Tanh: return tanh_op(tape, a);
    }
    throw Error("elementwise: unknown op");
}

TensorPtr matmul(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
    if (a->rank() != 2 || b->rank() != 2) {
        throw ShapeError("matmul: rank-2 tensors required, got " + shape_str(a->shape) + " x " +
                         shape_str(b->shape));
    }
    const int m = a->shape[0], k = a->shape[1];
    const int k2 = b->shape[0], n = b->shape[1];
    if (k != k2) {
        throw ShapeError("matmul: inner dimensions disagree, " + shape_str(a->shape) + " x " +
                         shape_str(b->shape));
    }
    auto out = make_tensor({m, n}, false);
    const float* pa = a->data.data();
    const float* pb = b->data.data();
    float* po = out->data.data();
    for (int i = 0; i < m; ++i) {
        for (int kk = 0; kk < k; ++kk) {
            const float av = pa[i * k + kk];
            const float* brow = pb + kk * n;
            float* orow = po + i * n;
            for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    if (should_record(tape, {&a, &b})) {
        out->requires_grad = true;
        tape->record({a, b}, out, [a, b, out, m, k, n]() {
            if (out->grad.empty()) return;
            const float* g = out->grad.data();
            if (a->requires_grad) {
                a->ensure_grad();
                // dA = g . B^T
                for (int i = 0; i < m; ++i) {
                    for (int j = 0; j < k; ++j) {
                        float acc = 0.0f;
                        const float* grow = g + i * n;
                        const float* brow = b->data.data() + j * n;
                        for (int c = 0; c < n; ++c) acc += grow[c] * brow[c];
                        a->grad[i * k + j] += acc;
                    }
                }
            }
            if (b->requires_grad) {
                b->ensure_grad();
                // dB = A^T . g
                for (int i = 0; i < m; ++i) {
                    const float* grow = g + i * n;
                    for (int j = 0; j < k; ++j) {
                        const float av = a->data[i * k + j];
                        float* brow = b->grad.data() + j * n;
                        for (int c = 0; c < n; ++c) brow[c] += av * grow[c];
                    }
                }
            }
        });
    }
    return out;
}

TensorPtr matvec(Tape* tape, const TensorPtr& a, const TensorPtr& x) {
    if (a->rank() != 2 || x->rank() != 1) {
        throw ShapeError("matvec: need [m,n] x [n], got " + shape_str(a->shape) + " x " +
                         shape_str(x->shape));
    }
    const int m = a->shape[0], n = a->shape[1];
    if (x->shape[0] != n) {
        throw ShapeError("matvec: dimension mismatch " + shape_str(a->shape) + " x " +
                         shape_str(x->shape));
    }
    auto out = make_tensor({m}, false);
    const float* pa = a->data.data();
    const float* px = x->data.data();
    for (int i = 0; i < m; ++i) {
        float acc = 0.0f;
        const float* arow = pa + i * n;
        for (int j = 0; j < n; ++j) acc += arow[j] * px[j];
        out->data[i] = acc;
    }
    if (should_record(tape, {&a, &x})) {
        out->requires_grad = true;
        tape->record({a, x}, out, [a, x, out, m, n]() {
            if (out->grad.empty()) return;
            const float* g = out->grad.data();
            if (a->requires_grad) {
                a->ensure_grad();
                for (int i = 0; i < m; ++i) {
                    const float gv = g[i];
                    if (gv == 0.0f) continue;
                    float* arow = a->grad.data() + i * n;
                    for (int j = 0; j < n; ++j) arow[j] += gv * x->data[j];
                }
            }
            if (x->requires_grad) {
                x->ensure_grad();
                for (int i = 0; i < m; ++i) {
                    const float gv = g[i];
                    if (gv == 0.0f) continue;
                    const float* arow = a->data.data() + i * n;
                    for (int j = 0; j < n; ++j) x->grad[j] += gv * arow[j];
                }
            }
        });
    }
    return out;
}

TensorPtr sum(Tape* tape, const TensorPtr& a) {
    auto out = make_tensor({1}, false);
    double acc = 0.0;
    for (float v : a->data) acc += v;
    out->data[0] = static_cast<float>(acc);
    if (should_record(tape, {&a})) {
        out->requires_grad = true;
        tape->record({a}, out, [a, out]() {
            if (out->grad.empty() || !a->requires_grad) return;
            a->ensure_grad();
            const float g = out->grad[0];
            for (float& v : a->grad) v += g;
        });
    }
    return out;
}

TensorPtr scale(Tape* tape, const TensorPtr& a, float c) {
    auto out = make_tensor(a->shape, false);
    for (std::size_t i = 0; i < a->data.size(); ++i) out->data[i] = a->data[i] * c;
    if (should_record(tape, {&a})) {
        out->requires_grad = true;
        tape->record({a}, out, [a, out, c]() {
            if (out->grad.empty() || !a->requires_grad) return;
            a->ensure_grad();
            for (std::size_t i = 0; i < out->grad.size(); ++i) a->grad[i] += c * out->grad[i];
        });
    }
    return out;
}

TensorPtr flatten(Tape* tape, const TensorPtr& a) {
    auto out = make_tensor({static_cast<int>(a->numel())}, false);
    out->data = a->data;
    if (should_record(tape, {&a})) {
        out->requires_grad = true;
        tape->record({a}, out, [a, out]() {
            if (out->grad.empty() || !a->requires_grad) return;
            a->ensure_grad();
            for (std::size_t i = 0; i < out->grad.size(); ++i) a->grad[i] += out->grad[i];
        });
    }
    return out;
}

TensorPtr finite_difference_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                                 double eps) {
    if (eps <= 0.0) throw Error("finite_difference_grad: eps must be positive");
    auto grad = tensor_zeros(x.shape);
    Tensor work = x;
    for (std::size_t i = 0; i < work.data.size(); ++i) {
        const float orig = work.data[i];
        const float hi = static_cast<float>(static_cast<double>(orig) + eps);
        const float lo = static_cast<float>(static_cast<double>(orig) - eps);
        work.data[i] = hi;
        const double fp = f(work);
        work.data[i] = lo;
        const double fm = f(work);
        work.data[i] = orig;
        // Divide by the realized perturbation, not 2*eps, so float32 rounding
        // of x +- eps does not bias the quotient.
        const double denom = static_cast<double>(hi) - static_cast<double>(lo);
        grad->data[i] = static_cast<float>((fp - fm) / denom);
    }
    return grad;
}

}  // namespace seqdx
