// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "seqdx/errors.hpp"
#include "seqdx/rng.hpp"

namespace seqdx {

using Shape = std::vector<int>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major float32 tensor. Tensors participating in autodiff are
/// identified by pointer, so they are always handled through TensorPtr.
struct Tensor {
    Shape shape;
    std::vector<float> data;
    bool requires_grad = false;
    std::vector<float> grad;  // empty until a backward pass touches this tensor

    std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
    int rank() const { return static_cast<int>(shape.size()); }

    /// Allocate (zero-filled) gradient storage if absent.
    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0f);
    }

    void zero_grad() {
        if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0f);
    }
};

using TensorPtr = std::shared_ptr<Tensor>;

// Construction. All of these validate the shape (non-empty, all dims >= 1).
TensorPtr tensor_zeros(const Shape& shape, bool requires_grad = false);
TensorPtr tensor_ones(const Shape& shape, bool requires_grad = false);
TensorPtr tensor_full(const Shape& shape, float value, bool requires_grad = false);
TensorPtr tensor_uniform(const Shape& shape, float lo, float hi, Rng& rng,
                         bool requires_grad = false);
TensorPtr tensor_normal(const Shape& shape, float mu, float sigma, Rng& rng,
                        bool requires_grad = false);
TensorPtr tensor_from(const Shape& shape, std::vector<float> values, bool requires_grad = false);

/// One recorded operation: inputs, output, and the rule that scatters
/// d(loss)/d(output) into the inputs' gradients.
struct TapeNode {
    std::vector<TensorPtr> inputs;
    TensorPtr output;
    std::function<void()> backward;
};

/// Dynamically built computation tape. Nodes are appended in creation order;
/// backward() visits them exactly once, in reverse. A tape is single-use:
/// build a graph, run backward once, then discard (parameter gradients
/// accumulate across tapes until explicitly zeroed).
class Tape {
public:
    void record(std::vector<TensorPtr> inputs, TensorPtr output, std::function<void()> fn);

    std::size_t size() const { return nodes_.size(); }
    bool consumed() const { return consumed_; }
    const std::vector<TapeNode>& nodes() const { return nodes_; }

    friend void backward(const TensorPtr& loss, Tape& tape);

private:
    std::vector<TapeNode> nodes_;
    bool consumed_ = false;
};

/// Reverse-mode sweep from a scalar loss (shape must be exactly [1]).
/// Gradients add into every requires_grad tensor reachable from the loss.
void backward(const TensorPtr& loss, Tape& tape);

// Elementwise ops. Binary ops require exactly matching shapes. Passing a null
// tape (or inputs that do not require grad) skips recording.
TensorPtr add(Tape* tape, const TensorPtr& a, const TensorPtr& b);
TensorPtr sub(Tape* tape, const TensorPtr& a, const TensorPtr& b);
TensorPtr mul(Tape* tape, const TensorPtr& a, const TensorPtr& b);
TensorPtr relu(Tape* tape, const TensorPtr& a);
TensorPtr sigmoid(Tape* tape, const TensorPtr& a);
TensorPtr tanh_op(Tape* tape, const TensorPtr& a);

enum class EwOp { Add, Sub, Mul, Relu, Sigmoid, Tanh };

/// Dispatching front-end over the elementwise ops; `b` must be null for the
/// unary ops and non-null for the binary ones.
TensorPtr elementwise(Tape* tape, EwOp op, const TensorPtr& a, const TensorPtr& b = nullptr);

/// Matrix product [m,k] x [k,n] -> [m,n].
TensorPtr matmul(Tape* tape, const TensorPtr& a, const TensorPtr& b);

/// Matrix-vector product [m,n] x [n] -> [m].
TensorPtr matvec(Tape* tape, const TensorPtr& a, const TensorPtr& x);

/// Sum of all entries -> scalar [1].
TensorPtr sum(Tape* tape, const TensorPtr& a);

/// Multiply every entry by a compile-time constant.
TensorPtr scale(Tape* tape, const TensorPtr& a, float c);

/// Copy into a rank-1 tensor [numel]; gradient passes through unchanged.
TensorPtr flatten(Tape* tape, const TensorPtr& a);

/// Central-difference gradient oracle:
///   g_i = (f(x + eps*e_i) - f(x - eps*e_i)) / (2*eps).
/// `f` must be deterministic; it receives a perturbed copy of `x` and returns
/// the scalar as double (callers choose the evaluation precision of `f`).
TensorPtr finite_difference_grad(const std::function<double(const Tensor&)>& f,
                                 const Tensor& x, double eps);

}  // namespace seqdx
