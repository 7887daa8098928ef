// SPDX-License-Identifier: Apache-2.0
#include "seqdx/loss.hpp"

#include <cmath>

namespace seqdx {

namespace {

double clamp_prob(double p) {
    if (p < kProbClamp) return kProbClamp;
    if (p > 1.0 - kProbClamp) return 1.0 - kProbClamp;
    return p;
}

void check_lengths(std::size_t probs, std::size_t labels, std::size_t weights) {
    if (probs != labels || probs != weights) {
        throw ShapeError("weighted_bce: probs/labels/weights lengths disagree (" +
                         std::to_string(probs) + "/" + std::to_string(labels) + "/" +
                         std::to_string(weights) + ")");
    }
}

}  // namespace

ClassWeights ClassWeights::ones(int num_outputs) {
    ClassWeights w;
    w.w_pos.assign(static_cast<std::size_t>(num_outputs), 1.0f);
    w.w_neg.assign(static_cast<std::size_t>(num_outputs), 1.0f);
    w.degenerate.assign(static_cast<std::size_t>(num_outputs), false);
    return w;
}

ClassWeights class_weights(const std::vector<std::vector<int>>& labels) {
    if (labels.empty()) throw EmptyInputError("class_weights: empty label list");
    const std::size_t k = labels.front().size();
    for (const auto& l : labels) {
        if (l.size() != k) throw ShapeError("class_weights: inconsistent label widths");
    }
    ClassWeights w = ClassWeights::ones(static_cast<int>(k));
    for (std::size_t o = 0; o < k; ++o) {
        long pos = 0;
        for (const auto& l : labels) pos += (l[o] != 0);
        const long neg = static_cast<long>(labels.size()) - pos;
        if (pos == 0 || neg == 0) {
            w.degenerate[o] = true;
            continue;
        }
        const double total = static_cast<double>(labels.size());
        w.w_pos[o] = static_cast<float>(2.0 * static_cast<double>(neg) / total);
        w.w_neg[o] = static_cast<float>(2.0 * static_cast<double>(pos) / total);
    }
    return w;
}

double weighted_bce_value(const std::vector<float>& probs, const std::vector<int>& labels,
                          const ClassWeights& weights) {
    check_lengths(probs.size(), labels.size(), weights.w_pos.size());
    const double k = static_cast<double>(probs.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const double p = clamp_prob(static_cast<double>(probs[i]));
        if (labels[i] != 0) {
            acc -= static_cast<double>(weights.w_pos[i]) * std::log(p);
        } else {
            acc -= static_cast<double>(weights.w_neg[i]) * std::log(1.0 - p);
        }
    }
    return acc / k;
}

TensorPtr weighted_bce(Tape* tape, const TensorPtr& probs, const std::vector<int>& labels,
                       const ClassWeights& weights) {
    if (probs->rank() != 1) {
        throw ShapeError("weighted_bce: probs must be rank 1, got " + shape_str(probs->shape));
    }
    check_lengths(probs->data.size(), labels.size(), weights.w_pos.size());

    auto out = tensor_zeros({1});
    out->data[0] = static_cast<float>(weighted_bce_value(probs->data, labels, weights));

    if (tape && probs->requires_grad) {
        out->requires_grad = true;
        auto labels_copy = labels;
        auto w = weights;
        tape->record({probs}, out, [probs, out, labels_copy, w]() {
            if (out->grad.empty()) return;
            probs->ensure_grad();
            const double g = static_cast<double>(out->grad[0]);
            const double k = static_cast<double>(probs->data.size());
            for (std::size_t i = 0; i < probs->data.size(); ++i) {
                const double p = static_cast<double>(probs->data[i]);
                if (p < kProbClamp || p > 1.0 - kProbClamp) continue;  // clamped: zero slope
                double d;
                if (labels_copy[i] != 0) {
                    d = -static_cast<double>(w.w_pos[i]) / p;
                } else {
                    d = static_cast<double>(w.w_neg[i]) / (1.0 - p);
                }
                probs->grad[i] += static_cast<float>(g * d / k);
            }
        });
    }
    return out;
}

}  // namespace seqdx
