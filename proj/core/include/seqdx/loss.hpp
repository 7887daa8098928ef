// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "seqdx/tensor.hpp"

namespace seqdx {

/// Per-output positive/negative class weights. The balancing scheme keeps
/// w_pos + w_neg == 2 per output, so the loss scale stays comparable to
/// unweighted BCE; w_pos == w_neg == 1 is exactly unweighted.
struct ClassWeights {
    std::vector<float> w_pos;
    std::vector<float> w_neg;
    std::vector<bool> degenerate;  // true where one class was absent (weights fell back to 1)

    static ClassWeights ones(int num_outputs);
    int num_outputs() const { return static_cast<int>(w_pos.size()); }
};

/// Class-balancing weights from label prevalence: with P positives and N
/// negatives per output, w_pos = 2N/(P+N) and w_neg = 2P/(P+N), so the rarer
/// class gets the larger weight. Outputs with P == 0 or N == 0 fall back to
/// 1/1 and are flagged.
ClassWeights class_weights(const std::vector<std::vector<int>>& labels);

/// Probabilities are clamped to [kProbClamp, 1 - kProbClamp] before the log.
inline constexpr double kProbClamp = 1e-6;

/// Mean over outputs of -[w_pos*y*log(p) + w_neg*(1-y)*log(1-p)], computed
/// in double. This is the value path shared by the tensor op below.
double weighted_bce_value(const std::vector<float>& probs, const std::vector<int>& labels,
                          const ClassWeights& weights);

/// Tape op version, differentiable w.r.t. probs (gradient is zero in the
/// clamped region).
TensorPtr weighted_bce(Tape* tape, const TensorPtr& probs, const std::vector<int>& labels,
                       const ClassWeights& weights);

}  // namespace seqdx
