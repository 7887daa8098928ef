// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "seqdx/loss.hpp"
#include "seqdx/model.hpp"

namespace seqdx::reference {

/// Double-precision mirrors of the model math, written as plain loops with
/// no tape and no code shared with the float32 implementation. They exist to
/// serve as independent oracles: finite differences evaluated through these
/// are accurate enough to certify float32 autodiff gradients at small
/// coordinate magnitudes.
///
/// `override_slot`/`override_values` substitute one parameter tensor's values
/// (a perturbed copy) without touching the model, which is exactly what a
/// finite-difference probe needs.

using dvec = std::vector<double>;

dvec conv2d_ref(const dvec& in, int ic, int h, int w, const float* weight, const float* bias,
                int oc, int kh, int kw, int stride, int padding);
dvec maxpool2_ref(const dvec& in, int ch, int h, int w, int k);
dvec linear_ref(const dvec& in, const float* w, const float* b, int out_w, int in_w);
double sigmoid_ref(double x);

double sequence_loss(const Model& model, const std::vector<TensorPtr>& images,
                     const std::vector<int>& labels, const ClassWeights& weights,
                     const TensorPtr& override_slot = nullptr,
                     const Tensor* override_values = nullptr);

std::vector<double> sequence_final_probs(const Model& model, const std::vector<TensorPtr>& images,
                                         const TensorPtr& override_slot = nullptr,
                                         const Tensor* override_values = nullptr);

/// Comparison used by every gradient check: relative error over coordinates
/// whose autodiff magnitude clears `coord_floor` (smaller coordinates sit
/// below the oracle's resolution).
struct GradCompare {
    double max_rel = 0.0;
    int compared = 0;
    int skipped = 0;
};

GradCompare compare_grads(const std::vector<float>& autodiff, const std::vector<float>& fd,
                          float coord_floor = 1e-4f);

/// Full check of one tensor's gradient against the central-difference oracle
/// with kink-aware refinement: a coordinate failing `tol` at `eps` is
/// re-probed at eps/10 (finite-difference artifacts from ReLU kinks, pool
/// argmax switches and plain truncation vanish as eps shrinks; a genuinely
/// wrong gradient keeps failing). `f` should evaluate in double precision.
struct GradCheckResult {
    double max_rel = 0.0;
    int compared = 0;
    int skipped = 0;
    int reprobed = 0;
};

GradCheckResult gradient_check(const std::function<double(const Tensor&)>& f, const Tensor& x,
                               const std::vector<float>& autodiff, double eps, double tol,
                               float coord_floor = 1e-4f);

}  // namespace seqdx::reference
