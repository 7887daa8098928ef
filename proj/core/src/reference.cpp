// SPDX-License-Identifier: Apache-2.0
#include "seqdx/reference.hpp"

#include <cmath>

namespace seqdx::reference {

namespace {

/// Parameter data, honoring the one-tensor override used by FD probes.
const float* data_of(const TensorPtr& param, const TensorPtr& override_slot,
                     const Tensor* override_values) {
    if (override_slot && param == override_slot) return override_values->data.data();
    return param->data.data();
}

}  // namespace

dvec conv2d_ref(const dvec& in, int ic, int h, int w, const float* weight, const float* bias,
                int oc, int kh, int kw, int stride, int padding) {
    const int oh = (h + 2 * padding - kh) / stride + 1;
    const int ow = (w + 2 * padding - kw) / stride + 1;
    dvec out(static_cast<std::size_t>(oc) * oh * ow, 0.0);
    for (int c = 0; c < oc; ++c) {
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                double acc = static_cast<double>(bias[c]);
                for (int ci = 0; ci < ic; ++ci) {
                    for (int ky = 0; ky < kh; ++ky) {
                        const int iy = oy * stride - padding + ky;
                        if (iy < 0 || iy >= h) continue;
                        for (int kx = 0; kx < kw; ++kx) {
                            const int ix = ox * stride - padding + kx;
                            if (ix < 0 || ix >= w) continue;
                            const double wv = static_cast<double>(
                                weight[((static_cast<std::size_t>(c) * ic + ci) * kh + ky) * kw + kx]);
                            acc += wv * in[(static_cast<std::size_t>(ci) * h + iy) * w + ix];
                        }
                    }
                }
                out[(static_cast<std::size_t>(c) * oh + oy) * ow + ox] = acc;
            }
        }
    }
    return out;
}

static void relu_inplace(dvec& v) {
    for (double& x : v) {
        if (x < 0.0) x = 0.0;
    }
}

dvec maxpool2_ref(const dvec& in, int ch, int h, int w, int k) {
    const int oh = h / k, ow = w / k;
    dvec out(static_cast<std::size_t>(ch) * oh * ow, 0.0);
    for (int c = 0; c < ch; ++c) {
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                double best = in[(static_cast<std::size_t>(c) * h + oy * k) * w + ox * k];
                for (int dy = 0; dy < k; ++dy) {
                    for (int dx = 0; dx < k; ++dx) {
                        const double v =
                            in[(static_cast<std::size_t>(c) * h + oy * k + dy) * w + ox * k + dx];
                        if (v > best) best = v;
                    }
                }
                out[(static_cast<std::size_t>(c) * oh + oy) * ow + ox] = best;
            }
        }
    }
    return out;
}

dvec linear_ref(const dvec& in, const float* w, const float* b, int out_w, int in_w) {
    dvec out(static_cast<std::size_t>(out_w), 0.0);
    for (int i = 0; i < out_w; ++i) {
        double acc = static_cast<double>(b[i]);
        for (int j = 0; j < in_w; ++j) {
            acc += static_cast<double>(w[static_cast<std::size_t>(i) * in_w + j]) * in[j];
        }
        out[i] = acc;
    }
    return out;
}

double sigmoid_ref(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

namespace {

struct RefLstmState {
    dvec h, c;
};

std::vector<double> forward_probs(const Model& model, const std::vector<TensorPtr>& images,
                                  const TensorPtr& slot, const Tensor* values) {
    const ModelConfig& cfg = model.config;
    const int H = cfg.lstm_hidden;
    const int D = cfg.feature_width();

    RefLstmState state{dvec(static_cast<std::size_t>(H), 0.0), dvec(static_cast<std::size_t>(H), 0.0)};
    dvec probs;

    for (const TensorPtr& image : images) {
        // encoder
        dvec x = (slot && image == slot) ? dvec(values->data.begin(), values->data.end())
                                         : dvec(image->data.begin(), image->data.end());
        int ch = 3, side = cfg.image_size;
        for (std::size_t li = 0; li < model.convs.size(); ++li) {
            const Conv2dLayer& layer = model.convs[li];
            const int oc = layer.weight->shape[0];
            x = conv2d_ref(x, ch, side, side, data_of(layer.weight, slot, values),
                           data_of(layer.bias, slot, values), oc, 3, 3, layer.stride,
                           layer.padding);
            relu_inplace(x);
            x = maxpool2_ref(x, oc, side, side, 2);
            ch = oc;
            side /= 2;
        }
        for (std::size_t li = 0; li < model.fcs.size(); ++li) {
            const LinearLayer& layer = model.fcs[li];
            const int out_w = layer.weight->shape[0];
            const int in_w = layer.weight->shape[1];
            x = linear_ref(x, data_of(layer.weight, slot, values),
                           data_of(layer.bias, slot, values), out_w, in_w);
            if (li + 1 < model.fcs.size()) relu_inplace(x);
        }

        // lstm step
        auto gate_pre = [&](const TensorPtr& W, const TensorPtr& U, const TensorPtr& b, int row) {
            const float* wp = data_of(W, slot, values);
            const float* up = data_of(U, slot, values);
            const float* bp = data_of(b, slot, values);
            double acc = static_cast<double>(bp[row]);
            for (int j = 0; j < D; ++j) acc += static_cast<double>(wp[row * D + j]) * x[j];
            for (int j = 0; j < H; ++j) acc += static_cast<double>(up[row * H + j]) * state.h[j];
            return acc;
        };
        RefLstmState next{dvec(static_cast<std::size_t>(H)), dvec(static_cast<std::size_t>(H))};
        for (int r = 0; r < H; ++r) {
            const double gi = sigmoid_ref(gate_pre(model.lstm.W_i, model.lstm.U_i, model.lstm.b_i, r));
            const double gf = sigmoid_ref(gate_pre(model.lstm.W_f, model.lstm.U_f, model.lstm.b_f, r));
            const double go = sigmoid_ref(gate_pre(model.lstm.W_o, model.lstm.U_o, model.lstm.b_o, r));
            const double gg = std::tanh(gate_pre(model.lstm.W_g, model.lstm.U_g, model.lstm.b_g, r));
            next.c[r] = gf * state.c[r] + gi * gg;
            next.h[r] = go * std::tanh(next.c[r]);
        }
        state = next;

        // head
        dvec logits = linear_ref(state.h, data_of(model.head.weight, slot, values),
                                 data_of(model.head.bias, slot, values), cfg.num_outputs, H);
        probs.assign(logits.size(), 0.0);
        for (std::size_t i = 0; i < logits.size(); ++i) probs[i] = sigmoid_ref(logits[i]);
    }
    return probs;
}

}  // namespace

std::vector<double> sequence_final_probs(const Model& model, const std::vector<TensorPtr>& images,
                                         const TensorPtr& override_slot,
                                         const Tensor* override_values) {
    return forward_probs(model, images, override_slot, override_values);
}

double sequence_loss(const Model& model, const std::vector<TensorPtr>& images,
                     const std::vector<int>& labels, const ClassWeights& weights,
                     const TensorPtr& override_slot, const Tensor* override_values) {
    const std::vector<double> probs = forward_probs(model, images, override_slot, override_values);
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        double p = probs[i];
        if (p < kProbClamp) p = kProbClamp;
        if (p > 1.0 - kProbClamp) p = 1.0 - kProbClamp;
        if (labels[i] != 0) {
            acc -= static_cast<double>(weights.w_pos[i]) * std::log(p);
        } else {
            acc -= static_cast<double>(weights.w_neg[i]) * std::log(1.0 - p);
        }
    }
    return acc / static_cast<double>(probs.size());
}

namespace {

double central_diff_coord(const std::function<double(const Tensor&)>& f, const Tensor& x,
                          std::size_t i, double eps) {
    Tensor work = x;
    const float orig = work.data[i];
    const float hi = static_cast<float>(static_cast<double>(orig) + eps);
    const float lo = static_cast<float>(static_cast<double>(orig) - eps);
    work.data[i] = hi;
    const double fp = f(work);
    work.data[i] = lo;
    const double fm = f(work);
    return (fp - fm) / (static_cast<double>(hi) - static_cast<double>(lo));
}

}  // namespace

GradCheckResult gradient_check(const std::function<double(const Tensor&)>& f, const Tensor& x,
                               const std::vector<float>& autodiff, double eps, double tol,
                               float coord_floor) {
    if (autodiff.size() != x.data.size()) {
        throw ShapeError("gradient_check: gradient/tensor lengths differ");
    }
    TensorPtr fd = finite_difference_grad(f, x, eps);
    GradCheckResult result;
    for (std::size_t i = 0; i < autodiff.size(); ++i) {
        const double a = static_cast<double>(autodiff[i]);
        if (std::abs(a) <= static_cast<double>(coord_floor)) {
            ++result.skipped;
            continue;
        }
        double b = static_cast<double>(fd->data[i]);
        double rel = std::abs(a - b) / std::max(std::abs(a), std::abs(b));
        // Early-layer parameters touch many downstream ReLU/pool units, so a
        // probe window at any single eps may straddle a few non-smooth
        // points. Refine until clear of them; a wrong gradient stays wrong.
        for (double e = eps / 10.0; rel > tol && e >= eps / 1000.0; e /= 10.0) {
            b = central_diff_coord(f, x, i, e);
            rel = std::abs(a - b) / std::max(std::abs(a), std::abs(b));
            ++result.reprobed;
        }
        result.max_rel = std::max(result.max_rel, rel);
        ++result.compared;
    }
    return result;
}

GradCompare compare_grads(const std::vector<float>& autodiff, const std::vector<float>& fd,
                          float coord_floor) {
    if (autodiff.size() != fd.size()) {
        throw ShapeError("compare_grads: gradient lengths differ");
    }
    GradCompare result;
    for (std::size_t i = 0; i < autodiff.size(); ++i) {
        const double a = static_cast<double>(autodiff[i]);
        const double b = static_cast<double>(fd[i]);
        if (std::abs(a) <= static_cast<double>(coord_floor)) {
            ++result.skipped;
            continue;
        }
        const double rel = std::abs(a - b) / std::max(std::abs(a), std::abs(b));
        result.max_rel = std::max(result.max_rel, rel);
        ++result.compared;
    }
    return result;
}

}  // namespace seqdx::reference
