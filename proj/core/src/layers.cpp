// SPDX-License-Identifier: Apache-2.0
#include "seqdx/layers.hpp"

#include <cmath>
#include <limits>

namespace seqdx {

namespace {

// First valid output index o such that o*stride - padding + k >= 0.
int out_lo(int padding, int k, int stride) {
    int num = padding - k;
    if (num <= 0) return 0;
    return (num + stride - 1) / stride;
}

// Last valid output index o such that o*stride - padding + k <= limit-1.
int out_hi(int padding, int k, int stride, int limit, int out_extent) {
    int num = limit - 1 + padding - k;
    if (num < 0) return -1;
    int hi = num / stride;
    return hi < out_extent - 1 ? hi : out_extent - 1;
}

}  // namespace

Conv2dLayer conv2d_init(int out_ch, int in_ch, int kh, int kw, int stride, int padding, Rng& rng) {
    // He-style uniform bound over the receptive field fan-in.
    const float bound = std::sqrt(6.0f / static_cast<float>(in_ch * kh * kw));
    Conv2dLayer layer;
    layer.weight = tensor_uniform({out_ch, in_ch, kh, kw}, -bound, bound, rng, true);
    layer.bias = tensor_zeros({out_ch}, true);
    layer.stride = stride;
    layer.padding = padding;
    return layer;
}

LinearLayer linear_init(int out, int in, Rng& rng) {
    const float bound = std::sqrt(6.0f / static_cast<float>(in));
    LinearLayer layer;
    layer.weight = tensor_uniform({out, in}, -bound, bound, rng, true);
    layer.bias = tensor_zeros({out}, true);
    return layer;
}

LstmParams lstm_init(int hidden_size, int input_size, Rng& rng) {
    const float bound = 1.0f / std::sqrt(static_cast<float>(hidden_size));
    LstmParams p;
    p.hidden_size = hidden_size;
    p.input_size = input_size;
    auto wmat = [&]() { return tensor_uniform({hidden_size, input_size}, -bound, bound, rng, true); };
    auto umat = [&]() { return tensor_uniform({hidden_size, hidden_size}, -bound, bound, rng, true); };
    p.W_i = wmat();
    p.W_f = wmat();
    p.W_o = wmat();
    p.W_g = wmat();
    p.U_i = umat();
    p.U_f = umat();
    p.U_o = umat();
    p.U_g = umat();
    p.b_i = tensor_zeros({hidden_size}, true);
    p.b_f = tensor_full({hidden_size}, 1.0f, true);
    p.b_o = tensor_zeros({hidden_size}, true);
    p.b_g = tensor_zeros({hidden_size}, true);
    return p;
}

LstmState lstm_zero_state(int hidden_size) {
    return LstmState{tensor_zeros({hidden_size}), tensor_zeros({hidden_size})};
}

TensorPtr conv2d_forward(Tape* tape, const Conv2dLayer& layer, const TensorPtr& input) {
    const TensorPtr& w = layer.weight;
    if (w->rank() != 4) throw ShapeError("conv2d: weight must be rank 4");
    if (input->rank() != 3) {
        throw ShapeError("conv2d: input must be [in_ch, h, w], got " + shape_str(input->shape));
    }
    const int oc = w->shape[0], ic = w->shape[1], kh = w->shape[2], kw = w->shape[3];
    const int in_ch = input->shape[0], h = input->shape[1], win = input->shape[2];
    const int s = layer.stride, p = layer.padding;
    if (in_ch != ic) {
        throw ShapeError("conv2d: input has " + std::to_string(in_ch) + " channels, layer expects " +
                         std::to_string(ic));
    }
    if (h + 2 * p < kh || win + 2 * p < kw) {
        throw ShapeError("conv2d: kernel exceeds padded input extent");
    }
    const int oh = (h + 2 * p - kh) / s + 1;
    const int ow = (win + 2 * p - kw) / s + 1;
    if (oh <= 0 || ow <= 0) throw ShapeError("conv2d: non-positive output extent");

    auto out = tensor_zeros({oc, oh, ow});
    const float* in = input->data.data();
    float* o = out->data.data();
    for (int c = 0; c < oc; ++c) {
        const float bv = layer.bias->data[c];
        float* plane = o + static_cast<std::size_t>(c) * oh * ow;
        for (int i = 0; i < oh * ow; ++i) plane[i] = bv;
    }
    for (int c = 0; c < oc; ++c) {
        float* oplane = o + static_cast<std::size_t>(c) * oh * ow;
        for (int ci = 0; ci < ic; ++ci) {
            const float* iplane = in + static_cast<std::size_t>(ci) * h * win;
            const float* wplane = w->data.data() + (static_cast<std::size_t>(c) * ic + ci) * kh * kw;
            for (int ky = 0; ky < kh; ++ky) {
                const int oy0 = out_lo(p, ky, s);
                const int oy1 = out_hi(p, ky, s, h, oh);
                for (int kx = 0; kx < kw; ++kx) {
                    const float wv = wplane[ky * kw + kx];
                    if (wv == 0.0f) continue;
                    const int ox0 = out_lo(p, kx, s);
                    const int ox1 = out_hi(p, kx, s, win, ow);
                    for (int oy = oy0; oy <= oy1; ++oy) {
                        const int iy = oy * s - p + ky;
                        const float* irow = iplane + static_cast<std::size_t>(iy) * win;
                        float* orow = oplane + static_cast<std::size_t>(oy) * ow;
                        if (s == 1) {
                            const int ixoff = kx - p;
                            for (int ox = ox0; ox <= ox1; ++ox) orow[ox] += wv * irow[ox + ixoff];
                        } else {
                            for (int ox = ox0; ox <= ox1; ++ox)
                                orow[ox] += wv * irow[ox * s - p + kx];
                        }
                    }
                }
            }
        }
    }

    const bool wants_w = !layer.frozen && w->requires_grad;
    const bool wants_b = !layer.frozen && layer.bias->requires_grad;
    if (tape && (wants_w || wants_b || input->requires_grad)) {
        out->requires_grad = true;
        TensorPtr weight = w, bias = layer.bias;
        tape->record({weight, bias, input}, out,
                     [weight, bias, input, out, oc, ic, kh, kw, h, win, oh, ow, s, p]() {
            if (out->grad.empty()) return;
            const float* g = out->grad.data();
            if (bias->requires_grad) {
                bias->ensure_grad();
                for (int c = 0; c < oc; ++c) {
                    const float* plane = g + static_cast<std::size_t>(c) * oh * ow;
                    float acc = 0.0f;
                    for (int i = 0; i < oh * ow; ++i) acc += plane[i];
                    bias->grad[c] += acc;
                }
            }
            if (weight->requires_grad) {
                weight->ensure_grad();
                for (int c = 0; c < oc; ++c) {
                    const float* gplane = g + static_cast<std::size_t>(c) * oh * ow;
                    for (int ci = 0; ci < ic; ++ci) {
                        const float* iplane =
                            input->data.data() + static_cast<std::size_t>(ci) * h * win;
                        float* wplane =
                            weight->grad.data() + (static_cast<std::size_t>(c) * ic + ci) * kh * kw;
                        for (int ky = 0; ky < kh; ++ky) {
                            const int oy0 = out_lo(p, ky, s);
                            const int oy1 = out_hi(p, ky, s, h, oh);
                            for (int kx = 0; kx < kw; ++kx) {
                                const int ox0 = out_lo(p, kx, s);
                                const int ox1 = out_hi(p, kx, s, win, ow);
                                float acc = 0.0f;
                                for (int oy = oy0; oy <= oy1; ++oy) {
                                    const int iy = oy * s - p + ky;
                                    const float* irow =
                                        iplane + static_cast<std::size_t>(iy) * win;
                                    const float* grow =
                                        gplane + static_cast<std::size_t>(oy) * ow;
                                    if (s == 1) {
                                        const int ixoff = kx - p;
                                        for (int ox = ox0; ox <= ox1; ++ox)
                                            acc += grow[ox] * irow[ox + ixoff];
                                    } else {
                                        for (int ox = ox0; ox <= ox1; ++ox)
                                            acc += grow[ox] * irow[ox * s - p + kx];
                                    }
                                }
                                wplane[ky * kw + kx] += acc;
                            }
                        }
                    }
                }
            }
            if (input->requires_grad) {
                input->ensure_grad();
                for (int c = 0; c < oc; ++c) {
                    const float* gplane = g + static_cast<std::size_t>(c) * oh * ow;
                    for (int ci = 0; ci < ic; ++ci) {
                        float* iplane =
                            input->grad.data() + static_cast<std::size_t>(ci) * h * win;
                        const float* wplane =
                            weight->data.data() + (static_cast<std::size_t>(c) * ic + ci) * kh * kw;
                        for (int ky = 0; ky < kh; ++ky) {
                            const int oy0 = out_lo(p, ky, s);
                            const int oy1 = out_hi(p, ky, s, h, oh);
                            for (int kx = 0; kx < kw; ++kx) {
                                const float wv = wplane[ky * kw + kx];
                                if (wv == 0.0f) continue;
                                const int ox0 = out_lo(p, kx, s);
                                const int ox1 = out_hi(p, kx, s, win, ow);
                                for (int oy = oy0; oy <= oy1; ++oy) {
                                    const int iy = oy * s - p + ky;
                                    float* irow = iplane + static_cast<std::size_t>(iy) * win;
                                    const float* grow =
                                        gplane + static_cast<std::size_t>(oy) * ow;
                                    if (s == 1) {
                                        const int ixoff = kx - p;
                                        for (int ox = ox0; ox <= ox1; ++ox)
                                            irow[ox + ixoff] += wv * grow[ox];
                                    } else {
                                        for (int ox = ox0; ox <= ox1; ++ox)
                                            irow[ox * s - p + kx] += wv * grow[ox];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        });
    }
    return out;
}

TensorPtr maxpool2d(Tape* tape, const TensorPtr& input, int k) {
    if (input->rank() != 3) {
        throw ShapeError("maxpool2d: input must be [ch, h, w], got " + shape_str(input->shape));
    }
    if (k < 1) throw ShapeError("maxpool2d: k must be >= 1");
    const int ch = input->shape[0], h = input->shape[1], w = input->shape[2];
    if (h % k != 0 || w % k != 0) {
        throw ShapeError("maxpool2d: extent " + std::to_string(h) + "x" + std::to_string(w) +
                         " not divisible by " + std::to_string(k));
    }
    const int oh = h / k, ow = w / k;
    auto out = tensor_zeros({ch, oh, ow});
    auto argmax = std::make_shared<std::vector<int>>(static_cast<std::size_t>(ch) * oh * ow);
    const float* in = input->data.data();
    for (int c = 0; c < ch; ++c) {
        const float* iplane = in + static_cast<std::size_t>(c) * h * w;
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                float best = -std::numeric_limits<float>::infinity();
                int best_idx = 0;
                for (int dy = 0; dy < k; ++dy) {
                    const int iy = oy * k + dy;
                    for (int dx = 0; dx < k; ++dx) {
                        const int idx = iy * w + ox * k + dx;
                        if (iplane[idx] > best) {  // strict: first occurrence wins ties
                            best = iplane[idx];
                            best_idx = idx;
                        }
                    }
                }
                const std::size_t o = (static_cast<std::size_t>(c) * oh + oy) * ow + ox;
                out->data[o] = best;
                (*argmax)[o] = best_idx;
            }
        }
    }
    if (tape && input->requires_grad) {
        out->requires_grad = true;
        tape->record({input}, out, [input, out, argmax, ch, h, w, oh, ow]() {
            if (out->grad.empty()) return;
            input->ensure_grad();
            for (int c = 0; c < ch; ++c) {
                float* iplane = input->grad.data() + static_cast<std::size_t>(c) * h * w;
                const std::size_t base = static_cast<std::size_t>(c) * oh * ow;
                for (int i = 0; i < oh * ow; ++i) {
                    iplane[(*argmax)[base + i]] += out->grad[base + i];
                }
            }
        });
    }
    return out;
}

TensorPtr linear_forward(Tape* tape, const LinearLayer& layer, const TensorPtr& input) {
    if (input->rank() != 1) {
        throw ShapeError("linear: input must be rank 1, got " + shape_str(input->shape));
    }
    if (input->shape[0] != layer.weight->shape[1]) {
        throw ShapeError("linear: input length " + std::to_string(input->shape[0]) +
                         " does not match weight " + shape_str(layer.weight->shape));
    }
    TensorPtr y = matvec(tape, layer.weight, input);
    return add(tape, y, layer.bias);
}

LstmState lstm_cell_step(Tape* tape, const LstmParams& p, const TensorPtr& x,
                         const LstmState& state) {
    if (x->rank() != 1 || x->shape[0] != p.input_size) {
        throw ShapeError("lstm_cell_step: input must be [" + std::to_string(p.input_size) +
                         "], got " + shape_str(x->shape));
    }
    if (state.h->shape != Shape{p.hidden_size} || state.c->shape != Shape{p.hidden_size}) {
        throw ShapeError("lstm_cell_step: state does not match hidden size " +
                         std::to_string(p.hidden_size));
    }
    auto gate = [&](const TensorPtr& W, const TensorPtr& U, const TensorPtr& b) {
        return add(tape, add(tape, matvec(tape, W, x), matvec(tape, U, state.h)), b);
    };
    TensorPtr i = sigmoid(tape, gate(p.W_i, p.U_i, p.b_i));
    TensorPtr f = sigmoid(tape, gate(p.W_f, p.U_f, p.b_f));
    TensorPtr o = sigmoid(tape, gate(p.W_o, p.U_o, p.b_o));
    TensorPtr g = tanh_op(tape, gate(p.W_g, p.U_g, p.b_g));
    TensorPtr c_next = add(tape, mul(tape, f, state.c), mul(tape, i, g));
    TensorPtr h_next = mul(tape, o, tanh_op(tape, c_next));
    return LstmState{h_next, c_next};
}

}  // namespace seqdx
