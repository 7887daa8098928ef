// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "seqdx/tensor.hpp"

namespace seqdx {

/// 2-D convolution layer. weight is [out_ch, in_ch, kh, kw], bias [out_ch].
/// Freezing a layer removes its parameters from every backward pass.
struct Conv2dLayer {
    TensorPtr weight;
    TensorPtr bias;
    int stride = 1;
    int padding = 0;
    bool frozen = false;

    void set_frozen(bool f) {
        frozen = f;
        weight->requires_grad = !f;
        bias->requires_grad = !f;
    }
};

/// Fully connected layer: weight [out, in], bias [out].
struct LinearLayer {
    TensorPtr weight;
    TensorPtr bias;
    bool frozen = false;

    void set_frozen(bool f) {
        frozen = f;
        weight->requires_grad = !f;
        bias->requires_grad = !f;
    }
};

/// Parameters of one LSTM cell with hidden size H and input size D:
/// i = sigmoid(W_i x + U_i h + b_i),  f = sigmoid(W_f x + U_f h + b_f),
/// o = sigmoid(W_o x + U_o h + b_o),  g = tanh(W_g x + U_g h + b_g),
/// c' = f*c + i*g,  h' = o*tanh(c').
struct LstmParams {
    int hidden_size = 0;
    int input_size = 0;
    TensorPtr W_i, W_f, W_o, W_g;  // [H, D]
    TensorPtr U_i, U_f, U_o, U_g;  // [H, H]
    TensorPtr b_i, b_f, b_o, b_g;  // [H]

    std::vector<TensorPtr> parameters() const {
        return {W_i, W_f, W_o, W_g, U_i, U_f, U_o, U_g, b_i, b_f, b_o, b_g};
    }
};

/// Recurrent state carried across timesteps.
struct LstmState {
    TensorPtr h;
    TensorPtr c;
};

Conv2dLayer conv2d_init(int out_ch, int in_ch, int kh, int kw, int stride, int padding, Rng& rng);
LinearLayer linear_init(int out, int in, Rng& rng);
/// Forget-gate bias starts at 1, all other biases at 0; gate weights are
/// uniform in [-1/sqrt(H), 1/sqrt(H)].
LstmParams lstm_init(int hidden_size, int input_size, Rng& rng);
LstmState lstm_zero_state(int hidden_size);

/// Cross-correlation convolution over a [in_ch, h, w] input. Output extents
/// are (h + 2*padding - kh)/stride + 1 by the analogous width formula.
TensorPtr conv2d_forward(Tape* tape, const Conv2dLayer& layer, const TensorPtr& input);

/// k x k max pooling with stride k; h and w must be divisible by k. The
/// gradient routes to the first (row-major) argmax of each window.
TensorPtr maxpool2d(Tape* tape, const TensorPtr& input, int k);

/// weight . input + bias for a rank-1 input.
TensorPtr linear_forward(Tape* tape, const LinearLayer& layer, const TensorPtr& input);

/// One LSTM step. The returned state is fresh; the old state is not modified.
LstmState lstm_cell_step(Tape* tape, const LstmParams& params, const TensorPtr& x,
                         const LstmState& state);

}  // namespace seqdx
