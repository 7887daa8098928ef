// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "seqdx/layers.hpp"
#include "seqdx/tensor.hpp"

namespace seqdx {

/// Architecture description. Encoder stages are conv(3x3, stride 1, pad 1)
/// -> ReLU -> maxpool(2) per channel entry; then FC layers (ReLU between
/// them, none after the last); then an LSTM cell; then a linear head with
/// one sigmoid per output.
struct ModelConfig {
    int image_size = 32;
    std::vector<int> encoder_channels = {8, 16, 32};
    std::vector<int> fc_sizes = {512, 512};
    int lstm_hidden = 600;
    int num_outputs = 1;
    int freeze_first_n = 0;  // conv layers first, then FC layers, forward order

    void validate() const;

    int pool_stages() const { return static_cast<int>(encoder_channels.size()); }
    /// Spatial side after all pooling stages.
    int final_spatial() const;
    /// Width of the flattened conv output.
    int flatten_width() const;
    /// Width of the feature vector the LSTM consumes.
    int feature_width() const { return fc_sizes.empty() ? flatten_width() : fc_sizes.back(); }

    bool operator==(const ModelConfig&) const = default;
};

/// The assembled many-to-one model. Copies are shallow: they share parameter
/// tensors with the original (use checkpoint round-trip for a deep clone).
struct Model {
    ModelConfig config;
    std::vector<Conv2dLayer> convs;
    std::vector<LinearLayer> fcs;
    LstmParams lstm;
    LinearLayer head;

    /// Parameters in the pinned serialization order.
    std::vector<std::pair<std::string, TensorPtr>> named_parameters() const;
    std::vector<TensorPtr> parameters() const;
    std::int64_t parameter_count() const;
    void zero_grads() const;
};

/// Per-step sigmoid outputs of one sequence pass. final_probs equals the
/// last row of per_step_probs; final_prob_tensor is the same values still
/// attached to the tape (when one was supplied) for loss construction.
/// final_hidden is h_n, kept so callers can verify that the prediction is a
/// function of the last hidden state alone.
struct SequencePrediction {
    std::vector<std::vector<float>> per_step_probs;
    std::vector<float> final_probs;
    TensorPtr final_prob_tensor;
    TensorPtr final_hidden;
};

/// Deterministic for a fixed (config, seed); freezes the first
/// freeze_first_n encoder layers (clamped to the layer count).
Model init_model(const ModelConfig& config, std::uint64_t seed);

/// Encoder s(x): [3, s, s] image to feature vector.
TensorPtr encode_image(Tape* tape, const Model& model, const TensorPtr& image);

/// Run the LSTM over the whole (variable-length) sequence from a zero state
/// and emit a probability vector at every step. Only the caller decides what
/// to do with the non-final steps; the loss uses the final one.
SequencePrediction forward_sequence(Tape* tape, const Model& model,
                                    const std::vector<TensorPtr>& images);

}  // namespace seqdx
