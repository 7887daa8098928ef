// SPDX-License-Identifier: Apache-2.0
#include "seqdx/model.hpp"

#include <algorithm>

namespace seqdx {

void ModelConfig::validate() const {
    if (image_size < 1) throw ConfigError("image_size must be positive");
    if (encoder_channels.empty()) throw ConfigError("encoder_channels must be non-empty");
    for (int c : encoder_channels) {
        if (c < 1) throw ConfigError("encoder channel counts must be positive");
    }
    for (int f : fc_sizes) {
        if (f < 1) throw ConfigError("fc sizes must be positive");
    }
    if (lstm_hidden < 1) throw ConfigError("lstm_hidden must be positive");
    if (num_outputs != 1 && num_outputs != 5) throw ConfigError("num_outputs must be 1 or 5");
    if (freeze_first_n < 0) throw ConfigError("freeze_first_n must be non-negative");
    int side = image_size;
    for (std::size_t i = 0; i < encoder_channels.size(); ++i) {
        if (side % 2 != 0) {
            throw ConfigError("image_size " + std::to_string(image_size) + " is not divisible by 2^" +
                              std::to_string(encoder_channels.size()) + " pooling stages");
        }
        side /= 2;
    }
    if (side < 1) throw ConfigError("image_size too small for the pooling stages");
}

int ModelConfig::final_spatial() const {
    int side = image_size;
    for (std::size_t i = 0; i < encoder_channels.size(); ++i) side /= 2;
    return side;
}

int ModelConfig::flatten_width() const {
    const int side = final_spatial();
    return encoder_channels.back() * side * side;
}

std::vector<std::pair<std::string, TensorPtr>> Model::named_parameters() const {
    std::vector<std::pair<std::string, TensorPtr>> out;
    for (std::size_t i = 0; i < convs.size(); ++i) {
        out.emplace_back("encoder.conv" + std::to_string(i) + ".weight", convs[i].weight);
        out.emplace_back("encoder.conv" + std::to_string(i) + ".bias", convs[i].bias);
    }
    for (std::size_t i = 0; i < fcs.size(); ++i) {
        out.emplace_back("fc" + std::to_string(i) + ".weight", fcs[i].weight);
        out.emplace_back("fc" + std::to_string(i) + ".bias", fcs[i].bias);
    }
    const char* gates[] = {"W_i", "W_f", "W_o", "W_g", "U_i", "U_f", "U_o", "U_g",
                           "b_i", "b_f", "b_o", "b_g"};
    auto lstm_params = lstm.parameters();
    for (std::size_t i = 0; i < lstm_params.size(); ++i) {
        out.emplace_back(std::string("lstm.") + gates[i], lstm_params[i]);
    }
    out.emplace_back("head.weight", head.weight);
    out.emplace_back("head.bias", head.bias);
    return out;
}

std::vector<TensorPtr> Model::parameters() const {
    std::vector<TensorPtr> out;
    for (auto& [name, t] : named_parameters()) out.push_back(t);
    return out;
}

std::int64_t Model::parameter_count() const {
    std::int64_t n = 0;
    for (const TensorPtr& t : parameters()) n += t->numel();
    return n;
}

void Model::zero_grads() const {
    for (const TensorPtr& t : parameters()) t->zero_grad();
}

Model init_model(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    Model m;
    m.config = config;
    const Rng root(seed);
    std::uint64_t layer_id = 0;

    int in_ch = 3;
    for (int out_ch : config.encoder_channels) {
        Rng rng = root.stream(streams::kParamInit, layer_id++);
        m.convs.push_back(conv2d_init(out_ch, in_ch, 3, 3, /*stride=*/1, /*padding=*/1, rng));
        in_ch = out_ch;
    }
    int in_w = config.flatten_width();
    for (int out_w : config.fc_sizes) {
        Rng rng = root.stream(streams::kParamInit, layer_id++);
        m.fcs.push_back(linear_init(out_w, in_w, rng));
        in_w = out_w;
    }
    {
        Rng rng = root.stream(streams::kParamInit, layer_id++);
        m.lstm = lstm_init(config.lstm_hidden, config.feature_width(), rng);
    }
    {
        Rng rng = root.stream(streams::kParamInit, layer_id++);
        m.head = linear_init(config.num_outputs, config.lstm_hidden, rng);
    }

    int frozen_left = std::min<int>(config.freeze_first_n,
                                    static_cast<int>(m.convs.size() + m.fcs.size()));
    for (auto& conv : m.convs) {
        if (frozen_left <= 0) break;
        conv.set_frozen(true);
        --frozen_left;
    }
    for (auto& fc : m.fcs) {
        if (frozen_left <= 0) break;
        fc.set_frozen(true);
        --frozen_left;
    }
    return m;
}

TensorPtr encode_image(Tape* tape, const Model& model, const TensorPtr& image) {
    const int s = model.config.image_size;
    if (image->rank() != 3 || image->shape[0] != 3 || image->shape[1] != s ||
        image->shape[2] != s) {
        throw ShapeError("encode_image: expected [3," + std::to_string(s) + "," +
                         std::to_string(s) + "], got " + shape_str(image->shape));
    }
    TensorPtr x = image;
    for (const Conv2dLayer& conv : model.convs) {
        x = conv2d_forward(tape, conv, x);
        x = relu(tape, x);
        x = maxpool2d(tape, x, 2);
    }
    x = flatten(tape, x);
    for (std::size_t i = 0; i < model.fcs.size(); ++i) {
        x = linear_forward(tape, model.fcs[i], x);
        if (i + 1 < model.fcs.size()) x = relu(tape, x);
    }
    return x;
}

SequencePrediction forward_sequence(Tape* tape, const Model& model,
                                    const std::vector<TensorPtr>& images) {
    if (images.empty()) throw EmptyInputError("forward_sequence: empty image sequence");
    SequencePrediction pred;
    LstmState state = lstm_zero_state(model.config.lstm_hidden);
    TensorPtr probs;
    for (const TensorPtr& image : images) {
        TensorPtr feat = encode_image(tape, model, image);
        state = lstm_cell_step(tape, model.lstm, feat, state);
        TensorPtr logits = linear_forward(tape, model.head, state.h);
        probs = sigmoid(tape, logits);
        pred.per_step_probs.push_back(probs->data);
    }
    pred.final_probs = pred.per_step_probs.back();
    pred.final_prob_tensor = probs;
    pred.final_hidden = state.h;
    return pred;
}

}  // namespace seqdx
