// SPDX-License-Identifier: Apache-2.0
#include "seqdx/selfcheck.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>

#include "seqdx/checkpoint.hpp"
#include "seqdx/reference.hpp"
#include "seqdx/synth.hpp"
#include "seqdx/trainer.hpp"

namespace seqdx {

namespace {

constexpr double kGradTol = 1e-3;
// The probe functions evaluate in double, so the quotient noise floor sits
// around 1e-12 and eps can be small. 1e-4 keeps the +-eps window from
// straddling ReLU kinks / pool argmax switches that a 1e-3 window can hit.
constexpr double kFdEps = 1e-4;

using NamedParams = std::vector<std::pair<std::string, TensorPtr>>;
// ref_eval(slot, perturbed values) -> scalar, evaluated in double.
using RefEval = std::function<double(const TensorPtr&, const Tensor&)>;

double check_param_grads(const SelfcheckHooks* hooks, const std::string& check,
                         const NamedParams& params, const RefEval& ref_eval) {
    double max_rel = 0.0;
    for (const auto& [name, p] : params) {
        auto f = [&](const Tensor& x) { return ref_eval(p, x); };
        std::vector<float> g =
            p->grad.empty() ? std::vector<float>(p->data.size(), 0.0f) : p->grad;
        if (hooks && hooks->perturb_grad) hooks->perturb_grad(check, name, g);
        const auto cmp = reference::gradient_check(f, *p, g, kFdEps, kGradTol);
        max_rel = std::max(max_rel, cmp.max_rel);
    }
    return max_rel;
}

struct Runner {
    SelfcheckReport& report;
    const SelfcheckHooks* hooks;

    template <typename Fn>
    void item(const std::string& name, Fn&& fn) {
        const auto t0 = std::chrono::steady_clock::now();
        SelfcheckItem it;
        it.name = name;
        try {
            const double dev = fn();
            it.max_dev = dev;
            it.pass = dev <= kGradTol;
        } catch (const std::exception&) {
            it.pass = false;
            it.max_dev = std::numeric_limits<double>::infinity();
        }
        it.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        report.items.push_back(it);
    }
};

double elementwise_check(const SelfcheckHooks* hooks, Rng rng) {
    auto x = tensor_uniform({6}, -1.0f, 1.0f, rng);
    auto w = tensor_uniform({6}, -1.0f, 1.0f, rng, true);
    auto v = tensor_uniform({6}, -1.0f, 1.0f, rng, true);

    Tape tape;
    auto a = sigmoid(&tape, add(&tape, x, w));
    auto b = tanh_op(&tape, v);
    auto c = mul(&tape, a, b);
    auto d = relu(&tape, sub(&tape, w, v));
    auto loss = sum(&tape, add(&tape, c, d));
    backward(loss, tape);

    auto ref = [&](const TensorPtr& slot, const Tensor& vals) {
        auto val = [&](const TensorPtr& t, std::size_t i) {
            return static_cast<double>(t == slot ? vals.data[i] : t->data[i]);
        };
        double acc = 0.0;
        for (std::size_t i = 0; i < 6; ++i) {
            const double xi = val(x, i), wi = val(w, i), vi = val(v, i);
            const double ai = reference::sigmoid_ref(xi + wi);
            const double di = wi - vi > 0.0 ? wi - vi : 0.0;
            acc += ai * std::tanh(vi) + di;
        }
        return acc;
    };
    return check_param_grads(hooks, "elementwise-grad", {{"w", w}, {"v", v}}, ref);
}

double matmul_check(const SelfcheckHooks* hooks, Rng rng) {
    auto a = tensor_uniform({3, 4}, -1.0f, 1.0f, rng, true);
    auto b = tensor_uniform({4, 2}, -1.0f, 1.0f, rng, true);
    Tape tape;
    auto loss = sum(&tape, matmul(&tape, a, b));
    backward(loss, tape);

    auto ref = [&](const TensorPtr& slot, const Tensor& vals) {
        auto val = [&](const TensorPtr& t, std::size_t i) {
            return static_cast<double>(t == slot ? vals.data[i] : t->data[i]);
        };
        double acc = 0.0;
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 2; ++j) {
                for (int k = 0; k < 4; ++k) acc += val(a, i * 4 + k) * val(b, k * 2 + j);
            }
        }
        return acc;
    };
    return check_param_grads(hooks, "matmul-grad", {{"a", a}, {"b", b}}, ref);
}

double conv2d_check(const SelfcheckHooks* hooks, Rng rng) {
    Conv2dLayer layer = conv2d_init(4, 2, 3, 3, 1, 1, rng);
    auto input = tensor_uniform({2, 8, 8}, -1.0f, 1.0f, rng, true);
    Tape tape;
    auto loss = sum(&tape, conv2d_forward(&tape, layer, input));
    backward(loss, tape);

    auto ref = [&](const TensorPtr& slot, const Tensor& vals) {
        reference::dvec in(input->data.begin(), input->data.end());
        if (slot == input) in.assign(vals.data.begin(), vals.data.end());
        const float* wp = slot == layer.weight ? vals.data.data() : layer.weight->data.data();
        const float* bp = slot == layer.bias ? vals.data.data() : layer.bias->data.data();
        const auto out = reference::conv2d_ref(in, 2, 8, 8, wp, bp, 4, 3, 3, 1, 1);
        double acc = 0.0;
        for (double o : out) acc += o;
        return acc;
    };
    return check_param_grads(hooks, "conv2d-grad",
                             {{"weight", layer.weight}, {"bias", layer.bias}, {"input", input}},
                             ref);
}

double maxpool_check(const SelfcheckHooks* hooks, Rng rng) {
    auto input = tensor_uniform({3, 6, 6}, -1.0f, 1.0f, rng, true);
    Tape tape;
    auto loss = sum(&tape, maxpool2d(&tape, input, 2));
    backward(loss, tape);

    auto ref = [&](const TensorPtr& slot, const Tensor& vals) {
        reference::dvec in(slot == input ? reference::dvec(vals.data.begin(), vals.data.end())
                                         : reference::dvec(input->data.begin(), input->data.end()));
        const auto out = reference::maxpool2_ref(in, 3, 6, 6, 2);
        double acc = 0.0;
        for (double o : out) acc += o;
        return acc;
    };
    return check_param_grads(hooks, "maxpool2d-grad", {{"input", input}}, ref);
}

double linear_check(const SelfcheckHooks* hooks, Rng rng) {
    LinearLayer layer = linear_init(5, 7, rng);
    auto input = tensor_uniform({7}, -1.0f, 1.0f, rng, true);
    Tape tape;
    auto loss = sum(&tape, linear_forward(&tape, layer, input));
    backward(loss, tape);

    auto ref = [&](const TensorPtr& slot, const Tensor& vals) {
        reference::dvec in(input->data.begin(), input->data.end());
        if (slot == input) in.assign(vals.data.begin(), vals.data.end());
        const float* wp = slot == layer.weight ? vals.data.data() : layer.weight->data.data();
        const float* bp = slot == layer.bias ? vals.data.data() : layer.bias->data.data();
        const auto out = reference::linear_ref(in, wp, bp, 5, 7);
        double acc = 0.0;
        for (double o : out) acc += o;
        return acc;
    };
    return check_param_grads(hooks, "linear-grad",
                             {{"weight", layer.weight}, {"bias", layer.bias}, {"input", input}},
                             ref);
}

double lstm_check(const SelfcheckHooks* hooks, Rng rng) {
    const int H = 4, D = 3, steps = 3;
    LstmParams params = lstm_init(H, D, rng);
    std::vector<TensorPtr> xs;
    for (int t = 0; t < steps; ++t) xs.push_back(tensor_uniform({D}, -1.0f, 1.0f, rng, true));

    Tape tape;
    LstmState state = lstm_zero_state(H);
    for (const auto& x : xs) state = lstm_cell_step(&tape, params, x, state);
    auto loss = sum(&tape, state.h);
    backward(loss, tape);

    auto ref = [&](const TensorPtr& slot, const Tensor& vals) {
        auto ptr = [&](const TensorPtr& t) {
            return t == slot ? vals.data.data() : t->data.data();
        };
        reference::dvec h(H, 0.0), c(H, 0.0);
        for (const auto& x : xs) {
            const float* xp = ptr(x);
            reference::dvec nh(H), nc(H);
            for (int r = 0; r < H; ++r) {
                auto pre = [&](const TensorPtr& W, const TensorPtr& U, const TensorPtr& b) {
                    const float* wp = ptr(W);
                    const float* up = ptr(U);
                    const float* bp = ptr(b);
                    double acc = static_cast<double>(bp[r]);
                    for (int j = 0; j < D; ++j)
                        acc += static_cast<double>(wp[r * D + j]) * static_cast<double>(xp[j]);
                    for (int j = 0; j < H; ++j) acc += static_cast<double>(up[r * H + j]) * h[j];
                    return acc;
                };
                const double gi = reference::sigmoid_ref(pre(params.W_i, params.U_i, params.b_i));
                const double gf = reference::sigmoid_ref(pre(params.W_f, params.U_f, params.b_f));
                const double go = reference::sigmoid_ref(pre(params.W_o, params.U_o, params.b_o));
                const double gg = std::tanh(pre(params.W_g, params.U_g, params.b_g));
                nc[r] = gf * c[r] + gi * gg;
                nh[r] = go * std::tanh(nc[r]);
            }
            h = nh;
            c = nc;
        }
        double acc = 0.0;
        for (double v : h) acc += v;
        return acc;
    };

    NamedParams named = {{"W_i", params.W_i}, {"W_f", params.W_f}, {"W_o", params.W_o},
                         {"W_g", params.W_g}, {"U_i", params.U_i}, {"U_f", params.U_f},
                         {"U_o", params.U_o}, {"U_g", params.U_g}, {"b_i", params.b_i},
                         {"b_f", params.b_f}, {"b_o", params.b_o}, {"b_g", params.b_g}};
    for (std::size_t t = 0; t < xs.size(); ++t) named.emplace_back("x" + std::to_string(t), xs[t]);
    return check_param_grads(hooks, "lstm-bptt-grad", named, ref);
}

double model_sequence_check(const SelfcheckHooks* hooks, Rng rng, std::uint64_t seed) {
    ModelConfig cfg;
    cfg.image_size = 8;
    cfg.encoder_channels = {2, 3};
    cfg.fc_sizes = {6};
    cfg.lstm_hidden = 4;
    cfg.num_outputs = 1;
    Model model = init_model(cfg, seed);
    // Move off the training init's exact-zero biases so no ReLU
    // pre-activation sits exactly on its kink during the probe.
    for (const auto& [name, p] : model.named_parameters()) {
        for (float& v : p->data) v = rng.uniform(-0.5f, 0.5f);
    }

    std::vector<TensorPtr> images;
    for (int t = 0; t < 3; ++t) images.push_back(tensor_uniform({3, 8, 8}, 0.0f, 1.0f, rng));
    const std::vector<int> labels = {1};
    const ClassWeights weights = ClassWeights::ones(1);

    Tape tape;
    SequencePrediction pred = forward_sequence(&tape, model, images);
    auto loss = weighted_bce(&tape, pred.final_prob_tensor, labels, weights);
    backward(loss, tape);

    auto ref = [&](const TensorPtr& slot, const Tensor& vals) {
        return reference::sequence_loss(model, images, labels, weights, slot, &vals);
    };
    return check_param_grads(hooks, "model-sequence-grad", model.named_parameters(), ref);
}

double accumulation_check(std::uint64_t seed) {
    SynthConfig synth;
    synth.num_patients = 3;
    synth.image_size = 16;
    synth.min_images = 2;
    synth.max_images = 4;
    synth.noise_sigma = 0.05f;
    ModelConfig cfg;
    cfg.image_size = 16;
    cfg.encoder_channels = {4};
    cfg.fc_sizes = {8};
    cfg.lstm_hidden = 6;
    Model model = init_model(cfg, seed + 1);

    std::vector<PatientRecord> patients;
    for (int i = 0; i < 3; ++i) patients.push_back(generate_patient(synth, seed, i).record);
    const auto result = accumulate_equivalence_check(model, patients);
    return result.ok ? result.max_rel_err : std::max(result.max_rel_err, 1.0);
}

double checkpoint_check(std::uint64_t seed, Rng rng) {
    ModelConfig cfg;
    cfg.image_size = 8;
    cfg.encoder_channels = {2};
    cfg.fc_sizes = {4};
    cfg.lstm_hidden = 3;
    Model model = init_model(cfg, seed + 2);

    std::vector<TensorPtr> images = {tensor_uniform({3, 8, 8}, 0.0f, 1.0f, rng),
                                     tensor_uniform({3, 8, 8}, 0.0f, 1.0f, rng)};
    const auto before = forward_sequence(nullptr, model, images).final_probs;

    const auto path = std::filesystem::temp_directory_path() /
                      ("seqdx_selfcheck_" + std::to_string(seed) + "_" +
                       std::to_string(reinterpret_cast<std::uintptr_t>(&model)) + ".sqdx");
    save_checkpoint(model, TrainProgress{7}, path.string());
    Checkpoint loaded = load_checkpoint(path.string());
    std::filesystem::remove(path);

    if (loaded.progress.epochs_completed != 7 || !(loaded.model.config == cfg)) return 1.0;
    const auto after = forward_sequence(nullptr, loaded.model, images).final_probs;
    double dev = 0.0;
    for (std::size_t i = 0; i < before.size(); ++i) {
        if (before[i] != after[i]) dev = 1.0;  // bit-exact or fail
    }
    return dev;
}

}  // namespace

SelfcheckReport run_selfcheck(std::uint64_t seed, const SelfcheckHooks* hooks) {
    SelfcheckReport report;
    Runner run{report, hooks};
    const Rng root(seed);

    run.item("elementwise-grad", [&]() { return elementwise_check(hooks, root.stream(101)); });
    run.item("matmul-grad", [&]() { return matmul_check(hooks, root.stream(102)); });
    run.item("conv2d-grad", [&]() { return conv2d_check(hooks, root.stream(103)); });
    run.item("maxpool2d-grad", [&]() { return maxpool_check(hooks, root.stream(104)); });
    run.item("linear-grad", [&]() { return linear_check(hooks, root.stream(105)); });
    run.item("lstm-bptt-grad", [&]() { return lstm_check(hooks, root.stream(106)); });
    run.item("model-sequence-grad",
             [&]() { return model_sequence_check(hooks, root.stream(107), seed); });
    run.item("accumulation-equivalence", [&]() { return accumulation_check(seed); });
    run.item("checkpoint-roundtrip", [&]() { return checkpoint_check(seed, root.stream(108)); });
    return report;
}

}  // namespace seqdx
