// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "seqdx/loss.hpp"
#include "seqdx/synth.hpp"
#include "seqdx/trainer.hpp"

using namespace seqdx;

namespace {

void BM_GeneratePatient(benchmark::State& state) {
    SynthConfig cfg;
    cfg.num_patients = 1;
    std::uint64_t idx = 0;
    for (auto _ : state) {
        auto p = generate_patient(cfg, 1, idx++);
        benchmark::DoNotOptimize(p.record.images.data());
    }
}
BENCHMARK(BM_GeneratePatient);

void BM_GrayToRgb(benchmark::State& state) {
    ImageU8 img;
    img.width = img.height = 32;
    img.pixels.assign(32 * 32, 0);
    Rng rng(1);
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.below(256));
    for (auto _ : state) {
        auto t = gray_to_rgb(img, 32);
        benchmark::DoNotOptimize(t->data.data());
    }
}
BENCHMARK(BM_GrayToRgb);

void BM_Augment(benchmark::State& state) {
    Rng rng(2);
    auto img = tensor_uniform({3, 32, 32}, 0.0f, 1.0f, rng);
    AugmentParams params;
    Rng aug_rng(3);
    for (auto _ : state) {
        auto out = augment(img, params, aug_rng);
        benchmark::DoNotOptimize(out->data.data());
    }
}
BENCHMARK(BM_Augment);

void BM_PatientTrainStep(benchmark::State& state) {
    SynthConfig synth;
    synth.num_patients = 1;
    synth.min_images = 8;
    synth.max_images = 8;
    auto patient = generate_patient(synth, 4, 0).record;

    ModelConfig cfg;
    cfg.image_size = 32;
    cfg.encoder_channels = {8, 16, 32};
    cfg.fc_sizes = {128, 128};
    cfg.lstm_hidden = 64;
    Model model = init_model(cfg, 5);
    const ClassWeights weights = ClassWeights::ones(1);

    std::vector<TensorPtr> images;
    for (const auto& img : patient.images) images.push_back(gray_to_rgb(img, 32));

    for (auto _ : state) {
        Tape tape;
        auto pred = forward_sequence(&tape, model, images);
        auto loss = weighted_bce(&tape, pred.final_prob_tensor, patient.labels, weights);
        backward(loss, tape);
        model.zero_grads();
        benchmark::DoNotOptimize(loss->data[0]);
    }
    state.SetLabel("8-image patient, desk-scale model");
}
BENCHMARK(BM_PatientTrainStep);

}  // namespace

BENCHMARK_MAIN();
