// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "seqdx/layers.hpp"
#include "seqdx/model.hpp"

using namespace seqdx;

namespace {

void BM_MatmulSquare(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    Rng rng(1);
    auto a = tensor_uniform({n, n}, -1.0f, 1.0f, rng);
    auto b = tensor_uniform({n, n}, -1.0f, 1.0f, rng);
    for (auto _ : state) {
        auto out = matmul(nullptr, a, b);
        benchmark::DoNotOptimize(out->data.data());
    }
    state.SetItemsProcessed(state.iterations() * 2ll * n * n * n);
}
BENCHMARK(BM_MatmulSquare)->Arg(64)->Arg(128)->Arg(256);

void BM_Sigmoid(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    Rng rng(2);
    auto a = tensor_uniform({n}, -4.0f, 4.0f, rng);
    for (auto _ : state) {
        auto out = sigmoid(nullptr, a);
        benchmark::DoNotOptimize(out->data.data());
    }
    state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_Sigmoid)->Arg(1024)->Arg(65536);

void BM_Conv2dForward(benchmark::State& state) {
    Rng rng(3);
    // the desk-scale first stage: 3 -> 8 channels on a 32x32 image
    Conv2dLayer layer = conv2d_init(8, 3, 3, 3, 1, 1, rng);
    auto img = tensor_uniform({3, 32, 32}, 0.0f, 1.0f, rng);
    for (auto _ : state) {
        auto out = conv2d_forward(nullptr, layer, img);
        benchmark::DoNotOptimize(out->data.data());
    }
}
BENCHMARK(BM_Conv2dForward);

void BM_Conv2dForwardBackward(benchmark::State& state) {
    Rng rng(4);
    Conv2dLayer layer = conv2d_init(8, 3, 3, 3, 1, 1, rng);
    auto img = tensor_uniform({3, 32, 32}, 0.0f, 1.0f, rng);
    for (auto _ : state) {
        Tape tape;
        auto loss = sum(&tape, conv2d_forward(&tape, layer, img));
        backward(loss, tape);
        layer.weight->zero_grad();
        layer.bias->zero_grad();
        benchmark::DoNotOptimize(loss->data[0]);
    }
}
BENCHMARK(BM_Conv2dForwardBackward);

void BM_LstmCellStep(benchmark::State& state) {
    const int hidden = static_cast<int>(state.range(0));
    Rng rng(5);
    LstmParams params = lstm_init(hidden, 128, rng);
    auto x = tensor_uniform({128}, -1.0f, 1.0f, rng);
    LstmState st = lstm_zero_state(hidden);
    for (auto _ : state) {
        LstmState next = lstm_cell_step(nullptr, params, x, st);
        benchmark::DoNotOptimize(next.h->data.data());
    }
}
BENCHMARK(BM_LstmCellStep)->Arg(64)->Arg(256)->Arg(600);

void BM_EncodeImage(benchmark::State& state) {
    ModelConfig cfg;
    cfg.image_size = 32;
    cfg.encoder_channels = {8, 16, 32};
    cfg.fc_sizes = {128, 128};
    cfg.lstm_hidden = 64;
    Model model = init_model(cfg, 6);
    Rng rng(7);
    auto img = tensor_uniform({3, 32, 32}, 0.0f, 1.0f, rng);
    for (auto _ : state) {
        auto feat = encode_image(nullptr, model, img);
        benchmark::DoNotOptimize(feat->data.data());
    }
}
BENCHMARK(BM_EncodeImage);

}  // namespace

BENCHMARK_MAIN();
