// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "seqdx/loss.hpp"
#include "seqdx/metrics.hpp"
#include "seqdx/reference.hpp"

using namespace seqdx;

namespace {

// Test-local unweighted BCE, the independent formula the weighted one must
// reduce to at weights 1/1.
double plain_bce(const std::vector<float>& probs, const std::vector<int>& labels) {
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        double p = static_cast<double>(probs[i]);
        p = std::min(std::max(p, kProbClamp), 1.0 - kProbClamp);
        acc -= labels[i] != 0 ? std::log(p) : std::log(1.0 - p);
    }
    return acc / static_cast<double>(probs.size());
}

std::vector<std::vector<int>> labels_with_prevalence(int positives, int total) {
    std::vector<std::vector<int>> labels;
    for (int i = 0; i < total; ++i) labels.push_back({i < positives ? 1 : 0});
    return labels;
}

}  // namespace

TEST_CASE("balanced labels give unit weights") {
    auto w = class_weights(labels_with_prevalence(10, 20));
    CHECK(w.w_pos[0] == doctest::Approx(1.0));
    CHECK(w.w_neg[0] == doctest::Approx(1.0));
    CHECK(!w.degenerate[0]);
}

TEST_CASE("weights from hemorrhage and mass prevalences") {
    auto hem = class_weights(labels_with_prevalence(2830, 10000));
    CHECK(hem.w_pos[0] == doctest::Approx(1.434).epsilon(1e-6));
    CHECK(hem.w_neg[0] == doctest::Approx(0.566).epsilon(1e-6));
    CHECK(hem.w_pos[0] + hem.w_neg[0] == doctest::Approx(2.0).epsilon(1e-6));

    auto mass = class_weights(labels_with_prevalence(187, 10000));
    CHECK(mass.w_pos[0] == doctest::Approx(1.9626).epsilon(1e-4));
    CHECK(mass.w_neg[0] == doctest::Approx(0.0374).epsilon(1e-3));
    CHECK(mass.w_pos[0] > mass.w_neg[0]);  // rarer class gets the larger weight
}

TEST_CASE("single-class label sets fall back to unit weights with a flag") {
    auto w = class_weights(labels_with_prevalence(5, 5));
    CHECK(w.w_pos[0] == 1.0f);
    CHECK(w.degenerate[0]);
    CHECK_THROWS_AS(class_weights({}), EmptyInputError);
    CHECK_THROWS_AS(class_weights({{1, 0}, {1}}), ShapeError);
}

TEST_CASE("weighted bce analytic values") {
    auto w1 = ClassWeights::ones(1);
    auto loss = weighted_bce(nullptr, tensor_from({1}, {0.5f}), {1}, w1);
    CHECK(loss->data[0] == doctest::Approx(std::log(2.0)).epsilon(1e-6));

    // near-perfect prediction: loss collapses towards the clamp floor
    auto tiny = weighted_bce(nullptr, tensor_from({1}, {1.0f}), {1}, w1);
    CHECK(tiny->data[0] < 1e-5f);
    CHECK(tiny->data[0] >= 0.0f);

    ClassWeights hem = ClassWeights::ones(1);
    hem.w_pos[0] = 1.434f;
    auto wl = weighted_bce(nullptr, tensor_from({1}, {0.5f}), {1}, hem);
    CHECK(wl->data[0] == doctest::Approx(1.434 * std::log(2.0)).epsilon(1e-4));

    CHECK_THROWS_AS(weighted_bce(nullptr, tensor_from({2}, {0.5f, 0.5f}), {1}, w1), ShapeError);
}

TEST_CASE("unit weights reduce exactly to unweighted bce") {
    Rng rng(40);
    auto w1 = ClassWeights::ones(3);
    for (int n = 0; n < 100; ++n) {
        std::vector<float> probs;
        std::vector<int> labels;
        for (int i = 0; i < 3; ++i) {
            probs.push_back(rng.uniform(0.001f, 0.999f));
            labels.push_back(rng.below(2) ? 1 : 0);
        }
        CHECK(weighted_bce_value(probs, labels, w1) ==
              doctest::Approx(plain_bce(probs, labels)).epsilon(1e-12));
    }
}

TEST_CASE("loss is non-negative and scales linearly in the weights") {
    Rng rng(41);
    for (int n = 0; n < 50; ++n) {
        std::vector<float> probs = {rng.uniform(0.001f, 0.999f), rng.uniform(0.001f, 0.999f)};
        std::vector<int> labels = {static_cast<int>(rng.below(2)), static_cast<int>(rng.below(2))};
        ClassWeights w = ClassWeights::ones(2);
        w.w_pos = {1.3f, 0.4f};
        w.w_neg = {0.7f, 1.6f};
        const double base = weighted_bce_value(probs, labels, w);
        CHECK(base >= 0.0);

        ClassWeights scaled = w;
        const float c = 2.5f;
        for (auto& v : scaled.w_pos) v *= c;
        for (auto& v : scaled.w_neg) v *= c;
        CHECK(weighted_bce_value(probs, labels, scaled) ==
              doctest::Approx(static_cast<double>(c) * base).epsilon(1e-6));
    }
}

TEST_CASE("loss gradient through the sigmoid matches finite differences") {
    Rng rng(42);
    auto z = tensor_uniform({4}, -2.0f, 2.0f, rng, true);
    const std::vector<int> labels = {1, 0, 1, 0};
    ClassWeights w = ClassWeights::ones(4);
    w.w_pos = {1.4f, 1.0f, 0.6f, 1.0f};
    w.w_neg = {0.6f, 1.0f, 1.4f, 1.0f};

    Tape tape;
    auto loss = weighted_bce(&tape, sigmoid(&tape, z), labels, w);
    backward(loss, tape);

    auto f = [&](const Tensor& vals) {
        double acc = 0.0;
        for (std::size_t i = 0; i < 4; ++i) {
            double p = reference::sigmoid_ref(static_cast<double>(vals.data[i]));
            p = std::min(std::max(p, kProbClamp), 1.0 - kProbClamp);
            acc -= labels[i] != 0 ? static_cast<double>(w.w_pos[i]) * std::log(p)
                                  : static_cast<double>(w.w_neg[i]) * std::log(1.0 - p);
        }
        return acc / 4.0;
    };
    auto r = reference::gradient_check(f, *z, z->grad, 1e-3, 1e-3);
    CHECK(r.compared > 0);
    CHECK(r.max_rel < 1e-3);
}

TEST_CASE("confusion_update applies the inclusive threshold rule") {
    MetricCounts counts(1);
    confusion_update(counts, {0.9f}, {1}, 0.5f);
    CHECK(counts.tp[0] == 1);
    confusion_update(counts, {0.5f}, {0}, 0.5f);  // >= is inclusive
    CHECK(counts.fp[0] == 1);
    confusion_update(counts, {0.3f}, {1}, 0.5f);
    CHECK(counts.fn[0] == 1);
    confusion_update(counts, {0.1f}, {0}, 0.5f);
    CHECK(counts.tn[0] == 1);
    CHECK(counts.total(0) == 4);

    CHECK_THROWS_AS(confusion_update(counts, {0.5f, 0.5f}, {1}, 0.5f), ShapeError);
    CHECK_THROWS_AS(confusion_update(counts, {0.5f}, {1}, 0.0f), ConfigError);
}

TEST_CASE("metrics formulas on hand-computed counts") {
    MetricCounts perfect(1);
    perfect.tp[0] = 10;
    auto mp = metrics_from_counts(perfect);
    CHECK(mp.per_output[0].accuracy == 1.0);
    CHECK(mp.per_output[0].precision == 1.0);
    CHECK(mp.per_output[0].recall == 1.0);
    CHECK(mp.per_output[0].f1 == 1.0);

    MetricCounts c(1);
    c.tp[0] = 3;
    c.fp[0] = 1;
    c.fn[0] = 1;
    c.tn[0] = 5;
    auto m = metrics_from_counts(c);
    CHECK(m.per_output[0].precision == 0.75);
    CHECK(m.per_output[0].recall == 0.75);
    CHECK(m.per_output[0].f1 == 0.75);
    CHECK(m.per_output[0].accuracy == 0.8);
    CHECK(m.combined_accuracy == 0.8);

    CHECK_THROWS_AS(metrics_from_counts(MetricCounts(1)), EmptyInputError);
}

TEST_CASE("all-negative predictions on skewed data flag degenerate metrics") {
    // the low-prevalence regime where a biased model predicts 0 everywhere
    MetricCounts c(1);
    c.tn[0] = 97;
    c.fn[0] = 3;
    auto m = metrics_from_counts(c);
    CHECK(m.per_output[0].recall == 0.0);
    CHECK(m.per_output[0].f1 == 0.0);
    CHECK(m.per_output[0].precision_degenerate);
    CHECK(m.per_output[0].f1_degenerate);
    CHECK(m.per_output[0].accuracy == 0.97);
    CHECK(std::isfinite(m.per_output[0].f1));
}

TEST_CASE("metrics agree with a brute-force recomputation") {
    Rng rng(43);
    const int cases = 200;
    MetricCounts counts(2);
    std::vector<std::pair<std::vector<float>, std::vector<int>>> raw;
    for (int i = 0; i < cases; ++i) {
        std::vector<float> probs = {rng.uniform(0.0f, 1.0f), rng.uniform(0.0f, 1.0f)};
        std::vector<int> labels = {static_cast<int>(rng.below(2)), static_cast<int>(rng.below(2))};
        confusion_update(counts, probs, labels, 0.5f);
        raw.emplace_back(probs, labels);
    }
    // independent recount from the raw pairs
    for (int o = 0; o < 2; ++o) {
        long tp = 0, fp = 0, tn = 0, fn = 0;
        for (const auto& [probs, labels] : raw) {
            const bool pred = probs[o] >= 0.5f;
            const bool truth = labels[o] == 1;
            tp += pred && truth;
            fp += pred && !truth;
            tn += !pred && !truth;
            fn += !pred && truth;
        }
        CHECK(counts.tp[o] == tp);
        CHECK(counts.fp[o] == fp);
        CHECK(counts.tn[o] == tn);
        CHECK(counts.fn[o] == fn);
        auto m = metrics_from_counts(counts);
        CHECK(m.per_output[o].accuracy == static_cast<double>(tp + tn) / cases);
        if (tp + fp > 0) {
            CHECK(m.per_output[o].precision == static_cast<double>(tp) / (tp + fp));
        }
    }
}

TEST_CASE("metric counts are permutation-invariant over evaluation order") {
    Rng rng(44);
    std::vector<std::pair<std::vector<float>, std::vector<int>>> raw;
    for (int i = 0; i < 50; ++i) {
        raw.push_back({{rng.uniform(0.0f, 1.0f)}, {static_cast<int>(rng.below(2))}});
    }
    MetricCounts fwd(1), rev(1);
    for (const auto& [p, l] : raw) confusion_update(fwd, p, l, 0.5f);
    for (auto it = raw.rbegin(); it != raw.rend(); ++it) confusion_update(rev, it->first, it->second, 0.5f);
    CHECK(fwd == rev);
    CHECK(metrics_from_counts(fwd) == metrics_from_counts(rev));
}
