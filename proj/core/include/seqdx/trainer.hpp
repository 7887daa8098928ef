// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <optional>
#include <string>

#include "seqdx/checkpoint.hpp"
#include "seqdx/dataset.hpp"
#include "seqdx/loss.hpp"
#include "seqdx/metrics.hpp"
#include "seqdx/model.hpp"

namespace seqdx {

struct TrainConfig {
    float learning_rate = 0.01f;
    int accumulation_k = 4;  // patients per parameter update
    int epochs = 50;
    std::uint64_t seed = 0;
    float threshold = 0.5f;
    bool use_class_weights = true;
    int eval_every = 1;  // validation cadence in epochs
    std::optional<std::string> checkpoint_path;
    bool clip_enabled = true;  // global-norm clip of the averaged gradient
    float clip_norm = 5.0f;
    int threads = 1;      // parallel image loading/augmentation producers
    int start_epoch = 0;  // nonzero when resuming from a checkpoint
};

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;  // mean over patients
    MetricsReport train_metrics;
    bool has_validation = false;
    double val_loss = 0.0;
    MetricsReport val_metrics;
    int updates = 0;  // parameter updates applied this epoch
    double seconds = 0.0;
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
};

/// Return false to stop training after the reported epoch.
using EpochCallback = std::function<bool(const EpochStats&)>;

/// One patient at a time, all of its images in the epoch's shuffled order,
/// loss on the final step only, gradients accumulated over accumulation_k
/// patients per update (the epoch remainder also updates, normalized by the
/// number of patients actually accumulated). Deterministic for a fixed seed,
/// including with threads > 1: augmentation streams are keyed by
/// (epoch, patient index) and patients are consumed in shuffle order.
TrainHistory train(Model& model, const DatasetSplit& split, const TrainConfig& config,
                   const AugmentParams& augment_params, const EpochCallback& on_epoch = {});

struct EvalResult {
    MetricCounts counts;
    MetricsReport metrics;
    double mean_loss = 0.0;  // unweighted BCE
};

/// Deterministic pass over `records` (no augmentation, no shuffling).
EvalResult evaluate(const Model& model, const std::vector<PatientRecord>& records,
                    float threshold);

struct AccumCheckResult {
    bool ok = false;
    double max_rel_err = 0.0;
};

/// Correctness definition of accumulation: gradients accumulated patient by
/// patient must equal the gradient of the summed per-patient losses. Runs
/// with augmentation and clipping out of the picture; the model's parameters
/// are left unchanged (gradients are zeroed on exit).
AccumCheckResult accumulate_equivalence_check(Model& model,
                                              const std::vector<PatientRecord>& patients,
                                              double rel_tol = 1e-5);

/// CSV columns: epoch,train_loss,train_acc,train_precision,train_recall,
/// train_f1,val_loss,val_acc,val_precision,val_recall,val_f1,seconds.
/// Validation cells are empty on epochs without evaluation.
void write_history_csv(const TrainHistory& history, const std::string& path);

}  // namespace seqdx
