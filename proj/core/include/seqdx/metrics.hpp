// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "seqdx/errors.hpp"

namespace seqdx {

/// Per-output confusion counts accumulated over evaluated patients.
struct MetricCounts {
    std::vector<std::int64_t> tp, fp, tn, fn;

    explicit MetricCounts(int num_outputs = 0)
        : tp(static_cast<std::size_t>(num_outputs), 0),
          fp(static_cast<std::size_t>(num_outputs), 0),
          tn(static_cast<std::size_t>(num_outputs), 0),
          fn(static_cast<std::size_t>(num_outputs), 0) {}

    int num_outputs() const { return static_cast<int>(tp.size()); }
    std::int64_t total(int o) const { return tp[o] + fp[o] + tn[o] + fn[o]; }

    bool operator==(const MetricCounts&) const = default;
};

/// Threshold with inclusive >=, then increment exactly one of tp/fp/tn/fn
/// per output.
void confusion_update(MetricCounts& counts, const std::vector<float>& probs,
                      const std::vector<int>& labels, float threshold);

struct MetricValues {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    // Degenerate denominators (e.g. no positive predictions) yield 0 with the
    // matching flag set instead of NaN.
    bool precision_degenerate = false;
    bool recall_degenerate = false;
    bool f1_degenerate = false;

    bool operator==(const MetricValues&) const = default;
};

struct MetricsReport {
    std::vector<MetricValues> per_output;
    double combined_accuracy = 0.0;  // mean accuracy across outputs

    bool operator==(const MetricsReport&) const = default;
};

/// accuracy = (tp+tn)/total, precision = tp/(tp+fp), recall = tp/(tp+fn),
/// f1 = 2*precision*recall/(precision+recall). Requires total >= 1.
MetricsReport metrics_from_counts(const MetricCounts& counts);

}  // namespace seqdx
