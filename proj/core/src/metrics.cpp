// SPDX-License-Identifier: Apache-2.0
#include "seqdx/metrics.hpp"

#include <string>

namespace seqdx {

void confusion_update(MetricCounts& counts, const std::vector<float>& probs,
                      const std::vector<int>& labels, float threshold) {
    if (probs.size() != labels.size() ||
        probs.size() != static_cast<std::size_t>(counts.num_outputs())) {
        throw ShapeError("confusion_update: width mismatch (probs " + std::to_string(probs.size()) +
                         ", labels " + std::to_string(labels.size()) + ", counts " +
                         std::to_string(counts.num_outputs()) + ")");
    }
    if (!(threshold > 0.0f && threshold < 1.0f)) {
        throw ConfigError("threshold must be in (0, 1)");
    }
    for (std::size_t o = 0; o < probs.size(); ++o) {
        const bool pred = probs[o] >= threshold;
        const bool truth = labels[o] != 0;
        if (pred && truth) {
            ++counts.tp[o];
        } else if (pred && !truth) {
            ++counts.fp[o];
        } else if (!pred && !truth) {
            ++counts.tn[o];
        } else {
            ++counts.fn[o];
        }
    }
}

MetricsReport metrics_from_counts(const MetricCounts& counts) {
    if (counts.num_outputs() == 0) throw EmptyInputError("metrics_from_counts: no outputs");
    MetricsReport report;
    double acc_sum = 0.0;
    for (int o = 0; o < counts.num_outputs(); ++o) {
        const std::int64_t total = counts.total(o);
        if (total < 1) throw EmptyInputError("metrics_from_counts: empty evaluation");
        MetricValues m;
        m.accuracy = static_cast<double>(counts.tp[o] + counts.tn[o]) / static_cast<double>(total);

        const std::int64_t pred_pos = counts.tp[o] + counts.fp[o];
        if (pred_pos == 0) {
            m.precision_degenerate = true;
        } else {
            m.precision = static_cast<double>(counts.tp[o]) / static_cast<double>(pred_pos);
        }
        const std::int64_t actual_pos = counts.tp[o] + counts.fn[o];
        if (actual_pos == 0) {
            m.recall_degenerate = true;
        } else {
            m.recall = static_cast<double>(counts.tp[o]) / static_cast<double>(actual_pos);
        }
        if (m.precision + m.recall == 0.0) {
            m.f1_degenerate = true;
        } else {
            m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
        }
        acc_sum += m.accuracy;
        report.per_output.push_back(m);
    }
    report.combined_accuracy = acc_sum / static_cast<double>(counts.num_outputs());
    return report;
}

}  // namespace seqdx
