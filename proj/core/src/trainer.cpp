// SPDX-License-Identifier: Apache-2.0
#include "seqdx/trainer.hpp"

#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <thread>

namespace seqdx {

namespace {

void validate_train_config(const TrainConfig& c) {
    if (!(c.learning_rate > 0.0f)) throw ConfigError("learning_rate must be positive");
    if (c.accumulation_k < 1) throw ConfigError("accumulation_k must be >= 1");
    if (c.epochs < 1) throw ConfigError("epochs must be >= 1");
    if (!(c.threshold > 0.0f && c.threshold < 1.0f)) throw ConfigError("threshold must be in (0, 1)");
    if (c.eval_every < 1) throw ConfigError("eval_every must be >= 1");
    if (c.clip_enabled && !(c.clip_norm > 0.0f)) throw ConfigError("clip_norm must be positive");
    if (c.threads < 1) throw ConfigError("threads must be >= 1");
    if (c.start_epoch < 0 || c.start_epoch > c.epochs) {
        throw ConfigError("start_epoch must be in [0, epochs]");
    }
}

void check_label_width(const Model& model, const std::vector<PatientRecord>& records) {
    for (const PatientRecord& r : records) {
        if (static_cast<int>(r.labels.size()) != model.config.num_outputs) {
            throw ConfigError("patient " + r.patient_id + " has " +
                              std::to_string(r.labels.size()) + " labels, model expects " +
                              std::to_string(model.config.num_outputs));
        }
    }
}

/// theta <- theta - lr * clip(g/m) where g is the accumulated gradient and m
/// the number of patients in the batch. Frozen parameters carry no gradient
/// and are skipped.
int apply_update(const Model& model, float lr, int m, bool clip_enabled, float clip_norm) {
    const auto params = model.parameters();
    double sq = 0.0;
    for (const TensorPtr& p : params) {
        if (!p->requires_grad || p->grad.empty()) continue;
        for (float g : p->grad) sq += static_cast<double>(g) * static_cast<double>(g);
    }
    const double dm = static_cast<double>(m);
    double factor = 1.0;
    if (clip_enabled) {
        const double norm = std::sqrt(sq) / dm;
        if (norm > static_cast<double>(clip_norm)) factor = static_cast<double>(clip_norm) / norm;
    }
    const float step = static_cast<float>(static_cast<double>(lr) * factor / dm);
    for (const TensorPtr& p : params) {
        if (!p->requires_grad || p->grad.empty()) continue;
        for (std::size_t i = 0; i < p->data.size(); ++i) p->data[i] -= step * p->grad[i];
    }
    return 1;
}

std::vector<TensorPtr> patient_tensors(const PatientRecord& rec, const std::vector<int>& order,
                                       int image_size, const AugmentParams& aug, Rng aug_rng) {
    const auto& images = rec.ensure_images();
    std::vector<TensorPtr> out;
    out.reserve(order.size());
    for (int idx : order) {
        TensorPtr t = gray_to_rgb(images[static_cast<std::size_t>(idx)], image_size);
        if (aug.enabled) t = augment(t, aug, aug_rng);
        out.push_back(std::move(t));
    }
    return out;
}

/// Bounded look-ahead producer pool. Items are produced by position and
/// consumed strictly in order, so results are independent of thread count.
class Prefetcher {
public:
    using Producer = std::function<std::vector<TensorPtr>(std::size_t)>;

    Prefetcher(std::size_t count, int threads, Producer producer)
        : count_(count), window_(static_cast<std::size_t>(threads) * 2 + 2),
          producer_(std::move(producer)), slots_(count) {
        const int workers = std::max(1, threads);
        for (int i = 0; i < workers; ++i) {
            workers_.emplace_back([this]() { work(); });
        }
    }

    ~Prefetcher() {
        {
            std::lock_guard<std::mutex> lock(mu_);
            abort_ = true;
        }
        cv_space_.notify_all();
        for (auto& t : workers_) t.join();
    }

    std::vector<TensorPtr> next() {
        std::unique_lock<std::mutex> lock(mu_);
        cv_ready_.wait(lock, [this]() { return slots_[consumed_].ready; });
        Slot slot = std::move(slots_[consumed_]);
        slots_[consumed_] = Slot{};
        ++consumed_;
        cv_space_.notify_all();
        if (slot.error) std::rethrow_exception(slot.error);
        return std::move(slot.item);
    }

private:
    struct Slot {
        bool ready = false;
        std::vector<TensorPtr> item;
        std::exception_ptr error;
    };

    void work() {
        for (;;) {
            std::size_t pos;
            {
                std::unique_lock<std::mutex> lock(mu_);
                cv_space_.wait(lock, [this]() {
                    return abort_ || claimed_ >= count_ || claimed_ < consumed_ + window_;
                });
                if (abort_ || claimed_ >= count_) return;
                pos = claimed_++;
            }
            Slot slot;
            try {
                slot.item = producer_(pos);
            } catch (...) {
                slot.error = std::current_exception();
            }
            slot.ready = true;
            {
                std::lock_guard<std::mutex> lock(mu_);
                slots_[pos] = std::move(slot);
            }
            cv_ready_.notify_all();
        }
    }

    std::size_t count_;
    std::size_t window_;
    Producer producer_;
    std::vector<Slot> slots_;
    std::vector<std::thread> workers_;
    std::mutex mu_;
    std::condition_variable cv_ready_;
    std::condition_variable cv_space_;
    std::size_t claimed_ = 0;
    std::size_t consumed_ = 0;
    bool abort_ = false;
};

double mean_precision(const MetricsReport& r) {
    double acc = 0.0;
    for (const auto& m : r.per_output) acc += m.precision;
    return acc / static_cast<double>(r.per_output.size());
}

double mean_recall(const MetricsReport& r) {
    double acc = 0.0;
    for (const auto& m : r.per_output) acc += m.recall;
    return acc / static_cast<double>(r.per_output.size());
}

double mean_f1(const MetricsReport& r) {
    double acc = 0.0;
    for (const auto& m : r.per_output) acc += m.f1;
    return acc / static_cast<double>(r.per_output.size());
}

}  // namespace

TrainHistory train(Model& model, const DatasetSplit& split, const TrainConfig& config,
                   const AugmentParams& augment_params, const EpochCallback& on_epoch) {
    validate_train_config(config);
    if (split.train.empty()) throw EmptyInputError("train: empty training split");
    check_label_width(model, split.train);
    check_label_width(model, split.validation);

    const ClassWeights weights = config.use_class_weights
                                     ? class_weights([&]() {
                                           std::vector<std::vector<int>> labels;
                                           for (const auto& r : split.train) labels.push_back(r.labels);
                                           return labels;
                                       }())
                                     : ClassWeights::ones(model.config.num_outputs);

    const Rng root(config.seed);
    TrainHistory history;
    model.zero_grads();
    int completed = config.start_epoch;

    for (int epoch = config.start_epoch; epoch < config.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        Rng shuffle_rng = root.stream(streams::kShuffle, static_cast<std::uint64_t>(epoch));
        const std::vector<EpochPatient> order = epoch_shuffle(split.train, shuffle_rng);

        auto produce = [&](std::size_t pos) {
            const EpochPatient& ep = order[pos];
            const PatientRecord& rec = split.train[ep.record_index];
            Rng aug_rng = root.stream(streams::kAugment, static_cast<std::uint64_t>(epoch))
                              .stream(static_cast<std::uint64_t>(ep.record_index));
            return patient_tensors(rec, ep.image_order, model.config.image_size, augment_params,
                                   aug_rng);
        };

        std::unique_ptr<Prefetcher> prefetch;
        if (config.threads > 1) {
            prefetch = std::make_unique<Prefetcher>(order.size(), config.threads, produce);
        }

        EpochStats stats;
        stats.epoch = epoch;
        MetricCounts counts(model.config.num_outputs);
        double loss_sum = 0.0;
        int accumulated = 0;

        for (std::size_t pos = 0; pos < order.size(); ++pos) {
            const PatientRecord& rec = split.train[order[pos].record_index];
            std::vector<TensorPtr> images = prefetch ? prefetch->next() : produce(pos);

            Tape tape;
            SequencePrediction pred = forward_sequence(&tape, model, images);
            TensorPtr loss = weighted_bce(&tape, pred.final_prob_tensor, rec.labels, weights);
            const double loss_val = static_cast<double>(loss->data[0]);
            if (!std::isfinite(loss_val)) {
                throw TrainAbortError(epoch, rec.patient_id, "non-finite training loss");
            }
            backward(loss, tape);
            ++accumulated;
            loss_sum += loss_val;
            confusion_update(counts, pred.final_probs, rec.labels, config.threshold);

            if (accumulated == config.accumulation_k) {
                stats.updates += apply_update(model, config.learning_rate, accumulated,
                                              config.clip_enabled, config.clip_norm);
                model.zero_grads();
                accumulated = 0;
            }
        }
        if (accumulated > 0) {
            stats.updates += apply_update(model, config.learning_rate, accumulated,
                                          config.clip_enabled, config.clip_norm);
            model.zero_grads();
        }

        stats.train_loss = loss_sum / static_cast<double>(order.size());
        stats.train_metrics = metrics_from_counts(counts);

        if (!split.validation.empty() && (epoch + 1) % config.eval_every == 0) {
            EvalResult ev = evaluate(model, split.validation, config.threshold);
            stats.has_validation = true;
            stats.val_loss = ev.mean_loss;
            stats.val_metrics = ev.metrics;
        }

        stats.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        history.epochs.push_back(stats);
        completed = epoch + 1;
        if (on_epoch && !on_epoch(stats)) break;
    }

    if (config.checkpoint_path) {
        save_checkpoint(model, TrainProgress{static_cast<std::uint32_t>(completed)},
                        *config.checkpoint_path);
    }
    return history;
}

EvalResult evaluate(const Model& model, const std::vector<PatientRecord>& records,
                    float threshold) {
    if (records.empty()) throw EmptyInputError("evaluate: empty record list");
    check_label_width(model, records);
    const ClassWeights ones = ClassWeights::ones(model.config.num_outputs);

    EvalResult result;
    result.counts = MetricCounts(model.config.num_outputs);
    double loss_sum = 0.0;
    for (const PatientRecord& rec : records) {
        const auto& images = rec.ensure_images();
        std::vector<TensorPtr> tensors;
        tensors.reserve(images.size());
        for (const ImageU8& img : images) {
            tensors.push_back(gray_to_rgb(img, model.config.image_size));
        }
        SequencePrediction pred = forward_sequence(nullptr, model, tensors);
        loss_sum += weighted_bce_value(pred.final_probs, rec.labels, ones);
        confusion_update(result.counts, pred.final_probs, rec.labels, threshold);
    }
    result.mean_loss = loss_sum / static_cast<double>(records.size());
    result.metrics = metrics_from_counts(result.counts);
    return result;
}

AccumCheckResult accumulate_equivalence_check(Model& model,
                                              const std::vector<PatientRecord>& patients,
                                              double rel_tol) {
    if (patients.size() < 2) throw EmptyInputError("accumulation check needs k >= 2 patients");
    check_label_width(model, patients);
    const ClassWeights ones = ClassWeights::ones(model.config.num_outputs);

    auto tensors_for = [&](const PatientRecord& rec) {
        const auto& images = rec.ensure_images();
        std::vector<TensorPtr> out;
        for (const ImageU8& img : images) out.push_back(gray_to_rgb(img, model.config.image_size));
        return out;
    };
    const auto params = model.parameters();
    auto snapshot = [&]() {
        std::vector<std::vector<float>> grads;
        for (const TensorPtr& p : params) {
            grads.push_back(p->grad.empty() ? std::vector<float>(p->data.size(), 0.0f) : p->grad);
        }
        return grads;
    };

    // Route A: one tape and one backward per patient, gradients accumulating
    // on the shared parameters (exactly what the training loop does).
    model.zero_grads();
    for (const PatientRecord& rec : patients) {
        Tape tape;
        SequencePrediction pred = forward_sequence(&tape, model, tensors_for(rec));
        TensorPtr loss = weighted_bce(&tape, pred.final_prob_tensor, rec.labels, ones);
        backward(loss, tape);
    }
    const auto grads_a = snapshot();

    // Route B: every forward pass on a single tape, one backward from the
    // summed loss. Passes are built in reverse patient order so both routes
    // add per-parameter contributions in the same sequence (float addition
    // is order-sensitive; the math is identical either way).
    model.zero_grads();
    {
        Tape tape;
        std::vector<TensorPtr> losses;
        for (std::size_t i = patients.size(); i-- > 0;) {
            const PatientRecord& rec = patients[i];
            SequencePrediction pred = forward_sequence(&tape, model, tensors_for(rec));
            losses.push_back(weighted_bce(&tape, pred.final_prob_tensor, rec.labels, ones));
        }
        TensorPtr total = losses[0];
        for (std::size_t i = 1; i < losses.size(); ++i) total = add(&tape, total, losses[i]);
        backward(total, tape);
    }
    const auto grads_b = snapshot();
    model.zero_grads();

    double gmax = 0.0;
    for (std::size_t p = 0; p < grads_a.size(); ++p) {
        for (std::size_t i = 0; i < grads_a[p].size(); ++i) {
            gmax = std::max({gmax, std::abs(static_cast<double>(grads_a[p][i])),
                             std::abs(static_cast<double>(grads_b[p][i]))});
        }
    }
    AccumCheckResult result;
    const double floor = 1e-4 * gmax;
    for (std::size_t p = 0; p < grads_a.size(); ++p) {
        for (std::size_t i = 0; i < grads_a[p].size(); ++i) {
            const double a = static_cast<double>(grads_a[p][i]);
            const double b = static_cast<double>(grads_b[p][i]);
            const double scale = std::max(std::abs(a), std::abs(b));
            if (scale < floor || scale == 0.0) continue;
            result.max_rel_err = std::max(result.max_rel_err, std::abs(a - b) / scale);
        }
    }
    result.ok = result.max_rel_err <= rel_tol;
    return result;
}

void write_history_csv(const TrainHistory& history, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write history CSV: " + path);
    out << "epoch,train_loss,train_acc,train_precision,train_recall,train_f1,"
        << "val_loss,val_acc,val_precision,val_recall,val_f1,seconds\n";
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.9g", v);
        return std::string(buf);
    };
    for (const EpochStats& e : history.epochs) {
        out << e.epoch << ',' << num(e.train_loss) << ',' << num(e.train_metrics.combined_accuracy)
            << ',' << num(mean_precision(e.train_metrics)) << ',' << num(mean_recall(e.train_metrics))
            << ',' << num(mean_f1(e.train_metrics)) << ',';
        if (e.has_validation) {
            out << num(e.val_loss) << ',' << num(e.val_metrics.combined_accuracy) << ','
                << num(mean_precision(e.val_metrics)) << ',' << num(mean_recall(e.val_metrics))
                << ',' << num(mean_f1(e.val_metrics));
        } else {
            out << ",,,,";
        }
        std::snprintf(buf, sizeof(buf), "%.3f", e.seconds);
        out << ',' << buf << '\n';
    }
    out.flush();
    if (!out) throw IoError("failed writing history CSV: " + path);
}

}  // namespace seqdx
