// SPDX-License-Identifier: Apache-2.0
//
// seqdx command line: synthetic dataset generation, training, evaluation,
// single-patient prediction and the numerical self-check suite.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage/config error.
// Progress goes to stderr; machine-readable results go to stdout.

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "seqdx/checkpoint.hpp"
#include "seqdx/run_config.hpp"
#include "seqdx/selfcheck.hpp"
#include "seqdx/synth.hpp"
#include "seqdx/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct SynthArgs {
    std::string out;
    int patients = 0;
    std::uint64_t seed = 0;
    std::vector<float> prevalence;
    int image_size = 32;
    int min_images = 3;
    int max_images = 12;
    double noise_sigma = 0.02;
    int blob_radius = 3;
    double blob_intensity = 0.8;
};

int cmd_synth(const SynthArgs& args) {
    seqdx::SynthConfig config;
    config.num_patients = args.patients;
    config.image_size = args.image_size;
    config.min_images = args.min_images;
    config.max_images = args.max_images;
    config.noise_sigma = static_cast<float>(args.noise_sigma);
    config.blob_radius_px = args.blob_radius;
    config.blob_intensity = static_cast<float>(args.blob_intensity);
    if (!args.prevalence.empty()) config.prevalence = args.prevalence;
    config.validate();

    std::cerr << "generating " << config.num_patients << " patients into " << args.out << "\n";
    const seqdx::SynthDataset ds = seqdx::generate_dataset(config, args.seed, args.out);

    std::size_t images = 0;
    std::vector<long> positives(config.prevalence.size(), 0);
    for (const auto& rec : ds.records) {
        images += rec.images.size();
        for (std::size_t d = 0; d < rec.labels.size(); ++d) positives[d] += rec.labels[d];
    }
    std::cout << "patients=" << ds.records.size() << " images=" << images;
    for (std::size_t d = 0; d < positives.size(); ++d) {
        std::printf(" positive_rate_%zu=%.4f", d,
                    static_cast<double>(positives[d]) / static_cast<double>(ds.records.size()));
    }
    std::cout << "\n";
    return kExitOk;
}

struct TrainArgs {
    std::string data;
    std::string labels;
    std::string config_file;
    std::vector<std::string> overrides;
    std::string resume;
    std::string out_history;
    std::string out_ckpt;
};

std::vector<seqdx::PatientRecord> load_and_filter(const std::string& data,
                                                  const std::string& labels_flag,
                                                  const seqdx::LoadOptions& opts, int max_images) {
    const std::string labels =
        labels_flag.empty() ? (fs::path(data) / "labels.csv").string() : labels_flag;
    seqdx::LoadReport report;
    auto records = seqdx::load_dataset(data, labels, opts, &report);
    for (const std::string& w : report.warnings) std::cerr << "warning: " << w << "\n";
    int removed = 0;
    records = seqdx::filter_patients(std::move(records), max_images, &removed);
    if (removed > 0) {
        std::cerr << removed << " patient(s) removed (more than " << max_images << " images)\n";
    }
    return records;
}

int cmd_train(const TrainArgs& args) {
    seqdx::RunConfig cfg = args.config_file.empty()
                               ? seqdx::RunConfig::from_overrides(args.overrides)
                               : seqdx::RunConfig::load(args.config_file, args.overrides);

    seqdx::LoadOptions opts;
    opts.num_outputs = cfg.model.num_outputs;
    opts.disease_column = cfg.disease_column;
    auto records = load_and_filter(args.data, args.labels, opts, cfg.max_images_per_patient);
    if (records.size() < 2) {
        std::cerr << "error: need at least 2 usable patients, have " << records.size() << "\n";
        return kExitRuntime;
    }
    const seqdx::DatasetSplit split =
        seqdx::split_train_val(records, cfg.val_fraction, cfg.train.seed);
    std::cerr << "dataset: " << split.train.size() << " train / " << split.validation.size()
              << " validation patients\n";

    seqdx::Model model;
    if (!args.resume.empty()) {
        seqdx::Checkpoint ck = seqdx::load_checkpoint(args.resume);
        if (!(ck.model.config == cfg.model)) {
            throw seqdx::ConfigError("checkpoint model config does not match the run config");
        }
        model = std::move(ck.model);
        cfg.train.start_epoch = static_cast<int>(ck.progress.epochs_completed);
        std::cerr << "resuming at epoch " << cfg.train.start_epoch << " from " << args.resume
                  << "\n";
    } else {
        model = seqdx::init_model(cfg.model, cfg.train.seed);
    }
    if (!args.out_ckpt.empty()) cfg.train.checkpoint_path = args.out_ckpt;

    auto progress = [&](const seqdx::EpochStats& e) {
        std::fprintf(stderr, "epoch %d/%d loss %.4f acc %.4f", e.epoch + 1, cfg.train.epochs,
                     e.train_loss, e.train_metrics.combined_accuracy);
        if (e.has_validation) {
            std::fprintf(stderr, " val_loss %.4f val_acc %.4f", e.val_loss,
                         e.val_metrics.combined_accuracy);
        }
        std::fprintf(stderr, " (%.1fs)\n", e.seconds);
        return true;
    };

    const seqdx::TrainHistory history =
        seqdx::train(model, split, cfg.train, cfg.augment, progress);
    if (!args.out_history.empty()) seqdx::write_history_csv(history, args.out_history);

    if (!history.epochs.empty()) {
        const auto& last = history.epochs.back();
        std::printf("epochs=%zu train_loss=%.6f train_acc=%.4f", history.epochs.size(),
                    last.train_loss, last.train_metrics.combined_accuracy);
        if (last.has_validation) std::printf(" val_acc=%.4f", last.val_metrics.combined_accuracy);
        std::printf("\n");
    }
    return kExitOk;
}

struct EvalArgs {
    std::string data;
    std::string labels;
    std::string ckpt;
    double threshold = 0.5;
    bool json_out = false;
    std::string disease_column = "hemorrhage";
};

std::vector<std::string> disease_names_for(const seqdx::ModelConfig& config,
                                           const std::string& single_column) {
    if (config.num_outputs == 5) {
        return {seqdx::kDiseaseNames.begin(), seqdx::kDiseaseNames.end()};
    }
    return {single_column};
}

int cmd_eval(const EvalArgs& args) {
    const seqdx::Checkpoint ck = seqdx::load_checkpoint(args.ckpt);
    seqdx::LoadOptions opts;
    opts.num_outputs = ck.model.config.num_outputs;
    opts.disease_column = args.disease_column;
    auto records = load_and_filter(args.data, args.labels, opts,
                                   seqdx::kDefaultMaxImagesPerPatient);
    if (records.empty()) {
        std::cerr << "error: no usable patients in " << args.data << "\n";
        return kExitRuntime;
    }
    const seqdx::EvalResult result =
        seqdx::evaluate(ck.model, records, static_cast<float>(args.threshold));
    const auto names = disease_names_for(ck.model.config, args.disease_column);

    if (args.json_out) {
        json out;
        out["threshold"] = args.threshold;
        out["patients"] = records.size();
        out["mean_loss"] = result.mean_loss;
        out["combined_accuracy"] = result.metrics.combined_accuracy;
        out["diseases"] = json::array();
        for (std::size_t d = 0; d < names.size(); ++d) {
            const auto& m = result.metrics.per_output[d];
            out["diseases"].push_back({{"name", names[d]},
                                       {"accuracy", m.accuracy},
                                       {"precision", m.precision},
                                       {"recall", m.recall},
                                       {"f1", m.f1},
                                       {"degenerate", m.precision_degenerate ||
                                                          m.recall_degenerate || m.f1_degenerate}});
        }
        std::cout << out.dump(2) << "\n";
    } else {
        std::printf("%-12s %8s %9s %8s %8s\n", "disease", "accuracy", "precision", "recall", "f1");
        for (std::size_t d = 0; d < names.size(); ++d) {
            const auto& m = result.metrics.per_output[d];
            std::printf("%-12s %8.4f %9.4f %8.4f %8.4f%s\n", names[d].c_str(), m.accuracy,
                        m.precision, m.recall, m.f1,
                        (m.precision_degenerate || m.recall_degenerate || m.f1_degenerate)
                            ? "  (degenerate)"
                            : "");
        }
        std::printf("combined_accuracy %.4f\n", result.metrics.combined_accuracy);
        std::printf("mean_loss %.6f\n", result.mean_loss);
    }
    return kExitOk;
}

struct PredictArgs {
    std::string ckpt;
    std::string dir;
    bool json_out = false;
    std::string disease_column = "hemorrhage";
};

int cmd_predict(const PredictArgs& args) {
    const seqdx::Checkpoint ck = seqdx::load_checkpoint(args.ckpt);
    if (!fs::is_directory(args.dir)) {
        throw seqdx::IoError("patient directory not found: " + args.dir);
    }
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(args.dir)) {
        if (!entry.is_regular_file()) continue;
        std::string ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") files.push_back(entry.path().string());
    }
    std::sort(files.begin(), files.end(), [](const std::string& a, const std::string& b) {
        return fs::path(a).filename().string() < fs::path(b).filename().string();
    });
    if (files.empty()) throw seqdx::IoError("no images in " + args.dir);

    std::vector<seqdx::TensorPtr> images;
    for (const std::string& f : files) {
        images.push_back(seqdx::gray_to_rgb(seqdx::decode_image(f), ck.model.config.image_size));
    }
    const seqdx::SequencePrediction pred = seqdx::forward_sequence(nullptr, ck.model, images);
    const auto names = disease_names_for(ck.model.config, args.disease_column);

    if (args.json_out) {
        json out;
        out["images"] = files.size();
        out["final_probs"] = pred.final_probs;
        out["per_step_probs"] = pred.per_step_probs;
        std::cout << out.dump(2) << "\n";
    } else {
        for (std::size_t d = 0; d < names.size(); ++d) {
            std::printf("%s %.6f\n", names[d].c_str(), pred.final_probs[d]);
        }
    }
    return kExitOk;
}

int cmd_selfcheck(std::uint64_t seed) {
    const seqdx::SelfcheckReport report = seqdx::run_selfcheck(seed);
    for (const auto& item : report.items) {
        std::printf("[%s] %-24s max_dev %.3e (%.2fs)\n", item.pass ? "PASS" : "FAIL",
                    item.name.c_str(), item.max_dev, item.seconds);
    }
    if (!report.all_pass()) {
        std::cerr << "selfcheck failed\n";
        return kExitRuntime;
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"seqdx: variable-length image-sequence diagnostic classifier"};
    app.require_subcommand(1);

    SynthArgs synth_args;
    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic patient dataset");
    synth->add_option("--out", synth_args.out, "output directory")->required();
    synth->add_option("--patients", synth_args.patients, "number of patients")->required();
    synth->add_option("--seed", synth_args.seed, "root seed")->required();
    synth->add_option("--prevalence", synth_args.prevalence,
                      "per-disease positive rate (1 or 5 values)");
    synth->add_option("--image-size", synth_args.image_size, "square image side");
    synth->add_option("--min-images", synth_args.min_images, "minimum images per patient");
    synth->add_option("--max-images", synth_args.max_images, "maximum images per patient");
    synth->add_option("--noise-sigma", synth_args.noise_sigma, "pixel noise sigma");
    synth->add_option("--blob-radius", synth_args.blob_radius, "blob radius in pixels");
    synth->add_option("--blob-intensity", synth_args.blob_intensity, "blob peak intensity");

    TrainArgs train_args;
    CLI::App* train = app.add_subcommand("train", "train a model");
    train->add_option("--data", train_args.data, "dataset root directory")->required();
    train->add_option("--labels", train_args.labels, "labels CSV (default <data>/labels.csv)");
    train->add_option("--config", train_args.config_file, "flat key=value config file");
    train->add_option("--set", train_args.overrides, "config override key=value (repeatable)");
    train->add_option("--resume", train_args.resume, "checkpoint to resume from");
    train->add_option("--out-history", train_args.out_history, "write per-epoch history CSV");
    train->add_option("--out-ckpt", train_args.out_ckpt, "write final checkpoint");

    EvalArgs eval_args;
    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    eval->add_option("--data", eval_args.data, "dataset root directory")->required();
    eval->add_option("--labels", eval_args.labels, "labels CSV (default <data>/labels.csv)");
    eval->add_option("--ckpt", eval_args.ckpt, "checkpoint path")->required();
    eval->add_option("--threshold", eval_args.threshold, "decision threshold in (0,1)");
    eval->add_flag("--json", eval_args.json_out, "JSON output");
    eval->add_option("--disease-column", eval_args.disease_column,
                     "disease name for single-output models");

    PredictArgs predict_args;
    CLI::App* predict = app.add_subcommand("predict", "predict one patient directory");
    predict->add_option("--ckpt", predict_args.ckpt, "checkpoint path")->required();
    predict->add_option("--dir", predict_args.dir, "patient image directory")->required();
    predict->add_flag("--json", predict_args.json_out, "JSON output");
    predict->add_option("--disease-column", predict_args.disease_column,
                        "disease name for single-output models");

    std::uint64_t selfcheck_seed = 42;
    CLI::App* selfcheck = app.add_subcommand("selfcheck", "run the numerical oracle suite");
    selfcheck->add_option("--seed", selfcheck_seed, "seed for the random instances");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*synth) return cmd_synth(synth_args);
        if (*train) return cmd_train(train_args);
        if (*eval) {
            if (!(eval_args.threshold > 0.0 && eval_args.threshold < 1.0)) {
                std::cerr << "error: --threshold must be in (0, 1)\n";
                return kExitUsage;
            }
            return cmd_eval(eval_args);
        }
        if (*predict) return cmd_predict(predict_args);
        if (*selfcheck) return cmd_selfcheck(selfcheck_seed);
    } catch (const seqdx::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const seqdx::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
