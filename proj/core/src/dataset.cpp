// SPDX-License-Identifier: Apache-2.0
#include "seqdx/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

namespace fs = std::filesystem;

namespace seqdx {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    std::stringstream ss(line);
    while (std::getline(ss, cur, ',')) cells.push_back(trim(cur));
    if (!line.empty() && line.back() == ',') cells.push_back("");
    return cells;
}

bool has_image_extension(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

int disease_column_index(const std::string& name) {
    for (std::size_t i = 0; i < kDiseaseNames.size(); ++i) {
        if (name == kDiseaseNames[i]) return static_cast<int>(i);
    }
    throw ConfigError("unknown disease column '" + name + "'");
}

}  // namespace

const std::vector<ImageU8>& PatientRecord::ensure_images() const {
    if (images.empty() && !image_refs.empty()) {
        images.reserve(image_refs.size());
        for (const std::string& ref : image_refs) images.push_back(decode_image(ref));
    }
    return images;
}

std::vector<std::pair<std::string, std::optional<std::vector<int>>>> parse_labels_csv(
    const std::string& labels_file, const LoadOptions& options) {
    std::ifstream in(labels_file);
    if (!in) throw IoError("cannot open labels file " + labels_file);
    if (options.num_outputs != 1 && options.num_outputs != 5) {
        throw ConfigError("num_outputs must be 1 or 5");
    }
    const int single_col = disease_column_index(options.disease_column);

    std::string line;
    if (!std::getline(in, line)) throw IoError("labels file is empty: " + labels_file);
    const auto header = split_csv_line(line);
    if (header.size() != 6 || header[0] != "patient_id") {
        throw IoError("labels file header must be patient_id," +
                      std::string("hemorrhage,ischemia,fracture,mass,edema"));
    }
    for (int d = 0; d < 5; ++d) {
        if (header[d + 1] != kDiseaseNames[d]) {
            throw IoError("labels header column " + std::to_string(d + 1) + " must be " +
                          kDiseaseNames[d] + ", got '" + header[d + 1] + "'");
        }
    }

    std::vector<std::pair<std::string, std::optional<std::vector<int>>>> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != 6) {
            throw IoError("labels row " + std::to_string(lineno) + " has " +
                          std::to_string(cells.size()) + " cells, expected 6");
        }
        const std::string pid = cells[0];
        if (pid.empty()) throw IoError("labels row " + std::to_string(lineno) + ": empty patient_id");

        auto cell_value = [&](int d) -> std::optional<int> {
            const std::string& c = cells[d + 1];
            if (c.empty()) return std::nullopt;
            if (c == "0") return 0;
            if (c == "1") return 1;
            throw IoError("labels row " + std::to_string(lineno) + ": indicator must be 0 or 1, got '" +
                          c + "'");
        };

        std::optional<std::vector<int>> labels = std::vector<int>{};
        if (options.num_outputs == 1) {
            auto v = cell_value(single_col);
            if (!v) {
                labels = std::nullopt;
            } else {
                labels->push_back(*v);
            }
        } else {
            for (int d = 0; d < 5; ++d) {
                auto v = cell_value(d);
                if (!v) {
                    labels = std::nullopt;
                    break;
                }
                labels->push_back(*v);
            }
        }
        rows.emplace_back(pid, std::move(labels));
    }
    return rows;
}

std::vector<PatientRecord> load_dataset(const std::string& root, const std::string& labels_file,
                                        const LoadOptions& options, LoadReport* report) {
    LoadReport local;
    LoadReport& rep = report ? *report : local;

    if (!fs::is_directory(root)) throw IoError("dataset root is not a directory: " + root);
    const auto rows = parse_labels_csv(labels_file, options);

    std::vector<PatientRecord> records;
    for (const auto& [pid, labels] : rows) {
        if (!labels) {
            ++rep.excluded_unlabeled;
            rep.warnings.push_back("patient " + pid + " has no diagnostic, excluded");
            continue;
        }
        const fs::path dir = fs::path(root) / pid;
        if (!fs::is_directory(dir)) {
            ++rep.skipped_missing_dir;
            rep.warnings.push_back("label row for " + pid + " has no directory, skipped");
            continue;
        }
        PatientRecord rec;
        rec.patient_id = pid;
        rec.labels = *labels;
        for (const auto& entry : fs::directory_iterator(dir)) {
            if (entry.is_regular_file() && has_image_extension(entry.path())) {
                rec.image_refs.push_back(entry.path().string());
            }
        }
        std::sort(rec.image_refs.begin(), rec.image_refs.end(),
                  [](const std::string& a, const std::string& b) {
                      return fs::path(a).filename().string() < fs::path(b).filename().string();
                  });
        if (rec.image_refs.empty()) {
            ++rep.excluded_no_images;
            rep.warnings.push_back("patient " + pid + " has no readable images, excluded");
            continue;
        }
        records.push_back(std::move(rec));
    }
    return records;
}

std::vector<PatientRecord> filter_patients(std::vector<PatientRecord> records, int max_images,
                                           int* removed) {
    if (max_images < 1) throw ConfigError("max_images must be >= 1");
    const std::size_t before = records.size();
    records.erase(std::remove_if(records.begin(), records.end(),
                                 [max_images](const PatientRecord& r) {
                                     return r.num_images() > static_cast<std::size_t>(max_images);
                                 }),
                  records.end());
    if (removed) *removed = static_cast<int>(before - records.size());
    return records;
}

TensorPtr augment(const TensorPtr& image, const AugmentParams& params, Rng& rng) {
    if (params.max_rotation_deg < 0.0f || params.max_rotation_deg >= 90.0f) {
        throw ConfigError("max_rotation_deg must be in [0, 90)");
    }
    if (!(params.crop_scale_min > 0.0f && params.crop_scale_min <= 1.0f)) {
        throw ConfigError("crop_scale_min must be in (0, 1]");
    }
    if (!params.enabled) {
        auto copy = std::make_shared<Tensor>(*image);
        copy->requires_grad = false;
        copy->grad.clear();
        return copy;
    }
    const int s = image->shape.size() == 3 ? image->shape[1] : 0;
    const float angle = rng.uniform(-params.max_rotation_deg, params.max_rotation_deg);
    TensorPtr rotated = rotate_bilinear(image, angle);

    const float area = rng.uniform(params.crop_scale_min, 1.0f);
    const float side = static_cast<float>(s) * std::sqrt(area);
    const float slack = static_cast<float>(s) - side;
    const float x0 = rng.uniform(0.0f, slack);
    const float y0 = rng.uniform(0.0f, slack);
    return crop_resize_bilinear(rotated, x0, y0, side);
}

DatasetSplit split_train_val(const std::vector<PatientRecord>& records, double val_fraction,
                             std::uint64_t seed) {
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
        throw ConfigError("val_fraction must be in (0, 1)");
    }
    if (records.size() < 2) throw EmptyInputError("split requires at least 2 patients");

    std::vector<std::size_t> idx(records.size());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng = Rng(seed).stream(streams::kSplit);
    rng.shuffle(idx);

    const auto n = static_cast<long long>(records.size());
    long long val_n = std::llround(static_cast<double>(n) * val_fraction);
    val_n = std::clamp(val_n, 1ll, n - 1);

    DatasetSplit split;
    for (long long i = 0; i < n; ++i) {
        if (i < val_n) {
            split.validation.push_back(records[idx[static_cast<std::size_t>(i)]]);
        } else {
            split.train.push_back(records[idx[static_cast<std::size_t>(i)]]);
        }
    }
    return split;
}

std::vector<EpochPatient> epoch_shuffle(const std::vector<PatientRecord>& records, Rng& rng) {
    std::vector<std::size_t> order(records.size());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);

    std::vector<EpochPatient> out;
    out.reserve(records.size());
    for (std::size_t ri : order) {
        EpochPatient ep;
        ep.record_index = ri;
        ep.image_order.resize(records[ri].num_images());
        std::iota(ep.image_order.begin(), ep.image_order.end(), 0);
        rng.shuffle(ep.image_order);
        out.push_back(std::move(ep));
    }
    return out;
}

}  // namespace seqdx
