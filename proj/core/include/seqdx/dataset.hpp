// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "seqdx/image.hpp"
#include "seqdx/rng.hpp"
#include "seqdx/tensor.hpp"

namespace seqdx {

inline constexpr std::array<const char*, 5> kDiseaseNames = {
    "hemorrhage", "ischemia", "fracture", "mass", "edema"};
inline constexpr int kDefaultMaxImagesPerPatient = 50;

/// One patient: an ordered set of images and a single diagnostic label
/// vector. Labels exist only at this granularity, never per image.
struct PatientRecord {
    std::string patient_id;
    std::vector<std::string> image_refs;  // file paths, lexicographic by filename
    std::vector<int> labels;              // 1 or 5 binary indicators

    /// Decoded grayscale images; filled by generators, or lazily from
    /// image_refs on first use. Not safe to call concurrently on one record.
    mutable std::vector<ImageU8> images;

    std::size_t num_images() const {
        return images.empty() ? image_refs.size() : images.size();
    }

    /// Decode image_refs into `images` if not already materialized.
    const std::vector<ImageU8>& ensure_images() const;
};

struct AugmentParams {
    float max_rotation_deg = 10.0f;
    float crop_scale_min = 0.6f;
    bool enabled = true;
};

struct DatasetSplit {
    std::vector<PatientRecord> train;
    std::vector<PatientRecord> validation;
};

struct LoadOptions {
    int num_outputs = 5;                       // 1 reads only `disease_column`
    std::string disease_column = "hemorrhage";
};

struct LoadReport {
    int excluded_unlabeled = 0;   // empty diagnostic cell, or no CSV row
    int excluded_no_images = 0;   // patient directory without readable images
    int skipped_missing_dir = 0;  // CSV row without a directory
    std::vector<std::string> warnings;
};

/// Read the patient-per-directory layout: <root>/<patient_id>/*.png|*.jpg
/// plus the labels CSV (header: patient_id,hemorrhage,ischemia,fracture,
/// mass,edema). Image order inside each record is lexicographic by filename.
std::vector<PatientRecord> load_dataset(const std::string& root, const std::string& labels_file,
                                        const LoadOptions& options = {},
                                        LoadReport* report = nullptr);

/// Drop whole records with more than `max_images` images (no truncation).
std::vector<PatientRecord> filter_patients(std::vector<PatientRecord> records, int max_images,
                                           int* removed = nullptr);

/// Random rotation (uniform in +-max_rotation_deg, bilinear, zero fill)
/// followed by a random resized crop (area fraction uniform in
/// [crop_scale_min, 1], uniform position, bilinear resize back). Disabled
/// params return a bit-identical copy. Draw order is fixed: angle, area
/// fraction, x offset, y offset.
TensorPtr augment(const TensorPtr& image, const AugmentParams& params, Rng& rng);

/// Deterministic patient-level split; validation gets round(n * val_fraction)
/// patients (clamped to [1, n-1]) of a seeded shuffle.
DatasetSplit split_train_val(const std::vector<PatientRecord>& records, double val_fraction,
                             std::uint64_t seed);

/// One patient in epoch order plus its image visit order for this epoch.
struct EpochPatient {
    std::size_t record_index;
    std::vector<int> image_order;
};

/// Uniformly permute patient order, then independently permute each
/// patient's image order. Deterministic given the rng state.
std::vector<EpochPatient> epoch_shuffle(const std::vector<PatientRecord>& records, Rng& rng);

/// Parse one labels CSV into (patient_id -> label vector or nullopt when the
/// needed cells are empty). Exposed for tests; load_dataset uses it.
std::vector<std::pair<std::string, std::optional<std::vector<int>>>> parse_labels_csv(
    const std::string& labels_file, const LoadOptions& options);

}  // namespace seqdx
