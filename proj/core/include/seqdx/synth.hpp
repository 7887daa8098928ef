// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "seqdx/dataset.hpp"

namespace seqdx {

/// Synthetic patient-sequence task: positive patients get a bright
/// Gaussian-profile disk planted in a random subset of their images, so only
/// aggregation across the sequence can recover the patient-level label.
struct SynthConfig {
    int num_patients = 250;
    int image_size = 32;
    int min_images = 3;
    int max_images = 12;
    std::vector<float> prevalence = {0.2830f};  // one entry per disease (1 or 5)
    int blob_radius_px = 3;
    float blob_intensity = 0.8f;
    float noise_sigma = 0.02f;
    float affected_min = 0.2f;  // fraction of images carrying the blob
    float affected_max = 0.6f;

    int num_outputs() const { return static_cast<int>(prevalence.size()); }
    void validate() const;
};

/// Ground-truth blob placement (x = column, y = row of the blob center).
struct BlobPlacement {
    int image_index = 0;
    int x = 0;
    int y = 0;
};

struct SynthPatient {
    PatientRecord record;  // images materialized in memory
    std::vector<BlobPlacement> blobs;
};

/// Deterministic per (seed, patient_index): sequence length is uniform in
/// [min_images, max_images]; each positive disease plants its blob in
/// ceil(fraction * n) images, fraction uniform in [affected_min,
/// affected_max]; every image then gets N(0, noise_sigma) pixel noise and is
/// clamped to [0, 1] before 8-bit quantization.
SynthPatient generate_patient(const SynthConfig& config, std::uint64_t seed,
                              std::uint64_t patient_index);

struct SynthDataset {
    std::vector<PatientRecord> records;
    std::vector<std::pair<std::string, BlobPlacement>> manifest;  // (patient_id, placement)
};

/// Generate the whole dataset in memory.
SynthDataset generate_dataset(const SynthConfig& config, std::uint64_t seed);

/// Generate and write the standard on-disk layout: <out>/<pid>/img_NNN.png,
/// labels.csv, and manifest.csv (patient_id,image_index,blob_x,blob_y).
SynthDataset generate_dataset(const SynthConfig& config, std::uint64_t seed,
                              const std::string& out_dir);

/// Intensity/size signature of each disease's blob relative to the base
/// radius/intensity (index 0 is the single-disease blob).
struct BlobSignature {
    float radius_scale;
    float intensity_scale;
};
BlobSignature blob_signature(int disease);

/// Hand-written reference detector: max over images of the best box-mean
/// window response, OR-reduced to a patient-level prediction. Serves as an
/// independent upper-reference for what the learned model can achieve.
float blob_oracle_score(const std::vector<ImageU8>& images, int window);

/// Default decision threshold for the oracle on a given config (half the
/// ideal blob window response).
float blob_oracle_threshold(const SynthConfig& config);

/// 1 when any image's oracle score clears the threshold.
int blob_oracle_predict(const PatientRecord& record, const SynthConfig& config);

}  // namespace seqdx
