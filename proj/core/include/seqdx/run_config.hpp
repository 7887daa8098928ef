// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "seqdx/dataset.hpp"
#include "seqdx/model.hpp"
#include "seqdx/trainer.hpp"

namespace seqdx {

/// Merged view of model, training, augmentation and data options, parsed
/// from a flat `key = value` config file (one pair per line, `#` comments)
/// with command-line overrides applied on top. Unknown keys fail fast.
struct RunConfig {
    ModelConfig model;
    TrainConfig train;
    AugmentParams augment;
    int max_images_per_patient = kDefaultMaxImagesPerPatient;
    double val_fraction = 0.1;
    std::string disease_column = "hemorrhage";

    void validate() const;

    /// Apply one "key=value" assignment. Throws ConfigError for unknown keys
    /// or malformed values; `where` names the source for the message.
    void set(const std::string& key, const std::string& value, const std::string& where);

    static RunConfig load(const std::string& config_file,
                          const std::vector<std::string>& overrides = {});
    static RunConfig from_overrides(const std::vector<std::string>& overrides);

    static std::vector<std::string> known_keys();
};

}  // namespace seqdx
