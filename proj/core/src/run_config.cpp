// SPDX-License-Identifier: Apache-2.0
#include "seqdx/run_config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace seqdx {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

long long parse_int(const std::string& v, const std::string& key) {
    long long out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) {
        throw ConfigError("key '" + key + "': expected integer, got '" + v + "'");
    }
    return out;
}

std::uint64_t parse_u64(const std::string& v, const std::string& key) {
    std::uint64_t out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) {
        throw ConfigError("key '" + key + "': expected unsigned integer, got '" + v + "'");
    }
    return out;
}

double parse_real(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        const double out = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': expected number, got '" + v + "'");
    }
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("key '" + key + "': expected true/false, got '" + v + "'");
}

std::vector<int> parse_int_list(const std::string& v, const std::string& key) {
    std::vector<int> out;
    std::stringstream ss(v);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        cell = trim(cell);
        if (cell.empty()) throw ConfigError("key '" + key + "': empty list entry");
        out.push_back(static_cast<int>(parse_int(cell, key)));
    }
    if (out.empty()) throw ConfigError("key '" + key + "': empty list");
    return out;
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& schema() {
    static const std::map<std::string, Setter> table = {
        {"image_size",
         [](RunConfig& c, const std::string& v, const std::string& k) {
             c.model.image_size = static_cast<int>(parse_int(v, k));
         }},
        {"encoder_channels",
         [](RunConfig& c, const std::string& v, const std::string& k) {
             c.model.encoder_channels = parse_int_list(v, k);
         }},
        {"fc_sizes",
         [](RunConfig& c, const std::string& v, const std::string& k) {
             c.model.fc_sizes = parse_int_list(v, k);
         }},
        {"lstm_hidden",
         [](RunConfig& c, const std::string& v, const std::string& k) {
             c.model.lstm_hidden = static_cast<int>(parse_int(v, k));
         }},
        {"num_outputs",
         [](RunConfig& c, const std::string& v, const std::string& k) {
             c.model.num_outputs = static_cast<int>(parse_int(v, k));
         }},
        {"freeze_first_n",
         [](RunConfig& c, const std::string& v, const std::string& k) {
             c.model.freeze_first_n = static_cast<int>(parse_int(v, k));
         }},
        {"learning_rate",
         [](RunConfig& c, const std::string& v, const std::string& k) {
             c.train.learning_rate = static_cast<float>(parse_real(v, k));
         }},
        {"accumulation_k",
         [](RunConfig& c, const std::string& v, const std::string& k) {
             c.train.accumulation_k = static_cast<int>(parse_int(v, k));
         }},
        {"epochs",
         [](RunConfig& c, const std::string& v, const std::string& k) {
             c.train.epochs = static_cast<int>(parse_int(v, k));
         }},
        {"seed",
         [](RunConfig& c, const std::string& v, const std::string& k) {
             c.train.seed = parse_u64(v, k);
         }},
        {"threshold",
         [](RunConfig& c, const std::string& v, const std::string& k) {
             c.train.threshold = static_cast<float>(parse_real(v, k));
         }},
        {"use_class_weights",
         [](RunConfig& c, const std::string& v, const std::string& k) {
             c.train.use_class_weights = parse_bool(v, k);
         }},
        {"eval_every",
         [](RunConfig& c, const std::string& v, const std::string& k) {
             c.train.eval_every = static_cast<int>(parse_int(v, k));
         }},
        {"clip_enabled",
         [](RunConfig& c, const std::string& v, const std::string& k) {
             c.train.clip_enabled = parse_bool(v, k);
         }},
        {"clip_norm",
         [](RunConfig& c, const std::string& v, const std::string& k) {
             c.train.clip_norm = static_cast<float>(parse_real(v, k));
         }},
        {"threads",
         [](RunConfig& c, const std::string& v, const std::string& k) {
             c.train.threads = static_cast<int>(parse_int(v, k));
         }},
        {"augment_enabled",
         [](RunConfig& c, const std::string& v, const std::string& k) {
             c.augment.enabled = parse_bool(v, k);
         }},
        {"max_rotation_deg",
         [](RunConfig& c, const std::string& v, const std::string& k) {
             c.augment.max_rotation_deg = static_cast<float>(parse_real(v, k));
         }},
        {"crop_scale_min",
         [](RunConfig& c, const std::string& v, const std::string& k) {
             c.augment.crop_scale_min = static_cast<float>(parse_real(v, k));
         }},
        {"max_images_per_patient",
         [](RunConfig& c, const std::string& v, const std::string& k) {
             c.max_images_per_patient = static_cast<int>(parse_int(v, k));
         }},
        {"val_fraction",
         [](RunConfig& c, const std::string& v, const std::string& k) {
             c.val_fraction = parse_real(v, k);
         }},
        {"disease_column",
         [](RunConfig& c, const std::string& v, const std::string&) { c.disease_column = v; }},
    };
    return table;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value, const std::string& where) {
    const auto& table = schema();
    const auto it = table.find(key);
    if (it == table.end()) {
        throw ConfigError(where + ": unknown key '" + key + "'");
    }
    it->second(*this, value, key);
}

void RunConfig::validate() const {
    model.validate();
    if (!(train.learning_rate > 0.0f)) throw ConfigError("learning_rate must be positive");
    if (train.accumulation_k < 1) throw ConfigError("accumulation_k must be >= 1");
    if (train.epochs < 1) throw ConfigError("epochs must be >= 1");
    if (!(train.threshold > 0.0f && train.threshold < 1.0f)) {
        throw ConfigError("threshold must be in (0, 1)");
    }
    if (train.eval_every < 1) throw ConfigError("eval_every must be >= 1");
    if (train.clip_enabled && !(train.clip_norm > 0.0f)) {
        throw ConfigError("clip_norm must be positive");
    }
    if (train.threads < 1) throw ConfigError("threads must be >= 1");
    if (augment.max_rotation_deg < 0.0f || augment.max_rotation_deg >= 90.0f) {
        throw ConfigError("max_rotation_deg must be in [0, 90)");
    }
    if (!(augment.crop_scale_min > 0.0f && augment.crop_scale_min <= 1.0f)) {
        throw ConfigError("crop_scale_min must be in (0, 1]");
    }
    if (max_images_per_patient < 1) throw ConfigError("max_images_per_patient must be >= 1");
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
        throw ConfigError("val_fraction must be in (0, 1)");
    }
    bool known_disease = false;
    for (const char* name : kDiseaseNames) known_disease |= disease_column == name;
    if (!known_disease) throw ConfigError("unknown disease_column '" + disease_column + "'");
}

RunConfig RunConfig::load(const std::string& config_file,
                          const std::vector<std::string>& overrides) {
    std::ifstream in(config_file);
    if (!in) throw IoError("cannot open config file " + config_file);

    RunConfig cfg;
    std::set<std::string> seen;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(config_file + ":" + std::to_string(lineno) +
                              ": expected 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) {
            throw ConfigError(config_file + ":" + std::to_string(lineno) + ": empty key or value");
        }
        if (!seen.insert(key).second) {
            throw ConfigError(config_file + ":" + std::to_string(lineno) + ": duplicate key '" +
                              key + "'");
        }
        cfg.set(key, value, config_file + ":" + std::to_string(lineno));
    }

    for (const std::string& ov : overrides) {
        const std::size_t eq = ov.find('=');
        if (eq == std::string::npos) throw ConfigError("override '" + ov + "': expected key=value");
        cfg.set(trim(ov.substr(0, eq)), trim(ov.substr(eq + 1)), "override");
    }
    cfg.validate();
    return cfg;
}

RunConfig RunConfig::from_overrides(const std::vector<std::string>& overrides) {
    RunConfig cfg;
    for (const std::string& ov : overrides) {
        const std::size_t eq = ov.find('=');
        if (eq == std::string::npos) throw ConfigError("override '" + ov + "': expected key=value");
        cfg.set(trim(ov.substr(0, eq)), trim(ov.substr(eq + 1)), "override");
    }
    cfg.validate();
    return cfg;
}

std::vector<std::string> RunConfig::known_keys() {
    std::vector<std::string> keys;
    for (const auto& [k, fn] : schema()) keys.push_back(k);
    return keys;
}

}  // namespace seqdx
