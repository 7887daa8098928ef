// SPDX-License-Identifier: Apache-2.0
#include "seqdx/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

namespace fs = std::filesystem;

namespace seqdx {

namespace {

float blob_profile(float dist2, float radius, float intensity) {
    if (dist2 > radius * radius) return 0.0f;
    const float sigma = radius / 2.0f;
    return intensity * std::exp(-dist2 / (2.0f * sigma * sigma));
}

void add_blob(std::vector<float>& img, int s, int cx, int cy, float radius, float intensity) {
    const int r = static_cast<int>(std::ceil(radius));
    for (int y = cy - r; y <= cy + r; ++y) {
        if (y < 0 || y >= s) continue;
        for (int x = cx - r; x <= cx + r; ++x) {
            if (x < 0 || x >= s) continue;
            const float dx = static_cast<float>(x - cx);
            const float dy = static_cast<float>(y - cy);
            img[static_cast<std::size_t>(y) * s + x] += blob_profile(dx * dx + dy * dy, radius, intensity);
        }
    }
}

ImageU8 quantize(const std::vector<float>& img, int s) {
    ImageU8 out;
    out.width = s;
    out.height = s;
    out.pixels.resize(img.size());
    for (std::size_t i = 0; i < img.size(); ++i) {
        float v = img[i];
        if (v < 0.0f) v = 0.0f;
        if (v > 1.0f) v = 1.0f;
        out.pixels[i] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
    }
    return out;
}

std::string patient_name(std::uint64_t index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "p%05llu", static_cast<unsigned long long>(index));
    return buf;
}

std::string image_name(int index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "img_%03d.png", index);
    return buf;
}

}  // namespace

BlobSignature blob_signature(int disease) {
    static constexpr BlobSignature kTable[5] = {
        {1.0f, 1.0f}, {1.6f, 0.9f}, {0.7f, 1.0f}, {2.2f, 0.7f}, {1.3f, 0.55f}};
    if (disease < 0 || disease >= 5) throw ConfigError("disease index out of range");
    return kTable[disease];
}

void SynthConfig::validate() const {
    if (num_patients < 1) throw ConfigError("num_patients must be >= 1");
    if (image_size < 4) throw ConfigError("image_size must be >= 4");
    if (min_images < 1 || max_images < min_images) {
        throw ConfigError("require 1 <= min_images <= max_images");
    }
    if (max_images > kDefaultMaxImagesPerPatient) {
        throw ConfigError("max_images must be <= " + std::to_string(kDefaultMaxImagesPerPatient));
    }
    if (prevalence.size() != 1 && prevalence.size() != 5) {
        throw ConfigError("prevalence must list 1 or 5 diseases");
    }
    for (float p : prevalence) {
        if (!(p > 0.0f && p < 1.0f)) throw ConfigError("prevalence entries must be in (0, 1)");
    }
    if (blob_radius_px < 1) throw ConfigError("blob_radius_px must be >= 1");
    if (!(blob_intensity > 0.0f && blob_intensity <= 1.0f)) {
        throw ConfigError("blob_intensity must be in (0, 1]");
    }
    if (noise_sigma < 0.0f) throw ConfigError("noise_sigma must be >= 0");
    if (!(affected_min > 0.0f && affected_min <= affected_max && affected_max <= 1.0f)) {
        throw ConfigError("require 0 < affected_min <= affected_max <= 1");
    }
    for (int d = 0; d < num_outputs(); ++d) {
        const float r = static_cast<float>(blob_radius_px) * blob_signature(d).radius_scale;
        const int margin = static_cast<int>(std::ceil(r));
        // placement draws a center in [margin, image_size - 1 - margin]
        if (2 * margin >= image_size) {
            throw ConfigError("blob radius too large for image_size");
        }
    }
}

SynthPatient generate_patient(const SynthConfig& config, std::uint64_t seed,
                              std::uint64_t patient_index) {
    config.validate();
    Rng rng = Rng(seed).stream(streams::kSynth, patient_index);

    SynthPatient out;
    out.record.patient_id = patient_name(patient_index);

    const int s = config.image_size;
    const int n = config.min_images +
                  static_cast<int>(rng.below(static_cast<std::uint64_t>(
                      config.max_images - config.min_images + 1)));

    out.record.labels.resize(config.prevalence.size());
    for (std::size_t d = 0; d < config.prevalence.size(); ++d) {
        out.record.labels[d] = rng.next_double() < static_cast<double>(config.prevalence[d]) ? 1 : 0;
    }

    std::vector<std::vector<float>> planes(static_cast<std::size_t>(n),
                                           std::vector<float>(static_cast<std::size_t>(s) * s, 0.0f));

    for (std::size_t d = 0; d < config.prevalence.size(); ++d) {
        if (out.record.labels[d] == 0) continue;
        const BlobSignature sig = blob_signature(static_cast<int>(d));
        const float radius = static_cast<float>(config.blob_radius_px) * sig.radius_scale;
        const float intensity = config.blob_intensity * sig.intensity_scale;
        const int margin = static_cast<int>(std::ceil(radius));

        const float fraction = rng.uniform(config.affected_min, config.affected_max);
        // ceil with a guard against float representation noise, so e.g.
        // fraction 0.2 of 5 images is 1 image, not ceil(1.0000000149) = 2
        int affected = static_cast<int>(
            std::ceil(static_cast<double>(fraction) * static_cast<double>(n) - 1e-6));
        // With affected_max < 1 a positive patient must keep at least one
        // clean image once n >= 2 (ceil alone can round up to n for tiny n).
        if (n >= 2 && config.affected_max < 1.0f) affected = std::min(affected, n - 1);
        if (affected < 1) affected = 1;

        std::vector<int> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(order);
        order.resize(static_cast<std::size_t>(std::min(affected, n)));
        std::sort(order.begin(), order.end());

        for (int img_idx : order) {
            const int span = s - 2 * margin;
            const int cx = margin + static_cast<int>(rng.below(static_cast<std::uint64_t>(span)));
            const int cy = margin + static_cast<int>(rng.below(static_cast<std::uint64_t>(span)));
            add_blob(planes[static_cast<std::size_t>(img_idx)], s, cx, cy, radius, intensity);
            out.blobs.push_back(BlobPlacement{img_idx, cx, cy});
        }
    }

    if (config.noise_sigma > 0.0f) {
        for (auto& plane : planes) {
            for (float& v : plane) v += rng.normal(0.0f, config.noise_sigma);
        }
    }
    for (auto& plane : planes) out.record.images.push_back(quantize(plane, s));
    std::sort(out.blobs.begin(), out.blobs.end(), [](const BlobPlacement& a, const BlobPlacement& b) {
        return a.image_index < b.image_index;
    });
    return out;
}

SynthDataset generate_dataset(const SynthConfig& config, std::uint64_t seed) {
    config.validate();
    SynthDataset ds;
    for (int i = 0; i < config.num_patients; ++i) {
        SynthPatient p = generate_patient(config, seed, static_cast<std::uint64_t>(i));
        for (const BlobPlacement& b : p.blobs) ds.manifest.emplace_back(p.record.patient_id, b);
        ds.records.push_back(std::move(p.record));
    }
    return ds;
}

SynthDataset generate_dataset(const SynthConfig& config, std::uint64_t seed,
                              const std::string& out_dir) {
    SynthDataset ds = generate_dataset(config, seed);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + out_dir + ": " + ec.message());

    for (PatientRecord& rec : ds.records) {
        const fs::path dir = fs::path(out_dir) / rec.patient_id;
        fs::create_directories(dir, ec);
        if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
        rec.image_refs.clear();
        for (std::size_t i = 0; i < rec.images.size(); ++i) {
            const fs::path file = dir / image_name(static_cast<int>(i));
            write_png_gray(file.string(), rec.images[i]);
            rec.image_refs.push_back(file.string());
        }
    }

    std::ofstream labels(fs::path(out_dir) / "labels.csv");
    if (!labels) throw IoError("cannot write labels.csv in " + out_dir);
    labels << "patient_id,hemorrhage,ischemia,fracture,mass,edema\n";
    for (const PatientRecord& rec : ds.records) {
        labels << rec.patient_id;
        for (int d = 0; d < 5; ++d) {
            const int v = d < static_cast<int>(rec.labels.size()) ? rec.labels[d] : 0;
            labels << ',' << v;
        }
        labels << '\n';
    }
    labels.flush();
    if (!labels) throw IoError("failed writing labels.csv");

    std::ofstream manifest(fs::path(out_dir) / "manifest.csv");
    if (!manifest) throw IoError("cannot write manifest.csv in " + out_dir);
    manifest << "patient_id,image_index,blob_x,blob_y\n";
    for (const auto& [pid, b] : ds.manifest) {
        manifest << pid << ',' << b.image_index << ',' << b.x << ',' << b.y << '\n';
    }
    manifest.flush();
    if (!manifest) throw IoError("failed writing manifest.csv");
    return ds;
}

float blob_oracle_score(const std::vector<ImageU8>& images, int window) {
    float best = 0.0f;
    for (const ImageU8& img : images) {
        const int w = std::min({window, img.width, img.height});
        for (int y = 0; y + w <= img.height; ++y) {
            for (int x = 0; x + w <= img.width; ++x) {
                int acc = 0;
                for (int dy = 0; dy < w; ++dy) {
                    for (int dx = 0; dx < w; ++dx) acc += img.at(y + dy, x + dx);
                }
                const float mean = static_cast<float>(acc) / (255.0f * static_cast<float>(w * w));
                if (mean > best) best = mean;
            }
        }
    }
    return best;
}

float blob_oracle_threshold(const SynthConfig& config) {
    // Ideal window response: the blob profile box-mean at the blob center,
    // computed from the same analytic profile the generator plants.
    const float radius = static_cast<float>(config.blob_radius_px);
    const int w = 2 * config.blob_radius_px + 1;
    float acc = 0.0f;
    for (int dy = -config.blob_radius_px; dy <= config.blob_radius_px; ++dy) {
        for (int dx = -config.blob_radius_px; dx <= config.blob_radius_px; ++dx) {
            acc += blob_profile(static_cast<float>(dx * dx + dy * dy), radius,
                                config.blob_intensity);
        }
    }
    const float ideal_mean = acc / static_cast<float>(w * w);
    return 0.5f * ideal_mean;
}

int blob_oracle_predict(const PatientRecord& record, const SynthConfig& config) {
    const float score =
        blob_oracle_score(record.ensure_images(), 2 * config.blob_radius_px + 1);
    return score >= blob_oracle_threshold(config) ? 1 : 0;
}

}  // namespace seqdx
