// SPDX-License-Identifier: Apache-2.0
#include "seqdx/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace seqdx {

namespace {

constexpr char kMagic[4] = {'S', 'Q', 'D', 'X'};

class Writer {
public:
    explicit Writer(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) throw IoError("cannot open checkpoint for writing: " + path);
        path_ = path;
    }

    void bytes(const void* p, std::size_t n) {
        out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    }

    void u16(std::uint16_t v) {
        unsigned char b[2] = {static_cast<unsigned char>(v & 0xFF),
                              static_cast<unsigned char>((v >> 8) & 0xFF)};
        bytes(b, 2);
    }

    void u32(std::uint32_t v) {
        unsigned char b[4];
        for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
        bytes(b, 4);
    }

    void f32(float v) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        u32(bits);
    }

    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }

    void finish() {
        out_.flush();
        if (!out_) throw IoError("failed writing checkpoint: " + path_);
    }

private:
    std::ofstream out_;
    std::string path_;
};

class Reader {
public:
    explicit Reader(const std::string& path) : in_(path, std::ios::binary) {
        if (!in_) throw IoError("cannot open checkpoint: " + path);
    }

    std::size_t offset() const { return offset_; }

    void bytes(void* p, std::size_t n, const char* what) {
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) {
            throw CheckpointError(offset_, std::string("truncated checkpoint while reading ") + what);
        }
        offset_ += n;
    }

    std::uint16_t u16(const char* what) {
        unsigned char b[2];
        bytes(b, 2, what);
        return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
    }

    std::uint32_t u32(const char* what) {
        unsigned char b[4];
        bytes(b, 4, what);
        return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
               (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    }

    float f32(const char* what) {
        const std::uint32_t bits = u32(what);
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }

    std::string str(const char* what) {
        const std::uint32_t len = u32(what);
        if (len > 1024) throw CheckpointError(offset_, "implausible name length");
        std::string s(len, '\0');
        bytes(s.data(), len, what);
        return s;
    }

    bool at_eof() {
        return in_.peek() == std::char_traits<char>::eof();
    }

private:
    std::ifstream in_;
    std::size_t offset_ = 0;
};

void write_config(Writer& w, const ModelConfig& c) {
    w.u32(static_cast<std::uint32_t>(c.image_size));
    w.u32(static_cast<std::uint32_t>(c.encoder_channels.size()));
    for (int ch : c.encoder_channels) w.u32(static_cast<std::uint32_t>(ch));
    w.u32(static_cast<std::uint32_t>(c.fc_sizes.size()));
    for (int f : c.fc_sizes) w.u32(static_cast<std::uint32_t>(f));
    w.u32(static_cast<std::uint32_t>(c.lstm_hidden));
    w.u32(static_cast<std::uint32_t>(c.num_outputs));
    w.u32(static_cast<std::uint32_t>(c.freeze_first_n));
}

ModelConfig read_config(Reader& r) {
    ModelConfig c;
    c.image_size = static_cast<int>(r.u32("config.image_size"));
    const std::uint32_t n_enc = r.u32("config.encoder_channels count");
    if (n_enc > 64) throw CheckpointError(r.offset(), "implausible encoder stage count");
    c.encoder_channels.clear();
    for (std::uint32_t i = 0; i < n_enc; ++i) {
        c.encoder_channels.push_back(static_cast<int>(r.u32("config.encoder_channels")));
    }
    const std::uint32_t n_fc = r.u32("config.fc_sizes count");
    if (n_fc > 64) throw CheckpointError(r.offset(), "implausible fc layer count");
    c.fc_sizes.clear();
    for (std::uint32_t i = 0; i < n_fc; ++i) {
        c.fc_sizes.push_back(static_cast<int>(r.u32("config.fc_sizes")));
    }
    c.lstm_hidden = static_cast<int>(r.u32("config.lstm_hidden"));
    c.num_outputs = static_cast<int>(r.u32("config.num_outputs"));
    c.freeze_first_n = static_cast<int>(r.u32("config.freeze_first_n"));
    return c;
}

}  // namespace

void save_checkpoint(const Model& model, const TrainProgress& progress, const std::string& path) {
    Writer w(path);
    w.bytes(kMagic, 4);
    w.u16(kCheckpointVersion);
    write_config(w, model.config);

    const auto params = model.named_parameters();
    w.u32(static_cast<std::uint32_t>(params.size()));
    for (const auto& [name, t] : params) {
        w.str(name);
        w.u32(static_cast<std::uint32_t>(t->shape.size()));
        for (int d : t->shape) w.u32(static_cast<std::uint32_t>(d));
        for (float v : t->data) w.f32(v);
    }
    w.u32(progress.epochs_completed);
    w.finish();
}

Checkpoint load_checkpoint(const std::string& path) {
    Reader r(path);
    char magic[4];
    r.bytes(magic, 4, "magic");
    if (std::memcmp(magic, kMagic, 4) != 0) {
        throw CheckpointError(0, "not a checkpoint file (bad magic)");
    }
    const std::uint16_t version = r.u16("version");
    if (version != kCheckpointVersion) {
        throw CheckpointError(4, "unsupported checkpoint version " + std::to_string(version) +
                                     " (supported: " + std::to_string(kCheckpointVersion) + ")");
    }
    ModelConfig config = read_config(r);
    try {
        config.validate();
    } catch (const ConfigError& e) {
        throw CheckpointError(r.offset(), std::string("invalid stored config: ") + e.what());
    }

    // Materialize the parameter chain for this config, then overwrite every
    // tensor from the file, requiring an exact name/shape match.
    Checkpoint ck{init_model(config, 0), TrainProgress{}};
    auto params = ck.model.named_parameters();
    const std::uint32_t count = r.u32("parameter count");
    if (count != params.size()) {
        throw CheckpointError(r.offset(), "parameter count mismatch: file has " +
                                              std::to_string(count) + ", config implies " +
                                              std::to_string(params.size()));
    }
    for (auto& [name, t] : params) {
        const std::string fname = r.str("parameter name");
        if (fname != name) {
            throw CheckpointError(r.offset(), "parameter order mismatch: expected " + name +
                                                  ", found " + fname);
        }
        const std::uint32_t rank = r.u32("parameter rank");
        if (rank != t->shape.size()) {
            throw CheckpointError(r.offset(), "rank mismatch for " + name);
        }
        for (int d : t->shape) {
            const std::uint32_t dim = r.u32("parameter dim");
            if (dim != static_cast<std::uint32_t>(d)) {
                throw CheckpointError(r.offset(), "shape mismatch for " + name);
            }
        }
        for (float& v : t->data) v = r.f32("parameter data");
    }
    ck.progress.epochs_completed = r.u32("epochs_completed");
    if (!r.at_eof()) {
        throw CheckpointError(r.offset(), "trailing bytes after checkpoint payload");
    }
    return ck;
}

}  // namespace seqdx
