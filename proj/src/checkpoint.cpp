#include "segstereo/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include "segstereo/config.hpp"

namespace segstereo {

namespace {

constexpr char kModelMagic[8] = {'S', 'S', 'M', 'I', 'N', 'I', '0', '1'};
constexpr char kTrainMagic[8] = {'S', 'S', 'T', 'R', 'A', 'I', 'N', '1'};

void put_u32(std::ostream& f, uint32_t v) {
    char b[4] = {char(v), char(v >> 8), char(v >> 16), char(v >> 24)};
    f.write(b, 4);
}

uint32_t get_u32(std::istream& f) {
    unsigned char b[4];
    f.read(reinterpret_cast<char*>(b), 4);
    return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 |
           uint32_t(b[3]) << 24;
}

void put_u64(std::ostream& f, uint64_t v) {
    put_u32(f, uint32_t(v));
    put_u32(f, uint32_t(v >> 32));
}

uint64_t get_u64(std::istream& f) {
    const uint64_t lo = get_u32(f);
    return lo | uint64_t(get_u32(f)) << 32;
}

static_assert(sizeof(float) == 4 && sizeof(double) == 8);

}  // namespace

void save_checkpoint(const std::string& path, const ModelState& state) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("save_checkpoint: cannot open " + path);
    f.write(kModelMagic, 8);
    for (const auto& [name, t] : state.params) {
        put_u32(f, uint32_t(name.size()));
        f.write(name.data(), std::streamsize(name.size()));
        put_u32(f, 4);
        for (int e : {t.shape.n, t.shape.c, t.shape.h, t.shape.w}) put_u32(f, uint32_t(e));
        for (double v : *t.data) {
            const float x = float(v);
            uint32_t b;
            std::memcpy(&b, &x, 4);
            put_u32(f, b);
        }
    }
    if (!f) throw std::runtime_error("save_checkpoint: write failed on " + path);
}

void load_checkpoint(const std::string& path, ModelState& state) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_checkpoint: cannot open " + path);
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, kModelMagic, 8) != 0)
        throw std::runtime_error("load_checkpoint: bad magic in " + path);
    size_t seen = 0;
    while (true) {
        const uint32_t nlen = get_u32(f);
        if (f.eof()) break;
        if (!f || nlen == 0 || nlen > 1024)
            throw std::runtime_error("load_checkpoint: corrupt record in " + path);
        std::string name(nlen, '\0');
        f.read(name.data(), nlen);
        const uint32_t rank = get_u32(f);
        if (rank != 4) throw std::runtime_error("load_checkpoint: unexpected rank");
        int ext[4];
        for (int& e : ext) e = int(get_u32(f));
        auto it = state.params.find(name);
        if (it == state.params.end())
            throw std::runtime_error("load_checkpoint: unknown parameter " + name);
        Tensor& t = it->second;
        if (Shape(ext[0], ext[1], ext[2], ext[3]) != t.shape)
            throw std::runtime_error("load_checkpoint: extent mismatch for " + name);
        for (double& v : *t.data) {
            const uint32_t b = get_u32(f);
            float x;
            std::memcpy(&x, &b, 4);
            v = double(x);
        }
        if (!f) throw std::runtime_error("load_checkpoint: truncated file " + path);
        ++seen;
    }
    if (seen != state.params.size())
        throw std::runtime_error("load_checkpoint: parameter count mismatch");
}

void write_model_config(const std::string& path, const ModelConfig& cfg) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("write_model_config: cannot open " + path);
    f << "shallow_channels=" << cfg.shallow_channels << "\n"
      << "transform_channels=" << cfg.transform_channels << "\n"
      << "sem_channels=" << cfg.sem_channels << "\n"
      << "max_disp=" << cfg.max_disp << "\n"
      << "encoder_blocks=" << cfg.encoder_blocks << "\n"
      << "decoder_blocks=" << cfg.decoder_blocks << "\n"
      << "num_classes=" << cfg.num_classes << "\n"
      << "embed_semantics=" << (cfg.embed_semantics ? "true" : "false") << "\n"
      << "mini_scale=" << (cfg.mini_scale ? "true" : "false") << "\n";
}

ModelConfig read_model_config(const std::string& path) {
    const KeyValueConfig kv = KeyValueConfig::parse_file(path);
    ModelConfig cfg;
    cfg.shallow_channels = kv.get_int("shallow_channels", cfg.shallow_channels);
    cfg.transform_channels = kv.get_int("transform_channels", cfg.transform_channels);
    cfg.sem_channels = kv.get_int("sem_channels", cfg.sem_channels);
    cfg.max_disp = kv.get_int("max_disp", cfg.max_disp);
    cfg.encoder_blocks = kv.get_int("encoder_blocks", cfg.encoder_blocks);
    cfg.decoder_blocks = kv.get_int("decoder_blocks", cfg.decoder_blocks);
    cfg.num_classes = kv.get_int("num_classes", cfg.num_classes);
    cfg.embed_semantics = kv.get_bool("embed_semantics", cfg.embed_semantics);
    cfg.mini_scale = kv.get_bool("mini_scale", cfg.mini_scale);
    return cfg;
}

namespace {

void put_records(std::ostream& f, const std::map<std::string, std::vector<double>>& m) {
    put_u64(f, m.size());
    for (const auto& [name, vals] : m) {
        put_u32(f, uint32_t(name.size()));
        f.write(name.data(), std::streamsize(name.size()));
        put_u64(f, vals.size());
        for (double v : vals) {
            uint64_t b;
            std::memcpy(&b, &v, 8);
            put_u64(f, b);
        }
    }
}

std::map<std::string, std::vector<double>> get_records(std::istream& f) {
    std::map<std::string, std::vector<double>> m;
    const uint64_t count = get_u64(f);
    for (uint64_t i = 0; i < count && f; ++i) {
        const uint32_t nlen = get_u32(f);
        std::string name(nlen, '\0');
        f.read(name.data(), nlen);
        std::vector<double> vals(get_u64(f));
        for (double& v : vals) {
            const uint64_t b = get_u64(f);
            std::memcpy(&v, &b, 8);
        }
        m.emplace(std::move(name), std::move(vals));
    }
    return m;
}

}  // namespace

void save_train_sidecar(const std::string& path, const TrainSidecar& s) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("save_train_sidecar: cannot open " + path);
    f.write(kTrainMagic, 8);
    put_u64(f, uint64_t(s.iter));
    put_records(f, s.params);
    put_records(f, s.momentum);
    if (!f) throw std::runtime_error("save_train_sidecar: write failed on " + path);
}

TrainSidecar load_train_sidecar(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_train_sidecar: cannot open " + path);
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, kTrainMagic, 8) != 0)
        throw std::runtime_error("load_train_sidecar: bad magic in " + path);
    TrainSidecar s;
    s.iter = int64_t(get_u64(f));
    s.params = get_records(f);
    s.momentum = get_records(f);
    if (!f) throw std::runtime_error("load_train_sidecar: truncated file " + path);
    return s;
}

}  // namespace segstereo
