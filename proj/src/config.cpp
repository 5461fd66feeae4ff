#include "segstereo/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace segstereo {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace

KeyValueConfig KeyValueConfig::parse_string(const std::string& text) {
    KeyValueConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected key=value");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty())
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": empty key");
        cfg.kv_[key] = val;
    }
    return cfg;
}

KeyValueConfig KeyValueConfig::parse_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config file " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_string(ss.str());
}

std::string KeyValueConfig::get_str(const std::string& key,
                                    const std::string& fallback) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? fallback : it->second;
}

int KeyValueConfig::get_int(const std::string& key, int fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    size_t pos = 0;
    const int v = std::stoi(it->second, &pos);
    if (pos != it->second.size())
        throw std::invalid_argument("config key " + key + ": not an integer");
    return v;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    size_t pos = 0;
    const double v = std::stod(it->second, &pos);
    if (pos != it->second.size())
        throw std::invalid_argument("config key " + key + ": not a number");
    return v;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw std::invalid_argument("config key " + key + ": not a boolean");
}

TrainConfig train_config_from(const KeyValueConfig& kv) {
    static const std::set<std::string> known{
        "mode",          "base_lr",         "power",
        "max_iter",      "momentum",        "weight_decay",
        "batch_size",    "seed",            "checkpoint_every",
        "eval_every",    "seg_pretrain_iters", "seg_pretrain_lr",
        "crop_h",        "crop_w",          "resize_lo",
        "resize_hi",     "augment",         "lambda_p",
        "lambda_s",      "lambda_seg",      "lambda_r",
        "photometric_threshold", "charbonnier_alpha", "charbonnier_beta",
        "charbonnier_eps", "shallow_channels", "transform_channels",
        "sem_channels",  "max_disp",        "encoder_blocks",
        "decoder_blocks", "num_classes",    "embed_semantics",
        "mini_scale"};
    for (const auto& [k, v] : kv.entries())
        if (known.count(k) == 0) throw std::invalid_argument("unknown config key: " + k);

    TrainConfig c;
    const std::string mode = kv.get_str("mode", "unsupervised");
    if (mode == "unsupervised") {
        c.mode = TrainMode::Unsupervised;
    } else if (mode == "supervised") {
        c.mode = TrainMode::Supervised;
        // supervised default pairing: regression 1.0, semantic 1.0
        c.weights.lambda_seg = 1.0;
    } else {
        throw std::invalid_argument("mode must be unsupervised or supervised");
    }
    c.base_lr = kv.get_double("base_lr", c.base_lr);
    c.power = kv.get_double("power", c.power);
    c.max_iter = kv.get_int("max_iter", c.max_iter);
    c.momentum = kv.get_double("momentum", c.momentum);
    c.weight_decay = kv.get_double("weight_decay", c.weight_decay);
    c.batch_size = kv.get_int("batch_size", c.batch_size);
    c.seed = uint64_t(kv.get_int("seed", int(c.seed)));
    c.checkpoint_every = kv.get_int("checkpoint_every", c.checkpoint_every);
    c.eval_every = kv.get_int("eval_every", c.eval_every);
    c.seg_pretrain_iters = kv.get_int("seg_pretrain_iters", c.seg_pretrain_iters);
    c.seg_pretrain_lr = kv.get_double("seg_pretrain_lr", c.seg_pretrain_lr);
    c.crop_h = kv.get_int("crop_h", c.crop_h);
    c.crop_w = kv.get_int("crop_w", c.crop_w);
    c.resize_lo = kv.get_double("resize_lo", c.resize_lo);
    c.resize_hi = kv.get_double("resize_hi", c.resize_hi);
    c.augment = kv.get_bool("augment", c.augment);
    c.weights.lambda_p = kv.get_double("lambda_p", c.weights.lambda_p);
    c.weights.lambda_s = kv.get_double("lambda_s", c.weights.lambda_s);
    c.weights.lambda_seg = kv.get_double("lambda_seg", c.weights.lambda_seg);
    c.weights.lambda_r = kv.get_double("lambda_r", c.weights.lambda_r);
    c.weights.photometric_threshold =
        kv.get_double("photometric_threshold", c.weights.photometric_threshold);
    c.weights.charbonnier.alpha = kv.get_double("charbonnier_alpha", 0.21);
    c.weights.charbonnier.beta = kv.get_double("charbonnier_beta", 5.0);
    c.weights.charbonnier.eps = kv.get_double("charbonnier_eps", 0.001);
    c.model.shallow_channels = kv.get_int("shallow_channels", c.model.shallow_channels);
    c.model.transform_channels =
        kv.get_int("transform_channels", c.model.transform_channels);
    c.model.sem_channels = kv.get_int("sem_channels", c.model.sem_channels);
    c.model.max_disp = kv.get_int("max_disp", c.model.max_disp);
    c.model.encoder_blocks = kv.get_int("encoder_blocks", c.model.encoder_blocks);
    c.model.decoder_blocks = kv.get_int("decoder_blocks", c.model.decoder_blocks);
    c.model.num_classes = kv.get_int("num_classes", c.model.num_classes);
    c.model.embed_semantics = kv.get_bool("embed_semantics", c.model.embed_semantics);
    c.model.mini_scale = kv.get_bool("mini_scale", c.model.mini_scale);
    if (c.max_iter < 1) throw std::invalid_argument("max_iter must be >= 1");
    if (c.base_lr <= 0.0) throw std::invalid_argument("base_lr must be > 0");
    return c;
}

}  // namespace segstereo
