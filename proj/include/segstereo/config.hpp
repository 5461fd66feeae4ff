#pragma once

#include <map>
#include <string>

#include "segstereo/losses.hpp"
#include "segstereo/model.hpp"

namespace segstereo {

// Flat key=value file, '#' starts a comment, blank lines ignored.
class KeyValueConfig {
public:
    static KeyValueConfig parse_file(const std::string& path);
    static KeyValueConfig parse_string(const std::string& text);

    bool has(const std::string& key) const { return kv_.count(key) != 0; }
    void set(const std::string& key, const std::string& value) { kv_[key] = value; }

    std::string get_str(const std::string& key, const std::string& fallback) const;
    int get_int(const std::string& key, int fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    const std::map<std::string, std::string>& entries() const { return kv_; }

private:
    std::map<std::string, std::string> kv_;
};

struct TrainConfig {
    TrainMode mode = TrainMode::Unsupervised;
    double base_lr = 0.01;
    double power = 0.9;
    int max_iter = 2000;
    double momentum = 0.9;
    double weight_decay = 0.0001;
    int batch_size = 4;
    uint64_t seed = 0;
    int checkpoint_every = 500;
    int eval_every = 100;
    int seg_pretrain_iters = 50;
    double seg_pretrain_lr = 0.01;
    int crop_h = 64, crop_w = 128;
    double resize_lo = 0.5, resize_hi = 2.0;
    bool augment = true;
    LossWeights weights;
    ModelConfig model;
};

// Every TrainConfig field is addressable by key (see implementation for the
// key list); unknown keys are an error so typos fail fast.
TrainConfig train_config_from(const KeyValueConfig& kv);

}  // namespace segstereo
