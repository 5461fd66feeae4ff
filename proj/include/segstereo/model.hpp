#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "segstereo/nn_ops.hpp"
#include "segstereo/tensor.hpp"

namespace segstereo {

struct ModelConfig {
    int shallow_channels = 32;
    int transform_channels = 64;
    int sem_channels = 64;
    int max_disp = 24;
    int encoder_blocks = 6;
    int decoder_blocks = 3;
    int num_classes = 4;
    bool embed_semantics = true;
    bool mini_scale = true;

    int hybrid_channels() const {
        return (max_disp + 1) + transform_channels + (embed_semantics ? sem_channels : 0);
    }
};

// Named parameter store. Ordered map keeps parameter traversal (and thus
// update order and checkpoint layout) deterministic.
struct ModelState {
    ModelConfig config;
    std::map<std::string, Tensor> params;
    std::set<std::string> frozen;  // excluded from optimizer updates

    Tensor& at(const std::string& name);
    const Tensor& at(const std::string& name) const;
};

struct ForwardResult {
    Tensor disparity;       // [N,1,H,W], non-negative
    Tensor left_sem_logits; // [N,K,H/8,W/8]
    Tensor right_sem_feat;  // [N,sem,H/8,W/8]
    // Tape-tracked views of the parameters (aliasing the state buffers),
    // for gradient lookup after backward. Empty when tape was null.
    std::map<std::string, Tensor> tracked;
    // 1x1 classifier over semantic features, tracked when a tape is given.
    ConvParams classifier;
};

// Deterministic uniform fan-in init of every parameter from the seed.
ModelState build(const ModelConfig& config, uint64_t seed);

// Rebuilds the live graph on `tape` (pass nullptr for inference).
ForwardResult forward(ModelState& state, const Tensor& left, const Tensor& right,
                      Tape* tape);

int64_t parameter_count(const ModelState& state);

// Marks the shallow extractor and the segmentation branch as frozen.
void freeze_segmentation(ModelState& state);

}  // namespace segstereo
