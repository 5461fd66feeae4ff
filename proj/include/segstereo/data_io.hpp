#pragma once

#include <optional>
#include <string>
#include <vector>

#include "segstereo/tensor.hpp"

namespace segstereo {

struct StereoSample {
    Tensor left;   // [1,3,H,W], 0-255
    Tensor right;  // [1,3,H,W], 0-255
    std::optional<Tensor> gt_disparity;  // [1,1,H,W]
    std::optional<Tensor> gt_valid;      // [1,1,H,W], {0,1}
    std::optional<Tensor> left_labels;   // [1,1,H,W], integer classes
    std::optional<Tensor> noc_mask;      // [1,1,H,W], {0,1} non-occluded
};

enum class TextureKind { Checker, Noise, Gradient };

struct SceneConfig {
    int h = 64, w = 128;
    int num_planes = 3;
    double disp_lo = 0.0, disp_hi = 20.0;
    TextureKind texture = TextureKind::Noise;
    int num_classes = 4;
    uint64_t seed = 0;
};

// Layered fronto-parallel planes: a full background plus rectangles, each
// with a constant integer or half-integer disparity and one class label.
// Textures are piecewise linear along x so the ground-truth warp reproduces
// the left view exactly (integer d) or to interpolation precision
// (half-integer d) on the non-occluded mask.
StereoSample gen_scene(const SceneConfig& config);

// --- disk formats ---

// 16-bit single-channel PNG, stored value round(d*256), 0 = invalid.
void write_kitti_disparity(const std::string& path, const Tensor& disparity,
                           const Tensor* valid = nullptr);
// Returns {disparity, valid}.
std::pair<Tensor, Tensor> read_kitti_disparity(const std::string& path);

// 8-bit PNG; [1,3,H,W] color or [1,1,H,W] gray, values clamped to 0-255.
void write_png8(const std::string& path, const Tensor& image);
Tensor read_png8(const std::string& path);

// PFM: "Pf"/"PF" header, extents, negative scale for little endian,
// float32 rows bottom-up.
void write_pfm(const std::string& path, const Tensor& map);
Tensor read_pfm(const std::string& path);

// --- dataset on disk ---

// One directory per sample: left.png, right.png, and when present
// gt_disp.png (16-bit), labels.png, noc.png. Manifest lists directories,
// one per line.
void save_sample(const std::string& dir, const StereoSample& s);
StereoSample load_sample(const std::string& dir);
void write_manifest(const std::string& path, const std::vector<std::string>& dirs);
std::vector<std::string> read_manifest(const std::string& path);

// --- augmentation stream ---

struct BatchConfig {
    int crop_h = 64, crop_w = 128;
    double resize_lo = 0.5, resize_hi = 2.0;
    uint64_t seed = 0;
};

// Cycles over the samples (reshuffled each epoch), applying a per-sample
// random resize (disparity values scaled by the horizontal factor) and an
// identical random crop to both views.
class BatchIterator {
public:
    BatchIterator(std::vector<StereoSample> samples, const BatchConfig& cfg);
    StereoSample next();
    // Advances the stream by n samples without materializing them, drawing
    // exactly the same random numbers next() would.
    void skip(int64_t n);

private:
    StereoSample next_impl(bool materialize);
    std::vector<StereoSample> samples_;
    BatchConfig cfg_;
    std::mt19937_64 rng_;
    std::vector<size_t> order_;
    size_t pos_ = 0;
};

}  // namespace segstereo
