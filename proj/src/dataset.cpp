#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "segstereo/data_io.hpp"
#include "segstereo/losses.hpp"
#include "segstereo/nn_ops.hpp"

namespace fs = std::filesystem;

namespace segstereo {

void save_sample(const std::string& dir, const StereoSample& s) {
    fs::create_directories(dir);
    write_png8(dir + "/left.png", s.left);
    write_png8(dir + "/right.png", s.right);
    if (s.gt_disparity)
        write_kitti_disparity(dir + "/gt_disp.png", *s.gt_disparity,
                              s.gt_valid ? &*s.gt_valid : nullptr);
    if (s.left_labels) write_png8(dir + "/labels.png", *s.left_labels);
    if (s.noc_mask) write_png8(dir + "/noc.png", scale(*s.noc_mask, 255.0));
}

StereoSample load_sample(const std::string& dir) {
    StereoSample s;
    s.left = read_png8(dir + "/left.png");
    s.right = read_png8(dir + "/right.png");
    if (fs::exists(dir + "/gt_disp.png")) {
        auto [d, v] = read_kitti_disparity(dir + "/gt_disp.png");
        s.gt_disparity = d;
        s.gt_valid = v;
    }
    if (fs::exists(dir + "/labels.png")) s.left_labels = read_png8(dir + "/labels.png");
    if (fs::exists(dir + "/noc.png"))
        s.noc_mask = scale(read_png8(dir + "/noc.png"), 1.0 / 255.0);
    return s;
}

void write_manifest(const std::string& path, const std::vector<std::string>& dirs) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("write_manifest: cannot open " + path);
    for (const auto& d : dirs) f << d << "\n";
}

std::vector<std::string> read_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("read_manifest: cannot open " + path);
    std::vector<std::string> dirs;
    std::string line;
    while (std::getline(f, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (!line.empty()) dirs.push_back(line);
    }
    return dirs;
}

namespace {

Tensor crop(const Tensor& t, int y0, int x0, int ch, int cw) {
    Tensor out = create({1, t.shape.c, ch, cw}, Fill::zeros());
    for (int c = 0; c < t.shape.c; ++c)
        for (int y = 0; y < ch; ++y)
            for (int x = 0; x < cw; ++x)
                (*out.data)[out.index(0, c, y, x)] = t.at(0, c, y0 + y, x0 + x);
    return out;
}

}  // namespace

BatchIterator::BatchIterator(std::vector<StereoSample> samples, const BatchConfig& cfg)
    : samples_(std::move(samples)), cfg_(cfg), rng_(cfg.seed) {
    if (samples_.empty()) throw std::invalid_argument("BatchIterator: no samples");
    order_.resize(samples_.size());
    std::iota(order_.begin(), order_.end(), 0);
    std::shuffle(order_.begin(), order_.end(), rng_);
}

StereoSample BatchIterator::next() { return next_impl(true); }

void BatchIterator::skip(int64_t n) {
    for (int64_t i = 0; i < n; ++i) next_impl(false);
}

StereoSample BatchIterator::next_impl(bool materialize) {
    if (pos_ == order_.size()) {
        std::shuffle(order_.begin(), order_.end(), rng_);
        pos_ = 0;
    }
    const StereoSample& src = samples_[order_[pos_++]];
    const int h = src.left.shape.h, w = src.left.shape.w;

    std::uniform_real_distribution<double> sd(cfg_.resize_lo, cfg_.resize_hi);
    const double s = sd(rng_);
    // extents chosen so the horizontal factor is exactly s when s*(w-1)
    // is integral; disparity is a length and scales with that factor
    const int nh = int(std::lround(s * (h - 1))) + 1;
    const int nw = int(std::lround(s * (w - 1))) + 1;
    if (nh < cfg_.crop_h || nw < cfg_.crop_w)
        throw std::invalid_argument("BatchIterator: crop larger than resized sample");
    const double sx = double(nw - 1) / double(w - 1);

    if (!materialize) {
        rng_();  // the y0 draw
        rng_();  // the x0 draw
        return {};
    }

    StereoSample out;
    out.left = bilinear_resize(src.left, nh, nw);
    out.right = bilinear_resize(src.right, nh, nw);
    if (src.gt_disparity)
        out.gt_disparity = scale(bilinear_resize(*src.gt_disparity, nh, nw), sx);
    if (src.gt_valid) out.gt_valid = downsample_labels_nearest(*src.gt_valid, nh, nw);
    if (src.left_labels)
        out.left_labels = downsample_labels_nearest(*src.left_labels, nh, nw);
    if (src.noc_mask) out.noc_mask = downsample_labels_nearest(*src.noc_mask, nh, nw);

    const int y0 = int(rng_() % uint64_t(nh - cfg_.crop_h + 1));
    const int x0 = int(rng_() % uint64_t(nw - cfg_.crop_w + 1));
    out.left = crop(out.left, y0, x0, cfg_.crop_h, cfg_.crop_w);
    out.right = crop(out.right, y0, x0, cfg_.crop_h, cfg_.crop_w);
    if (out.gt_disparity) out.gt_disparity = crop(*out.gt_disparity, y0, x0, cfg_.crop_h, cfg_.crop_w);
    if (out.gt_valid) out.gt_valid = crop(*out.gt_valid, y0, x0, cfg_.crop_h, cfg_.crop_w);
    if (out.left_labels)
        out.left_labels = crop(*out.left_labels, y0, x0, cfg_.crop_h, cfg_.crop_w);
    if (out.noc_mask) out.noc_mask = crop(*out.noc_mask, y0, x0, cfg_.crop_h, cfg_.crop_w);
    return out;
}

}  // namespace segstereo
