#include "segstereo/model.hpp"

#include <cmath>
#include <stdexcept>

#include "segstereo/stereo_ops.hpp"

namespace segstereo {

namespace {

// Parameter registration happens in a fixed code order so the same seed
// always yields the same values regardless of map iteration.
struct Builder {
    ModelState& st;
    std::mt19937_64 rng;

    void conv(const std::string& name, int out_ch, int in_ch, int k) {
        const double limit = std::sqrt(1.0 / (double(in_ch) * k * k));
        std::uniform_real_distribution<double> dist(-limit, limit);
        Tensor kernel = create({out_ch, in_ch, k, k}, Fill::zeros());
        for (auto& v : *kernel.data) v = dist(rng);
        st.params.emplace(name + ".kernel", kernel);
        st.params.emplace(name + ".bias", create({1, out_ch, 1, 1}, Fill::zeros()));
    }
};

ConvParams pick(ModelState& st, const std::string& name, Tape* tape,
                std::map<std::string, Tensor>* tracked, int stride, int pad,
                int dilation = 1) {
    ConvParams p;
    p.kernel = st.at(name + ".kernel");
    p.bias = st.at(name + ".bias");
    p.stride = stride;
    p.pad = pad;
    p.dilation = dilation;
    if (tape != nullptr) {
        p.kernel.tape = tape;
        p.kernel.requires_grad = true;
        tape->track(p.kernel);
        p.bias.tape = tape;
        p.bias.requires_grad = true;
        tape->track(p.bias);
        (*tracked)[name + ".kernel"] = p.kernel;
        (*tracked)[name + ".bias"] = p.bias;
    }
    return p;
}

}  // namespace

Tensor& ModelState::at(const std::string& name) {
    auto it = params.find(name);
    if (it == params.end()) throw std::invalid_argument("unknown parameter: " + name);
    return it->second;
}

const Tensor& ModelState::at(const std::string& name) const {
    auto it = params.find(name);
    if (it == params.end()) throw std::invalid_argument("unknown parameter: " + name);
    return it->second;
}

ModelState build(const ModelConfig& cfg, uint64_t seed) {
    if (cfg.shallow_channels < 1 || cfg.transform_channels < 1 || cfg.sem_channels < 1 ||
        cfg.max_disp < 1 || cfg.encoder_blocks < 1 || cfg.decoder_blocks < 1 ||
        cfg.num_classes < 2)
        throw std::invalid_argument("build: inconsistent widths");
    ModelState st;
    st.config = cfg;
    Builder b{st, std::mt19937_64(seed)};

    const int S = cfg.shallow_channels;
    b.conv("shallow.0", S, 3, 3);
    b.conv("shallow.1", S, S, 3);
    b.conv("shallow.2", S, S, 3);

    b.conv("seg.0", cfg.sem_channels, S, 3);
    b.conv("seg.1", cfg.sem_channels, cfg.sem_channels, 3);
    b.conv("seg.cls", cfg.num_classes, cfg.sem_channels, 1);

    b.conv("transform", cfg.transform_channels, S, 1);

    const int W = cfg.transform_channels;
    b.conv("enc.in", W, cfg.hybrid_channels(), 3);
    for (int i = 0; i < cfg.encoder_blocks; ++i) {
        b.conv("enc.b" + std::to_string(i) + ".c0", W, W, 3);
        b.conv("enc.b" + std::to_string(i) + ".c1", W, W, 3);
    }

    int ch = W;
    for (int i = 0; i < cfg.decoder_blocks; ++i) {
        const int out = std::max(8, ch / 2);
        b.conv("dec." + std::to_string(i), out, ch, 4);
        ch = out;
    }
    b.conv("reg", 1, ch, 3);
    // start the output inside the positive branch of the final max(.,0)
    (*st.at("reg.bias").data)[0] = 1.0;
    return st;
}

int64_t parameter_count(const ModelState& state) {
    int64_t total = 0;
    for (const auto& [name, t] : state.params) total += t.numel();
    return total;
}

void freeze_segmentation(ModelState& state) {
    for (const auto& [name, t] : state.params)
        if (name.rfind("shallow.", 0) == 0 || name.rfind("seg.", 0) == 0)
            state.frozen.insert(name);
}

ForwardResult forward(ModelState& state, const Tensor& left, const Tensor& right,
                      Tape* tape) {
    const ModelConfig& cfg = state.config;
    if (left.shape != right.shape)
        throw std::invalid_argument("forward: left/right shape mismatch");
    if (left.shape.c != 3 || left.shape.h % 8 != 0 || left.shape.w % 8 != 0)
        throw std::invalid_argument("forward: inputs must be 3-channel with H, W divisible by 8");

    ForwardResult out;
    auto cp = [&](const std::string& name, int stride, int pad, int dil = 1) {
        return pick(state, name, tape, &out.tracked, stride, pad, dil);
    };

    auto shallow = [&](const Tensor& img) {
        Tensor x = relu(conv2d(img, cp("shallow.0", 2, 1)));
        x = relu(conv2d(x, cp("shallow.1", 2, 1)));
        return relu(conv2d(x, cp("shallow.2", 2, 1)));
    };
    Tensor fl = shallow(left);
    Tensor fr = shallow(right);

    auto sem_branch = [&](const Tensor& f) {
        Tensor x = relu(conv2d(f, cp("seg.0", 1, 1)));
        return relu(conv2d(x, cp("seg.1", 1, 1)));
    };
    Tensor sem_l = sem_branch(fl);
    out.right_sem_feat = sem_branch(fr);
    out.classifier = cp("seg.cls", 1, 0);
    out.left_sem_logits = conv2d(sem_l, out.classifier);

    Tensor ftl = relu(conv2d(fl, cp("transform", 1, 0)));
    CostVolume cv = correlation1d(fl, fr, cfg.max_disp, cfg.max_disp);

    std::vector<Tensor> parts{cv.scores, ftl};
    if (cfg.embed_semantics) parts.push_back(sem_l);
    Tensor hybrid = concat_channels(parts);

    Tensor x = relu(conv2d(hybrid, cp("enc.in", 1, 1)));
    for (int i = 0; i < cfg.encoder_blocks; ++i) {
        // dilated convs widen the receptive field in the last third
        const int dil = (i >= 2 * cfg.encoder_blocks / 3) ? 2 : 1;
        const std::string base = "enc.b" + std::to_string(i);
        Tensor y = relu(conv2d(x, cp(base + ".c0", 1, dil, dil)));
        y = conv2d(y, cp(base + ".c1", 1, dil, dil));
        x = relu(add(x, y));
    }

    for (int i = 0; i < cfg.decoder_blocks; ++i)
        x = relu(deconv2d(x, cp("dec." + std::to_string(i), 2, 1)));

    if (x.shape.h != left.shape.h || x.shape.w != left.shape.w)
        throw std::logic_error("forward: decoder did not restore full resolution");
    out.disparity = relu(conv2d(x, cp("reg", 1, 1)));
    return out;
}

}  // namespace segstereo
