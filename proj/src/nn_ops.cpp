#include "segstereo/nn_ops.hpp"

#include <cmath>

#include "op_common.hpp"
#include "segstereo/kernels.hpp"

namespace segstereo {

using detail::any_grad;
using detail::common_tape;
using detail::make_output;
namespace K = kernels::dispatch;

int conv_out_extent(int in, int k, int stride, int pad, int dilation) {
    return (in + 2 * pad - dilation * (k - 1) - 1) / stride + 1;
}

int deconv_out_extent(int in, int k, int stride, int pad, int dilation) {
    return (in - 1) * stride - 2 * pad + dilation * (k - 1) + 1;
}

namespace {

kernels::ConvDims conv_dims(const Tensor& input, const ConvParams& p, bool transposed) {
    const Shape& ks = p.kernel.shape;
    kernels::ConvDims d{};
    d.n = input.shape.n;
    d.in_ch = input.shape.c;
    d.in_h = input.shape.h;
    d.in_w = input.shape.w;
    d.out_ch = ks.n;
    d.kh = ks.h;
    d.kw = ks.w;
    d.stride = p.stride;
    d.pad = p.pad;
    d.dilation = p.dilation;
    if (ks.c != d.in_ch)
        throw std::invalid_argument("conv: kernel expects " + std::to_string(ks.c) +
                                    " input channels, got " + std::to_string(d.in_ch));
    if (p.bias.numel() != d.out_ch)
        throw std::invalid_argument("conv: bias size mismatch");
    if (p.stride < 1 || p.dilation < 1 || p.pad < 0)
        throw std::invalid_argument("conv: bad stride/pad/dilation");
    auto ext = transposed ? deconv_out_extent : conv_out_extent;
    d.out_h = ext(d.in_h, d.kh, d.stride, d.pad, d.dilation);
    d.out_w = ext(d.in_w, d.kw, d.stride, d.pad, d.dilation);
    if (d.out_h < 1 || d.out_w < 1)
        throw std::invalid_argument("conv: degenerate output extent");
    return d;
}

}  // namespace

Tensor conv2d(const Tensor& input, const ConvParams& p) {
    const auto d = conv_dims(input, p, false);
    Tape* tape = common_tape({&input, &p.kernel, &p.bias});
    Tensor out = make_output(Shape{d.n, d.out_ch, d.out_h, d.out_w}, tape,
                             any_grad({&input, &p.kernel, &p.bias}));
    K::conv2d_forward(input.ptr(), p.kernel.ptr(), p.bias.ptr(), out.ptr(), d);
    if (tape && out.requires_grad) {
        Tensor in = input, ker = p.kernel, bias = p.bias;
        int oid = out.node_id;
        tape->record({input.node_id, p.kernel.node_id, p.bias.node_id}, oid,
                     [=](Tape& tp) {
                         const double* go = tp.grad(oid).data();
                         if (in.requires_grad && in.node_id >= 0)
                             K::conv2d_backward_input(go, ker.ptr(),
                                                      tp.grad(in.node_id).data(), d);
                         if (ker.requires_grad && ker.node_id >= 0)
                             K::conv2d_backward_kernel(go, in.ptr(),
                                                       tp.grad(ker.node_id).data(), d);
                         if (bias.requires_grad && bias.node_id >= 0)
                             K::conv2d_backward_bias(go, tp.grad(bias.node_id).data(), d);
                     });
    }
    return out;
}

Tensor deconv2d(const Tensor& input, const ConvParams& p) {
    const auto d = conv_dims(input, p, true);
    Tape* tape = common_tape({&input, &p.kernel, &p.bias});
    Tensor out = make_output(Shape{d.n, d.out_ch, d.out_h, d.out_w}, tape,
                             any_grad({&input, &p.kernel, &p.bias}));
    K::deconv2d_forward(input.ptr(), p.kernel.ptr(), p.bias.ptr(), out.ptr(), d);
    if (tape && out.requires_grad) {
        Tensor in = input, ker = p.kernel, bias = p.bias;
        int oid = out.node_id;
        tape->record({input.node_id, p.kernel.node_id, p.bias.node_id}, oid,
                     [=](Tape& tp) {
                         const double* go = tp.grad(oid).data();
                         if (in.requires_grad && in.node_id >= 0)
                             K::deconv2d_backward_input(go, ker.ptr(),
                                                        tp.grad(in.node_id).data(), d);
                         if (ker.requires_grad && ker.node_id >= 0)
                             K::deconv2d_backward_kernel(go, in.ptr(),
                                                         tp.grad(ker.node_id).data(), d);
                         if (bias.requires_grad && bias.node_id >= 0) {
                             // bias spans the (large) output grid
                             kernels::ConvDims db = d;
                             K::conv2d_backward_bias(go, tp.grad(bias.node_id).data(), db);
                         }
                     });
    }
    return out;
}

Tensor concat_channels(const std::vector<Tensor>& inputs) {
    if (inputs.empty()) throw std::invalid_argument("concat: no inputs");
    const Shape& s0 = inputs[0].shape;
    int total_c = 0;
    for (const auto& t : inputs) {
        if (t.shape.n != s0.n || t.shape.h != s0.h || t.shape.w != s0.w)
            throw std::invalid_argument("concat: batch/spatial mismatch");
        total_c += t.shape.c;
    }
    std::vector<const Tensor*> ptrs;
    for (const auto& t : inputs) ptrs.push_back(&t);
    Tape* tape = nullptr;
    bool rg = false;
    for (const auto& t : inputs) {
        if (t.on_tape()) {
            if (tape && tape != t.tape)
                throw std::invalid_argument("concat: inputs on different tapes");
            tape = t.tape;
        }
        rg = rg || t.requires_grad;
    }
    Tensor out = make_output(Shape{s0.n, total_c, s0.h, s0.w}, tape, rg);
    const int64_t plane = int64_t(s0.h) * s0.w;
    for (int n = 0; n < s0.n; ++n) {
        int co = 0;
        for (const auto& t : inputs) {
            const int64_t cnt = int64_t(t.shape.c) * plane;
            std::copy_n(t.ptr() + int64_t(n) * cnt,
                        cnt, out.ptr() + (int64_t(n) * total_c + co) * plane);
            co += t.shape.c;
        }
    }
    if (tape && rg) {
        std::vector<Tensor> ins = inputs;
        std::vector<int> ids;
        for (const auto& t : ins) ids.push_back(t.node_id);
        int oid = out.node_id;
        tape->record(ids, oid, [=](Tape& tp) {
            const auto& go = tp.grad(oid);
            for (int n = 0; n < s0.n; ++n) {
                int co = 0;
                for (const auto& t : ins) {
                    const int64_t cnt = int64_t(t.shape.c) * plane;
                    if (t.requires_grad && t.node_id >= 0) {
                        auto& gi = tp.grad(t.node_id);
                        const double* src = go.data() + (int64_t(n) * total_c + co) * plane;
                        double* dst = gi.data() + int64_t(n) * cnt;
                        for (int64_t i = 0; i < cnt; ++i) dst[i] += src[i];
                    }
                    co += t.shape.c;
                }
            }
        });
    }
    return out;
}

Tensor bilinear_resize(const Tensor& input, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1) throw std::invalid_argument("resize: extents must be >= 1");
    kernels::ResizeDims d{input.shape.n, input.shape.c, input.shape.h,
                          input.shape.w, out_h, out_w};
    Tape* tape = common_tape({&input});
    Tensor out = make_output(Shape{d.n, d.ch, out_h, out_w}, tape, input.requires_grad);
    K::resize_bilinear_forward(input.ptr(), out.ptr(), d);
    if (tape && out.requires_grad) {
        Tensor in = input;
        int oid = out.node_id;
        tape->record({input.node_id}, oid, [=](Tape& tp) {
            K::resize_bilinear_backward(tp.grad(oid).data(), tp.grad(in.node_id).data(), d);
        });
    }
    return out;
}

Tensor softmax_cross_entropy(const Tensor& logits, const Tensor& labels, int ignore_label) {
    const Shape& s = logits.shape;
    if (labels.shape.n != s.n || labels.shape.c != 1 || labels.shape.h != s.h ||
        labels.shape.w != s.w)
        throw std::invalid_argument("softmax_ce: label map shape mismatch");
    const int kk = s.c;
    const int64_t plane = int64_t(s.h) * s.w;

    // Per-pixel softmax probabilities, kept for the backward pass.
    auto probs = std::make_shared<std::vector<double>>(logits.numel());
    int64_t used = 0;
    double total = 0.0;
    for (int n = 0; n < s.n; ++n)
        for (int64_t p = 0; p < plane; ++p) {
            const int lab = int(std::lround((*labels.data)[n * plane + p]));
            const int64_t base = int64_t(n) * kk * plane + p;
            double mx = -1e300;
            for (int k = 0; k < kk; ++k)
                mx = std::max(mx, (*logits.data)[base + k * plane]);
            double Z = 0.0;
            for (int k = 0; k < kk; ++k) {
                const double e = std::exp((*logits.data)[base + k * plane] - mx);
                (*probs)[base + k * plane] = e;
                Z += e;
            }
            for (int k = 0; k < kk; ++k) (*probs)[base + k * plane] /= Z;
            if (lab == ignore_label) continue;
            if (lab < 0 || lab >= kk)
                throw std::invalid_argument("softmax_ce: label out of range");
            total += -std::log(std::max((*probs)[base + lab * plane], 1e-300));
            ++used;
        }
    if (used == 0) throw std::invalid_argument("softmax_ce: all pixels ignored");

    Tape* tape = common_tape({&logits});
    Tensor out = make_output(Shape{1, 1, 1, 1}, tape, logits.requires_grad);
    (*out.data)[0] = total / double(used);
    if (tape && out.requires_grad) {
        Tensor lg = logits;
        std::shared_ptr<std::vector<double>> lab_data = labels.data;
        int oid = out.node_id;
        const int64_t nused = used;
        tape->record({logits.node_id}, oid, [=](Tape& tp) {
            const double g = tp.grad(oid)[0] / double(nused);
            auto& gl = tp.grad(lg.node_id);
            for (int n = 0; n < s.n; ++n)
                for (int64_t p = 0; p < plane; ++p) {
                    const int lab = int(std::lround((*lab_data)[n * plane + p]));
                    if (lab == ignore_label) continue;
                    const int64_t base = int64_t(n) * kk * plane + p;
                    for (int k = 0; k < kk; ++k) {
                        const double soft = (*probs)[base + k * plane];
                        gl[base + k * plane] += g * (soft - (k == lab ? 1.0 : 0.0));
                    }
                }
        });
    }
    return out;
}

}  // namespace segstereo
