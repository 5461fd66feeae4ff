#include "segstereo/losses.hpp"

#include <cmath>

#include "op_common.hpp"

namespace segstereo {

using detail::common_tape;
using detail::make_output;

Tensor photometric_loss(const Tensor& warped, const Tensor& target,
                        const Tensor& validity, double threshold,
                        double* masked_fraction_out) {
    const Shape& s = warped.shape;
    if (target.shape != s)
        throw std::invalid_argument("photometric_loss: shape mismatch");
    if (validity.shape.n != s.n || validity.shape.c != 1 ||
        validity.shape.h != s.h || validity.shape.w != s.w)
        throw std::invalid_argument("photometric_loss: validity shape mismatch");

    Tensor resid = abs(sub(warped, target));

    // delta from forward residuals: per-pixel L1 over channels vs threshold.
    const int64_t plane = int64_t(s.h) * s.w;
    const int64_t npix = int64_t(s.n) * plane;
    std::vector<double> delta(resid.numel(), 0.0);
    int64_t masked = 0;
    for (int n = 0; n < s.n; ++n)
        for (int64_t p = 0; p < plane; ++p) {
            double r = 0.0;
            for (int c = 0; c < s.c; ++c)
                r += (*resid.data)[(int64_t(n) * s.c + c) * plane + p];
            const bool keep = r <= threshold && (*validity.data)[n * plane + p] != 0.0;
            if (!keep) {
                ++masked;
                continue;
            }
            for (int c = 0; c < s.c; ++c)
                delta[(int64_t(n) * s.c + c) * plane + p] = 1.0;
        }
    if (masked_fraction_out) *masked_fraction_out = double(masked) / double(npix);

    Tensor mask = constant_like(resid, std::move(delta));
    // The mean is over the total pixel count, not the element or kept count.
    return scale(reduce_sum(resid, &mask), 1.0 / double(npix));
}

namespace {

double charb(double x, const CharbonnierParams& cp) {
    if (cp.beta_inside)
        return std::pow(cp.beta * x * cp.beta * x + cp.eps * cp.eps, cp.alpha);
    return std::pow(x * x + cp.eps * cp.eps, cp.alpha) * cp.beta;
}

double charb_deriv(double x, const CharbonnierParams& cp) {
    if (cp.beta_inside) {
        const double u = cp.beta * x * cp.beta * x + cp.eps * cp.eps;
        return cp.alpha * std::pow(u, cp.alpha - 1.0) * 2.0 * cp.beta * cp.beta * x;
    }
    const double u = x * x + cp.eps * cp.eps;
    return cp.beta * cp.alpha * std::pow(u, cp.alpha - 1.0) * 2.0 * x;
}

}  // namespace

Tensor smoothness_loss(const Tensor& disparity, const CharbonnierParams& cp) {
    const Shape& s = disparity.shape;
    if (s.c != 1) throw std::invalid_argument("smoothness_loss: expected 1 channel");
    if (s.h < 2 || s.w < 2)
        throw std::invalid_argument("smoothness_loss: degenerate map, need H,W >= 2");
    Tape* tape = common_tape({&disparity});
    Tensor out = make_output(Shape{1, 1, 1, 1}, tape, disparity.requires_grad);
    const int64_t npix = int64_t(s.n) * s.h * s.w;
    const double* pd = disparity.ptr();
    double acc = 0.0;
    auto at = [&](int n, int y, int x) { return pd[(int64_t(n) * s.h + y) * s.w + x]; };
    for (int n = 0; n < s.n; ++n)
        for (int y = 0; y < s.h; ++y)
            for (int x = 0; x < s.w; ++x) {
                if (y + 1 < s.h) acc += charb(at(n, y, x) - at(n, y + 1, x), cp);
                if (x + 1 < s.w) acc += charb(at(n, y, x) - at(n, y, x + 1), cp);
            }
    (*out.data)[0] = acc / double(npix);
    if (tape && out.requires_grad) {
        Tensor d = disparity;
        int oid = out.node_id;
        tape->record({disparity.node_id}, oid, [=](Tape& tp) {
            const double g = tp.grad(oid)[0] / double(npix);
            auto& gd = tp.grad(d.node_id);
            const double* p = d.ptr();
            auto ix = [&](int n, int y, int x) { return (int64_t(n) * s.h + y) * s.w + x; };
            for (int n = 0; n < s.n; ++n)
                for (int y = 0; y < s.h; ++y)
                    for (int x = 0; x < s.w; ++x) {
                        if (y + 1 < s.h) {
                            const double dd =
                                charb_deriv(p[ix(n, y, x)] - p[ix(n, y + 1, x)], cp) * g;
                            gd[ix(n, y, x)] += dd;
                            gd[ix(n, y + 1, x)] -= dd;
                        }
                        if (x + 1 < s.w) {
                            const double dd =
                                charb_deriv(p[ix(n, y, x)] - p[ix(n, y, x + 1)], cp) * g;
                            gd[ix(n, y, x)] += dd;
                            gd[ix(n, y, x + 1)] -= dd;
                        }
                    }
        });
    }
    return out;
}

Tensor downsample_labels_nearest(const Tensor& labels, int out_h, int out_w) {
    const Shape& s = labels.shape;
    const double sy = out_h > 1 ? double(s.h - 1) / (out_h - 1) : 0.0;
    const double sx = out_w > 1 ? double(s.w - 1) / (out_w - 1) : 0.0;
    std::vector<double> vals(int64_t(s.n) * out_h * out_w);
    for (int n = 0; n < s.n; ++n)
        for (int oy = 0; oy < out_h; ++oy)
            for (int ox = 0; ox < out_w; ++ox) {
                const int iy = std::min(int(std::lround(oy * sy)), s.h - 1);
                const int ix = std::min(int(std::lround(ox * sx)), s.w - 1);
                vals[(int64_t(n) * out_h + oy) * out_w + ox] =
                    (*labels.data)[(int64_t(n) * s.h + iy) * s.w + ix];
            }
    Tensor out;
    out.shape = Shape{s.n, 1, out_h, out_w};
    out.data = std::make_shared<std::vector<double>>(std::move(vals));
    return out;
}

Tensor semantic_loss(const Tensor& right_sem_feat, const Tensor& disparity,
                     const ConvParams& classifier, const Tensor& left_labels_full,
                     int ignore_label) {
    const Shape& fs = right_sem_feat.shape;
    const Shape& ds = disparity.shape;
    if (ds.h != fs.h * 8 || ds.w != fs.w * 8)
        throw std::invalid_argument("semantic_loss: disparity must be 8x feature size");
    if (left_labels_full.shape.h != ds.h || left_labels_full.shape.w != ds.w)
        throw std::invalid_argument("semantic_loss: label resolution mismatch");
    Tensor up = bilinear_resize(right_sem_feat, ds.h, ds.w);
    WarpResult wr = warp_horizontal(up, disparity);
    Tensor down = bilinear_resize(wr.warped, fs.h, fs.w);
    Tensor logits = conv2d(down, classifier);
    Tensor labels = downsample_labels_nearest(left_labels_full, fs.h, fs.w);
    return softmax_cross_entropy(logits, labels, ignore_label);
}

Tensor regression_loss(const Tensor& disparity, const Tensor& gt, const Tensor& valid) {
    if (disparity.shape != gt.shape || disparity.shape != valid.shape)
        throw std::invalid_argument("regression_loss: shape mismatch");
    int64_t nv = 0;
    for (double v : *valid.data)
        if (v != 0.0) ++nv;
    if (nv == 0) throw std::invalid_argument("regression_loss: empty valid set");
    Tensor resid = abs(sub(disparity, gt));
    Tensor mask = valid;  // stop-gradient constant inside reduce
    return scale(reduce_sum(resid, &mask), 1.0 / double(nv));
}

std::pair<Tensor, LossReport> total_loss(TrainMode mode, const TotalLossInputs& terms,
                                         const LossWeights& w) {
    LossReport rep;
    rep.masked_fraction = terms.masked_fraction;
    std::optional<Tensor> total;
    auto add_term = [&](const Tensor& t, double weight) {
        Tensor wt = scale(t, weight);
        total = total ? add(*total, wt) : wt;
    };
    if (mode == TrainMode::Unsupervised) {
        if (!terms.photometric || !terms.smoothness)
            throw std::invalid_argument("total_loss: unsupervised needs photometric+smoothness");
        rep.photometric = terms.photometric->scalar();
        rep.smoothness = terms.smoothness->scalar();
        add_term(*terms.photometric, w.lambda_p);
        add_term(*terms.smoothness, w.lambda_s);
    } else {
        if (!terms.regression || !terms.smoothness)
            throw std::invalid_argument("total_loss: supervised needs regression+smoothness");
        rep.regression = terms.regression->scalar();
        rep.smoothness = terms.smoothness->scalar();
        add_term(*terms.regression, w.lambda_r);
        add_term(*terms.smoothness, w.lambda_s);
    }
    if (terms.semantic) {  // dropped when no labels exist
        rep.semantic = terms.semantic->scalar();
        add_term(*terms.semantic, w.lambda_seg);
    }
    rep.total = total->scalar();
    check_finite(*total, "total loss");
    return {*total, rep};
}

}  // namespace segstereo
