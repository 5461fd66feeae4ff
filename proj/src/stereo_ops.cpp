#include "segstereo/stereo_ops.hpp"

#include "op_common.hpp"
#include "segstereo/kernels.hpp"

namespace segstereo {

using detail::any_grad;
using detail::common_tape;
using detail::make_output;
namespace K = kernels::dispatch;

CostVolume correlation1d(const Tensor& left_feat, const Tensor& right_feat,
                         int max_disp, int pad) {
    if (max_disp < 0) throw std::invalid_argument("correlation1d: max_disp < 0");
    if (left_feat.shape != right_feat.shape)
        throw std::invalid_argument("correlation1d: feature shape mismatch");
    const Shape& s = left_feat.shape;
    kernels::CorrDims d{s.n, s.c, s.h, s.w, max_disp, pad};
    Tape* tape = common_tape({&left_feat, &right_feat});
    Tensor out = make_output(Shape{s.n, max_disp + 1, s.h, s.w}, tape,
                             any_grad({&left_feat, &right_feat}));
    K::correlation1d_forward(left_feat.ptr(), right_feat.ptr(), out.ptr(), d);
    if (tape && out.requires_grad) {
        Tensor l = left_feat, r = right_feat;
        int oid = out.node_id;
        tape->record({left_feat.node_id, right_feat.node_id}, oid, [=](Tape& tp) {
            // Both gradients are computed in one pass; feed a scratch buffer
            // for whichever side is not tracked.
            std::vector<double> scratch;
            double* gl = nullptr;
            double* gr = nullptr;
            if (l.requires_grad && l.node_id >= 0) gl = tp.grad(l.node_id).data();
            if (r.requires_grad && r.node_id >= 0) gr = tp.grad(r.node_id).data();
            if (!gl || !gr) {
                scratch.assign(l.numel(), 0.0);
                if (!gl) gl = scratch.data();
                if (!gr) gr = scratch.data();
            }
            K::correlation1d_backward(tp.grad(oid).data(), l.ptr(), r.ptr(), gl, gr, d);
        });
    }
    return {out, max_disp};
}

WarpResult warp_horizontal(const Tensor& source, const Tensor& disparity) {
    const Shape& s = source.shape;
    if (disparity.shape.n != s.n || disparity.shape.c != 1 ||
        disparity.shape.h != s.h || disparity.shape.w != s.w)
        throw std::invalid_argument("warp_horizontal: disparity resolution mismatch");
    kernels::WarpDims d{s.n, s.c, s.h, s.w};
    Tape* tape = common_tape({&source, &disparity});
    Tensor out = make_output(s, tape, any_grad({&source, &disparity}));
    Tensor validity;  // constant: the mask is stop-gradient
    validity.shape = Shape{s.n, 1, s.h, s.w};
    validity.data = std::make_shared<std::vector<double>>(validity.shape.numel());
    K::warp_forward(source.ptr(), disparity.ptr(), out.ptr(), validity.ptr(), d);
    if (tape && out.requires_grad) {
        Tensor src = source, disp = disparity, val = validity;
        int oid = out.node_id;
        tape->record({source.node_id, disparity.node_id}, oid, [=](Tape& tp) {
            double* gsrc = (src.requires_grad && src.node_id >= 0)
                               ? tp.grad(src.node_id).data() : nullptr;
            double* gdisp = (disp.requires_grad && disp.node_id >= 0)
                                ? tp.grad(disp.node_id).data() : nullptr;
            if (!gsrc && !gdisp) return;
            K::warp_backward(tp.grad(oid).data(), src.ptr(), disp.ptr(), val.ptr(),
                             gsrc, gdisp, d);
        });
    }
    return {out, validity};
}

}  // namespace segstereo
