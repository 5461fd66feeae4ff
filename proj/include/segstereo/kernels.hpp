#pragma once

#include <cstdint>

// Raw-array compute kernels behind the tensor ops. Every kernel exists in a
// serial reference version and an OpenMP version; both produce bit-identical
// results because each output element is accumulated in the same fixed order.
// The dispatch layer picks one at runtime (parallel by default).

namespace segstereo::kernels {

struct ConvDims {
    int n, in_ch, in_h, in_w;
    int out_ch, out_h, out_w;
    int kh, kw;
    int stride, pad, dilation;
};

struct CorrDims {
    int n, ch, h, w;
    int max_disp, pad;
};

struct WarpDims {
    int n, ch, h, w;
};

struct ResizeDims {
    int n, ch, in_h, in_w, out_h, out_w;
};

bool parallel_enabled();
void set_parallel_enabled(bool on);

#define SS_KERNEL_SET(NS)                                                                    \
    namespace NS {                                                                           \
    void conv2d_forward(const double* in, const double* ker, const double* bias,             \
                        double* out, const ConvDims& d);                                     \
    void conv2d_backward_input(const double* gout, const double* ker, double* gin,           \
                               const ConvDims& d);                                           \
    void conv2d_backward_kernel(const double* gout, const double* in, double* gker,          \
                                const ConvDims& d);                                          \
    void conv2d_backward_bias(const double* gout, double* gbias, const ConvDims& d);         \
    void deconv2d_forward(const double* in, const double* ker, const double* bias,           \
                          double* out, const ConvDims& d);                                   \
    void deconv2d_backward_input(const double* gout, const double* ker, double* gin,         \
                                 const ConvDims& d);                                         \
    void deconv2d_backward_kernel(const double* gout, const double* in, double* gker,        \
                                  const ConvDims& d);                                        \
    void correlation1d_forward(const double* left, const double* right, double* out,         \
                               const CorrDims& d);                                           \
    void correlation1d_backward(const double* gout, const double* left, const double* right, \
                                double* gleft, double* gright, const CorrDims& d);           \
    void warp_forward(const double* src, const double* disp, double* out, double* validity,  \
                      const WarpDims& d);                                                    \
    void warp_backward(const double* gout, const double* src, const double* disp,            \
                       const double* validity, double* gsrc, double* gdisp,                  \
                       const WarpDims& d);                                                   \
    void resize_bilinear_forward(const double* in, double* out, const ResizeDims& d);        \
    void resize_bilinear_backward(const double* gout, double* gin, const ResizeDims& d);     \
    }

SS_KERNEL_SET(serial)
SS_KERNEL_SET(omp)
SS_KERNEL_SET(dispatch)  // routes to serial or omp per parallel_enabled()

#undef SS_KERNEL_SET

}  // namespace segstereo::kernels
