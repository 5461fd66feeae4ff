#include "segstereo/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

namespace segstereo::kernels {

namespace {
std::atomic<bool> g_parallel{true};

inline int64_t idx4(int a, int b, int c, int d, int eb, int ec, int ed) {
    return ((int64_t(a) * eb + b) * ec + c) * ed + d;
}
}  // namespace

bool parallel_enabled() { return g_parallel.load(); }
void set_parallel_enabled(bool on) { g_parallel.store(on); }

// ---------------------------------------------------------------------------
// Serial reference implementations. Plain gather loops, one output element at
// a time, fixed accumulation order.
// ---------------------------------------------------------------------------

namespace serial {

void conv2d_forward(const double* in, const double* ker, const double* bias,
                    double* out, const ConvDims& d) {
    for (int n = 0; n < d.n; ++n)
        for (int oc = 0; oc < d.out_ch; ++oc)
            for (int oy = 0; oy < d.out_h; ++oy)
                for (int ox = 0; ox < d.out_w; ++ox) {
                    double acc = bias ? bias[oc] : 0.0;
                    for (int ic = 0; ic < d.in_ch; ++ic)
                        for (int ky = 0; ky < d.kh; ++ky) {
                            const int iy = oy * d.stride - d.pad + ky * d.dilation;
                            if (iy < 0 || iy >= d.in_h) continue;
                            for (int kx = 0; kx < d.kw; ++kx) {
                                const int ix = ox * d.stride - d.pad + kx * d.dilation;
                                if (ix < 0 || ix >= d.in_w) continue;
                                acc += in[idx4(n, ic, iy, ix, d.in_ch, d.in_h, d.in_w)] *
                                       ker[idx4(oc, ic, ky, kx, d.in_ch, d.kh, d.kw)];
                            }
                        }
                    out[idx4(n, oc, oy, ox, d.out_ch, d.out_h, d.out_w)] = acc;
                }
}

void conv2d_backward_input(const double* gout, const double* ker, double* gin,
                           const ConvDims& d) {
    for (int n = 0; n < d.n; ++n)
        for (int ic = 0; ic < d.in_ch; ++ic)
            for (int iy = 0; iy < d.in_h; ++iy)
                for (int ix = 0; ix < d.in_w; ++ix) {
                    double acc = 0.0;
                    for (int oc = 0; oc < d.out_ch; ++oc)
                        for (int ky = 0; ky < d.kh; ++ky) {
                            const int ty = iy + d.pad - ky * d.dilation;
                            if (ty < 0 || ty % d.stride) continue;
                            const int oy = ty / d.stride;
                            if (oy >= d.out_h) continue;
                            for (int kx = 0; kx < d.kw; ++kx) {
                                const int tx = ix + d.pad - kx * d.dilation;
                                if (tx < 0 || tx % d.stride) continue;
                                const int ox = tx / d.stride;
                                if (ox >= d.out_w) continue;
                                acc += gout[idx4(n, oc, oy, ox, d.out_ch, d.out_h, d.out_w)] *
                                       ker[idx4(oc, ic, ky, kx, d.in_ch, d.kh, d.kw)];
                            }
                        }
                    gin[idx4(n, ic, iy, ix, d.in_ch, d.in_h, d.in_w)] += acc;
                }
}

void conv2d_backward_kernel(const double* gout, const double* in, double* gker,
                            const ConvDims& d) {
    for (int oc = 0; oc < d.out_ch; ++oc)
        for (int ic = 0; ic < d.in_ch; ++ic)
            for (int ky = 0; ky < d.kh; ++ky)
                for (int kx = 0; kx < d.kw; ++kx) {
                    double acc = 0.0;
                    for (int n = 0; n < d.n; ++n)
                        for (int oy = 0; oy < d.out_h; ++oy) {
                            const int iy = oy * d.stride - d.pad + ky * d.dilation;
                            if (iy < 0 || iy >= d.in_h) continue;
                            for (int ox = 0; ox < d.out_w; ++ox) {
                                const int ix = ox * d.stride - d.pad + kx * d.dilation;
                                if (ix < 0 || ix >= d.in_w) continue;
                                acc += gout[idx4(n, oc, oy, ox, d.out_ch, d.out_h, d.out_w)] *
                                       in[idx4(n, ic, iy, ix, d.in_ch, d.in_h, d.in_w)];
                            }
                        }
                    gker[idx4(oc, ic, ky, kx, d.in_ch, d.kh, d.kw)] += acc;
                }
}

void conv2d_backward_bias(const double* gout, double* gbias, const ConvDims& d) {
    for (int oc = 0; oc < d.out_ch; ++oc) {
        double acc = 0.0;
        for (int n = 0; n < d.n; ++n)
            for (int oy = 0; oy < d.out_h; ++oy)
                for (int ox = 0; ox < d.out_w; ++ox)
                    acc += gout[idx4(n, oc, oy, ox, d.out_ch, d.out_h, d.out_w)];
        gbias[oc] += acc;
    }
}

// Transposed convolution. in_* is the small (input) grid, out_* the large
// one; kernel layout [out_ch, in_ch, kh, kw].
void deconv2d_forward(const double* in, const double* ker, const double* bias,
                      double* out, const ConvDims& d) {
    for (int n = 0; n < d.n; ++n)
        for (int oc = 0; oc < d.out_ch; ++oc)
            for (int oy = 0; oy < d.out_h; ++oy)
                for (int ox = 0; ox < d.out_w; ++ox) {
                    double acc = bias ? bias[oc] : 0.0;
                    for (int ic = 0; ic < d.in_ch; ++ic)
                        for (int ky = 0; ky < d.kh; ++ky) {
                            const int ty = oy + d.pad - ky * d.dilation;
                            if (ty < 0 || ty % d.stride) continue;
                            const int iy = ty / d.stride;
                            if (iy >= d.in_h) continue;
                            for (int kx = 0; kx < d.kw; ++kx) {
                                const int tx = ox + d.pad - kx * d.dilation;
                                if (tx < 0 || tx % d.stride) continue;
                                const int ix = tx / d.stride;
                                if (ix >= d.in_w) continue;
                                acc += in[idx4(n, ic, iy, ix, d.in_ch, d.in_h, d.in_w)] *
                                       ker[idx4(oc, ic, ky, kx, d.in_ch, d.kh, d.kw)];
                            }
                        }
                    out[idx4(n, oc, oy, ox, d.out_ch, d.out_h, d.out_w)] = acc;
                }
}

void deconv2d_backward_input(const double* gout, const double* ker, double* gin,
                             const ConvDims& d) {
    for (int n = 0; n < d.n; ++n)
        for (int ic = 0; ic < d.in_ch; ++ic)
            for (int iy = 0; iy < d.in_h; ++iy)
                for (int ix = 0; ix < d.in_w; ++ix) {
                    double acc = 0.0;
                    for (int oc = 0; oc < d.out_ch; ++oc)
                        for (int ky = 0; ky < d.kh; ++ky) {
                            const int oy = iy * d.stride - d.pad + ky * d.dilation;
                            if (oy < 0 || oy >= d.out_h) continue;
                            for (int kx = 0; kx < d.kw; ++kx) {
                                const int ox = ix * d.stride - d.pad + kx * d.dilation;
                                if (ox < 0 || ox >= d.out_w) continue;
                                acc += gout[idx4(n, oc, oy, ox, d.out_ch, d.out_h, d.out_w)] *
                                       ker[idx4(oc, ic, ky, kx, d.in_ch, d.kh, d.kw)];
                            }
                        }
                    gin[idx4(n, ic, iy, ix, d.in_ch, d.in_h, d.in_w)] += acc;
                }
}

void deconv2d_backward_kernel(const double* gout, const double* in, double* gker,
                              const ConvDims& d) {
    for (int oc = 0; oc < d.out_ch; ++oc)
        for (int ic = 0; ic < d.in_ch; ++ic)
            for (int ky = 0; ky < d.kh; ++ky)
                for (int kx = 0; kx < d.kw; ++kx) {
                    double acc = 0.0;
                    for (int n = 0; n < d.n; ++n)
                        for (int iy = 0; iy < d.in_h; ++iy) {
                            const int oy = iy * d.stride - d.pad + ky * d.dilation;
                            if (oy < 0 || oy >= d.out_h) continue;
                            for (int ix = 0; ix < d.in_w; ++ix) {
                                const int ox = ix * d.stride - d.pad + kx * d.dilation;
                                if (ox < 0 || ox >= d.out_w) continue;
                                acc += in[idx4(n, ic, iy, ix, d.in_ch, d.in_h, d.in_w)] *
                                       gout[idx4(n, oc, oy, ox, d.out_ch, d.out_h, d.out_w)];
                            }
                        }
                    gker[idx4(oc, ic, ky, kx, d.in_ch, d.kh, d.kw)] += acc;
                }
}

// scores[n,disp,y,x] = (1/C) sum_c left[n,c,y,x] * right[n,c,y,x-disp];
// samples left of the image border contribute the zero padding.
void correlation1d_forward(const double* left, const double* right, double* out,
                           const CorrDims& d) {
    const int nd = d.max_disp + 1;
    for (int n = 0; n < d.n; ++n)
        for (int disp = 0; disp < nd; ++disp)
            for (int y = 0; y < d.h; ++y)
                for (int x = 0; x < d.w; ++x) {
                    const int xr = x - disp;
                    double acc = 0.0;
                    if (xr >= 0)
                        for (int c = 0; c < d.ch; ++c)
                            acc += left[idx4(n, c, y, x, d.ch, d.h, d.w)] *
                                   right[idx4(n, c, y, xr, d.ch, d.h, d.w)];
                    out[idx4(n, disp, y, x, nd, d.h, d.w)] = acc / d.ch;
                }
}

void correlation1d_backward(const double* gout, const double* left, const double* right,
                            double* gleft, double* gright, const CorrDims& d) {
    const int nd = d.max_disp + 1;
    const double inv_c = 1.0 / d.ch;
    for (int n = 0; n < d.n; ++n)
        for (int c = 0; c < d.ch; ++c)
            for (int y = 0; y < d.h; ++y)
                for (int x = 0; x < d.w; ++x) {
                    double gl = 0.0, gr = 0.0;
                    for (int disp = 0; disp < nd; ++disp) {
                        const int xr = x - disp;
                        if (xr >= 0)
                            gl += gout[idx4(n, disp, y, x, nd, d.h, d.w)] *
                                  right[idx4(n, c, y, xr, d.ch, d.h, d.w)];
                        const int xl = x + disp;
                        if (xl < d.w)
                            gr += gout[idx4(n, disp, y, xl, nd, d.h, d.w)] *
                                  left[idx4(n, c, y, xl, d.ch, d.h, d.w)];
                    }
                    gleft[idx4(n, c, y, x, d.ch, d.h, d.w)] += gl * inv_c;
                    gright[idx4(n, c, y, x, d.ch, d.h, d.w)] += gr * inv_c;
                }
}

// Bilinear horizontal warp: out(x) = src(x - disp(x)). Samples whose
// footprint leaves [0, W-1] are zeroed and flagged invalid.
void warp_forward(const double* src, const double* disp, double* out, double* validity,
                  const WarpDims& d) {
    for (int n = 0; n < d.n; ++n)
        for (int y = 0; y < d.h; ++y)
            for (int x = 0; x < d.w; ++x) {
                const double xs = x - disp[idx4(n, 0, y, x, 1, d.h, d.w)];
                const bool valid = xs >= 0.0 && xs <= double(d.w - 1);
                validity[idx4(n, 0, y, x, 1, d.h, d.w)] = valid ? 1.0 : 0.0;
                if (!valid) {
                    for (int c = 0; c < d.ch; ++c)
                        out[idx4(n, c, y, x, d.ch, d.h, d.w)] = 0.0;
                    continue;
                }
                const int x0 = std::min(int(std::floor(xs)), d.w - 1);
                const int x1 = std::min(x0 + 1, d.w - 1);
                const double f = xs - x0;
                for (int c = 0; c < d.ch; ++c) {
                    const double v0 = src[idx4(n, c, y, x0, d.ch, d.h, d.w)];
                    const double v1 = src[idx4(n, c, y, x1, d.ch, d.h, d.w)];
                    out[idx4(n, c, y, x, d.ch, d.h, d.w)] = (1.0 - f) * v0 + f * v1;
                }
            }
}

void warp_backward(const double* gout, const double* src, const double* disp,
                   const double* validity, double* gsrc, double* gdisp,
                   const WarpDims& d) {
    for (int n = 0; n < d.n; ++n)
        for (int y = 0; y < d.h; ++y)
            for (int x = 0; x < d.w; ++x) {
                const int64_t pi = idx4(n, 0, y, x, 1, d.h, d.w);
                if (validity[pi] == 0.0) continue;
                const double xs = x - disp[pi];
                const int x0 = std::min(int(std::floor(xs)), d.w - 1);
                const int x1 = std::min(x0 + 1, d.w - 1);
                const double f = xs - x0;
                double gd = 0.0;
                for (int c = 0; c < d.ch; ++c) {
                    const double g = gout[idx4(n, c, y, x, d.ch, d.h, d.w)];
                    if (gsrc) {
                        gsrc[idx4(n, c, y, x0, d.ch, d.h, d.w)] += g * (1.0 - f);
                        if (x1 != x0) gsrc[idx4(n, c, y, x1, d.ch, d.h, d.w)] += g * f;
                    }
                    if (gdisp) {
                        // d out / d disp = -(d out / d xs)
                        double slope;
                        if (x1 != x0 && f > 0.0) {
                            slope = src[idx4(n, c, y, x1, d.ch, d.h, d.w)] -
                                    src[idx4(n, c, y, x0, d.ch, d.h, d.w)];
                        } else {
                            // integer sample: average available one-sided slopes
                            double s = 0.0;
                            int cnt = 0;
                            if (x0 + 1 <= d.w - 1) {
                                s += src[idx4(n, c, y, x0 + 1, d.ch, d.h, d.w)] -
                                     src[idx4(n, c, y, x0, d.ch, d.h, d.w)];
                                ++cnt;
                            }
                            if (x0 - 1 >= 0) {
                                s += src[idx4(n, c, y, x0, d.ch, d.h, d.w)] -
                                     src[idx4(n, c, y, x0 - 1, d.ch, d.h, d.w)];
                                ++cnt;
                            }
                            slope = cnt ? s / cnt : 0.0;
                        }
                        gd += g * (-slope);
                    }
                }
                if (gdisp) gdisp[pi] += gd;
            }
}

// Align-corners bilinear resize.
void resize_bilinear_forward(const double* in, double* out, const ResizeDims& d) {
    const double sy = d.out_h > 1 ? double(d.in_h - 1) / (d.out_h - 1) : 0.0;
    const double sx = d.out_w > 1 ? double(d.in_w - 1) / (d.out_w - 1) : 0.0;
    for (int n = 0; n < d.n; ++n)
        for (int c = 0; c < d.ch; ++c)
            for (int oy = 0; oy < d.out_h; ++oy) {
                const double ys = oy * sy;
                const int y0 = std::min(int(std::floor(ys)), d.in_h - 1);
                const int y1 = std::min(y0 + 1, d.in_h - 1);
                const double fy = ys - y0;
                for (int ox = 0; ox < d.out_w; ++ox) {
                    const double xs = ox * sx;
                    const int x0 = std::min(int(std::floor(xs)), d.in_w - 1);
                    const int x1 = std::min(x0 + 1, d.in_w - 1);
                    const double fx = xs - x0;
                    const double v00 = in[idx4(n, c, y0, x0, d.ch, d.in_h, d.in_w)];
                    const double v01 = in[idx4(n, c, y0, x1, d.ch, d.in_h, d.in_w)];
                    const double v10 = in[idx4(n, c, y1, x0, d.ch, d.in_h, d.in_w)];
                    const double v11 = in[idx4(n, c, y1, x1, d.ch, d.in_h, d.in_w)];
                    out[idx4(n, c, oy, ox, d.ch, d.out_h, d.out_w)] =
                        (1 - fy) * ((1 - fx) * v00 + fx * v01) +
                        fy * ((1 - fx) * v10 + fx * v11);
                }
            }
}

void resize_bilinear_backward(const double* gout, double* gin, const ResizeDims& d) {
    const double sy = d.out_h > 1 ? double(d.in_h - 1) / (d.out_h - 1) : 0.0;
    const double sx = d.out_w > 1 ? double(d.in_w - 1) / (d.out_w - 1) : 0.0;
    for (int n = 0; n < d.n; ++n)
        for (int c = 0; c < d.ch; ++c)
            for (int oy = 0; oy < d.out_h; ++oy) {
                const double ys = oy * sy;
                const int y0 = std::min(int(std::floor(ys)), d.in_h - 1);
                const int y1 = std::min(y0 + 1, d.in_h - 1);
                const double fy = ys - y0;
                for (int ox = 0; ox < d.out_w; ++ox) {
                    const double xs = ox * sx;
                    const int x0 = std::min(int(std::floor(xs)), d.in_w - 1);
                    const int x1 = std::min(x0 + 1, d.in_w - 1);
                    const double fx = xs - x0;
                    const double g = gout[idx4(n, c, oy, ox, d.ch, d.out_h, d.out_w)];
                    gin[idx4(n, c, y0, x0, d.ch, d.in_h, d.in_w)] += g * (1 - fy) * (1 - fx);
                    if (x1 != x0)
                        gin[idx4(n, c, y0, x1, d.ch, d.in_h, d.in_w)] += g * (1 - fy) * fx;
                    if (y1 != y0)
                        gin[idx4(n, c, y1, x0, d.ch, d.in_h, d.in_w)] += g * fy * (1 - fx);
                    if (x1 != x0 && y1 != y0)
                        gin[idx4(n, c, y1, x1, d.ch, d.in_h, d.in_w)] += g * fy * fx;
                }
            }
}

}  // namespace serial

// ---------------------------------------------------------------------------
// OpenMP versions. Parallelism is over independent output elements (or over
// (n,c[,y]) slabs for scatter-style backward passes, which stay slab-local),
// so results are bit-identical to the serial reference at any thread count.
// ---------------------------------------------------------------------------

namespace omp {

void conv2d_forward(const double* in, const double* ker, const double* bias,
                    double* out, const ConvDims& d) {
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < d.n; ++n)
        for (int oc = 0; oc < d.out_ch; ++oc)
            for (int oy = 0; oy < d.out_h; ++oy)
                for (int ox = 0; ox < d.out_w; ++ox) {
                    double acc = bias ? bias[oc] : 0.0;
                    for (int ic = 0; ic < d.in_ch; ++ic)
                        for (int ky = 0; ky < d.kh; ++ky) {
                            const int iy = oy * d.stride - d.pad + ky * d.dilation;
                            if (iy < 0 || iy >= d.in_h) continue;
                            for (int kx = 0; kx < d.kw; ++kx) {
                                const int ix = ox * d.stride - d.pad + kx * d.dilation;
                                if (ix < 0 || ix >= d.in_w) continue;
                                acc += in[idx4(n, ic, iy, ix, d.in_ch, d.in_h, d.in_w)] *
                                       ker[idx4(oc, ic, ky, kx, d.in_ch, d.kh, d.kw)];
                            }
                        }
                    out[idx4(n, oc, oy, ox, d.out_ch, d.out_h, d.out_w)] = acc;
                }
}

void conv2d_backward_input(const double* gout, const double* ker, double* gin,
                           const ConvDims& d) {
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < d.n; ++n)
        for (int ic = 0; ic < d.in_ch; ++ic)
            for (int iy = 0; iy < d.in_h; ++iy)
                for (int ix = 0; ix < d.in_w; ++ix) {
                    double acc = 0.0;
                    for (int oc = 0; oc < d.out_ch; ++oc)
                        for (int ky = 0; ky < d.kh; ++ky) {
                            const int ty = iy + d.pad - ky * d.dilation;
                            if (ty < 0 || ty % d.stride) continue;
                            const int oy = ty / d.stride;
                            if (oy >= d.out_h) continue;
                            for (int kx = 0; kx < d.kw; ++kx) {
                                const int tx = ix + d.pad - kx * d.dilation;
                                if (tx < 0 || tx % d.stride) continue;
                                const int ox = tx / d.stride;
                                if (ox >= d.out_w) continue;
                                acc += gout[idx4(n, oc, oy, ox, d.out_ch, d.out_h, d.out_w)] *
                                       ker[idx4(oc, ic, ky, kx, d.in_ch, d.kh, d.kw)];
                            }
                        }
                    gin[idx4(n, ic, iy, ix, d.in_ch, d.in_h, d.in_w)] += acc;
                }
}

void conv2d_backward_kernel(const double* gout, const double* in, double* gker,
                            const ConvDims& d) {
#pragma omp parallel for collapse(2) schedule(static)
    for (int oc = 0; oc < d.out_ch; ++oc)
        for (int ic = 0; ic < d.in_ch; ++ic)
            for (int ky = 0; ky < d.kh; ++ky)
                for (int kx = 0; kx < d.kw; ++kx) {
                    double acc = 0.0;
                    for (int n = 0; n < d.n; ++n)
                        for (int oy = 0; oy < d.out_h; ++oy) {
                            const int iy = oy * d.stride - d.pad + ky * d.dilation;
                            if (iy < 0 || iy >= d.in_h) continue;
                            for (int ox = 0; ox < d.out_w; ++ox) {
                                const int ix = ox * d.stride - d.pad + kx * d.dilation;
                                if (ix < 0 || ix >= d.in_w) continue;
                                acc += gout[idx4(n, oc, oy, ox, d.out_ch, d.out_h, d.out_w)] *
                                       in[idx4(n, ic, iy, ix, d.in_ch, d.in_h, d.in_w)];
                            }
                        }
                    gker[idx4(oc, ic, ky, kx, d.in_ch, d.kh, d.kw)] += acc;
                }
}

void conv2d_backward_bias(const double* gout, double* gbias, const ConvDims& d) {
#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < d.out_ch; ++oc) {
        double acc = 0.0;
        for (int n = 0; n < d.n; ++n)
            for (int oy = 0; oy < d.out_h; ++oy)
                for (int ox = 0; ox < d.out_w; ++ox)
                    acc += gout[idx4(n, oc, oy, ox, d.out_ch, d.out_h, d.out_w)];
        gbias[oc] += acc;
    }
}

void deconv2d_forward(const double* in, const double* ker, const double* bias,
                      double* out, const ConvDims& d) {
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < d.n; ++n)
        for (int oc = 0; oc < d.out_ch; ++oc)
            for (int oy = 0; oy < d.out_h; ++oy)
                for (int ox = 0; ox < d.out_w; ++ox) {
                    double acc = bias ? bias[oc] : 0.0;
                    for (int ic = 0; ic < d.in_ch; ++ic)
                        for (int ky = 0; ky < d.kh; ++ky) {
                            const int ty = oy + d.pad - ky * d.dilation;
                            if (ty < 0 || ty % d.stride) continue;
                            const int iy = ty / d.stride;
                            if (iy >= d.in_h) continue;
                            for (int kx = 0; kx < d.kw; ++kx) {
                                const int tx = ox + d.pad - kx * d.dilation;
                                if (tx < 0 || tx % d.stride) continue;
                                const int ix = tx / d.stride;
                                if (ix >= d.in_w) continue;
                                acc += in[idx4(n, ic, iy, ix, d.in_ch, d.in_h, d.in_w)] *
                                       ker[idx4(oc, ic, ky, kx, d.in_ch, d.kh, d.kw)];
                            }
                        }
                    out[idx4(n, oc, oy, ox, d.out_ch, d.out_h, d.out_w)] = acc;
                }
}

void deconv2d_backward_input(const double* gout, const double* ker, double* gin,
                             const ConvDims& d) {
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < d.n; ++n)
        for (int ic = 0; ic < d.in_ch; ++ic)
            for (int iy = 0; iy < d.in_h; ++iy)
                for (int ix = 0; ix < d.in_w; ++ix) {
                    double acc = 0.0;
                    for (int oc = 0; oc < d.out_ch; ++oc)
                        for (int ky = 0; ky < d.kh; ++ky) {
                            const int oy = iy * d.stride - d.pad + ky * d.dilation;
                            if (oy < 0 || oy >= d.out_h) continue;
                            for (int kx = 0; kx < d.kw; ++kx) {
                                const int ox = ix * d.stride - d.pad + kx * d.dilation;
                                if (ox < 0 || ox >= d.out_w) continue;
                                acc += gout[idx4(n, oc, oy, ox, d.out_ch, d.out_h, d.out_w)] *
                                       ker[idx4(oc, ic, ky, kx, d.in_ch, d.kh, d.kw)];
                            }
                        }
                    gin[idx4(n, ic, iy, ix, d.in_ch, d.in_h, d.in_w)] += acc;
                }
}

void deconv2d_backward_kernel(const double* gout, const double* in, double* gker,
                              const ConvDims& d) {
#pragma omp parallel for collapse(2) schedule(static)
    for (int oc = 0; oc < d.out_ch; ++oc)
        for (int ic = 0; ic < d.in_ch; ++ic)
            for (int ky = 0; ky < d.kh; ++ky)
                for (int kx = 0; kx < d.kw; ++kx) {
                    double acc = 0.0;
                    for (int n = 0; n < d.n; ++n)
                        for (int iy = 0; iy < d.in_h; ++iy) {
                            const int oy = iy * d.stride - d.pad + ky * d.dilation;
                            if (oy < 0 || oy >= d.out_h) continue;
                            for (int ix = 0; ix < d.in_w; ++ix) {
                                const int ox = ix * d.stride - d.pad + kx * d.dilation;
                                if (ox < 0 || ox >= d.out_w) continue;
                                acc += in[idx4(n, ic, iy, ix, d.in_ch, d.in_h, d.in_w)] *
                                       gout[idx4(n, oc, oy, ox, d.out_ch, d.out_h, d.out_w)];
                            }
                        }
                    gker[idx4(oc, ic, ky, kx, d.in_ch, d.kh, d.kw)] += acc;
                }
}

void correlation1d_forward(const double* left, const double* right, double* out,
                           const CorrDims& d) {
    const int nd = d.max_disp + 1;
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < d.n; ++n)
        for (int disp = 0; disp < nd; ++disp)
            for (int y = 0; y < d.h; ++y)
                for (int x = 0; x < d.w; ++x) {
                    const int xr = x - disp;
                    double acc = 0.0;
                    if (xr >= 0)
                        for (int c = 0; c < d.ch; ++c)
                            acc += left[idx4(n, c, y, x, d.ch, d.h, d.w)] *
                                   right[idx4(n, c, y, xr, d.ch, d.h, d.w)];
                    out[idx4(n, disp, y, x, nd, d.h, d.w)] = acc / d.ch;
                }
}

void correlation1d_backward(const double* gout, const double* left, const double* right,
                            double* gleft, double* gright, const CorrDims& d) {
    const int nd = d.max_disp + 1;
    const double inv_c = 1.0 / d.ch;
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < d.n; ++n)
        for (int c = 0; c < d.ch; ++c)
            for (int y = 0; y < d.h; ++y)
                for (int x = 0; x < d.w; ++x) {
                    double gl = 0.0, gr = 0.0;
                    for (int disp = 0; disp < nd; ++disp) {
                        const int xr = x - disp;
                        if (xr >= 0)
                            gl += gout[idx4(n, disp, y, x, nd, d.h, d.w)] *
                                  right[idx4(n, c, y, xr, d.ch, d.h, d.w)];
                        const int xl = x + disp;
                        if (xl < d.w)
                            gr += gout[idx4(n, disp, y, xl, nd, d.h, d.w)] *
                                  left[idx4(n, c, y, xl, d.ch, d.h, d.w)];
                    }
                    gleft[idx4(n, c, y, x, d.ch, d.h, d.w)] += gl * inv_c;
                    gright[idx4(n, c, y, x, d.ch, d.h, d.w)] += gr * inv_c;
                }
}

void warp_forward(const double* src, const double* disp, double* out, double* validity,
                  const WarpDims& d) {
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < d.n; ++n)
        for (int y = 0; y < d.h; ++y)
            for (int x = 0; x < d.w; ++x) {
                const double xs = x - disp[idx4(n, 0, y, x, 1, d.h, d.w)];
                const bool valid = xs >= 0.0 && xs <= double(d.w - 1);
                validity[idx4(n, 0, y, x, 1, d.h, d.w)] = valid ? 1.0 : 0.0;
                if (!valid) {
                    for (int c = 0; c < d.ch; ++c)
                        out[idx4(n, c, y, x, d.ch, d.h, d.w)] = 0.0;
                    continue;
                }
                const int x0 = std::min(int(std::floor(xs)), d.w - 1);
                const int x1 = std::min(x0 + 1, d.w - 1);
                const double f = xs - x0;
                for (int c = 0; c < d.ch; ++c) {
                    const double v0 = src[idx4(n, c, y, x0, d.ch, d.h, d.w)];
                    const double v1 = src[idx4(n, c, y, x1, d.ch, d.h, d.w)];
                    out[idx4(n, c, y, x, d.ch, d.h, d.w)] = (1.0 - f) * v0 + f * v1;
                }
            }
}

// gsrc scatter stays within one (n,y) row, so rows can run in parallel.
void warp_backward(const double* gout, const double* src, const double* disp,
                   const double* validity, double* gsrc, double* gdisp,
                   const WarpDims& d) {
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < d.n; ++n)
        for (int y = 0; y < d.h; ++y) {
            const int64_t po = idx4(n, 0, y, 0, 1, d.h, d.w);
            const int64_t so = idx4(n, 0, y, 0, d.ch, d.h, d.w);
            for (int x = 0; x < d.w; ++x) {
                const int64_t pi = po + x;
                if (validity[pi] == 0.0) continue;
                const double xs = x - disp[pi];
                const int x0 = std::min(int(std::floor(xs)), d.w - 1);
                const int x1 = std::min(x0 + 1, d.w - 1);
                const double f = xs - x0;
                double gd = 0.0;
                for (int c = 0; c < d.ch; ++c) {
                    const int64_t cs = so + int64_t(c) * d.h * d.w;
                    const double g = gout[cs + x];
                    if (gsrc) {
                        gsrc[cs + x0] += g * (1.0 - f);
                        if (x1 != x0) gsrc[cs + x1] += g * f;
                    }
                    if (gdisp) {
                        double slope;
                        if (x1 != x0 && f > 0.0) {
                            slope = src[cs + x1] - src[cs + x0];
                        } else {
                            double s = 0.0;
                            int cnt = 0;
                            if (x0 + 1 <= d.w - 1) {
                                s += src[cs + x0 + 1] - src[cs + x0];
                                ++cnt;
                            }
                            if (x0 - 1 >= 0) {
                                s += src[cs + x0] - src[cs + x0 - 1];
                                ++cnt;
                            }
                            slope = cnt ? s / cnt : 0.0;
                        }
                        gd += g * (-slope);
                    }
                }
                if (gdisp) gdisp[pi] += gd;
            }
        }
}

void resize_bilinear_forward(const double* in, double* out, const ResizeDims& d) {
    const double sy = d.out_h > 1 ? double(d.in_h - 1) / (d.out_h - 1) : 0.0;
    const double sx = d.out_w > 1 ? double(d.in_w - 1) / (d.out_w - 1) : 0.0;
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < d.n; ++n)
        for (int c = 0; c < d.ch; ++c)
            for (int oy = 0; oy < d.out_h; ++oy) {
                const double ys = oy * sy;
                const int y0 = std::min(int(std::floor(ys)), d.in_h - 1);
                const int y1 = std::min(y0 + 1, d.in_h - 1);
                const double fy = ys - y0;
                for (int ox = 0; ox < d.out_w; ++ox) {
                    const double xs = ox * sx;
                    const int x0 = std::min(int(std::floor(xs)), d.in_w - 1);
                    const int x1 = std::min(x0 + 1, d.in_w - 1);
                    const double fx = xs - x0;
                    const double v00 = in[idx4(n, c, y0, x0, d.ch, d.in_h, d.in_w)];
                    const double v01 = in[idx4(n, c, y0, x1, d.ch, d.in_h, d.in_w)];
                    const double v10 = in[idx4(n, c, y1, x0, d.ch, d.in_h, d.in_w)];
                    const double v11 = in[idx4(n, c, y1, x1, d.ch, d.in_h, d.in_w)];
                    out[idx4(n, c, oy, ox, d.ch, d.out_h, d.out_w)] =
                        (1 - fy) * ((1 - fx) * v00 + fx * v01) +
                        fy * ((1 - fx) * v10 + fx * v11);
                }
            }
}

// Scatter is (n,c)-plane-local; planes run in parallel.
void resize_bilinear_backward(const double* gout, double* gin, const ResizeDims& d) {
    const double sy = d.out_h > 1 ? double(d.in_h - 1) / (d.out_h - 1) : 0.0;
    const double sx = d.out_w > 1 ? double(d.in_w - 1) / (d.out_w - 1) : 0.0;
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < d.n; ++n)
        for (int c = 0; c < d.ch; ++c)
            for (int oy = 0; oy < d.out_h; ++oy) {
                const double ys = oy * sy;
                const int y0 = std::min(int(std::floor(ys)), d.in_h - 1);
                const int y1 = std::min(y0 + 1, d.in_h - 1);
                const double fy = ys - y0;
                for (int ox = 0; ox < d.out_w; ++ox) {
                    const double xs = ox * sx;
                    const int x0 = std::min(int(std::floor(xs)), d.in_w - 1);
                    const int x1 = std::min(x0 + 1, d.in_w - 1);
                    const double fx = xs - x0;
                    const double g = gout[idx4(n, c, oy, ox, d.ch, d.out_h, d.out_w)];
                    gin[idx4(n, c, y0, x0, d.ch, d.in_h, d.in_w)] += g * (1 - fy) * (1 - fx);
                    if (x1 != x0)
                        gin[idx4(n, c, y0, x1, d.ch, d.in_h, d.in_w)] += g * (1 - fy) * fx;
                    if (y1 != y0)
                        gin[idx4(n, c, y1, x0, d.ch, d.in_h, d.in_w)] += g * fy * (1 - fx);
                    if (x1 != x0 && y1 != y0)
                        gin[idx4(n, c, y1, x1, d.ch, d.in_h, d.in_w)] += g * fy * fx;
                }
            }
}

}  // namespace omp

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

namespace dispatch {

#define SS_DISPATCH(fn, ...)                    \
    do {                                        \
        if (parallel_enabled())                 \
            omp::fn(__VA_ARGS__);               \
        else                                    \
            serial::fn(__VA_ARGS__);            \
    } while (0)

void conv2d_forward(const double* in, const double* ker, const double* bias,
                    double* out, const ConvDims& d) {
    SS_DISPATCH(conv2d_forward, in, ker, bias, out, d);
}
void conv2d_backward_input(const double* gout, const double* ker, double* gin,
                           const ConvDims& d) {
    SS_DISPATCH(conv2d_backward_input, gout, ker, gin, d);
}
void conv2d_backward_kernel(const double* gout, const double* in, double* gker,
                            const ConvDims& d) {
    SS_DISPATCH(conv2d_backward_kernel, gout, in, gker, d);
}
void conv2d_backward_bias(const double* gout, double* gbias, const ConvDims& d) {
    SS_DISPATCH(conv2d_backward_bias, gout, gbias, d);
}
void deconv2d_forward(const double* in, const double* ker, const double* bias,
                      double* out, const ConvDims& d) {
    SS_DISPATCH(deconv2d_forward, in, ker, bias, out, d);
}
void deconv2d_backward_input(const double* gout, const double* ker, double* gin,
                             const ConvDims& d) {
    SS_DISPATCH(deconv2d_backward_input, gout, ker, gin, d);
}
void deconv2d_backward_kernel(const double* gout, const double* in, double* gker,
                              const ConvDims& d) {
    SS_DISPATCH(deconv2d_backward_kernel, gout, in, gker, d);
}
void correlation1d_forward(const double* left, const double* right, double* out,
                           const CorrDims& d) {
    SS_DISPATCH(correlation1d_forward, left, right, out, d);
}
void correlation1d_backward(const double* gout, const double* left, const double* right,
                            double* gleft, double* gright, const CorrDims& d) {
    SS_DISPATCH(correlation1d_backward, gout, left, right, gleft, gright, d);
}
void warp_forward(const double* src, const double* disp, double* out, double* validity,
                  const WarpDims& d) {
    SS_DISPATCH(warp_forward, src, disp, out, validity, d);
}
void warp_backward(const double* gout, const double* src, const double* disp,
                   const double* validity, double* gsrc, double* gdisp,
                   const WarpDims& d) {
    SS_DISPATCH(warp_backward, gout, src, disp, validity, gsrc, gdisp, d);
}
void resize_bilinear_forward(const double* in, double* out, const ResizeDims& d) {
    SS_DISPATCH(resize_bilinear_forward, in, out, d);
}
void resize_bilinear_backward(const double* gout, double* gin, const ResizeDims& d) {
    SS_DISPATCH(resize_bilinear_backward, gout, gin, d);
}

#undef SS_DISPATCH

}  // namespace dispatch

}  // namespace segstereo::kernels
