// Serial reference vs OpenMP kernels must agree bit-exactly: the parallel
// versions only distribute independent output elements (or slab-local
// scatters) across threads.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <vector>

#include "segstereo/kernels.hpp"

using namespace segstereo::kernels;

namespace {

std::vector<double> randvec(size_t n, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(-1, 1);
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

}  // namespace

TEST_CASE("conv2d serial == omp, several shapes") {
    struct Cfg { int n, ic, ih, iw, oc, kh, kw, stride, pad, dil; };
    for (const Cfg& c : {Cfg{1, 2, 5, 7, 3, 3, 3, 1, 1, 1},
                         Cfg{2, 3, 8, 8, 4, 3, 3, 2, 1, 1},
                         Cfg{1, 4, 9, 9, 2, 3, 3, 1, 2, 2},
                         Cfg{2, 1, 6, 6, 5, 1, 1, 1, 0, 1}}) {
        ConvDims d{c.n, c.ic, c.ih, c.iw, c.oc, 0, 0, c.kh, c.kw, c.stride, c.pad, c.dil};
        d.out_h = (d.in_h + 2 * d.pad - d.dilation * (d.kh - 1) - 1) / d.stride + 1;
        d.out_w = (d.in_w + 2 * d.pad - d.dilation * (d.kw - 1) - 1) / d.stride + 1;
        auto in = randvec(size_t(d.n) * d.in_ch * d.in_h * d.in_w, 1);
        auto ker = randvec(size_t(d.out_ch) * d.in_ch * d.kh * d.kw, 2);
        auto bias = randvec(d.out_ch, 3);
        const size_t no = size_t(d.n) * d.out_ch * d.out_h * d.out_w;
        std::vector<double> a(no), b(no);
        serial::conv2d_forward(in.data(), ker.data(), bias.data(), a.data(), d);
        omp::conv2d_forward(in.data(), ker.data(), bias.data(), b.data(), d);
        CHECK(a == b);

        auto gout = randvec(no, 4);
        std::vector<double> gi1(in.size(), 0), gi2(in.size(), 0);
        serial::conv2d_backward_input(gout.data(), ker.data(), gi1.data(), d);
        omp::conv2d_backward_input(gout.data(), ker.data(), gi2.data(), d);
        CHECK(gi1 == gi2);

        std::vector<double> gk1(ker.size(), 0), gk2(ker.size(), 0);
        serial::conv2d_backward_kernel(gout.data(), in.data(), gk1.data(), d);
        omp::conv2d_backward_kernel(gout.data(), in.data(), gk2.data(), d);
        CHECK(gk1 == gk2);

        std::vector<double> gb1(d.out_ch, 0), gb2(d.out_ch, 0);
        serial::conv2d_backward_bias(gout.data(), gb1.data(), d);
        omp::conv2d_backward_bias(gout.data(), gb2.data(), d);
        CHECK(gb1 == gb2);
    }
}

TEST_CASE("deconv2d serial == omp") {
    ConvDims d{2, 3, 4, 5, 2, 0, 0, 4, 4, 2, 1, 1};
    d.out_h = (d.in_h - 1) * d.stride - 2 * d.pad + d.kh;
    d.out_w = (d.in_w - 1) * d.stride - 2 * d.pad + d.kw;
    auto in = randvec(size_t(d.n) * d.in_ch * d.in_h * d.in_w, 5);
    auto ker = randvec(size_t(d.out_ch) * d.in_ch * d.kh * d.kw, 6);
    auto bias = randvec(d.out_ch, 7);
    const size_t no = size_t(d.n) * d.out_ch * d.out_h * d.out_w;
    std::vector<double> a(no), b(no);
    serial::deconv2d_forward(in.data(), ker.data(), bias.data(), a.data(), d);
    omp::deconv2d_forward(in.data(), ker.data(), bias.data(), b.data(), d);
    CHECK(a == b);

    auto gout = randvec(no, 8);
    std::vector<double> gi1(in.size(), 0), gi2(in.size(), 0);
    serial::deconv2d_backward_input(gout.data(), ker.data(), gi1.data(), d);
    omp::deconv2d_backward_input(gout.data(), ker.data(), gi2.data(), d);
    CHECK(gi1 == gi2);

    std::vector<double> gk1(ker.size(), 0), gk2(ker.size(), 0);
    serial::deconv2d_backward_kernel(gout.data(), in.data(), gk1.data(), d);
    omp::deconv2d_backward_kernel(gout.data(), in.data(), gk2.data(), d);
    CHECK(gk1 == gk2);
}

TEST_CASE("correlation serial == omp") {
    CorrDims d{2, 4, 6, 16, 5, 5};
    const size_t nf = size_t(d.n) * d.ch * d.h * d.w;
    const size_t no = size_t(d.n) * (d.max_disp + 1) * d.h * d.w;
    auto l = randvec(nf, 11), r = randvec(nf, 12);
    std::vector<double> a(no), b(no);
    serial::correlation1d_forward(l.data(), r.data(), a.data(), d);
    omp::correlation1d_forward(l.data(), r.data(), b.data(), d);
    CHECK(a == b);

    auto gout = randvec(no, 13);
    std::vector<double> gl1(nf, 0), gr1(nf, 0), gl2(nf, 0), gr2(nf, 0);
    serial::correlation1d_backward(gout.data(), l.data(), r.data(), gl1.data(), gr1.data(), d);
    omp::correlation1d_backward(gout.data(), l.data(), r.data(), gl2.data(), gr2.data(), d);
    CHECK(gl1 == gl2);
    CHECK(gr1 == gr2);
}

TEST_CASE("warp serial == omp") {
    WarpDims d{2, 3, 5, 12};
    const size_t nf = size_t(d.n) * d.ch * d.h * d.w;
    const size_t np = size_t(d.n) * d.h * d.w;
    auto src = randvec(nf, 21);
    auto disp = randvec(np, 22);
    for (auto& v : disp) v = (v + 1.0) * 2.0;  // [0,4)
    std::vector<double> o1(nf), o2(nf), v1(np), v2(np);
    serial::warp_forward(src.data(), disp.data(), o1.data(), v1.data(), d);
    omp::warp_forward(src.data(), disp.data(), o2.data(), v2.data(), d);
    CHECK(o1 == o2);
    CHECK(v1 == v2);

    auto gout = randvec(nf, 23);
    std::vector<double> gs1(nf, 0), gs2(nf, 0), gd1(np, 0), gd2(np, 0);
    serial::warp_backward(gout.data(), src.data(), disp.data(), v1.data(),
                          gs1.data(), gd1.data(), d);
    omp::warp_backward(gout.data(), src.data(), disp.data(), v2.data(),
                       gs2.data(), gd2.data(), d);
    CHECK(gs1 == gs2);
    CHECK(gd1 == gd2);
}

TEST_CASE("resize serial == omp") {
    ResizeDims d{2, 3, 4, 6, 9, 14};
    const size_t ni = size_t(d.n) * d.ch * d.in_h * d.in_w;
    const size_t no = size_t(d.n) * d.ch * d.out_h * d.out_w;
    auto in = randvec(ni, 31);
    std::vector<double> a(no), b(no);
    serial::resize_bilinear_forward(in.data(), a.data(), d);
    omp::resize_bilinear_forward(in.data(), b.data(), d);
    CHECK(a == b);

    auto gout = randvec(no, 32);
    std::vector<double> g1(ni, 0), g2(ni, 0);
    serial::resize_bilinear_backward(gout.data(), g1.data(), d);
    omp::resize_bilinear_backward(gout.data(), g2.data(), d);
    CHECK(g1 == g2);
}

TEST_CASE("dispatch honors the parallel switch") {
    CHECK(parallel_enabled());
    set_parallel_enabled(false);
    CHECK_FALSE(parallel_enabled());
    set_parallel_enabled(true);
}
