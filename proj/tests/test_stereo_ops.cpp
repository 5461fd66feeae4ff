#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "segstereo/stereo_ops.hpp"
#include "segstereo/tensor.hpp"

using namespace segstereo;

namespace {

// Brute-force per-(pixel, displacement) dot-product oracle.
double corr_oracle(const Tensor& l, const Tensor& r, int n, int d, int y, int x) {
    const int xr = x - d;
    if (xr < 0) return 0.0;
    double acc = 0.0;
    for (int c = 0; c < l.shape.c; ++c) acc += l.at(n, c, y, x) * r.at(n, c, y, xr);
    return acc / l.shape.c;
}

}  // namespace

TEST_CASE("correlation1d channel count is max_disp+1") {
    Tensor l = create({1, 4, 4, 8}, Fill::uniform(-1, 1, 1));
    Tensor r = create({1, 4, 4, 8}, Fill::uniform(-1, 1, 2));
    CostVolume cv = correlation1d(l, r, 24, 24);
    CHECK(cv.scores.shape.c == 25);
    CHECK(cv.max_disp == 24);
}

TEST_CASE("correlation1d on constants") {
    Tensor l = create({1, 2, 3, 6}, Fill::constant(1.0));
    Tensor r = create({1, 2, 3, 6}, Fill::constant(1.0));
    CostVolume cv = correlation1d(l, r, 3, 3);
    // interior pixel, in-bounds sample: (1*1 + 1*1)/2 = 1
    CHECK(cv.scores.at(0, 2, 1, 4) == doctest::Approx(1.0));
    // out-of-bounds sample carries the zero padding
    CHECK(cv.scores.at(0, 3, 1, 2) == 0.0);
}

TEST_CASE("correlation1d worked example") {
    Tensor l = create({1, 2, 1, 3}, Fill::from_values({1, 2, 3, 1, 1, 1}));
    Tensor r = create({1, 2, 1, 3}, Fill::from_values({1, 1, 1, 2, 2, 2}));
    CostVolume cv = correlation1d(l, r, 2, 2);
    CHECK(cv.scores.at(0, 0, 0, 0) == doctest::Approx(1.5));  // (1*1 + 1*2)/2
    for (int d = 0; d <= 2; ++d)
        for (int x = 0; x < 3; ++x)
            CHECK(cv.scores.at(0, d, 0, x) == doctest::Approx(corr_oracle(l, r, 0, d, 0, x)));
}

TEST_CASE("correlation1d matches brute-force oracle up to 2x4x8x16") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 5; ++trial) {
        Tensor l = create({2, 4, 8, 16}, Fill::uniform(-1, 1, rng()));
        Tensor r = create({2, 4, 8, 16}, Fill::uniform(-1, 1, rng()));
        const int md = 1 + int(rng() % 6);
        CostVolume cv = correlation1d(l, r, md, md);
        for (int n = 0; n < 2; ++n)
            for (int d = 0; d <= md; ++d)
                for (int y = 0; y < 8; ++y)
                    for (int x = 0; x < 16; ++x) {
                        const double o = corr_oracle(l, r, n, d, y, x);
                        const double got = cv.scores.at(0, 0, 0, 0);
                        (void)got;
                        CHECK(std::fabs(cv.scores.at(n, d, y, x) - o) /
                                  std::max(1.0, std::fabs(o)) <
                              1e-6);
                    }
    }
}

TEST_CASE("correlation1d errors") {
    Tensor l = create({1, 2, 2, 4}, Fill::zeros());
    Tensor r = create({1, 2, 2, 5}, Fill::zeros());
    CHECK_THROWS(correlation1d(l, r, 2, 2));
    Tensor r2 = create({1, 2, 2, 4}, Fill::zeros());
    CHECK_THROWS(correlation1d(l, r2, -1, 0));
}

TEST_CASE("correlation1d gradient") {
    for (uint64_t seed = 0; seed < 3; ++seed) {
        Tensor l = create({2, 1, 1, 3}, Fill::uniform(-1, 1, seed));
        Tensor r0 = create({2, 1, 1, 3}, Fill::uniform(-1, 1, seed + 9));
        auto f = [&](Tape& tp, const Tensor& li) {
            Tensor rc = create(r0.shape, Fill::from_values(*r0.data), &tp, true);
            return reduce_mean(correlation1d(li, rc, 2, 2).scores);
        };
        CHECK(grad_check(f, l) < 1e-4);
        auto g = [&](Tape& tp, const Tensor& ri) {
            Tensor lc = create(l.shape, Fill::from_values(*l.data), &tp, true);
            return reduce_mean(correlation1d(lc, ri, 2, 2).scores);
        };
        CHECK(grad_check(g, r0) < 1e-4);
    }
}

TEST_CASE("warp zero disparity is identity") {
    Tensor src = create({1, 3, 4, 6}, Fill::uniform(-5, 5, 11));
    Tensor disp = create({1, 1, 4, 6}, Fill::zeros());
    WarpResult w = warp_horizontal(src, disp);
    CHECK(*w.warped.data == *src.data);
    for (double v : *w.validity.data) CHECK(v == 1.0);
}

TEST_CASE("warp integer disparity is exact shift") {
    Tensor src = create({1, 1, 1, 3}, Fill::from_values({10, 20, 30}));
    Tensor disp = create({1, 1, 1, 3}, Fill::constant(1.0));
    WarpResult w = warp_horizontal(src, disp);
    CHECK((*w.validity.data)[0] == 0.0);
    CHECK((*w.validity.data)[1] == 1.0);
    CHECK((*w.validity.data)[2] == 1.0);
    CHECK((*w.warped.data)[0] == 0.0);  // invalid outputs are zeroed
    CHECK((*w.warped.data)[1] == 10.0);
    CHECK((*w.warped.data)[2] == 20.0);
}

TEST_CASE("warp half-pixel disparity bilinear value") {
    Tensor src = create({1, 1, 1, 2}, Fill::from_values({0, 10}));
    Tensor disp = create({1, 1, 1, 2}, Fill::constant(0.5));
    WarpResult w = warp_horizontal(src, disp);
    CHECK((*w.warped.data)[1] == doctest::Approx(5.0));
    CHECK((*w.validity.data)[0] == 0.0);  // sample at -0.5
}

TEST_CASE("warp composition with integer shift reproduces the source") {
    // right = shift(left, d) ⇒ warp(right, d) == left on the valid mask
    const int W = 10, d0 = 3;
    Tensor left = create({1, 2, 2, W}, Fill::uniform(0, 255, 21));
    Tensor right = create({1, 2, 2, W}, Fill::zeros());
    for (int c = 0; c < 2; ++c)
        for (int y = 0; y < 2; ++y)
            for (int x = 0; x + d0 < W; ++x)
                (*right.data)[right.index(0, c, y, x)] = left.at(0, c, y, x + d0);
    Tensor disp = create({1, 1, 2, W}, Fill::constant(double(d0)));
    WarpResult w = warp_horizontal(right, disp);
    for (int c = 0; c < 2; ++c)
        for (int y = 0; y < 2; ++y)
            for (int x = d0; x < W; ++x)
                CHECK(w.warped.at(0, c, y, x) == left.at(0, c, y, x));
}

TEST_CASE("warp resolution mismatch") {
    Tensor src = create({1, 1, 2, 4}, Fill::zeros());
    Tensor disp = create({1, 1, 2, 5}, Fill::zeros());
    CHECK_THROWS(warp_horizontal(src, disp));
}

TEST_CASE("warp gradient at non-integer disparities") {
    for (uint64_t seed = 0; seed < 5; ++seed) {
        Tensor src0 = create({1, 2, 2, 6}, Fill::uniform(-1, 1, seed));
        std::mt19937_64 rng(seed + 77);
        std::uniform_real_distribution<double> dd(0.2, 1.8);
        std::vector<double> dv(12);
        for (auto& v : dv) {
            v = dd(rng);
            if (std::fabs(v - std::round(v)) < 0.05) v += 0.1;  // keep off kinks
        }
        Tensor disp0 = create({1, 1, 2, 6}, Fill::from_values(dv));
        // w.r.t. source
        auto fs = [&](Tape& tp, const Tensor& si) {
            Tensor d = create(disp0.shape, Fill::from_values(*disp0.data), &tp, true);
            WarpResult w = warp_horizontal(si, d);
            return reduce_mean(mul(w.warped, w.warped));
        };
        CHECK(grad_check(fs, src0) < 1e-4);
        // w.r.t. disparity
        auto fd = [&](Tape& tp, const Tensor& di) {
            Tensor s = create(src0.shape, Fill::from_values(*src0.data), &tp, true);
            WarpResult w = warp_horizontal(s, di);
            return reduce_mean(mul(w.warped, w.warped));
        };
        CHECK(grad_check(fd, disp0) < 1e-4);
    }
}
