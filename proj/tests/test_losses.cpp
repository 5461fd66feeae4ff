#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "segstereo/losses.hpp"
#include "segstereo/tensor.hpp"

using namespace segstereo;

TEST_CASE("photometric loss keeps a small residual") {
    // one pixel, 2 channels, residual 3 + 1 = 4 <= 10
    Tensor w = create({1, 2, 1, 1}, Fill::from_values({7, 2}));
    Tensor t = create({1, 2, 1, 1}, Fill::from_values({10, 1}));
    Tensor v = create({1, 1, 1, 1}, Fill::constant(1.0));
    double mf = -1;
    Tensor loss = photometric_loss(w, t, v, 10.0, &mf);
    CHECK(loss.scalar() == doctest::Approx(4.0));
    CHECK(mf == 0.0);
}

TEST_CASE("photometric loss masks a large residual but still divides by N") {
    // pixel 0: residual 12 > 10 (masked); pixel 1: residual 4
    Tensor w = create({1, 2, 1, 2}, Fill::from_values({0, 7, 0, 2}));
    Tensor t = create({1, 2, 1, 2}, Fill::from_values({12, 10, 0, 1}));
    Tensor v = create({1, 1, 1, 2}, Fill::constant(1.0));
    double mf = -1;
    Tensor loss = photometric_loss(w, t, v, 10.0, &mf);
    CHECK(loss.scalar() == doctest::Approx(4.0 / 2.0));
    CHECK(mf == doctest::Approx(0.5));
}

TEST_CASE("photometric loss masks invalid pixels") {
    Tensor w = create({1, 1, 1, 2}, Fill::from_values({5, 5}));
    Tensor t = create({1, 1, 1, 2}, Fill::from_values({2, 2}));
    Tensor v = create({1, 1, 1, 2}, Fill::from_values({1, 0}));
    double mf = -1;
    Tensor loss = photometric_loss(w, t, v, 10.0, &mf);
    CHECK(loss.scalar() == doctest::Approx(3.0 / 2.0));
    CHECK(mf == doctest::Approx(0.5));
}

TEST_CASE("photometric loss gradient skips masked pixels") {
    Tape tape;
    Tensor w = create({1, 1, 1, 2}, Fill::from_values({20.0, 5.0}), &tape, true);
    Tensor t = create({1, 1, 1, 2}, Fill::from_values({0.0, 2.0}));
    Tensor v = create({1, 1, 1, 2}, Fill::constant(1.0));
    Tensor loss = photometric_loss(w, t, v, 10.0);
    tape.backward(loss);
    auto g = tape.grad_values(w);
    CHECK(g[0] == 0.0);            // masked pixel gets no gradient
    CHECK(g[1] == doctest::Approx(0.5));  // d/dw |w-t| / N = 1/2
}

TEST_CASE("photometric loss gradient vs finite differences") {
    for (uint64_t seed = 0; seed < 4; ++seed) {
        Tensor t = create({1, 2, 3, 4}, Fill::uniform(0, 255, seed));
        std::vector<double> wv(*t.data);
        std::mt19937_64 rng(seed + 5);
        std::uniform_real_distribution<double> nz(0.5, 3.0);
        for (auto& x : wv) x += nz(rng);  // residuals away from 0 and from the threshold
        Tensor w0 = create(t.shape, Fill::from_values(wv));
        Tensor v = create({1, 1, 3, 4}, Fill::constant(1.0));
        auto f = [&](Tape& tp, const Tensor& wi) {
            return photometric_loss(wi, t, v, 10.0);
        };
        CHECK(grad_check(f, w0) < 1e-4);
    }
}

TEST_CASE("charbonnier penalty closed forms") {
    CharbonnierParams cp;  // alpha 0.21, beta 5, eps 0.001
    // constant disparity: every difference is 0, rho(0) = (1e-6)^0.21
    const double rho0 = std::pow(1e-6, 0.21);
    Tensor d = create({1, 1, 2, 2}, Fill::constant(7.0));
    Tensor loss = smoothness_loss(d, cp);
    // 2 vertical + 2 horizontal differences over N = 4 pixels
    CHECK(loss.scalar() == doctest::Approx(4.0 * rho0 / 4.0).epsilon(1e-9));
    CHECK(loss.scalar() == doctest::Approx(0.0549).epsilon(1e-2));

    // single unit step: one horizontal difference of 1, rho(1) = (25 + 1e-6)^0.21
    const double rho1 = std::pow(25.0 + 1e-6, 0.21);
    Tensor d2 = create({1, 1, 2, 2}, Fill::from_values({0, 1, 0, 1}));
    Tensor loss2 = smoothness_loss(d2, cp);
    // rows contribute rho1 each (horizontal), columns rho0 each (vertical)
    CHECK(loss2.scalar() == doctest::Approx((2 * rho1 + 2 * rho0) / 4.0).epsilon(1e-9));
}

TEST_CASE("smoothness loss gradient") {
    CharbonnierParams cp;
    for (uint64_t seed = 0; seed < 4; ++seed) {
        Tensor d = create({2, 1, 3, 4}, Fill::uniform(0.1, 8, seed));
        auto f = [&](Tape& tp, const Tensor& di) { return smoothness_loss(di, cp); };
        CHECK(grad_check(f, d) < 1e-4);
    }
}

TEST_CASE("smoothness loss needs both spatial extents >= 2") {
    CharbonnierParams cp;
    CHECK_THROWS(smoothness_loss(create({1, 1, 1, 4}, Fill::zeros()), cp));
    CHECK_THROWS(smoothness_loss(create({1, 1, 4, 1}, Fill::zeros()), cp));
}

TEST_CASE("regression loss divides by the valid count") {
    Tensor d = create({1, 1, 1, 4}, Fill::from_values({1, 2, 3, 4}));
    Tensor gt = create({1, 1, 1, 4}, Fill::from_values({2, 4, 0, 0}));
    Tensor v = create({1, 1, 1, 4}, Fill::from_values({1, 1, 0, 0}));
    Tensor loss = regression_loss(d, gt, v);
    CHECK(loss.scalar() == doctest::Approx((1.0 + 2.0) / 2.0));  // N_V = 2, not 4
}

TEST_CASE("regression loss with no valid pixels throws") {
    Tensor d = create({1, 1, 1, 2}, Fill::zeros());
    Tensor gt = create({1, 1, 1, 2}, Fill::zeros());
    Tensor v = create({1, 1, 1, 2}, Fill::zeros());
    CHECK_THROWS(regression_loss(d, gt, v));
}

TEST_CASE("regression loss gradient") {
    for (uint64_t seed = 0; seed < 4; ++seed) {
        Tensor gt = create({1, 1, 2, 4}, Fill::uniform(0, 20, seed));
        std::vector<double> dv(*gt.data);
        for (auto& x : dv) x += 0.7;  // keep |d-gt| off zero
        Tensor d0 = create(gt.shape, Fill::from_values(dv));
        Tensor v = create({1, 1, 2, 4}, Fill::from_values({1, 0, 1, 1, 0, 1, 1, 1}));
        auto f = [&](Tape& tp, const Tensor& di) { return regression_loss(di, gt, v); };
        CHECK(grad_check(f, d0) < 1e-4);
    }
}

TEST_CASE("nearest label downsampling picks exact grid points") {
    // 4x4 -> 2x2 with align-corners nearest hits the four corners
    std::vector<double> lv(16);
    for (int i = 0; i < 16; ++i) lv[i] = i;
    Tensor labels = create({1, 1, 4, 4}, Fill::from_values(lv));
    Tensor ds = downsample_labels_nearest(labels, 2, 2);
    CHECK(ds.at(0, 0, 0, 0) == 0.0);
    CHECK(ds.at(0, 0, 0, 1) == 3.0);
    CHECK(ds.at(0, 0, 1, 0) == 12.0);
    CHECK(ds.at(0, 0, 1, 1) == 15.0);
}

TEST_CASE("semantic loss equals ln K for a zero classifier") {
    // zero 1x1 conv -> uniform logits -> CE = ln(num_classes) everywhere
    const int K = 4, h = 2, w = 3;
    Tensor feat = create({1, 3, h, w}, Fill::uniform(-1, 1, 31));
    Tensor disp = create({1, 1, 8 * h, 8 * w}, Fill::zeros());
    ConvParams cls;
    cls.kernel = create({K, 3, 1, 1}, Fill::zeros());
    cls.bias = create({1, K, 1, 1}, Fill::zeros());
    Tensor labels = create({1, 1, 8 * h, 8 * w}, Fill::constant(2.0));
    Tensor loss = semantic_loss(feat, disp, cls, labels);
    CHECK(loss.scalar() == doctest::Approx(std::log(double(K))).epsilon(1e-9));
}

TEST_CASE("semantic loss rejects a non 8x disparity resolution") {
    Tensor feat = create({1, 3, 2, 2}, Fill::zeros());
    Tensor disp = create({1, 1, 15, 16}, Fill::zeros());
    ConvParams cls;
    cls.kernel = create({3, 3, 1, 1}, Fill::zeros());
    cls.bias = create({1, 3, 1, 1}, Fill::zeros());
    Tensor labels = create({1, 1, 15, 16}, Fill::zeros());
    CHECK_THROWS(semantic_loss(feat, disp, cls, labels));
}

TEST_CASE("semantic loss gradient reaches the disparity") {
    const int K = 3, h = 2, w = 3;
    Tensor feat = create({1, 2, h, w}, Fill::uniform(-1, 1, 41));
    ConvParams cls;
    cls.kernel = create({K, 2, 1, 1}, Fill::uniform(-0.5, 0.5, 42));
    cls.bias = create({1, K, 1, 1}, Fill::uniform(-0.1, 0.1, 43));
    std::mt19937_64 rng(44);
    std::vector<double> lv(size_t(8 * h) * (8 * w));
    for (auto& v : lv) v = double(rng() % K);
    Tensor labels = create({1, 1, 8 * h, 8 * w}, Fill::from_values(lv));
    std::uniform_real_distribution<double> dd(0.3, 1.7);
    std::vector<double> dv(size_t(8 * h) * (8 * w));
    for (auto& v : dv) {
        v = dd(rng);
        if (std::fabs(v - std::round(v)) < 0.05) v += 0.1;
    }
    Tensor disp0 = create({1, 1, 8 * h, 8 * w}, Fill::from_values(dv));
    auto f = [&](Tape& tp, const Tensor& di) {
        Tensor ft = create(feat.shape, Fill::from_values(*feat.data), &tp, true);
        return semantic_loss(ft, di, cls, labels);
    };
    CHECK(grad_check(f, disp0) < 1e-4);
}

TEST_CASE("total loss weighting, unsupervised") {
    Tape tape;
    LossWeights lw;  // 1.0 photometric, 10.0 semantic, 0.1 smoothness
    TotalLossInputs in;
    in.photometric = create({1, 1, 1, 1}, Fill::constant(2.0), &tape, true);
    in.smoothness = create({1, 1, 1, 1}, Fill::constant(3.0), &tape, true);
    in.semantic = create({1, 1, 1, 1}, Fill::constant(0.5), &tape, true);
    in.masked_fraction = 0.25;
    auto [total, rep] = total_loss(TrainMode::Unsupervised, in, lw);
    CHECK(total.scalar() == doctest::Approx(1.0 * 2.0 + 0.1 * 3.0 + 10.0 * 0.5));
    CHECK(rep.photometric.value() == doctest::Approx(2.0));
    CHECK(rep.smoothness.value() == doctest::Approx(3.0));
    CHECK(rep.semantic.value() == doctest::Approx(0.5));
    CHECK(rep.masked_fraction == doctest::Approx(0.25));
    CHECK_FALSE(rep.regression.has_value());
}

TEST_CASE("total loss drops a missing semantic term") {
    Tape tape;
    LossWeights lw;
    TotalLossInputs in;
    in.photometric = create({1, 1, 1, 1}, Fill::constant(2.0), &tape, true);
    in.smoothness = create({1, 1, 1, 1}, Fill::constant(3.0), &tape, true);
    auto [total, rep] = total_loss(TrainMode::Unsupervised, in, lw);
    CHECK(total.scalar() == doctest::Approx(2.0 + 0.1 * 3.0));
    CHECK_FALSE(rep.semantic.has_value());
}

TEST_CASE("total loss weighting, supervised") {
    Tape tape;
    LossWeights lw;
    lw.lambda_seg = 1.0;  // supervised weights: regression 1.0, semantic 1.0, smoothness 0.1
    TotalLossInputs in;
    in.regression = create({1, 1, 1, 1}, Fill::constant(4.0), &tape, true);
    in.smoothness = create({1, 1, 1, 1}, Fill::constant(1.0), &tape, true);
    in.semantic = create({1, 1, 1, 1}, Fill::constant(0.5), &tape, true);
    auto [total, rep] = total_loss(TrainMode::Supervised, in, lw);
    CHECK(total.scalar() == doctest::Approx(1.0 * 4.0 + 0.1 * 1.0 + 1.0 * 0.5));
    CHECK(rep.regression.value() == doctest::Approx(4.0));
}

TEST_CASE("total loss validates mode-required terms") {
    Tape tape;
    LossWeights lw;
    TotalLossInputs in;
    in.smoothness = create({1, 1, 1, 1}, Fill::constant(1.0), &tape, true);
    CHECK_THROWS(total_loss(TrainMode::Unsupervised, in, lw));
    CHECK_THROWS(total_loss(TrainMode::Supervised, in, lw));
}
