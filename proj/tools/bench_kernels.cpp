// Serial reference vs OpenMP kernels on training-sized workloads.
#include <benchmark/benchmark.h>

#include <vector>

#include "segstereo/kernels.hpp"
#include "segstereo/tensor.hpp"

using namespace segstereo;
using namespace segstereo::kernels;

namespace {

struct ConvCase {
    ConvDims d;
    std::vector<double> in, k, b, out;
};

ConvCase conv_case() {
    ConvCase c;
    c.d = ConvDims{1, 64, 16, 32, 64, 16, 32, 3, 3, 1, 1, 1};
    Tensor in = create({1, c.d.in_ch, c.d.in_h, c.d.in_w}, Fill::uniform(-1, 1, 1));
    Tensor k = create({c.d.out_ch, c.d.in_ch, 3, 3}, Fill::uniform(-1, 1, 2));
    Tensor b = create({1, c.d.out_ch, 1, 1}, Fill::uniform(-1, 1, 3));
    c.in = *in.data;
    c.k = *k.data;
    c.b = *b.data;
    c.out.resize(size_t(c.d.out_ch) * c.d.out_h * c.d.out_w);
    return c;
}

void bm_conv2d_serial(benchmark::State& state) {
    ConvCase c = conv_case();
    for (auto _ : state) {
        serial::conv2d_forward(c.in.data(), c.k.data(), c.b.data(), c.out.data(), c.d);
        benchmark::DoNotOptimize(c.out.data());
    }
}

void bm_conv2d_omp(benchmark::State& state) {
    ConvCase c = conv_case();
    for (auto _ : state) {
        omp::conv2d_forward(c.in.data(), c.k.data(), c.b.data(), c.out.data(), c.d);
        benchmark::DoNotOptimize(c.out.data());
    }
}

void bm_correlation_serial(benchmark::State& state) {
    CorrDims d{1, 32, 16, 32, 24, 24};
    Tensor l = create({1, d.ch, d.h, d.w}, Fill::uniform(-1, 1, 4));
    Tensor r = create({1, d.ch, d.h, d.w}, Fill::uniform(-1, 1, 5));
    std::vector<double> out(size_t(d.max_disp + 1) * d.h * d.w);
    for (auto _ : state) {
        serial::correlation1d_forward(l.ptr(), r.ptr(), out.data(), d);
        benchmark::DoNotOptimize(out.data());
    }
}

void bm_correlation_omp(benchmark::State& state) {
    CorrDims d{1, 32, 16, 32, 24, 24};
    Tensor l = create({1, d.ch, d.h, d.w}, Fill::uniform(-1, 1, 4));
    Tensor r = create({1, d.ch, d.h, d.w}, Fill::uniform(-1, 1, 5));
    std::vector<double> out(size_t(d.max_disp + 1) * d.h * d.w);
    for (auto _ : state) {
        omp::correlation1d_forward(l.ptr(), r.ptr(), out.data(), d);
        benchmark::DoNotOptimize(out.data());
    }
}

void bm_warp_serial(benchmark::State& state) {
    WarpDims d{1, 3, 64, 128};
    Tensor src = create({1, 3, d.h, d.w}, Fill::uniform(0, 255, 6));
    Tensor disp = create({1, 1, d.h, d.w}, Fill::uniform(0, 10, 7));
    std::vector<double> out(size_t(d.ch) * d.h * d.w), valid(size_t(d.h) * d.w);
    for (auto _ : state) {
        serial::warp_forward(src.ptr(), disp.ptr(), out.data(), valid.data(), d);
        benchmark::DoNotOptimize(out.data());
    }
}

void bm_warp_omp(benchmark::State& state) {
    WarpDims d{1, 3, 64, 128};
    Tensor src = create({1, 3, d.h, d.w}, Fill::uniform(0, 255, 6));
    Tensor disp = create({1, 1, d.h, d.w}, Fill::uniform(0, 10, 7));
    std::vector<double> out(size_t(d.ch) * d.h * d.w), valid(size_t(d.h) * d.w);
    for (auto _ : state) {
        omp::warp_forward(src.ptr(), disp.ptr(), out.data(), valid.data(), d);
        benchmark::DoNotOptimize(out.data());
    }
}

void bm_resize_serial(benchmark::State& state) {
    ResizeDims d{1, 64, 8, 16, 64, 128};
    Tensor in = create({1, d.ch, d.in_h, d.in_w}, Fill::uniform(-1, 1, 8));
    std::vector<double> out(size_t(d.ch) * d.out_h * d.out_w);
    for (auto _ : state) {
        serial::resize_bilinear_forward(in.ptr(), out.data(), d);
        benchmark::DoNotOptimize(out.data());
    }
}

void bm_resize_omp(benchmark::State& state) {
    ResizeDims d{1, 64, 8, 16, 64, 128};
    Tensor in = create({1, d.ch, d.in_h, d.in_w}, Fill::uniform(-1, 1, 8));
    std::vector<double> out(size_t(d.ch) * d.out_h * d.out_w);
    for (auto _ : state) {
        omp::resize_bilinear_forward(in.ptr(), out.data(), d);
        benchmark::DoNotOptimize(out.data());
    }
}

BENCHMARK(bm_conv2d_serial);
BENCHMARK(bm_conv2d_omp);
BENCHMARK(bm_correlation_serial);
BENCHMARK(bm_correlation_omp);
BENCHMARK(bm_warp_serial);
BENCHMARK(bm_warp_omp);
BENCHMARK(bm_resize_serial);
BENCHMARK(bm_resize_omp);

}  // namespace

BENCHMARK_MAIN();
