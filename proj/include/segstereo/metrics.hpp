#pragma once

#include <string>

#include "segstereo/tensor.hpp"

namespace segstereo {

struct EvalResult {
    double epe_noc = 0.0, epe_all = 0.0;   // pixels
    double d1_noc = 0.0, d1_all = 0.0;     // percentages
    int64_t count_noc = 0, count_all = 0;  // evaluated pixels per region
};

// Mean |pred - gt| over region ∩ gt-valid pixels.
double epe(const Tensor& pred, const Tensor& gt, const Tensor& valid,
           const Tensor* region = nullptr);

// Percentage of region ∩ gt-valid pixels whose error exceeds BOTH the
// absolute and the relative threshold.
double d1(const Tensor& pred, const Tensor& gt, const Tensor& valid,
          const Tensor* region = nullptr, double abs_thresh = 3.0,
          double rel_thresh = 0.05);

int64_t region_count(const Tensor& valid, const Tensor* region);

// All-pixels metrics plus the Noc restriction when a noc mask is given
// (Noc fields mirror All otherwise).
EvalResult evaluate(const Tensor& pred, const Tensor& gt, const Tensor& valid,
                    const Tensor* noc_mask);

// Aligned plain-text table.
std::string format_table(const EvalResult& r);
// Machine-readable metric=value lines.
std::string format_kv(const EvalResult& r);

}  // namespace segstereo
