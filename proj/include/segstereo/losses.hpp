#pragma once

#include <optional>

#include "segstereo/nn_ops.hpp"
#include "segstereo/stereo_ops.hpp"
#include "segstereo/tensor.hpp"

namespace segstereo {

struct CharbonnierParams {
    double alpha = 0.21;
    double beta = 5.0;
    double eps = 0.001;
    // rho(x) = ((beta*x)^2 + eps^2)^alpha by default; the alternative
    // (x^2 + eps^2)^alpha * beta is one flag away.
    bool beta_inside = true;
};

struct LossWeights {
    double lambda_p = 1.0;
    double lambda_s = 0.1;
    double lambda_seg = 10.0;
    double lambda_r = 1.0;
    double photometric_threshold = 10.0;  // on 0-255 intensity scale
    CharbonnierParams charbonnier;
};

struct LossReport {
    std::optional<double> photometric;
    std::optional<double> smoothness;
    std::optional<double> semantic;
    std::optional<double> regression;
    double total = 0.0;
    double masked_fraction = 0.0;  // pixels with delta == 0
};

enum class TrainMode { Unsupervised, Supervised };

// (1/N) sum over pixels of delta * channel-summed |warped - target|;
// delta = 0 where the per-pixel L1 residual exceeds the threshold or
// validity is 0. delta is a stop-gradient constant, N the total pixel count.
// masked_fraction_out, when given, receives the fraction of delta==0 pixels.
Tensor photometric_loss(const Tensor& warped, const Tensor& target,
                        const Tensor& validity, double threshold,
                        double* masked_fraction_out = nullptr);

// (1/N) sum of rho(D(i,j)-D(i+1,j)) + rho(D(i,j)-D(i,j+1)) over pixels with
// the respective neighbor, rho the generalized Charbonnier penalty.
Tensor smoothness_loss(const Tensor& disparity, const CharbonnierParams& cp);

// Upsample right semantic features to full size, warp by disparity,
// downsample back to 1/8, classify with a 1x1 conv and score against
// nearest-neighbor-downsampled left labels. Gradient reaches the disparity
// through the warp.
Tensor semantic_loss(const Tensor& right_sem_feat, const Tensor& disparity,
                     const ConvParams& classifier, const Tensor& left_labels_full,
                     int ignore_label = 255);

// (1/N_V) sum over valid pixels of |D - gt| (valid count, not total count).
Tensor regression_loss(const Tensor& disparity, const Tensor& gt, const Tensor& valid);

struct TotalLossInputs {
    std::optional<Tensor> photometric;
    std::optional<Tensor> smoothness;
    std::optional<Tensor> semantic;  // absent when no labels exist
    std::optional<Tensor> regression;
    double masked_fraction = 0.0;
};

// Weighted total per mode; the semantic term is dropped when absent.
// Returns the scalar total on the tape plus the per-term report.
std::pair<Tensor, LossReport> total_loss(TrainMode mode, const TotalLossInputs& terms,
                                         const LossWeights& w);

// Nearest-neighbor label downsampling (labels are categorical).
Tensor downsample_labels_nearest(const Tensor& labels, int out_h, int out_w);

}  // namespace segstereo
