#pragma once

#include "segstereo/tensor.hpp"

namespace segstereo {

// Convolution parameters. Kernel layout [out_ch, in_ch, kh, kw], bias
// [out_ch]; for deconv2d the same layout applies with out_ch being the
// transposed-conv output width.
struct ConvParams {
    Tensor kernel;
    Tensor bias;
    int stride = 1;
    int pad = 0;
    int dilation = 1;
};

// Standard cross-correlation convolution with zero padding.
Tensor conv2d(const Tensor& input, const ConvParams& p);

// Transposed convolution; with zero bias it is the adjoint of conv2d under
// the channel-swapped kernel layout.
Tensor deconv2d(const Tensor& input, const ConvParams& p);

// Channel concatenation; all inputs share batch and spatial extents.
Tensor concat_channels(const std::vector<Tensor>& inputs);

// Align-corners bilinear interpolation.
Tensor bilinear_resize(const Tensor& input, int out_h, int out_w);

// Mean per-pixel negative log softmax over pixels whose label is not
// ignore_label. Labels are a constant [N,1,H,W] tensor of integer values.
Tensor softmax_cross_entropy(const Tensor& logits, const Tensor& labels,
                             int ignore_label = 255);

int conv_out_extent(int in, int k, int stride, int pad, int dilation);
int deconv_out_extent(int in, int k, int stride, int pad, int dilation);

}  // namespace segstereo
