#pragma once

#include "segstereo/tensor.hpp"

namespace segstereo {

// Correlation scores over candidate displacements d in [0, max_disp];
// channel d holds the score at displacement d (max_disp+1 channels).
struct CostVolume {
    Tensor scores;  // [N, max_disp+1, H, W]
    int max_disp = 0;
};

// Warp output plus its {0,1} validity mask (0 where the bilinear footprint
// leaves [0, W-1]). The mask is a stop-gradient constant.
struct WarpResult {
    Tensor warped;
    Tensor validity;  // [N,1,H,W]
};

// scores[n,d,y,x] = (1/C) * sum_c left[n,c,y,x] * right[n,c,y,x-d], with the
// right view zero-padded at the left border. Matching convention: a left
// pixel (x,y) corresponds to right pixel (x-d, y).
CostVolume correlation1d(const Tensor& left_feat, const Tensor& right_feat,
                         int max_disp, int pad);

// warped[n,c,y,x] = bilinear sample of source at (x - disparity(x,y), y);
// differentiable in both source and disparity.
WarpResult warp_horizontal(const Tensor& source, const Tensor& disparity);

}  // namespace segstereo
