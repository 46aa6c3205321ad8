#pragma once

#include "numeric/tensor.hpp"

namespace masklab::worlds {

// ITU-R 601 luma: 0.299 r + 0.587 g + 0.114 b. Input [3,H,W] in [0,1].
numeric::Tensor rgb_to_grayscale(const numeric::Tensor& img);

// Area-average (box filter) downsampling with fractional pixel coverage.
// Upsampling is unsupported. Same size in/out is the identity.
numeric::Tensor resize_area(const numeric::Tensor& img, int out_h, int out_w);

// Grayscale (if 3-channel) then resize. Idempotent on preprocessed states.
numeric::Tensor preprocess(const numeric::Tensor& img, int out_h, int out_w);

}  // namespace masklab::worlds
