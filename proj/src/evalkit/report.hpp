#pragma once

#include <string>
#include <vector>

#include "numeric/tensor.hpp"

namespace masklab::evalkit {

// 8-bit binary PPM (P6).
void write_ppm(const std::string& path, const std::vector<unsigned char>& rgb, int width,
               int height);

// Mask rendered as an alpha-blended red heat layer over the grayscale state,
// nearest-neighbor upscaled by `scale`.
std::vector<unsigned char> render_overlay(const numeric::Tensor& state,
                                          const numeric::Tensor& mask, int scale);

}  // namespace masklab::evalkit
