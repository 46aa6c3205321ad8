#include "worlds/preprocess.hpp"

#include <algorithm>
#include <cmath>

namespace masklab::worlds {

using numeric::Tensor;

Tensor rgb_to_grayscale(const Tensor& img) {
    require(img.rank() == 3 && img.dim(0) == 3, ErrorCode::InvalidArgument,
            "rgb_to_grayscale expects [3,H,W], got " + numeric::shape_str(img.shape()));
    const int h = img.dim(1), w = img.dim(2);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const float* r = img.data().data();
    const float* g = r + plane;
    const float* b = g + plane;
    std::vector<float> out(plane);
    for (std::size_t i = 0; i < plane; ++i)
        out[i] = 0.299f * r[i] + 0.587f * g[i] + 0.114f * b[i];
    return Tensor({1, h, w}, std::move(out));
}

Tensor resize_area(const Tensor& img, int out_h, int out_w) {
    require(img.rank() == 3, ErrorCode::InvalidArgument, "resize expects [C,H,W]");
    require(out_h > 0 && out_w > 0, ErrorCode::InvalidArgument, "resize target must be positive");
    const int c = img.dim(0), h = img.dim(1), w = img.dim(2);
    require(out_h <= h && out_w <= w, ErrorCode::InvalidArgument,
            "resize only downsamples (upsampling request rejected)");
    if (out_h == h && out_w == w) return img.clone();

    const double sy = static_cast<double>(h) / out_h;
    const double sx = static_cast<double>(w) / out_w;
    std::vector<float> out(static_cast<std::size_t>(c) * out_h * out_w);
    for (int ch = 0; ch < c; ++ch) {
        const float* in = img.data().data() + static_cast<std::size_t>(ch) * h * w;
        for (int oy = 0; oy < out_h; ++oy) {
            const double y0 = oy * sy, y1 = (oy + 1) * sy;
            for (int ox = 0; ox < out_w; ++ox) {
                const double x0 = ox * sx, x1 = (ox + 1) * sx;
                double acc = 0.0;
                for (int iy = static_cast<int>(y0); iy < h && iy < y1; ++iy) {
                    const double wy = std::min<double>(iy + 1, y1) - std::max<double>(iy, y0);
                    if (wy <= 0.0) continue;
                    for (int ix = static_cast<int>(x0); ix < w && ix < x1; ++ix) {
                        const double wx = std::min<double>(ix + 1, x1) - std::max<double>(ix, x0);
                        if (wx <= 0.0) continue;
                        acc += wy * wx * in[iy * w + ix];
                    }
                }
                out[(static_cast<std::size_t>(ch) * out_h + oy) * out_w + ox] =
                    static_cast<float>(acc / (sy * sx));
            }
        }
    }
    return Tensor({c, out_h, out_w}, std::move(out));
}

Tensor preprocess(const Tensor& img, int out_h, int out_w) {
    Tensor gray = img.dim(0) == 3 ? rgb_to_grayscale(img) : img;
    require(gray.dim(0) == 1, ErrorCode::InvalidArgument,
            "preprocess expects 1 or 3 channels");
    return resize_area(gray, out_h, out_w);
}

}  // namespace masklab::worlds
