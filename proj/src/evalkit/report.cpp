#include "evalkit/report.hpp"

#include <cmath>
#include <fstream>

#include "common/error.hpp"

namespace masklab::evalkit {

void write_ppm(const std::string& path, const std::vector<unsigned char>& rgb, int width,
               int height) {
    require(rgb.size() == static_cast<std::size_t>(width) * height * 3, ErrorCode::InvalidArgument,
            "ppm: buffer size does not match dimensions");
    std::ofstream os(path, std::ios::binary);
    require(bool(os), ErrorCode::Io, "cannot write '" + path + "'");
    os << "P6\n" << width << " " << height << "\n255\n";
    os.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
    require(bool(os), ErrorCode::Io, "ppm write failed");
}

std::vector<unsigned char> render_overlay(const numeric::Tensor& state,
                                          const numeric::Tensor& mask, int scale) {
    require(state.rank() == 3 && state.dim(0) == 1, ErrorCode::InvalidArgument,
            "render_overlay expects a [1,H,W] state");
    require(mask.rank() == 2 && mask.dim(0) == state.dim(1) && mask.dim(1) == state.dim(2),
            ErrorCode::InvalidArgument, "render_overlay: mask/state shape mismatch");
    require(scale >= 1, ErrorCode::InvalidArgument, "render_overlay: scale must be >= 1");
    const int h = state.dim(1), w = state.dim(2);
    std::vector<unsigned char> out(static_cast<std::size_t>(h) * w * scale * scale * 3);
    const int ow = w * scale;
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            const std::size_t idx = static_cast<std::size_t>(i) * w + j;
            const float gray = 255.0f * state.data()[idx];
            const float alpha = 0.6f * mask.data()[idx];
            const unsigned char r =
                static_cast<unsigned char>(std::lround(gray * (1.0f - alpha) + 255.0f * alpha));
            const unsigned char gb =
                static_cast<unsigned char>(std::lround(gray * (1.0f - alpha)));
            for (int si = 0; si < scale; ++si) {
                for (int sj = 0; sj < scale; ++sj) {
                    const std::size_t px =
                        (static_cast<std::size_t>(i * scale + si) * ow + (j * scale + sj)) * 3;
                    out[px] = r;
                    out[px + 1] = gb;
                    out[px + 2] = gb;
                }
            }
        }
    }
    return out;
}

}  // namespace masklab::evalkit
