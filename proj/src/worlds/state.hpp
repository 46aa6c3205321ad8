#pragma once

#include "numeric/tensor.hpp"

namespace masklab::worlds {

// Visual observation, [C,H,W] with values in [0,1].
struct VisualState {
    numeric::Tensor pixels;

    int channels() const { return pixels.dim(0); }
    int height() const { return pixels.dim(1); }
    int width() const { return pixels.dim(2); }
};

VisualState make_state(numeric::Tensor chw);

// Per-channel constant used to fill de-emphasized pixels during overlay.
struct ReferenceValue {
    std::vector<float> per_channel;

    static ReferenceValue constant(float v, int channels = 1);
    float channel(int c) const { return per_channel[static_cast<std::size_t>(c)]; }
};

}  // namespace masklab::worlds
