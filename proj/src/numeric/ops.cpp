#include "numeric/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace masklab::numeric {

namespace {

constexpr float kLogFloor = 1e-8f;

bool tracking(const Tensor& out) {
    return GradTape::active() != nullptr && out.requires_grad();
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    require(a.shape() == b.shape(), ErrorCode::InvalidArgument,
            std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

Tensor make_binary(const Tensor& a, const Tensor& b, std::vector<float> out_data) {
    return Tensor(a.shape(), std::move(out_data), a.requires_grad() || b.requires_grad());
}

// Accumulates grad[i] += g[i] * scale[i] style updates.
void axpy(std::vector<float>& dst, const std::vector<float>& g) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    std::vector<float> out(a.data().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
    Tensor result = make_binary(a, b, std::move(out));
    if (tracking(result)) {
        auto ai = a.impl(), bi = b.impl(), oi = result.impl();
        GradTape::active()->record(result, [ai, bi, oi] {
            if (ai->requires_grad) axpy(ensure_grad(*ai), oi->grad);
            if (bi->requires_grad) axpy(ensure_grad(*bi), oi->grad);
        });
    }
    return result;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    std::vector<float> out(a.data().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
    Tensor result = make_binary(a, b, std::move(out));
    if (tracking(result)) {
        auto ai = a.impl(), bi = b.impl(), oi = result.impl();
        GradTape::active()->record(result, [ai, bi, oi] {
            if (ai->requires_grad) axpy(ensure_grad(*ai), oi->grad);
            if (bi->requires_grad) {
                auto& g = ensure_grad(*bi);
                for (std::size_t i = 0; i < g.size(); ++i) g[i] -= oi->grad[i];
            }
        });
    }
    return result;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    std::vector<float> out(a.data().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
    Tensor result = make_binary(a, b, std::move(out));
    if (tracking(result)) {
        auto ai = a.impl(), bi = b.impl(), oi = result.impl();
        GradTape::active()->record(result, [ai, bi, oi] {
            if (ai->requires_grad) {
                auto& g = ensure_grad(*ai);
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += oi->grad[i] * bi->data[i];
            }
            if (bi->requires_grad) {
                auto& g = ensure_grad(*bi);
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += oi->grad[i] * ai->data[i];
            }
        });
    }
    return result;
}

Tensor add(const Tensor& a, float s) {
    std::vector<float> out(a.data().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + s;
    Tensor result(a.shape(), std::move(out), a.requires_grad());
    if (tracking(result)) {
        auto ai = a.impl(), oi = result.impl();
        GradTape::active()->record(result, [ai, oi] {
            if (ai->requires_grad) axpy(ensure_grad(*ai), oi->grad);
        });
    }
    return result;
}

Tensor sub(const Tensor& a, float s) { return add(a, -s); }

Tensor sub(float s, const Tensor& a) {
    std::vector<float> out(a.data().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = s - a.data()[i];
    Tensor result(a.shape(), std::move(out), a.requires_grad());
    if (tracking(result)) {
        auto ai = a.impl(), oi = result.impl();
        GradTape::active()->record(result, [ai, oi] {
            if (ai->requires_grad) {
                auto& g = ensure_grad(*ai);
                for (std::size_t i = 0; i < g.size(); ++i) g[i] -= oi->grad[i];
            }
        });
    }
    return result;
}

Tensor mul(const Tensor& a, float s) {
    std::vector<float> out(a.data().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * s;
    Tensor result(a.shape(), std::move(out), a.requires_grad());
    if (tracking(result)) {
        auto ai = a.impl(), oi = result.impl();
        GradTape::active()->record(result, [ai, oi, s] {
            if (ai->requires_grad) {
                auto& g = ensure_grad(*ai);
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += oi->grad[i] * s;
            }
        });
    }
    return result;
}

Tensor sigmoid(const Tensor& x) {
    std::vector<float> out(x.data().size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        float v = x.data()[i];
        float y;
        if (v >= 0.0f) {
            y = 1.0f / (1.0f + std::exp(-v));
        } else {
            float e = std::exp(v);
            y = e / (1.0f + e);
        }
        // keep outputs strictly inside (0,1)
        out[i] = std::min(std::max(y, std::numeric_limits<float>::min()), 1.0f - 6e-8f);
    }
    Tensor result(x.shape(), std::move(out), x.requires_grad());
    if (tracking(result)) {
        auto xi = x.impl(), oi = result.impl();
        GradTape::active()->record(result, [xi, oi] {
            if (!xi->requires_grad) return;
            auto& g = ensure_grad(*xi);
            for (std::size_t i = 0; i < g.size(); ++i) {
                float y = oi->data[i];
                g[i] += oi->grad[i] * y * (1.0f - y);
            }
        });
    }
    return result;
}

Tensor relu(const Tensor& x) {
    std::vector<float> out(x.data().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] > 0.0f ? x.data()[i] : 0.0f;
    Tensor result(x.shape(), std::move(out), x.requires_grad());
    if (tracking(result)) {
        auto xi = x.impl(), oi = result.impl();
        GradTape::active()->record(result, [xi, oi] {
            if (!xi->requires_grad) return;
            auto& g = ensure_grad(*xi);
            for (std::size_t i = 0; i < g.size(); ++i)
                if (xi->data[i] > 0.0f) g[i] += oi->grad[i];
        });
    }
    return result;
}

Tensor log_clamped(const Tensor& x) {
    std::vector<float> out(x.data().size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        float v = x.data()[i];
        require(!std::isnan(v), ErrorCode::Numeric, "log input is NaN");
        out[i] = std::log(std::max(v, kLogFloor));
    }
    Tensor result(x.shape(), std::move(out), x.requires_grad());
    if (tracking(result)) {
        auto xi = x.impl(), oi = result.impl();
        GradTape::active()->record(result, [xi, oi] {
            if (!xi->requires_grad) return;
            auto& g = ensure_grad(*xi);
            for (std::size_t i = 0; i < g.size(); ++i)
                if (xi->data[i] > kLogFloor) g[i] += oi->grad[i] / xi->data[i];
        });
    }
    return result;
}

Tensor abs(const Tensor& x) {
    std::vector<float> out(x.data().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::fabs(x.data()[i]);
    Tensor result(x.shape(), std::move(out), x.requires_grad());
    if (tracking(result)) {
        auto xi = x.impl(), oi = result.impl();
        GradTape::active()->record(result, [xi, oi] {
            if (!xi->requires_grad) return;
            auto& g = ensure_grad(*xi);
            for (std::size_t i = 0; i < g.size(); ++i) {
                float v = xi->data[i];
                if (v > 0.0f) g[i] += oi->grad[i];
                else if (v < 0.0f) g[i] -= oi->grad[i];
                // subgradient 0 at v == 0
            }
        });
    }
    return result;
}

Tensor softmax(const Tensor& x) {
    int last = x.dim(x.rank() - 1);
    std::int64_t rows = x.numel() / last;
    std::vector<float> out(x.data().size());
    for (std::int64_t r = 0; r < rows; ++r) {
        const float* in = x.data().data() + r * last;
        float* o = out.data() + r * last;
        float mx = in[0];
        for (int i = 1; i < last; ++i) mx = std::max(mx, in[i]);
        double denom = 0.0;
        for (int i = 0; i < last; ++i) {
            o[i] = std::exp(in[i] - mx);
            denom += o[i];
        }
        for (int i = 0; i < last; ++i) o[i] = static_cast<float>(o[i] / denom);
    }
    Tensor result(x.shape(), std::move(out), x.requires_grad());
    if (tracking(result)) {
        auto xi = x.impl(), oi = result.impl();
        GradTape::active()->record(result, [xi, oi, last, rows] {
            if (!xi->requires_grad) return;
            auto& g = ensure_grad(*xi);
            for (std::int64_t r = 0; r < rows; ++r) {
                const float* y = oi->data.data() + r * last;
                const float* gy = oi->grad.data() + r * last;
                float* gx = g.data() + r * last;
                double dot = 0.0;
                for (int i = 0; i < last; ++i) dot += static_cast<double>(gy[i]) * y[i];
                for (int i = 0; i < last; ++i)
                    gx[i] += y[i] * (gy[i] - static_cast<float>(dot));
            }
        });
    }
    return result;
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int padding) {
    require(x.rank() == 4, ErrorCode::InvalidArgument, "conv2d: input must be [N,C,H,W]");
    require(w.rank() == 4, ErrorCode::InvalidArgument, "conv2d: weight must be [F,C,kh,kw]");
    require(b.rank() == 1, ErrorCode::InvalidArgument, "conv2d: bias must be [F]");
    require(stride >= 1 && padding >= 0, ErrorCode::InvalidArgument, "conv2d: bad stride/padding");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), win = x.dim(3);
    const int f = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    require(w.dim(1) == c, ErrorCode::InvalidArgument, "conv2d: channel mismatch");
    require(b.dim(0) == f, ErrorCode::InvalidArgument, "conv2d: bias size mismatch");
    require(kh <= h + 2 * padding && kw <= win + 2 * padding, ErrorCode::InvalidArgument,
            "conv2d: kernel larger than padded input");
    const int oh = (h + 2 * padding - kh) / stride + 1;
    const int ow = (win + 2 * padding - kw) / stride + 1;

    std::vector<float> out(static_cast<std::size_t>(n) * f * oh * ow);
    const float* xd = x.data().data();
    const float* wd = w.data().data();
    const float* bd = b.data().data();
    for (int in = 0; in < n; ++in) {
        for (int of = 0; of < f; ++of) {
            for (int i = 0; i < oh; ++i) {
                for (int j = 0; j < ow; ++j) {
                    double acc = bd[of];
                    for (int ic = 0; ic < c; ++ic) {
                        const float* xp = xd + ((static_cast<std::int64_t>(in) * c + ic) * h) * win;
                        const float* wp = wd + ((static_cast<std::int64_t>(of) * c + ic) * kh) * kw;
                        for (int ki = 0; ki < kh; ++ki) {
                            int ih = i * stride - padding + ki;
                            if (ih < 0 || ih >= h) continue;
                            for (int kj = 0; kj < kw; ++kj) {
                                int iw = j * stride - padding + kj;
                                if (iw < 0 || iw >= win) continue;
                                acc += static_cast<double>(xp[ih * win + iw]) * wp[ki * kw + kj];
                            }
                        }
                    }
                    out[((static_cast<std::int64_t>(in) * f + of) * oh + i) * ow + j] =
                        static_cast<float>(acc);
                }
            }
        }
    }
    Tensor result({n, f, oh, ow}, std::move(out),
                  x.requires_grad() || w.requires_grad() || b.requires_grad());
    if (tracking(result)) {
        auto xi = x.impl(), wi = w.impl(), bi = b.impl(), oi = result.impl();
        GradTape::active()->record(result, [xi, wi, bi, oi, n, c, h, win, f, kh, kw, oh, ow,
                                            stride, padding] {
            const auto& go = oi->grad;
            std::vector<float>* gx = xi->requires_grad ? &ensure_grad(*xi) : nullptr;
            std::vector<float>* gw = wi->requires_grad ? &ensure_grad(*wi) : nullptr;
            std::vector<float>* gb = bi->requires_grad ? &ensure_grad(*bi) : nullptr;
            for (int in = 0; in < n; ++in) {
                for (int of = 0; of < f; ++of) {
                    for (int i = 0; i < oh; ++i) {
                        for (int j = 0; j < ow; ++j) {
                            float g = go[((static_cast<std::int64_t>(in) * f + of) * oh + i) * ow + j];
                            if (g == 0.0f) continue;
                            if (gb) (*gb)[of] += g;
                            for (int ic = 0; ic < c; ++ic) {
                                const std::int64_t xoff = ((static_cast<std::int64_t>(in) * c + ic) * h) * win;
                                const std::int64_t woff = ((static_cast<std::int64_t>(of) * c + ic) * kh) * kw;
                                for (int ki = 0; ki < kh; ++ki) {
                                    int ih = i * stride - padding + ki;
                                    if (ih < 0 || ih >= h) continue;
                                    for (int kj = 0; kj < kw; ++kj) {
                                        int iw = j * stride - padding + kj;
                                        if (iw < 0 || iw >= win) continue;
                                        if (gx) (*gx)[xoff + ih * win + iw] += g * wi->data[woff + ki * kw + kj];
                                        if (gw) (*gw)[woff + ki * kw + kj] += g * xi->data[xoff + ih * win + iw];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        });
    }
    return result;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    require(a.rank() == 2 && b.rank() == 2, ErrorCode::InvalidArgument, "matmul: rank-2 tensors required");
    const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
    require(b.dim(0) == k, ErrorCode::InvalidArgument, "matmul: inner dimension mismatch");
    std::vector<float> out(static_cast<std::size_t>(m) * n);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int p = 0; p < k; ++p)
                acc += static_cast<double>(a.data()[i * k + p]) * b.data()[p * n + j];
            out[static_cast<std::size_t>(i) * n + j] = static_cast<float>(acc);
        }
    }
    Tensor result({m, n}, std::move(out), a.requires_grad() || b.requires_grad());
    if (tracking(result)) {
        auto ai = a.impl(), bi = b.impl(), oi = result.impl();
        GradTape::active()->record(result, [ai, bi, oi, m, k, n] {
            const auto& g = oi->grad;
            if (ai->requires_grad) {
                auto& ga = ensure_grad(*ai);
                for (int i = 0; i < m; ++i)
                    for (int p = 0; p < k; ++p) {
                        double acc = 0.0;
                        for (int j = 0; j < n; ++j)
                            acc += static_cast<double>(g[i * n + j]) * bi->data[p * n + j];
                        ga[static_cast<std::size_t>(i) * k + p] += static_cast<float>(acc);
                    }
            }
            if (bi->requires_grad) {
                auto& gb = ensure_grad(*bi);
                for (int p = 0; p < k; ++p)
                    for (int j = 0; j < n; ++j) {
                        double acc = 0.0;
                        for (int i = 0; i < m; ++i)
                            acc += static_cast<double>(ai->data[i * k + p]) * g[i * n + j];
                        gb[static_cast<std::size_t>(p) * n + j] += static_cast<float>(acc);
                    }
            }
        });
    }
    return result;
}

Tensor reduce_all(const Tensor& x, Reduce kind) {
    const std::size_t n = x.data().size();
    require(n > 0, ErrorCode::InvalidArgument, "reduction over empty tensor");
    float value = 0.0f;
    std::size_t arg = 0;
    if (kind == Reduce::Max) {
        value = x.data()[0];
        for (std::size_t i = 1; i < n; ++i)
            if (x.data()[i] > value) { value = x.data()[i]; arg = i; }
    } else {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += x.data()[i];
        value = static_cast<float>(kind == Reduce::Mean ? acc / static_cast<double>(n) : acc);
    }
    Tensor result = Tensor::scalar(value, x.requires_grad());
    if (tracking(result)) {
        auto xi = x.impl(), oi = result.impl();
        GradTape::active()->record(result, [xi, oi, kind, n, arg] {
            if (!xi->requires_grad) return;
            auto& g = ensure_grad(*xi);
            float go = oi->grad[0];
            switch (kind) {
                case Reduce::Sum:
                    for (std::size_t i = 0; i < n; ++i) g[i] += go;
                    break;
                case Reduce::Mean:
                    for (std::size_t i = 0; i < n; ++i) g[i] += go / static_cast<float>(n);
                    break;
                case Reduce::Max:
                    g[arg] += go;
                    break;
            }
        });
    }
    return result;
}

Tensor reduce_axis(const Tensor& x, Reduce kind, int axis) {
    require(axis >= 0 && axis < x.rank(), ErrorCode::InvalidArgument, "reduce_axis: invalid axis");
    const auto& shape = x.shape();
    const int len = shape[static_cast<std::size_t>(axis)];
    std::int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= shape[static_cast<std::size_t>(i)];
    for (int i = axis + 1; i < x.rank(); ++i) inner *= shape[static_cast<std::size_t>(i)];

    Shape out_shape;
    for (int i = 0; i < x.rank(); ++i)
        if (i != axis) out_shape.push_back(shape[static_cast<std::size_t>(i)]);
    if (out_shape.empty()) out_shape.push_back(1);

    std::vector<float> out(static_cast<std::size_t>(outer * inner));
    std::vector<std::int64_t> argmax;
    if (kind == Reduce::Max) argmax.resize(out.size());
    for (std::int64_t o = 0; o < outer; ++o) {
        for (std::int64_t i = 0; i < inner; ++i) {
            const std::int64_t base = o * len * inner + i;
            if (kind == Reduce::Max) {
                float best = x.data()[static_cast<std::size_t>(base)];
                std::int64_t best_k = 0;
                for (int k = 1; k < len; ++k) {
                    float v = x.data()[static_cast<std::size_t>(base + k * inner)];
                    if (v > best) { best = v; best_k = k; }
                }
                out[static_cast<std::size_t>(o * inner + i)] = best;
                argmax[static_cast<std::size_t>(o * inner + i)] = base + best_k * inner;
            } else {
                double acc = 0.0;
                for (int k = 0; k < len; ++k) acc += x.data()[static_cast<std::size_t>(base + k * inner)];
                if (kind == Reduce::Mean) acc /= len;
                out[static_cast<std::size_t>(o * inner + i)] = static_cast<float>(acc);
            }
        }
    }
    Tensor result(std::move(out_shape), std::move(out), x.requires_grad());
    if (tracking(result)) {
        auto xi = x.impl(), oi = result.impl();
        GradTape::active()->record(result, [xi, oi, kind, outer, inner, len, argmax] {
            if (!xi->requires_grad) return;
            auto& g = ensure_grad(*xi);
            for (std::int64_t o = 0; o < outer; ++o) {
                for (std::int64_t i = 0; i < inner; ++i) {
                    float go = oi->grad[static_cast<std::size_t>(o * inner + i)];
                    if (go == 0.0f) continue;
                    const std::int64_t base = o * len * inner + i;
                    switch (kind) {
                        case Reduce::Sum:
                            for (int k = 0; k < len; ++k) g[static_cast<std::size_t>(base + k * inner)] += go;
                            break;
                        case Reduce::Mean:
                            for (int k = 0; k < len; ++k)
                                g[static_cast<std::size_t>(base + k * inner)] += go / static_cast<float>(len);
                            break;
                        case Reduce::Max:
                            g[static_cast<std::size_t>(argmax[static_cast<std::size_t>(o * inner + i)])] += go;
                            break;
                    }
                }
            }
        });
    }
    return result;
}

Tensor reshape(const Tensor& x, Shape shape) {
    require(shape_numel(shape) == x.numel(), ErrorCode::InvalidArgument,
            "reshape: element count mismatch " + shape_str(x.shape()) + " -> " + shape_str(shape));
    Tensor result(std::move(shape), x.data(), x.requires_grad());
    if (tracking(result)) {
        auto xi = x.impl(), oi = result.impl();
        GradTape::active()->record(result, [xi, oi] {
            if (xi->requires_grad) axpy(ensure_grad(*xi), oi->grad);
        });
    }
    return result;
}

Tensor narrow(const Tensor& x, int axis, int start, int len) {
    require(axis >= 0 && axis < x.rank(), ErrorCode::InvalidArgument, "narrow: invalid axis");
    const auto& shape = x.shape();
    const int d = shape[static_cast<std::size_t>(axis)];
    require(len > 0 && start >= 0 && start + len <= d, ErrorCode::InvalidArgument,
            "narrow: slice out of range");
    std::int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= shape[static_cast<std::size_t>(i)];
    for (int i = axis + 1; i < x.rank(); ++i) inner *= shape[static_cast<std::size_t>(i)];

    Shape out_shape = shape;
    out_shape[static_cast<std::size_t>(axis)] = len;
    std::vector<float> out(static_cast<std::size_t>(outer * len * inner));
    for (std::int64_t o = 0; o < outer; ++o) {
        const float* src = x.data().data() + (o * d + start) * inner;
        float* dst = out.data() + o * len * inner;
        std::copy(src, src + len * inner, dst);
    }
    Tensor result(std::move(out_shape), std::move(out), x.requires_grad());
    if (tracking(result)) {
        auto xi = x.impl(), oi = result.impl();
        GradTape::active()->record(result, [xi, oi, outer, inner, d, start, len] {
            if (!xi->requires_grad) return;
            auto& g = ensure_grad(*xi);
            for (std::int64_t o = 0; o < outer; ++o) {
                const float* src = oi->grad.data() + o * len * inner;
                float* dst = g.data() + (o * d + start) * inner;
                for (std::int64_t i = 0; i < len * inner; ++i) dst[i] += src[i];
            }
        });
    }
    return result;
}

Tensor index_row(const Tensor& x, int i) {
    require(i >= 0 && i < x.dim(0), ErrorCode::InvalidArgument, "index_row: out of range");
    Tensor slice = narrow(x, 0, i, 1);
    Shape out_shape(x.shape().begin() + 1, x.shape().end());
    if (out_shape.empty()) out_shape.push_back(1);
    return reshape(slice, std::move(out_shape));
}

Tensor concat0(std::span<const Tensor> parts) {
    require(!parts.empty(), ErrorCode::InvalidArgument, "concat0: no inputs");
    Shape tail(parts[0].shape().begin() + 1, parts[0].shape().end());
    std::int64_t inner = 1;
    for (int d : tail) inner *= d;
    int total0 = 0;
    bool needs_grad = false;
    for (const auto& p : parts) {
        Shape ptail(p.shape().begin() + 1, p.shape().end());
        require(ptail == tail, ErrorCode::InvalidArgument, "concat0: trailing shape mismatch");
        total0 += p.dim(0);
        needs_grad = needs_grad || p.requires_grad();
    }
    Shape out_shape;
    out_shape.push_back(total0);
    out_shape.insert(out_shape.end(), tail.begin(), tail.end());
    std::vector<float> out;
    out.reserve(static_cast<std::size_t>(total0 * inner));
    for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
    Tensor result(std::move(out_shape), std::move(out), needs_grad);
    if (tracking(result)) {
        std::vector<std::shared_ptr<TensorImpl>> impls;
        impls.reserve(parts.size());
        for (const auto& p : parts) impls.push_back(p.impl());
        auto oi = result.impl();
        GradTape::active()->record(result, [impls, oi] {
            std::size_t offset = 0;
            for (const auto& pi : impls) {
                std::size_t n = pi->data.size();
                if (pi->requires_grad) {
                    auto& g = ensure_grad(*pi);
                    for (std::size_t i = 0; i < n; ++i) g[i] += oi->grad[offset + i];
                }
                offset += n;
            }
        });
    }
    return result;
}

Tensor stack0(std::span<const Tensor> parts) {
    require(!parts.empty(), ErrorCode::InvalidArgument, "stack0: no inputs");
    std::vector<Tensor> lifted;
    lifted.reserve(parts.size());
    for (const auto& p : parts) {
        Shape s;
        s.push_back(1);
        s.insert(s.end(), p.shape().begin(), p.shape().end());
        lifted.push_back(reshape(p, std::move(s)));
    }
    return concat0(lifted);
}

}  // namespace masklab::numeric
