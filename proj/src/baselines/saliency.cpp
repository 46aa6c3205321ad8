#include "baselines/saliency.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "common/json.hpp"
#include "common/parallel.hpp"
#include "common/rng.hpp"
#include "numeric/serialize.hpp"

namespace masklab::baselines {

using numeric::Tensor;

namespace {

void check_forward_only(const char* method) {
    require(numeric::GradTape::active() == nullptr, ErrorCode::InvalidArgument,
            std::string(method) + " is forward-only; call it outside any gradient tape");
}

void check_state(const Tensor& state) {
    require(state.rank() == 3 && state.dim(0) == 1, ErrorCode::InvalidArgument,
            "baselines expect a [1,H,W] state");
}

SaliencyMap finish(std::vector<float> values, int h, int w, std::string method, int action) {
    float mx = 0.0f;
    for (float v : values) {
        require(std::isfinite(v), ErrorCode::Numeric, method + ": non-finite saliency value");
        mx = std::max(mx, v);
    }
    if (mx > 0.0f)
        for (auto& v : values) v /= mx;
    SaliencyMap map;
    map.values = Tensor({h, w}, std::move(values));
    map.method = std::move(method);
    map.action = action;
    return map;
}

// masked = s*m + r*(1-m), then the target-action probability
float masked_prob(const worlds::Policy& policy, const Tensor& state, const std::vector<float>& mask,
                  float ref, int action) {
    std::vector<float> blended(state.data().size());
    for (std::size_t i = 0; i < blended.size(); ++i)
        blended[i] = state.data()[i] * mask[i] + ref * (1.0f - mask[i]);
    Tensor s(state.shape(), std::move(blended));
    return policy.forward(s).data()[static_cast<std::size_t>(action)];
}

}  // namespace

SaliencyMap rise_saliency(const worlds::Policy& policy, const Tensor& state, int action,
                          const RiseConfig& config, const worlds::ReferenceValue& reference) {
    check_forward_only("rise_saliency");
    check_state(state);
    require(config.n_masks >= 1, ErrorCode::InvalidArgument, "rise: n_masks must be >= 1");
    require(config.cell_grid >= 1, ErrorCode::InvalidArgument, "rise: cell_grid must be >= 1");
    require(config.p_keep > 0.0f && config.p_keep <= 1.0f, ErrorCode::InvalidArgument,
            "rise: p_keep must lie in (0,1]");
    const int h = state.dim(1), w = state.dim(2);
    const int g = config.cell_grid;
    const int cell_h = (h + g - 1) / g;
    const int cell_w = (w + g - 1) / g;
    const float ref = reference.channel(0);

    // one deterministic stream per mask, so the parallel loop is order-free
    std::vector<std::vector<float>> masks(static_cast<std::size_t>(config.n_masks));
    std::vector<float> scores(static_cast<std::size_t>(config.n_masks));
    parallel_for(static_cast<std::size_t>(config.n_masks), [&](std::size_t m) {
        Rng rng = Rng::for_index(config.seed, m);
        std::vector<float> coarse(static_cast<std::size_t>(g) * g);
        for (auto& v : coarse) v = rng.bernoulli(config.p_keep) ? 1.0f : 0.0f;
        const int dy = rng.uniform_int(0, cell_h - 1);
        const int dx = rng.uniform_int(0, cell_w - 1);

        std::vector<float> mask(static_cast<std::size_t>(h) * w);
        for (int i = 0; i < h; ++i) {
            const float sy = (static_cast<float>(i + dy) + 0.5f) / cell_h - 0.5f;
            const int y0 = static_cast<int>(std::floor(sy));
            const float fy = sy - y0;
            for (int j = 0; j < w; ++j) {
                const float sx = (static_cast<float>(j + dx) + 0.5f) / cell_w - 0.5f;
                const int x0 = static_cast<int>(std::floor(sx));
                const float fx = sx - x0;
                auto at = [&](int y, int x) {
                    y = std::clamp(y, 0, g - 1);
                    x = std::clamp(x, 0, g - 1);
                    return coarse[static_cast<std::size_t>(y) * g + x];
                };
                const float top = at(y0, x0) * (1 - fx) + at(y0, x0 + 1) * fx;
                const float bot = at(y0 + 1, x0) * (1 - fx) + at(y0 + 1, x0 + 1) * fx;
                mask[static_cast<std::size_t>(i) * w + j] = top * (1 - fy) + bot * fy;
            }
        }
        scores[m] = masked_prob(policy, state, mask, ref, action);
        masks[m] = std::move(mask);
    });

    // ordered reduction keeps the result independent of the thread count
    std::vector<double> acc(static_cast<std::size_t>(h) * w, 0.0);
    for (std::size_t m = 0; m < masks.size(); ++m)
        for (std::size_t i = 0; i < acc.size(); ++i)
            acc[i] += static_cast<double>(scores[m]) * masks[m][i];
    const double scale = 1.0 / (static_cast<double>(config.n_masks) * config.p_keep);
    std::vector<float> values(acc.size());
    for (std::size_t i = 0; i < acc.size(); ++i) values[i] = static_cast<float>(acc[i] * scale);
    return finish(std::move(values), h, w, "rise", action);
}

namespace {

std::vector<float> gaussian_blur(const std::vector<float>& img, int h, int w, float sigma) {
    const int radius = static_cast<int>(std::ceil(3.0f * sigma));
    std::vector<float> kernel(static_cast<std::size_t>(2 * radius + 1));
    for (int i = -radius; i <= radius; ++i)
        kernel[static_cast<std::size_t>(i + radius)] =
            std::exp(-static_cast<float>(i * i) / (2.0f * sigma * sigma));

    // separable passes; border taps renormalized so constants stay constant
    std::vector<float> tmp(img.size()), out(img.size());
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            double acc = 0.0, wsum = 0.0;
            for (int t = -radius; t <= radius; ++t) {
                const int jj = j + t;
                if (jj < 0 || jj >= w) continue;
                const double kw = kernel[static_cast<std::size_t>(t + radius)];
                acc += kw * img[static_cast<std::size_t>(i) * w + jj];
                wsum += kw;
            }
            tmp[static_cast<std::size_t>(i) * w + j] = static_cast<float>(acc / wsum);
        }
    }
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            double acc = 0.0, wsum = 0.0;
            for (int t = -radius; t <= radius; ++t) {
                const int ii = i + t;
                if (ii < 0 || ii >= h) continue;
                const double kw = kernel[static_cast<std::size_t>(t + radius)];
                acc += kw * tmp[static_cast<std::size_t>(ii) * w + j];
                wsum += kw;
            }
            out[static_cast<std::size_t>(i) * w + j] = static_cast<float>(acc / wsum);
        }
    }
    return out;
}

}  // namespace

SaliencyMap blur_saliency(const worlds::Policy& policy, const Tensor& state, int action,
                          const BlurConfig& config) {
    check_forward_only("blur_saliency");
    check_state(state);
    require(config.stride >= 1, ErrorCode::InvalidArgument, "blur: stride must be >= 1");
    require(config.sigma > 0.0f, ErrorCode::InvalidArgument, "blur: sigma must be positive");
    const int h = state.dim(1), w = state.dim(2);
    const std::vector<float>& img = state.data();
    const std::vector<float> blurred = gaussian_blur(img, h, w, config.sigma);
    const float p_orig =
        policy.forward(state).data()[static_cast<std::size_t>(action)];

    const int gy = (h - 1) / config.stride + 1;
    const int gx = (w - 1) / config.stride + 1;
    std::vector<float> grid_scores(static_cast<std::size_t>(gy) * gx);
    parallel_for(grid_scores.size(), [&](std::size_t cellidx) {
        const int cy = static_cast<int>(cellidx) / gx;
        const int cx = static_cast<int>(cellidx) % gx;
        const int y = cy * config.stride;
        const int x = cx * config.stride;
        std::vector<float> perturbed(img.size());
        for (int i = 0; i < h; ++i) {
            for (int j = 0; j < w; ++j) {
                const float d2 = static_cast<float>((i - y) * (i - y) + (j - x) * (j - x));
                const float weight = std::exp(-d2 / (2.0f * config.sigma * config.sigma));
                const std::size_t idx = static_cast<std::size_t>(i) * w + j;
                perturbed[idx] = img[idx] * (1.0f - weight) + blurred[idx] * weight;
            }
        }
        const float p =
            policy.forward(Tensor(state.shape(), std::move(perturbed))).data()[static_cast<std::size_t>(action)];
        grid_scores[cellidx] = std::fabs(p_orig - p);
    });

    // bilinear spread from the grid back to pixel resolution
    std::vector<float> values(static_cast<std::size_t>(h) * w);
    for (int i = 0; i < h; ++i) {
        const float fy = static_cast<float>(i) / config.stride;
        const int y0 = std::min(static_cast<int>(fy), gy - 1);
        const int y1 = std::min(y0 + 1, gy - 1);
        const float ty = fy - y0;
        for (int j = 0; j < w; ++j) {
            const float fx = static_cast<float>(j) / config.stride;
            const int x0 = std::min(static_cast<int>(fx), gx - 1);
            const int x1 = std::min(x0 + 1, gx - 1);
            const float tx = fx - x0;
            auto at = [&](int y, int x) { return grid_scores[static_cast<std::size_t>(y) * gx + x]; };
            const float top = at(y0, x0) * (1 - tx) + at(y0, x1) * tx;
            const float bot = at(y1, x0) * (1 - tx) + at(y1, x1) * tx;
            values[static_cast<std::size_t>(i) * w + j] = top * (1 - ty) + bot * ty;
        }
    }
    return finish(std::move(values), h, w, "blur", action);
}

namespace {

struct OcclusionScan {
    std::vector<float> target_delta;   // p_a(s) - p_a(occluded) per position
    std::vector<float> nontarget_tv;   // TV distance of renormalized non-target probs
    int positions_y = 0, positions_x = 0;
};

OcclusionScan occlusion_scan(const worlds::Policy& policy, const Tensor& state, int action,
                             int patch, float ref) {
    const int h = state.dim(1), w = state.dim(2);
    const int k = policy.num_actions();
    const std::vector<float> p_orig = worlds::action_probs(policy, state);
    const float pa = p_orig[static_cast<std::size_t>(action)];

    auto renorm_nontarget = [&](const std::vector<float>& p) {
        std::vector<float> q;
        q.reserve(static_cast<std::size_t>(k - 1));
        const float rest = 1.0f - p[static_cast<std::size_t>(action)];
        for (int i = 0; i < k; ++i) {
            if (i == action) continue;
            q.push_back(rest > 1e-9f ? p[static_cast<std::size_t>(i)] / rest
                                     : 1.0f / static_cast<float>(k - 1));
        }
        return q;
    };
    const std::vector<float> q_orig = renorm_nontarget(p_orig);

    OcclusionScan scan;
    scan.positions_y = h - patch + 1;
    scan.positions_x = w - patch + 1;
    const std::size_t n = static_cast<std::size_t>(scan.positions_y) * scan.positions_x;
    scan.target_delta.resize(n);
    scan.nontarget_tv.resize(n);
    parallel_for(n, [&](std::size_t pos) {
        const int r = static_cast<int>(pos) / scan.positions_x;
        const int c = static_cast<int>(pos) % scan.positions_x;
        std::vector<float> occluded = state.data();
        for (int i = 0; i < patch; ++i)
            for (int j = 0; j < patch; ++j)
                occluded[static_cast<std::size_t>(r + i) * w + (c + j)] = ref;
        const std::vector<float> p =
            worlds::action_probs(policy, Tensor(state.shape(), std::move(occluded)));
        scan.target_delta[pos] = pa - p[static_cast<std::size_t>(action)];
        const std::vector<float> q = renorm_nontarget(p);
        double tv = 0.0;
        for (std::size_t i = 0; i < q.size(); ++i) tv += std::fabs(q_orig[i] - q[i]);
        scan.nontarget_tv[pos] = static_cast<float>(0.5 * tv);
    });
    return scan;
}

std::vector<float> scatter_to_centers(const OcclusionScan& scan, int h, int w, int patch,
                                      bool normalize_delta) {
    std::vector<float> values(static_cast<std::size_t>(h) * w, 0.0f);
    for (int r = 0; r < scan.positions_y; ++r) {
        for (int c = 0; c < scan.positions_x; ++c) {
            const std::size_t pos = static_cast<std::size_t>(r) * scan.positions_x + c;
            float v = std::max(0.0f, scan.target_delta[pos]);
            if (normalize_delta) v /= 1.0f + scan.nontarget_tv[pos];
            const int ci = r + patch / 2;
            const int cj = c + patch / 2;
            values[static_cast<std::size_t>(ci) * w + cj] = v;
        }
    }
    return values;
}

}  // namespace

SaliencyMap occlusion_saliency(const worlds::Policy& policy, const Tensor& state, int action,
                               int patch, const worlds::ReferenceValue& reference) {
    check_forward_only("occlusion_saliency");
    check_state(state);
    const int h = state.dim(1), w = state.dim(2);
    require(patch >= 1 && patch <= std::min(h, w), ErrorCode::InvalidArgument,
            "occlusion: patch must fit inside the state");
    OcclusionScan scan = occlusion_scan(policy, state, action, patch, reference.channel(0));
    return finish(scatter_to_centers(scan, h, w, patch, false), h, w, "occlusion", action);
}

SaliencyMap normalized_delta_saliency(const worlds::Policy& policy, const Tensor& state,
                                      int action, int patch,
                                      const worlds::ReferenceValue& reference) {
    check_forward_only("normalized_delta_saliency");
    check_state(state);
    const int h = state.dim(1), w = state.dim(2);
    require(patch >= 1 && patch <= std::min(h, w), ErrorCode::InvalidArgument,
            "normalized_delta: patch must fit inside the state");
    OcclusionScan scan = occlusion_scan(policy, state, action, patch, reference.channel(0));
    return finish(scatter_to_centers(scan, h, w, patch, true), h, w, "normalized-delta", action);
}

void save_saliency(const SaliencyMap& map, const std::string& prefix,
                   const std::vector<std::pair<std::string, std::string>>& params) {
    numeric::save_tensor(prefix + ".vmt", map.values);
    std::ofstream os(prefix + ".json");
    require(bool(os), ErrorCode::Io, "cannot write saliency sidecar '" + prefix + ".json'");
    JsonWriter json(os);
    json.begin_object();
    json.kv("method", map.method);
    json.kv("action", map.action);
    json.key("params").begin_object();
    for (const auto& [key, value] : params) json.kv(key, value);
    json.end_object();
    json.end_object();
    os << "\n";
}

}  // namespace masklab::baselines
