#include "numeric/adam.hpp"

#include <cmath>

namespace masklab::numeric {

void Adam::step(ParamStore& params) {
    for (const auto& [name, t] : params)
        require(t.has_grad(), ErrorCode::InvalidArgument,
                "adam_step: param '" + name + "' has no gradient");
    ++t_;
    const float bc1 = 1.0f - std::pow(config_.beta1, static_cast<float>(t_));
    const float bc2 = 1.0f - std::pow(config_.beta2, static_cast<float>(t_));
    for (auto& [name, param] : params) {
        auto& mom = state_[name];
        const std::size_t n = param.data().size();
        if (mom.m.empty()) {
            mom.m.assign(n, 0.0f);
            mom.v.assign(n, 0.0f);
        }
        auto& data = param.raw_data();
        const auto& grad = param.grad();
        for (std::size_t i = 0; i < n; ++i) {
            float g = grad[i];
            if (config_.weight_decay != 0.0f) g += config_.weight_decay * data[i];
            mom.m[i] = config_.beta1 * mom.m[i] + (1.0f - config_.beta1) * g;
            mom.v[i] = config_.beta2 * mom.v[i] + (1.0f - config_.beta2) * g * g;
            float m_hat = mom.m[i] / bc1;
            float v_hat = mom.v[i] / bc2;
            data[i] -= config_.lr * m_hat / (std::sqrt(v_hat) + config_.eps);
        }
    }
}

}  // namespace masklab::numeric
