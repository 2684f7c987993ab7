#include "geofusion/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace geofusion {

AdamW::AdamW(std::vector<Parameter*> params, AdamWConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const Parameter* p : params_) {
        m_.push_back(Tensor::zeros(p->value.shape));
        v_.push_back(Tensor::zeros(p->value.shape));
    }
}

void AdamW::step(double lr) {
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (size_t k = 0; k < params_.size(); ++k) {
        Parameter& p = *params_[k];
        Tensor& m = m_[k];
        Tensor& v = v_[k];
        for (int64_t i = 0; i < p.value.numel(); ++i) {
            const double g = p.grad.data[i];
            m.data[i] = cfg_.beta1 * m.data[i] + (1.0 - cfg_.beta1) * g;
            v.data[i] = cfg_.beta2 * v.data[i] + (1.0 - cfg_.beta2) * g * g;
            const double mhat = m.data[i] / bc1;
            const double vhat = v.data[i] / bc2;
            p.value.data[i] -= lr * cfg_.weight_decay * p.value.data[i];
            p.value.data[i] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
        p.zero_grad();
    }
}

double LrSchedule::at(int64_t step) const {
    if (step < 0) throw std::invalid_argument("LrSchedule: negative step");
    if (warmup_steps > 0 && step < warmup_steps)
        return base * static_cast<double>(step) / static_cast<double>(warmup_steps);
    if (step >= total_steps) return 0.0;
    const double span = static_cast<double>(total_steps - warmup_steps);
    const double x = static_cast<double>(step - warmup_steps) / span;
    return base * 0.5 * (1.0 + std::cos(M_PI * x));
}

}  // namespace geofusion
