#pragma once

#include <cstdint>
#include <vector>

#include "geofusion/autodiff.hpp"

namespace geofusion {

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.95;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

// Decoupled weight decay Adam. Moments are kept in registration order, so the
// parameter list must be stable across steps (and across checkpoint resume).
class AdamW {
public:
    AdamW(std::vector<Parameter*> params, AdamWConfig cfg);

    // Applies one update from the accumulated grads, then zeroes them.
    void step(double lr);

    int64_t step_count() const { return step_; }
    const AdamWConfig& config() const { return cfg_; }
    const std::vector<Parameter*>& params() const { return params_; }

    // checkpoint access
    std::vector<Tensor>& first_moments() { return m_; }
    std::vector<Tensor>& second_moments() { return v_; }
    void set_step_count(int64_t s) { step_ = s; }

private:
    std::vector<Parameter*> params_;
    AdamWConfig cfg_;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
    int64_t step_ = 0;
};

// Linear warmup from 0 to base over warmup_steps, then cosine decay to 0 at
// total_steps.
struct LrSchedule {
    double base = 0.0;
    int64_t warmup_steps = 0;
    int64_t total_steps = 1;

    double at(int64_t step) const;
};

}  // namespace geofusion
