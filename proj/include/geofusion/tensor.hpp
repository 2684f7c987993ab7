#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace geofusion {

// Dense row-major tensor of 64-bit floats. Plain data, no gradient state;
// autodiff lives in Tape/Var (autodiff.hpp).
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)), data(numel_of(shape), 0.0) {}
    Tensor(std::vector<int> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
        if (static_cast<int64_t>(data.size()) != numel_of(shape))
            throw std::invalid_argument("Tensor: data size does not match shape");
    }

    static int64_t numel_of(const std::vector<int>& s) {
        int64_t n = 1;
        for (int e : s) {
            if (e < 0) throw std::invalid_argument("Tensor: negative extent");
            n *= e;
        }
        return n;
    }

    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
    static Tensor full(std::vector<int> s, double v) {
        Tensor t(std::move(s));
        std::fill(t.data.begin(), t.data.end(), v);
        return t;
    }
    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    int rank() const { return static_cast<int>(shape.size()); }
    int rows() const { return shape.at(0); }
    int cols() const { return shape.at(1); }

    double& at(int i, int j) { return data[static_cast<int64_t>(i) * shape[1] + j]; }
    double at(int i, int j) const { return data[static_cast<int64_t>(i) * shape[1] + j]; }
    double& at3(int i, int j, int k) {
        return data[(static_cast<int64_t>(i) * shape[1] + j) * shape[2] + k];
    }
    double at3(int i, int j, int k) const {
        return data[(static_cast<int64_t>(i) * shape[1] + j) * shape[2] + k];
    }
    double* row(int i) { return data.data() + static_cast<int64_t>(i) * shape[1]; }
    const double* row(int i) const { return data.data() + static_cast<int64_t>(i) * shape[1]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    std::string shape_str() const {
        std::string s = "[";
        for (size_t i = 0; i < shape.size(); ++i) {
            if (i) s += "x";
            s += std::to_string(shape[i]);
        }
        return s + "]";
    }
};

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape_str() +
                                    " vs " + b.shape_str());
}

// Deterministic splitmix64 generator. Self-contained so that seeded runs are
// reproducible across standard-library implementations; the single-word state
// also makes checkpointing the RNG trivial.
class Rng {
public:
    explicit Rng(uint64_t seed = 0) : state_(seed) {}

    uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // standard normal via Box-Muller (no caching: one draw consumes two uniforms)
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // integer in [0, n)
    int uniform_int(int n) {
        if (n <= 0) throw std::invalid_argument("Rng::uniform_int: n must be positive");
        return static_cast<int>(next_u64() % static_cast<uint64_t>(n));
    }

    // k distinct indices from [0, n), order random (partial Fisher-Yates)
    std::vector<int> sample_without_replacement(int n, int k) {
        if (k < 0 || k > n) throw std::invalid_argument("sample_without_replacement: bad k");
        std::vector<int> idx(n);
        for (int i = 0; i < n; ++i) idx[i] = i;
        for (int i = 0; i < k; ++i) {
            int j = i + uniform_int(n - i);
            std::swap(idx[i], idx[j]);
        }
        idx.resize(k);
        return idx;
    }

    Tensor normal_tensor(std::vector<int> shape, double stddev) {
        Tensor t(std::move(shape));
        for (auto& v : t.data) v = normal() * stddev;
        return t;
    }

    uint64_t state() const { return state_; }
    void set_state(uint64_t s) { state_ = s; }

    // derive an independent stream (for per-epoch / per-worker seeding)
    static uint64_t mix(uint64_t a, uint64_t b) {
        Rng r(a ^ (b * 0x9E3779B97F4A7C15ull + 0x632BE59BD9B4E019ull));
        return r.next_u64();
    }

private:
    uint64_t state_;
};

}  // namespace geofusion
