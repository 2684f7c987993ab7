#pragma once

#include <string>
#include <utility>
#include <vector>

#include "geofusion/geo.hpp"
#include "geofusion/nn.hpp"

namespace geofusion {

// Phi[q, k] = tanh((d0 - d(q, k)) / tau) with entries in (-1, 1).
Tensor build_bias(const std::vector<GeoPoint>& query_points,
                  const std::vector<GeoPoint>& key_points, double ref_lat_deg,
                  const DistanceBiasConfig& cfg);

struct FusionConfig {
    int vis_dim = 64;
    int tab_dim = 64;
    int heads_tab_from_vis = 8;
    int heads_vis_from_tab = 2;
    int layers = 1;
    double mlp_ratio = 4.0;
    DistanceBiasConfig bias;

    void validate() const;
};

// One cross-attention direction: pre-norm attention with per-head gain-scaled
// spatial bias, then feed-forward, both residual.
class CrossBlock {
public:
    CrossBlock() = default;
    CrossBlock(const std::string& name, int dim_q, int dim_kv, int heads, double mlp_ratio,
               Rng& rng);

    Var forward(Tape& t, const Var& q_tokens, const Var& kv_tokens, const Tensor* bias,
                std::vector<Tensor>* captured_weights = nullptr) const;
    void collect(ParamList& out);

    LayerNormLayer ln_q, ln_kv, ln_ff;
    MultiheadAttention attn;  // carries the learnable gains
    Mlp ff;
};

// Captured post-softmax cross-attention maps from one forward pass, one
// [n_q, n_k] tensor per head per layer.
struct FusionAttention {
    std::vector<Tensor> tab_from_vis;
    std::vector<Tensor> vis_from_tab;
};

// Bilateral vision<->tabular fusion. The two directions of each layer read
// the same pre-update inputs (parallel residual updates) and use independent
// parameters.
class BilateralFusion {
public:
    BilateralFusion() = default;
    BilateralFusion(const std::string& name, const FusionConfig& cfg, Rng& rng);

    // bias_vt is [n_vis, n_tab]; its transpose orientation is used for the
    // tab<-vis direction. Pass nullptr to disable the spatial bias.
    std::pair<Var, Var> forward(Tape& t, const Var& z_vis, const Var& z_tab,
                                const Tensor* bias_vt, const Tensor* bias_tv,
                                FusionAttention* captured = nullptr) const;
    void collect(ParamList& out);

    FusionConfig cfg;
    std::vector<CrossBlock> vis_from_tab;
    std::vector<CrossBlock> tab_from_vis;
};

// Mean over queries of the attention mass on keys within radius_km. weights
// rows must sum to 1; distances is [n_q, n_k] in km.
double attention_locality_stats(const Tensor& weights, const Tensor& distances, double radius_km);

}  // namespace geofusion
