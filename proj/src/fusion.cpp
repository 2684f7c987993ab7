#include "geofusion/fusion.hpp"

#include <cmath>
#include <stdexcept>

namespace geofusion {

Tensor build_bias(const std::vector<GeoPoint>& query_points,
                  const std::vector<GeoPoint>& key_points, double ref_lat_deg,
                  const DistanceBiasConfig& cfg) {
    Tensor d = pairwise_distance_km(query_points, key_points, ref_lat_deg);
    for (auto& v : d.data) v = distance_bias(v, cfg);
    return d;
}

void FusionConfig::validate() const {
    if (layers < 0) throw std::invalid_argument("FusionConfig: negative layer count");
    if (layers > 0) {
        if (tab_dim % heads_tab_from_vis != 0)
            throw std::invalid_argument("FusionConfig: tab_dim not divisible by its head count");
        if (vis_dim % heads_vis_from_tab != 0)
            throw std::invalid_argument("FusionConfig: vis_dim not divisible by its head count");
    }
}

CrossBlock::CrossBlock(const std::string& name, int dim_q, int dim_kv, int heads,
                       double mlp_ratio, Rng& rng)
    : ln_q(name + ".ln_q", dim_q),
      ln_kv(name + ".ln_kv", dim_kv),
      ln_ff(name + ".ln_ff", dim_q),
      attn(name + ".attn", dim_q, dim_kv, heads, rng, /*with_gains=*/true),
      ff(name + ".ff", dim_q, static_cast<int>(dim_q * mlp_ratio), dim_q, rng) {}

Var CrossBlock::forward(Tape& t, const Var& q_tokens, const Var& kv_tokens, const Tensor* bias,
                        std::vector<Tensor>* captured_weights) const {
    Var h = add(q_tokens, attn.forward(t, ln_q.forward(t, q_tokens), ln_kv.forward(t, kv_tokens),
                                       bias, captured_weights));
    return add(h, ff.forward(t, ln_ff.forward(t, h)));
}

void CrossBlock::collect(ParamList& out) {
    ln_q.collect(out);
    ln_kv.collect(out);
    ln_ff.collect(out);
    attn.collect(out);
    ff.collect(out);
}

BilateralFusion::BilateralFusion(const std::string& name, const FusionConfig& config, Rng& rng)
    : cfg(config) {
    cfg.validate();
    for (int l = 0; l < cfg.layers; ++l) {
        vis_from_tab.emplace_back(name + ".vt" + std::to_string(l), cfg.vis_dim, cfg.tab_dim,
                                  cfg.heads_vis_from_tab, cfg.mlp_ratio, rng);
        tab_from_vis.emplace_back(name + ".tv" + std::to_string(l), cfg.tab_dim, cfg.vis_dim,
                                  cfg.heads_tab_from_vis, cfg.mlp_ratio, rng);
    }
}

std::pair<Var, Var> BilateralFusion::forward(Tape& t, const Var& z_vis, const Var& z_tab,
                                             const Tensor* bias_vt, const Tensor* bias_tv,
                                             FusionAttention* captured) const {
    Var v = z_vis;
    Var b = z_tab;
    for (size_t l = 0; l < vis_from_tab.size(); ++l) {
        // both directions read the pre-update tokens of this layer
        Var v_next = vis_from_tab[l].forward(t, v, b, bias_vt,
                                             captured ? &captured->vis_from_tab : nullptr);
        Var b_next = tab_from_vis[l].forward(t, b, v, bias_tv,
                                             captured ? &captured->tab_from_vis : nullptr);
        v = v_next;
        b = b_next;
    }
    return {v, b};
}

void BilateralFusion::collect(ParamList& out) {
    for (size_t l = 0; l < vis_from_tab.size(); ++l) {
        vis_from_tab[l].collect(out);
        tab_from_vis[l].collect(out);
    }
}

double attention_locality_stats(const Tensor& weights, const Tensor& distances, double radius_km) {
    check_same_shape(weights, distances, "attention_locality_stats");
    if (weights.rank() != 2) throw std::invalid_argument("attention_locality_stats: rank-2 input");
    const int nq = weights.shape[0], nk = weights.shape[1];
    double total = 0.0;
    for (int i = 0; i < nq; ++i) {
        double row_sum = 0.0, mass = 0.0;
        for (int j = 0; j < nk; ++j) {
            row_sum += weights.at(i, j);
            if (distances.at(i, j) <= radius_km) mass += weights.at(i, j);
        }
        if (std::abs(row_sum - 1.0) > 1e-6)
            throw std::invalid_argument("attention_locality_stats: weight rows must sum to 1");
        total += mass;
    }
    return total / nq;
}

}  // namespace geofusion
