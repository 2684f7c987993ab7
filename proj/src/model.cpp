#include "geofusion/model.hpp"

#include <sstream>

#include "geofusion/io.hpp"

namespace geofusion {

void ModelConfig::validate() const {
    vit.validate();
    tabt.validate();
    fusion.validate();
    if (fusion.layers > 0 && (fusion.vis_dim != vit.dim || fusion.tab_dim != tabt.row_dim))
        throw std::invalid_argument("ModelConfig: fusion dims must match the encoder dims");
    if (region_km <= 0) throw std::invalid_argument("ModelConfig: region_km must be positive");
}

std::string ModelConfig::canonical_text() const {
    std::ostringstream s;
    s << "vit " << vit.grid_h << " " << vit.grid_w << " " << vit.channels << " " << vit.patch
      << " " << vit.dim << " " << vit.encoder_blocks << " " << vit.decoder_blocks << " "
      << vit.decoder_dim << " " << vit.heads << " " << vit.mlp_ratio << "\n";
    s << "tabt " << tabt.n_features << " " << tabt.col_dim << " " << tabt.col_blocks << " "
      << tabt.col_heads << " " << tabt.row_dim << " " << tabt.row_blocks << " " << tabt.row_heads
      << " " << tabt.mlp_ratio << " " << tabt.row_attention << " " << tabt.decoder_row_attention
      << " " << tabt.decoder_blocks << "\n";
    s << "fusion " << fusion.vis_dim << " " << fusion.tab_dim << " " << fusion.heads_tab_from_vis
      << " " << fusion.heads_vis_from_tab << " " << fusion.layers << " " << fusion.mlp_ratio
      << " " << fusion.bias.d0_km << " " << fusion.bias.tau_km << "\n";
    s << "region " << region_km << " geo " << use_geo_encodings << " bias " << use_spatial_bias
      << "\n";
    return s.str();
}

uint64_t ModelConfig::hash() const {
    std::string text = canonical_text();
    return fnv1a64(reinterpret_cast<const uint8_t*>(text.data()), text.size());
}

JointModel::JointModel(const ModelConfig& config, uint64_t init_seed) : cfg(config) {
    cfg.validate();
    Rng rng(Rng::mix(init_seed, 0x10DE1));
    vit = VisionMae("vit", cfg.vit, rng);
    tabt = TabularTransformer("tabt", cfg.tabt, rng);
    fusion = BilateralFusion("fusion", cfg.fusion, rng);
    pos = PositionalEncoder("pos", cfg.vit.dim, cfg.tabt.row_dim, rng);
}

MaskPlan JointModel::all_visible(int n) {
    MaskPlan plan;
    plan.ratio = 0.0;
    plan.visible.resize(n);
    for (int i = 0; i < n; ++i) plan.visible[i] = i;
    return plan;
}

Var JointModel::vision_forward(Tape& t, const VisionGrid& crop, const MaskPlan& plan,
                               Tensor* target_tokens) const {
    PatchSequence seq = patchify(crop, cfg.vit.patch);
    if (target_tokens) *target_tokens = seq.tokens;
    Var e_vis;
    if (cfg.use_geo_encodings) {
        // reference point is the crop center, matching the joint path
        GeoPoint center = from_local_km(
            {crop.width * crop.cell_km / 2.0, crop.height * crop.cell_km / 2.0}, crop.origin);
        std::vector<std::array<double, 2>> offsets;
        offsets.reserve(seq.centers.size());
        for (const auto& c : seq.centers) offsets.push_back(location_offset(c, center));
        e_vis = pos.encode_vision(t, offsets);
    }
    Var enc = vit.encode_visible(t, seq.tokens, plan, e_vis);
    return vit.decode(t, enc, plan, e_vis);
}

JointModel::Forward JointModel::forward(Tape& t, const Region& region, const MaskPlan& vis_plan,
                                        const MaskPlan& tab_plan, bool capture_attention) const {
    Forward out;
    const int n_tab = region.tracts.size();
    region.tracts.validate(cfg.tabt.n_features);

    PatchSequence seq = patchify(region.vision, cfg.vit.patch);
    out.vis_target = seq.tokens;

    out.tab_target = Tensor({n_tab, cfg.tabt.n_features});
    std::vector<std::vector<double>> rows(n_tab);
    for (int i = 0; i < n_tab; ++i) {
        rows[i] = region.tracts.records[i].features;
        for (int f = 0; f < cfg.tabt.n_features; ++f) out.tab_target.at(i, f) = rows[i][f];
    }

    // geospatial encodings relative to the region center
    Var e_vis, e_tab_all, e_tab_visible;
    if (cfg.use_geo_encodings) {
        std::vector<std::array<double, 2>> offsets;
        offsets.reserve(seq.centers.size());
        for (const auto& c : seq.centers) offsets.push_back(location_offset(c, region.center));
        e_vis = pos.encode_vision(t, offsets);

        std::vector<TractSummary> summaries;
        summaries.reserve(n_tab);
        for (const auto& rec : region.tracts.records)
            summaries.push_back(tract_summary(rec.polygon, rec.rep_point, region.center));
        e_tab_all = pos.encode_tract(t, summaries);
        e_tab_visible = take_rows(e_tab_all, tab_plan.visible);
    }

    Var z_vis = vit.encode_visible(t, seq.tokens, vis_plan, e_vis);
    Var z_tab = tabt.encode_visible(t, rows, tab_plan, e_tab_visible);

    // cross-fusion over visible tokens only
    Var z_vis_fused = z_vis;
    Var z_tab_fused = z_tab;
    if (cfg.fusion.layers > 0) {
        std::vector<GeoPoint> vis_pts, tab_pts;
        for (int i : vis_plan.visible) vis_pts.push_back(seq.centers[i]);
        for (int i : tab_plan.visible)
            tab_pts.push_back(region.tracts.records[i].rep_point);
        out.dist_tab_vis = pairwise_distance_km(tab_pts, vis_pts, region.center.lat);

        Tensor bias_vt, bias_tv;
        const Tensor* pvt = nullptr;
        const Tensor* ptv = nullptr;
        if (cfg.use_spatial_bias) {
            bias_tv = out.dist_tab_vis;
            for (auto& v : bias_tv.data) v = distance_bias(v, cfg.fusion.bias);
            bias_vt = Tensor({bias_tv.shape[1], bias_tv.shape[0]});
            for (int i = 0; i < bias_tv.shape[0]; ++i)
                for (int j = 0; j < bias_tv.shape[1]; ++j) bias_vt.at(j, i) = bias_tv.at(i, j);
            pvt = &bias_vt;
            ptv = &bias_tv;
        }
        auto [zv, zt] = fusion.forward(t, z_vis, z_tab, pvt, ptv,
                                       capture_attention ? &out.attention : nullptr);
        z_vis_fused = zv;
        z_tab_fused = zt;
    }

    out.z_vis_fused = z_vis_fused;
    out.z_tab_fused = z_tab_fused;
    for (int i : tab_plan.visible) out.visible_tract_ids.push_back(region.tracts.records[i].id);

    out.vis_recon = vit.decode(t, z_vis_fused, vis_plan, e_vis);
    out.tab_recon = tabt.decode(t, z_tab_fused, tab_plan, n_tab, e_tab_all);
    return out;
}

ParamList JointModel::vit_params() {
    ParamList p;
    vit.collect(p);
    pos.f_vis.collect(p);
    return p;
}

ParamList JointModel::tabt_params() {
    ParamList p;
    tabt.collect(p);
    pos.f_tab.collect(p);
    return p;
}

ParamList JointModel::fusion_params() {
    ParamList p;
    fusion.collect(p);
    return p;
}

ParamList JointModel::all_params() {
    ParamList p = vit_params();
    ParamList t = tabt_params();
    ParamList f = fusion_params();
    p.insert(p.end(), t.begin(), t.end());
    p.insert(p.end(), f.begin(), f.end());
    return p;
}

}  // namespace geofusion
