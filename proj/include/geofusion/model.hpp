#pragma once

#include <string>
#include <vector>

#include "geofusion/fusion.hpp"
#include "geofusion/tabular.hpp"
#include "geofusion/vision.hpp"
#include "geofusion/world.hpp"

namespace geofusion {

struct ModelConfig {
    ViTConfig vit;          // vit.grid_* is the region crop grid
    TabTConfig tabt;
    FusionConfig fusion;
    double region_km = 80.0;
    bool use_geo_encodings = true;  // e_vis / e_tab added to token pipelines
    bool use_spatial_bias = true;   // phi(d) in cross-attention

    void validate() const;
    std::string canonical_text() const;
    uint64_t hash() const;
};

// Full vision-tabular autoencoder: ViT pathway, tabular pathway, bilateral
// cross-fusion over the visible tokens, geospatial positional MLPs.
class JointModel {
public:
    JointModel(const ModelConfig& config, uint64_t init_seed);

    struct Forward {
        Var vis_recon;      // [N_v, P^2 C]
        Var tab_recon;      // [N_tab, F]
        Tensor vis_target;  // patch tokens of the crop
        Tensor tab_target;  // [N_tab, F] standardized features
        Var z_tab_fused;    // [n_visible_tracts, D_t]: the enriched embeddings
        Var z_vis_fused;    // [n_visible_patches, D_v]
        FusionAttention attention;
        Tensor dist_tab_vis;  // [n_vis_tracts, n_vis_patches] km
        std::vector<int64_t> visible_tract_ids;
    };

    Forward forward(Tape& t, const Region& region, const MaskPlan& vis_plan,
                    const MaskPlan& tab_plan, bool capture_attention = false) const;

    // vision-only path used for MAE pretraining
    Var vision_forward(Tape& t, const VisionGrid& crop, const MaskPlan& plan,
                       Tensor* target_tokens) const;

    // full-visibility plan helpers
    static MaskPlan all_visible(int n);

    ParamList vit_params();     // ViT encoder/decoder + f_vis
    ParamList tabt_params();    // tokenizer/column/row/decoder + f_tab
    ParamList fusion_params();  // both cross directions incl. gains
    ParamList all_params();

    ModelConfig cfg;
    VisionMae vit;
    TabularTransformer tabt;
    BilateralFusion fusion;
    PositionalEncoder pos;
};

}  // namespace geofusion
