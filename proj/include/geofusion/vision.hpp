#pragma once

#include <cstdint>
#include <vector>

#include "geofusion/geo.hpp"
#include "geofusion/nn.hpp"

namespace geofusion {

// Geo-referenced raster crop. data is [H, W, C]; origin is the south-west
// corner, rows advance north and columns east by cell_km.
struct VisionGrid {
    int height = 0;
    int width = 0;
    int channels = 0;
    Tensor data;
    GeoPoint origin;
    double cell_km = 1.0;

    GeoPoint cell_center(int row, int col) const {
        return from_local_km({(col + 0.5) * cell_km, (row + 0.5) * cell_km}, origin);
    }
};

struct PatchSequence {
    Tensor tokens;  // [N_v, P*P*C]
    std::vector<GeoPoint> centers;
    int patch = 0;
};

// Row-major patch order; within a patch, row-major pixels then channels.
PatchSequence patchify(const VisionGrid& grid, int patch);
VisionGrid unpatchify(const Tensor& tokens, int height, int width, int channels, int patch,
                      const GeoPoint& origin, double cell_km);

struct MaskPlan {
    std::vector<int> visible;  // ascending
    std::vector<int> masked;   // ascending
    double ratio = 0.0;
};

// |masked| = floor(ratio * n); both sides must stay non-empty.
MaskPlan sample_mask(int n, double ratio, uint64_t seed);

struct ViTConfig {
    int grid_h = 32;
    int grid_w = 32;
    int channels = 8;
    int patch = 8;
    int dim = 64;  // encoder token dim D_v
    int encoder_blocks = 4;
    int decoder_blocks = 2;
    int decoder_dim = 48;
    int heads = 4;
    double mlp_ratio = 4.0;

    int tokens() const { return (grid_h / patch) * (grid_w / patch); }
    int patch_values() const { return patch * patch * channels; }
    void validate() const;
};

// MAE vision pathway: linear patch projection, learned grid positional table
// plus geospatial encoding, encoder over visible tokens only, decoder with a
// shared mask token.
class VisionMae {
public:
    VisionMae() = default;
    VisionMae(const std::string& name, const ViTConfig& cfg, Rng& rng);

    // tokens: full patch sequence [N_v, P^2 C]; e_vis (optional, may be
    // invalid) aligned with patch indices [N_v, D_v]
    Var encode_visible(Tape& t, const Tensor& tokens, const MaskPlan& plan,
                       const Var& e_vis) const;
    // fused: encoder/fusion output for visible tokens, in plan.visible order
    Var decode(Tape& t, const Var& fused, const MaskPlan& plan, const Var& e_vis) const;

    void collect(ParamList& out);

    ViTConfig cfg;
    Linear patch_embed;
    Parameter enc_pos;  // [N_v, D_v]
    std::vector<TransformerBlock> enc_blocks;
    LayerNormLayer enc_norm;
    Linear dec_embed;
    Parameter mask_token;  // [decoder_dim]
    Parameter dec_pos;     // [N_v, decoder_dim]
    Linear dec_geo;        // D_v -> decoder_dim projection of e_vis
    std::vector<TransformerBlock> dec_blocks;
    LayerNormLayer dec_norm;
    Linear head;  // decoder_dim -> P^2 C
};

// masked_mse + beta * cosine_distance_loss over masked patch tokens
Var vision_loss(const Var& pred, const Tensor& target_tokens, const MaskPlan& plan, double beta);

}  // namespace geofusion
