#include "geofusion/vision.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace geofusion {

PatchSequence patchify(const VisionGrid& grid, int patch) {
    if (patch <= 0 || grid.height % patch != 0 || grid.width % patch != 0)
        throw std::invalid_argument("patchify: grid dims must be divisible by patch size");
    const int ph = grid.height / patch;
    const int pw = grid.width / patch;
    const int c = grid.channels;
    PatchSequence seq;
    seq.patch = patch;
    seq.tokens = Tensor({ph * pw, patch * patch * c});
    for (int pi = 0; pi < ph; ++pi) {
        for (int pj = 0; pj < pw; ++pj) {
            const int token = pi * pw + pj;
            double* out = seq.tokens.row(token);
            for (int r = 0; r < patch; ++r)
                for (int cc = 0; cc < patch; ++cc)
                    for (int ch = 0; ch < c; ++ch)
                        out[(r * patch + cc) * c + ch] =
                            grid.data.at3(pi * patch + r, pj * patch + cc, ch);
            const double cx = (pj * patch + patch * 0.5) * grid.cell_km;
            const double cy = (pi * patch + patch * 0.5) * grid.cell_km;
            seq.centers.push_back(from_local_km({cx, cy}, grid.origin));
        }
    }
    return seq;
}

VisionGrid unpatchify(const Tensor& tokens, int height, int width, int channels, int patch,
                      const GeoPoint& origin, double cell_km) {
    const int ph = height / patch;
    const int pw = width / patch;
    if (tokens.rank() != 2 || tokens.shape[0] != ph * pw ||
        tokens.shape[1] != patch * patch * channels)
        throw std::invalid_argument("unpatchify: token shape inconsistent with grid dims");
    VisionGrid grid;
    grid.height = height;
    grid.width = width;
    grid.channels = channels;
    grid.origin = origin;
    grid.cell_km = cell_km;
    grid.data = Tensor({height, width, channels});
    for (int pi = 0; pi < ph; ++pi)
        for (int pj = 0; pj < pw; ++pj) {
            const double* in = tokens.row(pi * pw + pj);
            for (int r = 0; r < patch; ++r)
                for (int cc = 0; cc < patch; ++cc)
                    for (int ch = 0; ch < channels; ++ch)
                        grid.data.at3(pi * patch + r, pj * patch + cc, ch) =
                            in[(r * patch + cc) * channels + ch];
        }
    return grid;
}

MaskPlan sample_mask(int n, double ratio, uint64_t seed) {
    if (n < 2) throw std::invalid_argument("sample_mask: need at least 2 tokens");
    if (ratio <= 0.0 || ratio >= 1.0) throw std::invalid_argument("sample_mask: ratio in (0,1)");
    const int n_masked = static_cast<int>(std::floor(ratio * n));
    const int n_visible = n - n_masked;
    if (n_masked == 0 || n_visible == 0)
        throw std::invalid_argument("sample_mask: degenerate split (all or none masked)");
    Rng rng(seed);
    MaskPlan plan;
    plan.ratio = ratio;
    plan.masked = rng.sample_without_replacement(n, n_masked);
    std::sort(plan.masked.begin(), plan.masked.end());
    std::vector<char> is_masked(n, 0);
    for (int i : plan.masked) is_masked[i] = 1;
    for (int i = 0; i < n; ++i)
        if (!is_masked[i]) plan.visible.push_back(i);
    return plan;
}

void ViTConfig::validate() const {
    if (grid_h % patch != 0 || grid_w % patch != 0)
        throw std::invalid_argument("ViTConfig: grid dims must be divisible by patch size");
    if (dim % heads != 0 || decoder_dim % heads != 0)
        throw std::invalid_argument("ViTConfig: dims must be divisible by heads");
}

VisionMae::VisionMae(const std::string& name, const ViTConfig& config, Rng& rng) : cfg(config) {
    cfg.validate();
    const int n = cfg.tokens();
    patch_embed = Linear(name + ".patch_embed", cfg.patch_values(), cfg.dim, rng);
    enc_pos = Parameter(name + ".enc_pos", rng.normal_tensor({n, cfg.dim}, 0.02));
    for (int i = 0; i < cfg.encoder_blocks; ++i)
        enc_blocks.emplace_back(name + ".enc" + std::to_string(i), cfg.dim, cfg.heads,
                                cfg.mlp_ratio, rng);
    enc_norm = LayerNormLayer(name + ".enc_norm", cfg.dim);
    dec_embed = Linear(name + ".dec_embed", cfg.dim, cfg.decoder_dim, rng);
    mask_token = Parameter(name + ".mask_token", rng.normal_tensor({cfg.decoder_dim}, 0.02));
    dec_pos = Parameter(name + ".dec_pos", rng.normal_tensor({n, cfg.decoder_dim}, 0.02));
    dec_geo = Linear(name + ".dec_geo", cfg.dim, cfg.decoder_dim, rng);
    for (int i = 0; i < cfg.decoder_blocks; ++i)
        dec_blocks.emplace_back(name + ".dec" + std::to_string(i), cfg.decoder_dim, cfg.heads,
                                cfg.mlp_ratio, rng);
    dec_norm = LayerNormLayer(name + ".dec_norm", cfg.decoder_dim);
    head = Linear(name + ".head", cfg.decoder_dim, cfg.patch_values(), rng);
}

Var VisionMae::encode_visible(Tape& t, const Tensor& tokens, const MaskPlan& plan,
                              const Var& e_vis) const {
    if (tokens.shape[0] != cfg.tokens() || tokens.shape[1] != cfg.patch_values())
        throw std::invalid_argument("encode_visible: token shape mismatch");
    auto& self = const_cast<VisionMae&>(*this);
    Var x = patch_embed.forward(t, take_rows(t.constant(tokens), plan.visible));
    x = add(x, take_rows(t.leaf(self.enc_pos), plan.visible));
    if (e_vis.valid()) x = add(x, take_rows(e_vis, plan.visible));
    for (const auto& blk : enc_blocks) x = blk.forward(t, x);
    return enc_norm.forward(t, x);
}

Var VisionMae::decode(Tape& t, const Var& fused, const MaskPlan& plan, const Var& e_vis) const {
    auto& self = const_cast<VisionMae&>(*this);
    Var x = dec_embed.forward(t, fused);
    Var seq = assemble_rows(cfg.tokens(), plan.visible, x, t.leaf(self.mask_token));
    seq = add(seq, t.leaf(self.dec_pos));
    if (e_vis.valid()) seq = add(seq, dec_geo.forward(t, e_vis));
    for (const auto& blk : dec_blocks) seq = blk.forward(t, seq);
    return head.forward(t, dec_norm.forward(t, seq));
}

void VisionMae::collect(ParamList& out) {
    patch_embed.collect(out);
    out.push_back(&enc_pos);
    for (auto& b : enc_blocks) b.collect(out);
    enc_norm.collect(out);
    dec_embed.collect(out);
    out.push_back(&mask_token);
    out.push_back(&dec_pos);
    dec_geo.collect(out);
    for (auto& b : dec_blocks) b.collect(out);
    dec_norm.collect(out);
    head.collect(out);
}

Var vision_loss(const Var& pred, const Tensor& target_tokens, const MaskPlan& plan, double beta) {
    if (beta < 0.0) throw std::invalid_argument("vision_loss: beta must be >= 0");
    Var loss = masked_mse(pred, target_tokens, plan.masked);
    if (beta > 0.0)
        loss = add(loss, scale(cosine_distance_loss(pred, target_tokens, plan.masked), beta));
    return loss;
}

}  // namespace geofusion
