#include "geofusion/config.hpp"

namespace geofusion {

namespace {

double num(const KvFile& kv, const std::string& key, double fallback) {
    if (!kv.has(key)) return fallback;
    return std::stod(kv.get(key));
}

int num_i(const KvFile& kv, const std::string& key, int fallback) {
    if (!kv.has(key)) return fallback;
    return std::stoi(kv.get(key));
}

uint64_t num_u64(const KvFile& kv, const std::string& key, uint64_t fallback) {
    if (!kv.has(key)) return fallback;
    return std::stoull(kv.get(key));
}

bool flag(const KvFile& kv, const std::string& key, bool fallback) {
    if (!kv.has(key)) return fallback;
    const std::string v = kv.get(key);
    if (v == "1" || v == "true" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "no") return false;
    throw IoError("config: boolean expected for " + key);
}

}  // namespace

WorldConfig world_config_from(const KvFile& kv) {
    WorldConfig cfg;
    cfg.side_km = num(kv, "world.side_km", cfg.side_km);
    cfg.raster_cells = num_i(kv, "world.raster_cells", cfg.raster_cells);
    cfg.channels = num_i(kv, "world.channels", cfg.channels);
    cfg.tract_grid = num_i(kv, "world.tract_grid", cfg.tract_grid);
    cfg.tract_jitter = num(kv, "world.tract_jitter", cfg.tract_jitter);
    cfg.notch_prob = num(kv, "world.notch_prob", cfg.notch_prob);
    cfg.rep_jitter_km = num(kv, "world.rep_jitter_km", cfg.rep_jitter_km);
    cfg.n_features = num_i(kv, "world.n_features", cfg.n_features);
    cfg.tab_signal_features = num_i(kv, "world.tab_signal_features", cfg.tab_signal_features);
    cfg.feature_noise = num(kv, "world.feature_noise", cfg.feature_noise);
    cfg.target_noise = num(kv, "world.target_noise", cfg.target_noise);
    cfg.target_vis_weight = num(kv, "world.target_vis_weight", cfg.target_vis_weight);
    cfg.target_tab_weight = num(kv, "world.target_tab_weight", cfg.target_tab_weight);
    cfg.neighbor_radius_km = num(kv, "world.neighbor_radius_km", cfg.neighbor_radius_km);
    cfg.vis_tanh_weight = num(kv, "world.vis_tanh_weight", cfg.vis_tanh_weight);
    cfg.ref.lon = num(kv, "world.ref_lon", cfg.ref.lon);
    cfg.ref.lat = num(kv, "world.ref_lat", cfg.ref.lat);
    if (kv.has("world.latents")) {
        // "bumps:length_km" pairs, comma separated
        cfg.latents.clear();
        std::string spec = kv.get("world.latents");
        size_t pos = 0;
        while (pos < spec.size()) {
            size_t comma = spec.find(',', pos);
            std::string part = spec.substr(pos, comma == std::string::npos ? spec.npos : comma - pos);
            size_t colon = part.find(':');
            if (colon == std::string::npos) throw IoError("world.latents: expected bumps:length");
            cfg.latents.push_back(
                {std::stoi(part.substr(0, colon)), std::stod(part.substr(colon + 1))});
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
    }
    return cfg;
}

ModelConfig model_config_from(const KvFile& kv) {
    ModelConfig cfg;
    cfg.vit.grid_h = cfg.vit.grid_w = num_i(kv, "model.grid", 48);
    cfg.vit.channels = num_i(kv, "world.channels", cfg.vit.channels);
    cfg.vit.patch = num_i(kv, "model.patch", cfg.vit.patch);
    cfg.vit.dim = num_i(kv, "model.vis_dim", cfg.vit.dim);
    cfg.vit.encoder_blocks = num_i(kv, "model.enc_blocks", cfg.vit.encoder_blocks);
    cfg.vit.decoder_blocks = num_i(kv, "model.dec_blocks", cfg.vit.decoder_blocks);
    cfg.vit.decoder_dim = num_i(kv, "model.dec_dim", cfg.vit.decoder_dim);
    cfg.vit.heads = num_i(kv, "model.vit_heads", cfg.vit.heads);
    cfg.tabt.n_features = num_i(kv, "world.n_features", cfg.tabt.n_features);
    cfg.tabt.col_dim = num_i(kv, "model.col_dim", cfg.tabt.col_dim);
    cfg.tabt.col_blocks = num_i(kv, "model.col_blocks", cfg.tabt.col_blocks);
    cfg.tabt.col_heads = num_i(kv, "model.col_heads", cfg.tabt.col_heads);
    cfg.tabt.row_dim = num_i(kv, "model.tab_dim", cfg.tabt.row_dim);
    cfg.tabt.row_blocks = num_i(kv, "model.row_blocks", cfg.tabt.row_blocks);
    cfg.tabt.row_heads = num_i(kv, "model.row_heads", cfg.tabt.row_heads);
    cfg.tabt.decoder_blocks = num_i(kv, "model.tab_dec_blocks", cfg.tabt.decoder_blocks);
    cfg.tabt.row_attention = flag(kv, "model.row_attention", cfg.tabt.row_attention);
    cfg.tabt.decoder_row_attention =
        flag(kv, "model.decoder_row_attention", cfg.tabt.decoder_row_attention);
    cfg.fusion.vis_dim = cfg.vit.dim;
    cfg.fusion.tab_dim = cfg.tabt.row_dim;
    cfg.fusion.heads_tab_from_vis = num_i(kv, "model.fusion_heads_tab", cfg.fusion.heads_tab_from_vis);
    cfg.fusion.heads_vis_from_tab = num_i(kv, "model.fusion_heads_vis", cfg.fusion.heads_vis_from_tab);
    cfg.fusion.layers = num_i(kv, "model.fusion_layers", cfg.fusion.layers);
    cfg.fusion.bias.d0_km = num(kv, "model.bias_d0_km", cfg.fusion.bias.d0_km);
    cfg.fusion.bias.tau_km = num(kv, "model.bias_tau_km", cfg.fusion.bias.tau_km);
    cfg.region_km = num(kv, "model.region_km", cfg.region_km);
    cfg.use_geo_encodings = flag(kv, "model.use_geo", cfg.use_geo_encodings);
    cfg.use_spatial_bias = flag(kv, "model.use_bias", cfg.use_spatial_bias);
    return cfg;
}

TrainConfig train_config_from(const KvFile& kv, const std::string& prefix) {
    TrainConfig cfg;
    if (prefix == "pretrain") cfg = pretrain_defaults();
    cfg.epochs = num_i(kv, prefix + ".epochs", cfg.epochs);
    cfg.regions_per_epoch = num_i(kv, prefix + ".regions_per_epoch", cfg.regions_per_epoch);
    cfg.batch_size = num_i(kv, prefix + ".batch", cfg.batch_size);
    cfg.lr = num(kv, prefix + ".lr", cfg.lr);
    cfg.beta1 = num(kv, prefix + ".beta1", cfg.beta1);
    cfg.beta2 = num(kv, prefix + ".beta2", cfg.beta2);
    cfg.weight_decay = num(kv, prefix + ".weight_decay", cfg.weight_decay);
    cfg.warmup_epochs = num_i(kv, prefix + ".warmup_epochs", cfg.warmup_epochs);
    cfg.vis_mask_ratio = num(kv, prefix + ".vis_mask_ratio", cfg.vis_mask_ratio);
    cfg.tab_mask_ratio = num(kv, prefix + ".tab_mask_ratio", cfg.tab_mask_ratio);
    cfg.lambda_tab = num(kv, prefix + ".lambda_tab", cfg.lambda_tab);
    cfg.beta_cos = num(kv, prefix + ".beta_cos", cfg.beta_cos);
    cfg.freeze_vit = flag(kv, prefix + ".freeze_vit", cfg.freeze_vit);
    cfg.tab_only = flag(kv, prefix + ".tab_only", cfg.tab_only);
    cfg.seed = num_u64(kv, prefix + ".seed", cfg.seed);
    return cfg;
}

SplitParams split_params_from(const KvFile& kv) {
    SplitParams p;
    p.n_regions = num_i(kv, "split.n_regions", p.n_regions);
    p.region_km = num(kv, "split.region_km", p.region_km);
    p.holdout_frac = num(kv, "split.holdout_frac", p.holdout_frac);
    p.seed = num_u64(kv, "split.seed", p.seed);
    return p;
}

}  // namespace geofusion
