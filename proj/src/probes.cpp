#include "geofusion/probes.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "geofusion/io.hpp"

namespace geofusion {

TractSplits random_tract_split(int n_tracts, double test_frac, uint64_t seed) {
    if (test_frac <= 0.0 || test_frac >= 1.0)
        throw std::invalid_argument("random_tract_split: test_frac in (0,1)");
    Rng rng(Rng::mix(seed, 0x517D));
    std::vector<int> idx(n_tracts);
    for (int i = 0; i < n_tracts; ++i) idx[i] = i;
    for (int i = n_tracts - 1; i > 0; --i) std::swap(idx[i], idx[rng.uniform_int(i + 1)]);
    const int n_test = std::max(1, static_cast<int>(test_frac * n_tracts));
    TractSplits s;
    s.name = "random";
    s.test.assign(idx.begin(), idx.begin() + n_test);
    s.train.assign(idx.begin() + n_test, idx.end());
    std::sort(s.test.begin(), s.test.end());
    std::sort(s.train.begin(), s.train.end());
    return s;
}

TractSplits region_holdout_split(const SyntheticWorld& world, const DatasetManifest& manifest) {
    TractSplits s;
    s.name = "region-holdout";
    for (int i = 0; i < world.n_tracts(); ++i) {
        if (manifest.in_holdout(world.tract_centroids_km()[i]))
            s.test.push_back(i);
        else
            s.train.push_back(i);
    }
    if (s.test.empty()) throw std::runtime_error("region_holdout_split: holdout box holds no tracts");
    return s;
}

// ---- embeddings ----------------------------------------------------------

EmbeddingTable extract_embeddings(const JointModel& model, const SyntheticWorld& world) {
    const double side = world.config().side_km;
    const double rkm = model.cfg.region_km;
    RegionGridSpec grid{model.cfg.vit.grid_h};
    EmbeddingTable table;
    table.provenance = "fused-tabular";
    table.vectors = Tensor({world.n_tracts(), model.cfg.tabt.row_dim});

    for (int ti = 0; ti < world.n_tracts(); ++ti) {
        Vec2 c = local_km(world.tracts()[ti].rep_point, world.config().ref);
        c.x = std::clamp(c.x, rkm / 2.0, side - rkm / 2.0);
        c.y = std::clamp(c.y, rkm / 2.0, side - rkm / 2.0);
        Region region = world.sample_region(c, rkm, grid);

        int row = -1;
        for (int i = 0; i < region.tracts.size(); ++i)
            if (region.tracts.records[i].id == ti) row = i;
        if (row < 0) throw std::runtime_error("extract_embeddings: tract missing from own region");

        MaskPlan vis_all = JointModel::all_visible(model.cfg.vit.tokens());
        MaskPlan tab_all = JointModel::all_visible(region.tracts.size());
        Tape t;
        auto fwd = model.forward(t, region, vis_all, tab_all);
        const Tensor& z = fwd.z_tab_fused.value();
        for (int j = 0; j < model.cfg.tabt.row_dim; ++j)
            table.vectors.at(ti, j) = z.at(row, j);
        table.ids.push_back(ti);
    }
    table.validate();
    return table;
}

namespace {

Tensor tract_vis_means(const SyntheticWorld& world) {
    const auto& cfg = world.config();
    const double cell = world.raster_cell_km();
    Tensor out({world.n_tracts(), cfg.channels});
    for (int ti = 0; ti < world.n_tracts(); ++ti) {
        const auto& ring = world.tract_rings_km()[ti];
        double x0 = 1e18, y0 = 1e18, x1 = -1e18, y1 = -1e18;
        for (const auto& v : ring) {
            x0 = std::min(x0, v.x);
            y0 = std::min(y0, v.y);
            x1 = std::max(x1, v.x);
            y1 = std::max(y1, v.y);
        }
        std::vector<double> acc(cfg.channels, 0.0);
        int count = 0;
        for (int r = std::max(0, static_cast<int>(std::floor(y0 / cell - 0.5)));
             r < cfg.raster_cells; ++r) {
            const double cy = (r + 0.5) * cell;
            if (cy > y1) break;
            if (cy < y0) continue;
            for (int c = std::max(0, static_cast<int>(std::floor(x0 / cell - 0.5)));
                 c < cfg.raster_cells; ++c) {
                const double cx = (c + 0.5) * cell;
                if (cx > x1) break;
                if (cx < x0) continue;
                if (!point_in_polygon({cx, cy}, ring)) continue;
                ++count;
                for (int ch = 0; ch < cfg.channels; ++ch) acc[ch] += world.raster().at3(r, c, ch);
            }
        }
        if (count == 0) {
            // nearest raster cell to the centroid
            const Vec2& cen = world.tract_centroids_km()[ti];
            int r = std::clamp(static_cast<int>(cen.y / cell), 0, cfg.raster_cells - 1);
            int c = std::clamp(static_cast<int>(cen.x / cell), 0, cfg.raster_cells - 1);
            for (int ch = 0; ch < cfg.channels; ++ch) acc[ch] = world.raster().at3(r, c, ch);
            count = 1;
        }
        for (int ch = 0; ch < cfg.channels; ++ch) out.at(ti, ch) = acc[ch] / count;
    }
    return out;
}

Tensor hcat(const Tensor& a, const Tensor& b) {
    Tensor out({a.shape[0], a.shape[1] + b.shape[1]});
    for (int i = 0; i < a.shape[0]; ++i) {
        for (int j = 0; j < a.shape[1]; ++j) out.at(i, j) = a.at(i, j);
        for (int j = 0; j < b.shape[1]; ++j) out.at(i, a.shape[1] + j) = b.at(i, j);
    }
    return out;
}

}  // namespace

EmbeddingTable baseline_embeddings(const SyntheticWorld& world, BaselineKind kind,
                                   const EmbeddingTable* tab_mae) {
    EmbeddingTable table;
    const int n = world.n_tracts();
    const int f = world.config().n_features;
    for (int i = 0; i < n; ++i) table.ids.push_back(i);

    Tensor tab({n, f});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < f; ++j) tab.at(i, j) = world.tracts()[i].features[j];

    switch (kind) {
        case BaselineKind::Tab:
            table.provenance = "tab-only";
            table.vectors = tab;
            break;
        case BaselineKind::VisMean:
            table.provenance = "vis-mean";
            table.vectors = tract_vis_means(world);
            break;
        case BaselineKind::Concat:
            table.provenance = "feature-concat";
            table.vectors = hcat(tab, tract_vis_means(world));
            break;
        case BaselineKind::LateFusion: {
            if (!tab_mae)
                throw std::invalid_argument(
                    "baseline_embeddings: late_fusion requires tabular MAE latents "
                    "(missing checkpoint)");
            tab_mae->validate();
            if (tab_mae->size() != n)
                throw std::invalid_argument("baseline_embeddings: MAE latent count mismatch");
            table.provenance = "late-fusion";
            table.vectors = hcat(tract_vis_means(world), tab_mae->vectors);
            break;
        }
    }
    table.validate();
    return table;
}

EmbeddingTable tab_mae_latents(const JointModel& tab_only_model, const SyntheticWorld& world) {
    if (tab_only_model.cfg.fusion.layers != 0 || tab_only_model.cfg.tabt.row_attention)
        throw std::invalid_argument("tab_mae_latents: expected a no-fusion, no-row-attention model");
    EmbeddingTable table = extract_embeddings(tab_only_model, world);
    table.provenance = "tab-mae";
    return table;
}

ProbeResult probe_table(const EmbeddingTable& table, const SyntheticWorld& world,
                        const TractSplits& splits, double lambda) {
    table.validate();
    if (table.size() != world.n_tracts())
        throw std::invalid_argument("probe_table: table does not cover all tracts");
    // rows are ordered by tract id == world index
    std::vector<double> y;
    y.reserve(table.size());
    for (int i = 0; i < table.size(); ++i) y.push_back(world.targets()[table.ids[i]]);
    return fit_probe(table.vectors, y, splits.train, splits.test, lambda, splits.name);
}

// ---- attention locality ---------------------------------------------

std::string LocalityReport::to_text() const {
    std::ostringstream out;
    out.precision(6);
    out << "radius_km = " << radius_km << "\n";
    out << "regions = " << regions << "\n";
    out << "model_mass = " << model_mass << "\n";
    out << "uniform_mass = " << uniform_mass << "\n";
    out << "ratio = " << (uniform_mass > 0 ? model_mass / uniform_mass : 0.0) << "\n";
    return out.str();
}

LocalityReport attention_locality(const JointModel& model, const SyntheticWorld& world,
                                  const std::vector<Vec2>& centers_km, double radius_km) {
    if (model.cfg.fusion.layers == 0)
        throw std::invalid_argument("attention_locality: model has no cross-attention");
    LocalityReport report;
    report.radius_km = radius_km;
    RegionGridSpec grid{model.cfg.vit.grid_h};
    double model_acc = 0.0, uniform_acc = 0.0;
    int samples = 0;
    for (const auto& c : centers_km) {
        auto region = world.try_sample_region(c, model.cfg.region_km, grid);
        if (!region) continue;
        MaskPlan vis_all = JointModel::all_visible(model.cfg.vit.tokens());
        MaskPlan tab_all = JointModel::all_visible(region->tracts.size());
        Tape t;
        auto fwd = model.forward(t, *region, vis_all, tab_all, /*capture_attention=*/true);
        Tensor uniform(fwd.dist_tab_vis.shape);
        const double u = 1.0 / uniform.shape[1];
        for (auto& v : uniform.data) v = u;
        uniform_acc += attention_locality_stats(uniform, fwd.dist_tab_vis, radius_km);
        double head_acc = 0.0;
        for (const Tensor& w : fwd.attention.tab_from_vis)
            head_acc += attention_locality_stats(w, fwd.dist_tab_vis, radius_km);
        model_acc += head_acc / fwd.attention.tab_from_vis.size();
        ++report.regions;
        ++samples;
    }
    if (samples == 0) throw std::runtime_error("attention_locality: no usable regions");
    report.model_mass = model_acc / samples;
    report.uniform_mass = uniform_acc / samples;
    return report;
}

// ---- ablations -----------------------------------------------------------

VitPretrainCache::VitPretrainCache(const SyntheticWorld& world, const DatasetManifest& manifest,
                                   TrainConfig pretrain_cfg)
    : world_(world), manifest_(manifest), cfg_(std::move(pretrain_cfg)) {}

void VitPretrainCache::provide(JointModel& model, uint64_t init_seed) {
    // the vision pathway depends only on the vit config and encoding flag
    std::ostringstream key_src;
    key_src << model.cfg.vit.grid_h << " " << model.cfg.vit.grid_w << " "
            << model.cfg.vit.channels << " " << model.cfg.vit.patch << " " << model.cfg.vit.dim
            << " " << model.cfg.vit.encoder_blocks << " " << model.cfg.vit.decoder_blocks << " "
            << model.cfg.vit.decoder_dim << " " << model.cfg.vit.heads << " "
            << model.cfg.use_geo_encodings << " " << init_seed;
    const std::string s = key_src.str();
    const uint64_t key = fnv1a64(reinterpret_cast<const uint8_t*>(s.data()), s.size());

    for (const auto& e : entries_) {
        if (e.key != key) continue;
        ParamList vp = model.vit_params();
        if (e.weights.size() != vp.size())
            throw std::runtime_error("VitPretrainCache: parameter count changed");
        for (size_t i = 0; i < vp.size(); ++i) {
            if (vp[i]->name != e.weights[i].first)
                throw std::runtime_error("VitPretrainCache: parameter order changed");
            vp[i]->value = e.weights[i].second;
        }
        return;
    }

    ModelConfig pcfg = model.cfg;
    TrainConfig tcfg = cfg_;
    tcfg.seed = Rng::mix(cfg_.seed, init_seed);
    JointModel pre(pcfg, init_seed);
    pretrain_vit(pre, world_, manifest_, tcfg);

    Entry entry;
    entry.key = key;
    for (Parameter* p : pre.vit_params()) entry.weights.emplace_back(p->name, p->value);
    entries_.push_back(std::move(entry));

    ParamList vp = model.vit_params();
    for (size_t i = 0; i < vp.size(); ++i) vp[i]->value = entries_.back().weights[i].second;
}

void apply_ablation_point(const std::string& axis, const std::string& label, ModelConfig& model,
                          TrainConfig& train) {
    if (axis == "tab_dim") {
        const int dim = std::stoi(label);
        model.tabt.row_dim = dim;
        model.fusion.tab_dim = dim;
    } else if (axis == "encodings") {
        if (label == "none") {
            model.use_geo_encodings = false;
            model.use_spatial_bias = false;
        } else if (label == "geom_loc") {
            model.use_geo_encodings = true;
            model.use_spatial_bias = false;
        } else if (label == "geom_loc_bias") {
            model.use_geo_encodings = true;
            model.use_spatial_bias = true;
        } else {
            throw std::invalid_argument("unknown encodings grid label: " + label);
        }
    } else if (axis == "fusion_capacity") {
        // labels like 8H1L
        auto hpos = label.find('H');
        auto lpos = label.find('L');
        if (hpos == std::string::npos || lpos == std::string::npos)
            throw std::invalid_argument("fusion_capacity label must look like 8H1L");
        model.fusion.heads_tab_from_vis = std::stoi(label.substr(0, hpos));
        model.fusion.layers = std::stoi(label.substr(hpos + 1, lpos - hpos - 1));
    } else if (axis == "tab_mask") {
        train.tab_mask_ratio = std::stod(label);
    } else if (axis == "row_attn") {
        if (label == "no") {
            model.tabt.row_attention = false;
            model.tabt.decoder_row_attention = false;
        } else if (label == "yes") {
            model.tabt.row_attention = true;
            model.tabt.decoder_row_attention = true;
        } else {
            throw std::invalid_argument("row_attn grid label must be yes or no");
        }
    } else {
        throw std::invalid_argument("unknown ablation axis: " + axis);
    }
}

std::string AblationReport::to_text() const {
    std::ostringstream out;
    out.precision(6);
    out << "axis\t" << axis << "\n";
    out << "label\tprobe_r2\n";
    for (const auto& p : points) out << p.label << "\t" << p.r2 << "\n";
    return out.str();
}

AblationReport run_ablation(const std::string& axis, const std::vector<std::string>& grid,
                            const SyntheticWorld& world, const DatasetManifest& manifest,
                            const ModelConfig& base_model, const TrainConfig& joint_cfg,
                            VitPretrainCache& vit_cache, const TractSplits& splits) {
    AblationReport report;
    report.axis = axis;
    for (const std::string& label : grid) {
        ModelConfig mcfg = base_model;
        TrainConfig tcfg = joint_cfg;
        apply_ablation_point(axis, label, mcfg, tcfg);
        JointModel model(mcfg, tcfg.seed);
        vit_cache.provide(model, tcfg.seed);
        joint_train(model, world, manifest, tcfg);
        EmbeddingTable table = extract_embeddings(model, world);
        ProbeResult probe = probe_table(table, world, splits);
        report.points.push_back({label, probe.r2_test});
    }
    return report;
}

// ---- reconstruction export ---------------------------------------------

std::string reconstruction_report(const JointModel& model, const SyntheticWorld& world,
                                  const Vec2& center_km, double vis_mask_ratio,
                                  uint64_t mask_seed) {
    RegionGridSpec grid{model.cfg.vit.grid_h};
    Region region = world.sample_region(center_km, model.cfg.region_km, grid);
    const int n_v = model.cfg.vit.tokens();
    MaskPlan vis_plan = sample_mask(n_v, vis_mask_ratio, mask_seed);
    MaskPlan tab_all = JointModel::all_visible(region.tracts.size());

    Tape t;
    auto fwd = model.forward(t, region, vis_plan, tab_all);

    const auto& vc = model.cfg.vit;
    VisionGrid recon = unpatchify(fwd.vis_recon.value(), vc.grid_h, vc.grid_w, vc.channels,
                                  vc.patch, region.vision.origin, region.vision.cell_km);
    Tensor masked_tokens = fwd.vis_target;
    for (int i : vis_plan.masked)
        for (int j = 0; j < masked_tokens.shape[1]; ++j)
            masked_tokens.at(i, j) = std::numeric_limits<double>::quiet_NaN();
    VisionGrid masked = unpatchify(masked_tokens, vc.grid_h, vc.grid_w, vc.channels, vc.patch,
                                   region.vision.origin, region.vision.cell_km);

    std::ostringstream out;
    out.precision(8);
    out << "# reconstruction grids: input / masked / recon per channel\n";
    out << "# grid " << vc.grid_h << " x " << vc.grid_w << ", mask_ratio " << vis_mask_ratio
        << ", masked_tokens " << vis_plan.masked.size() << "\n";
    for (int ch = 0; ch < vc.channels; ++ch) {
        const char* names[3] = {"input", "masked", "recon"};
        const Tensor* grids[3] = {&region.vision.data, &masked.data, &recon.data};
        for (int s = 0; s < 3; ++s) {
            out << "channel " << ch << " " << names[s] << "\n";
            for (int i = 0; i < vc.grid_h; ++i) {
                for (int j = 0; j < vc.grid_w; ++j) {
                    if (j) out << "\t";
                    out << grids[s]->at3(i, j, ch);
                }
                out << "\n";
            }
        }
    }
    return out.str();
}

}  // namespace geofusion
