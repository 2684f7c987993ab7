#pragma once

#include <functional>
#include <string>
#include <vector>

#include "geofusion/eval.hpp"
#include "geofusion/model.hpp"
#include "geofusion/train.hpp"
#include "geofusion/world.hpp"

namespace geofusion {

// ---- tract-level probe splits -----------------------------------------

struct TractSplits {
    std::vector<int> train;
    std::vector<int> test;
    std::string name;
};

TractSplits random_tract_split(int n_tracts, double test_frac, uint64_t seed);
// test = tracts whose centroid lies in the manifest's holdout box
TractSplits region_holdout_split(const SyntheticWorld& world, const DatasetManifest& manifest);

// ---- embeddings ----------------------------------------------------------

// Vision-enriched tabular embeddings: full-visibility forward on the region
// centered at each tract's representative point (clamped into the extent),
// recording that tract's fused row.
EmbeddingTable extract_embeddings(const JointModel& model, const SyntheticWorld& world);

enum class BaselineKind { Tab, VisMean, Concat, LateFusion };

// tab: standardized input features. vis_mean: raster channels averaged over
// cells inside each polygon (nearest cell fallback). concat: tab ++ vis_mean.
// late_fusion: vis_mean ++ latents of a separately trained tabular MAE.
EmbeddingTable baseline_embeddings(const SyntheticWorld& world, BaselineKind kind,
                                   const EmbeddingTable* tab_mae_latents = nullptr);

// Latents of the no-fusion, no-row-attention tabular MAE (per-row pathway).
EmbeddingTable tab_mae_latents(const JointModel& tab_only_model, const SyntheticWorld& world);

ProbeResult probe_table(const EmbeddingTable& table, const SyntheticWorld& world,
                        const TractSplits& splits, double lambda = -1.0);

// ---- attention locality ---------------------------------------------

struct LocalityReport {
    double model_mass = 0.0;    // mean tab<-vis mass within radius
    double uniform_mass = 0.0;  // same under uniform attention
    double radius_km = 10.0;
    int regions = 0;

    std::string to_text() const;
};

LocalityReport attention_locality(const JointModel& model, const SyntheticWorld& world,
                                  const std::vector<Vec2>& centers_km, double radius_km);

// ---- ablations -----------------------------------------------------------

// Caches pretrained ViT weights per (vit config, encodings flag, seed) so
// ablation variants that share a vision pathway reuse one pretraining run.
class VitPretrainCache {
public:
    VitPretrainCache(const SyntheticWorld& world, const DatasetManifest& manifest,
                     TrainConfig pretrain_cfg);

    // loads (pretraining on first use) the matching ViT weights into model
    void provide(JointModel& model, uint64_t init_seed);

private:
    const SyntheticWorld& world_;
    const DatasetManifest& manifest_;
    TrainConfig cfg_;
    struct Entry {
        uint64_t key;
        std::vector<std::pair<std::string, Tensor>> weights;
    };
    std::vector<Entry> entries_;
};

struct AblationPoint {
    std::string label;
    double r2 = 0.0;
};

struct AblationReport {
    std::string axis;
    std::vector<AblationPoint> points;

    std::string to_text() const;
};

// axis in {tab_dim, encodings, fusion_capacity, tab_mask, row_attn}; the grid
// holds axis-specific labels (dims, flag names, HxL capacities, ratios).
AblationReport run_ablation(const std::string& axis, const std::vector<std::string>& grid,
                            const SyntheticWorld& world, const DatasetManifest& manifest,
                            const ModelConfig& base_model, const TrainConfig& joint_cfg,
                            VitPretrainCache& vit_cache, const TractSplits& splits);

// applies one ablation grid point to copies of the base configs
void apply_ablation_point(const std::string& axis, const std::string& label, ModelConfig& model,
                          TrainConfig& train);

// ---- reconstruction export ---------------------------------------------

// Side-by-side numeric grids (input / masked input / reconstruction) per
// channel, tab-delimited. Masked cells of the "masked" grid print as nan.
std::string reconstruction_report(const JointModel& model, const SyntheticWorld& world,
                                  const Vec2& center_km, double vis_mask_ratio,
                                  uint64_t mask_seed);

}  // namespace geofusion
