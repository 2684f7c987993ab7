#pragma once

#include <string>
#include <vector>

#include "geofusion/model.hpp"
#include "geofusion/optim.hpp"
#include "geofusion/world.hpp"

namespace geofusion {

struct TrainConfig {
    int epochs = 50;
    int regions_per_epoch = 500;
    int batch_size = 16;
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.95;
    double weight_decay = 0.04;
    int warmup_epochs = 2;
    double vis_mask_ratio = 0.5;
    double tab_mask_ratio = 0.5;
    double lambda_tab = 1.0;  // L_joint = L_vis + lambda * L_tab
    double beta_cos = 0.0;    // cosine term weight inside L_vis
    bool freeze_vit = true;
    bool tab_only = false;  // tabular MAE baseline: tabular loss/params only
    uint64_t seed = 42;

    void validate() const;
};

// Paper-style pretraining defaults, desk-scaled epoch volume.
TrainConfig pretrain_defaults();

struct TrainResult {
    double init_val_vis = 0.0;
    double init_val_tab = 0.0;
    double final_val_vis = 0.0;
    double final_val_tab = 0.0;
    std::vector<double> val_vis_curve;
    std::vector<double> val_tab_curve;
    int skipped_regions = 0;
    int64_t steps = 0;
};

// MAE pretraining of the vision pathway on crops (no tabular input).
TrainResult pretrain_vit(JointModel& model, const SyntheticWorld& world,
                         const DatasetManifest& manifest, const TrainConfig& cfg,
                         const std::string& log_path = "");

// Joint masked-autoencoding training. With freeze_vit the ViT pathway
// (including f_vis) stays bitwise untouched.
TrainResult joint_train(JointModel& model, const SyntheticWorld& world,
                        const DatasetManifest& manifest, const TrainConfig& cfg,
                        const std::string& log_path = "");

// ---- checkpoints -------------------------------------------------------

void save_checkpoint(const std::string& path, JointModel& model, AdamW* optimizer, int64_t step,
                     uint64_t rng_state);

struct CheckpointInfo {
    int64_t step = 0;
    uint64_t rng_state = 0;
};

// Restores parameters by name (and optimizer state when an optimizer with a
// matching parameter list is given). Raises VersionError on a config-hash
// mismatch.
CheckpointInfo load_checkpoint(const std::string& path, JointModel& model,
                               AdamW* optimizer = nullptr);

}  // namespace geofusion
