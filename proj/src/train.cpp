#include "geofusion/train.hpp"

#include <cmath>
#include <fstream>
#include <unordered_map>

#include "geofusion/io.hpp"

namespace geofusion {

void TrainConfig::validate() const {
    if (epochs <= 0 || regions_per_epoch <= 0 || batch_size <= 0)
        throw std::invalid_argument("TrainConfig: epoch/batch sizes must be positive");
    if (vis_mask_ratio <= 0 || vis_mask_ratio >= 1 || tab_mask_ratio <= 0 || tab_mask_ratio >= 1)
        throw std::invalid_argument("TrainConfig: mask ratios must lie in (0, 1)");
    if (lambda_tab < 0 || beta_cos < 0)
        throw std::invalid_argument("TrainConfig: loss weights must be >= 0");
}

TrainConfig pretrain_defaults() {
    TrainConfig cfg;
    cfg.epochs = 30;
    cfg.regions_per_epoch = 400;
    cfg.batch_size = 16;
    cfg.lr = 1.5e-4;
    cfg.weight_decay = 0.05;
    cfg.warmup_epochs = 2;
    cfg.vis_mask_ratio = 0.75;
    cfg.beta_cos = 1.0;
    cfg.freeze_vit = false;
    return cfg;
}

namespace {

struct LossLog {
    std::ofstream out;

    explicit LossLog(const std::string& path) {
        if (path.empty()) return;
        out.open(path, std::ios::trunc);
        if (!out) throw IoError("cannot open loss log: " + path);
        out.precision(17);
        out << "step\tlr\tloss_vis\tloss_tab\tloss_joint\n";
    }

    void line(int64_t step, double lr, double lv, double lt, double lj) {
        if (!out.is_open()) return;
        out << step << "\t" << lr << "\t" << lv << "\t" << lt << "\t" << lj << "\n";
    }
};

uint64_t mask_seed(uint64_t base, int epoch, int region_index, int modality) {
    return Rng::mix(base, 0xABC000 + static_cast<uint64_t>(epoch) * 1000003 +
                              static_cast<uint64_t>(region_index) * 7 +
                              static_cast<uint64_t>(modality));
}

// fixed-mask validation pass; regions come from the manifest's val centers
std::pair<double, double> validate_joint(const JointModel& model, const SyntheticWorld& world,
                                         const DatasetManifest& manifest, const TrainConfig& cfg,
                                         bool vision_only) {
    RegionGridSpec grid{model.cfg.vit.grid_h};
    double sum_vis = 0.0, sum_tab = 0.0;
    int count = 0;
    for (size_t vi = 0; vi < manifest.val_centers.size(); ++vi) {
        auto region = world.try_sample_region(manifest.val_centers[vi], manifest.region_km, grid);
        if (!region) continue;
        const int n_v = model.cfg.vit.tokens();
        MaskPlan vis_plan =
            sample_mask(n_v, cfg.vis_mask_ratio, mask_seed(cfg.seed, -1, static_cast<int>(vi), 0));
        Tape t;
        if (vision_only) {
            Tensor target;
            Var rec = model.vision_forward(t, region->vision, vis_plan, &target);
            sum_vis += scalar_value(vision_loss(rec, target, vis_plan, cfg.beta_cos));
        } else {
            const int n_t = region->tracts.size();
            MaskPlan tab_plan = sample_mask(n_t, cfg.tab_mask_ratio,
                                            mask_seed(cfg.seed, -1, static_cast<int>(vi), 1));
            auto fwd = model.forward(t, *region, vis_plan, tab_plan);
            sum_vis += scalar_value(vision_loss(fwd.vis_recon, fwd.vis_target, vis_plan, cfg.beta_cos));
            sum_tab += scalar_value(masked_l1(fwd.tab_recon, fwd.tab_target, tab_plan.masked));
        }
        ++count;
    }
    if (count == 0) throw std::runtime_error("validation: no usable val regions");
    return {sum_vis / count, sum_tab / count};
}

TrainResult run_training(JointModel& model, const SyntheticWorld& world,
                         const DatasetManifest& manifest, const TrainConfig& cfg,
                         const std::string& log_path, bool vision_only) {
    cfg.validate();
    TrainResult result;
    LossLog log(log_path);
    RegionGridSpec grid{model.cfg.vit.grid_h};

    ParamList params;
    if (vision_only) {
        params = model.vit_params();
    } else if (cfg.tab_only) {
        params = model.tabt_params();
    } else {
        params = model.tabt_params();
        ParamList f = model.fusion_params();
        params.insert(params.end(), f.begin(), f.end());
        if (!cfg.freeze_vit) {
            ParamList v = model.vit_params();
            params.insert(params.end(), v.begin(), v.end());
        }
    }
    AdamW opt(params, AdamWConfig{cfg.beta1, cfg.beta2, 1e-8, cfg.weight_decay});

    const int steps_per_epoch = (cfg.regions_per_epoch + cfg.batch_size - 1) / cfg.batch_size;
    LrSchedule sched{cfg.lr, static_cast<int64_t>(cfg.warmup_epochs) * steps_per_epoch,
                     static_cast<int64_t>(cfg.epochs) * steps_per_epoch};

    auto [v0, t0] = validate_joint(model, world, manifest, cfg, vision_only);
    result.init_val_vis = v0;
    result.init_val_tab = t0;

    int64_t step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<Vec2> centers =
            resample_train_centers(world, manifest, epoch, cfg.regions_per_epoch);
        int cursor = 0;
        while (cursor < static_cast<int>(centers.size())) {
            const int batch_end = std::min(cursor + cfg.batch_size, static_cast<int>(centers.size()));
            double batch_vis = 0.0, batch_tab = 0.0;
            int batch_n = 0;
            for (int r = cursor; r < batch_end; ++r) {
                auto region = world.try_sample_region(centers[r], manifest.region_km, grid);
                if (!region) {
                    ++result.skipped_regions;
                    continue;
                }
                const int n_v = model.cfg.vit.tokens();
                MaskPlan vis_plan =
                    sample_mask(n_v, cfg.vis_mask_ratio, mask_seed(cfg.seed, epoch, r, 0));
                Tape t;
                Var loss_vis, loss_tab;
                if (vision_only) {
                    Tensor target;
                    Var rec = model.vision_forward(t, region->vision, vis_plan, &target);
                    loss_vis = vision_loss(rec, target, vis_plan, cfg.beta_cos);
                } else {
                    MaskPlan tab_plan = sample_mask(region->tracts.size(), cfg.tab_mask_ratio,
                                                    mask_seed(cfg.seed, epoch, r, 1));
                    auto fwd = model.forward(t, *region, vis_plan, tab_plan);
                    loss_vis = vision_loss(fwd.vis_recon, fwd.vis_target, vis_plan, cfg.beta_cos);
                    loss_tab = masked_l1(fwd.tab_recon, fwd.tab_target, tab_plan.masked);
                }

                Var total;
                if (vision_only) {
                    total = loss_vis;
                } else if (cfg.tab_only) {
                    total = loss_tab;
                } else {
                    total = add(loss_vis, scale(loss_tab, cfg.lambda_tab));
                }
                // scale for the batch mean before accumulating gradients
                Var scaled = scale(total, 1.0 / (batch_end - cursor));
                try {
                    t.backward(scaled);
                } catch (const std::runtime_error& e) {
                    throw std::runtime_error("training aborted at step " + std::to_string(step) +
                                             ": " + e.what());
                }
                batch_vis += loss_vis.valid() ? scalar_value(loss_vis) : 0.0;
                batch_tab += loss_tab.valid() ? scalar_value(loss_tab) : 0.0;
                ++batch_n;
            }
            if (batch_n > 0) {
                const double lr = sched.at(step);
                opt.step(lr);
                batch_vis /= batch_n;
                batch_tab /= batch_n;
                log.line(step, lr, batch_vis, batch_tab, batch_vis + cfg.lambda_tab * batch_tab);
            }
            ++step;
            cursor = batch_end;
        }
        auto [vv, vt] = validate_joint(model, world, manifest, cfg, vision_only);
        result.val_vis_curve.push_back(vv);
        result.val_tab_curve.push_back(vt);
    }
    result.steps = step;
    result.final_val_vis = result.val_vis_curve.empty() ? v0 : result.val_vis_curve.back();
    result.final_val_tab = result.val_tab_curve.empty() ? t0 : result.val_tab_curve.back();
    return result;
}

}  // namespace

TrainResult pretrain_vit(JointModel& model, const SyntheticWorld& world,
                         const DatasetManifest& manifest, const TrainConfig& cfg,
                         const std::string& log_path) {
    return run_training(model, world, manifest, cfg, log_path, /*vision_only=*/true);
}

TrainResult joint_train(JointModel& model, const SyntheticWorld& world,
                        const DatasetManifest& manifest, const TrainConfig& cfg,
                        const std::string& log_path) {
    return run_training(model, world, manifest, cfg, log_path, /*vision_only=*/false);
}

// ---- checkpoints -------------------------------------------------------

namespace {
constexpr uint32_t kCheckpointVersion = 1;
}

void save_checkpoint(const std::string& path, JointModel& model, AdamW* optimizer, int64_t step,
                     uint64_t rng_state) {
    BinWriter w("GFCK", kCheckpointVersion);
    w.u64(model.cfg.hash());
    w.i64(step);
    w.u64(rng_state);
    ParamList params = model.all_params();
    w.u32(static_cast<uint32_t>(params.size()));
    for (Parameter* p : params) {
        w.str(p->name);
        w.tensor(p->value);
    }
    if (optimizer) {
        w.u32(1);
        w.i64(optimizer->step_count());
        w.u32(static_cast<uint32_t>(optimizer->params().size()));
        for (size_t i = 0; i < optimizer->params().size(); ++i) {
            w.str(optimizer->params()[i]->name);
            w.tensor(optimizer->first_moments()[i]);
            w.tensor(optimizer->second_moments()[i]);
        }
    } else {
        w.u32(0);
    }
    w.save(path);
}

CheckpointInfo load_checkpoint(const std::string& path, JointModel& model, AdamW* optimizer) {
    BinReader r(path, "GFCK", kCheckpointVersion);
    const uint64_t hash = r.u64();
    if (hash != model.cfg.hash())
        throw VersionError("checkpoint config hash mismatch: model architecture differs");
    CheckpointInfo info;
    info.step = r.i64();
    info.rng_state = r.u64();

    ParamList params = model.all_params();
    std::unordered_map<std::string, Parameter*> by_name;
    for (Parameter* p : params) by_name[p->name] = p;

    const uint32_t count = r.u32();
    if (count != params.size())
        throw VersionError("checkpoint parameter count mismatch");
    for (uint32_t i = 0; i < count; ++i) {
        std::string name = r.str();
        Tensor value = r.tensor();
        auto it = by_name.find(name);
        if (it == by_name.end()) throw VersionError("checkpoint has unknown parameter: " + name);
        if (it->second->value.shape != value.shape)
            throw VersionError("checkpoint shape mismatch for: " + name);
        it->second->value = std::move(value);
        it->second->zero_grad();
    }

    const uint32_t has_opt = r.u32();
    if (has_opt && optimizer) {
        optimizer->set_step_count(r.i64());
        const uint32_t n = r.u32();
        if (n != optimizer->params().size())
            throw VersionError("checkpoint optimizer state count mismatch");
        std::unordered_map<std::string, size_t> slot;
        for (size_t i = 0; i < optimizer->params().size(); ++i)
            slot[optimizer->params()[i]->name] = i;
        for (uint32_t i = 0; i < n; ++i) {
            std::string name = r.str();
            Tensor m = r.tensor();
            Tensor v = r.tensor();
            auto it = slot.find(name);
            if (it == slot.end())
                throw VersionError("checkpoint optimizer state for unknown parameter: " + name);
            optimizer->first_moments()[it->second] = std::move(m);
            optimizer->second_moments()[it->second] = std::move(v);
        }
    }
    return info;
}

}  // namespace geofusion
