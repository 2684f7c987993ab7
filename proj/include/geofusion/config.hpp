#pragma once

#include <string>

#include "geofusion/io.hpp"
#include "geofusion/model.hpp"
#include "geofusion/train.hpp"
#include "geofusion/world.hpp"

namespace geofusion {

// key = value config surface shared by the CLI subcommands. Every key is
// optional; defaults are the desk-scale configuration.
WorldConfig world_config_from(const KvFile& kv);
ModelConfig model_config_from(const KvFile& kv);
TrainConfig train_config_from(const KvFile& kv, const std::string& prefix);  // "train" | "pretrain"

struct SplitParams {
    int n_regions = 500;
    double region_km = 80.0;
    double holdout_frac = 0.3;
    uint64_t seed = 1339;
};
SplitParams split_params_from(const KvFile& kv);

}  // namespace geofusion
