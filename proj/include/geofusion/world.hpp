#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "geofusion/tabular.hpp"
#include "geofusion/vision.hpp"

namespace geofusion {

// Smooth scalar field over the plane: a sum of isotropic Gaussian bumps,
// normalized to zero mean / unit variance over the raster.
struct LatentFieldSpec {
    int bumps = 40;
    double length_km = 60.0;
};

struct WorldConfig {
    double side_km = 640.0;
    int raster_cells = 64;  // vision raster is raster_cells^2 x channels
    int channels = 8;
    int tract_grid = 45;           // tract lattice is tract_grid^2 cells
    double tract_jitter = 0.35;    // node jitter as a fraction of cell size
    double notch_prob = 0.35;      // chance a tract gets a concave notch
    double rep_jitter_km = 0.0;    // representative-point jitter off the centroid
    int n_features = 12;           // F
    int tab_signal_features = 3;   // features carrying the tabular-only latent
    double feature_noise = 0.6;    // per-tract iid noise std on raw features
    double target_noise = 0.25;    // label noise std (target has unit-ish scale)
    double target_vis_weight = 0.8;
    double target_tab_weight = 1.0;
    double neighbor_radius_km = 18.0;  // kernel width of the target's tabular term
    double vis_tanh_weight = 0.6;      // nonlinear share of vision channels
    int tract_avg_samples = 4;         // per-axis samples for tract averaging
    GeoPoint ref{-100.0, 40.0};        // geographic anchor of the (0,0) corner
    // latent roles: [0] vision-only, [1] tabular-only, [2] shared long-range,
    // [3] shared mid-range, [4+] vision clutter
    std::vector<LatentFieldSpec> latents{
        {40, 60.0}, {40, 60.0}, {40, 90.0}, {60, 45.0}, {40, 70.0}};

    void validate() const;
    GeoPoint geopoint_at(const Vec2& km) const { return from_local_km(km, ref); }
};

// The resampled model crop of one region.
struct RegionGridSpec {
    int cells = 48;
};

struct Region {
    GeoPoint center;
    double size_km = 0.0;
    VisionGrid vision;
    TractTable tracts;  // record ids are world tract indices
};

class SyntheticWorld {
public:
    static SyntheticWorld generate(const WorldConfig& cfg, uint64_t seed);

    // normalized latent field k at a km-plane point
    double latent_at(int k, double x, double y) const;
    // normalized vision channels at a km-plane point
    std::vector<double> vision_at(double x, double y) const;

    std::optional<Region> try_sample_region(const Vec2& center_km, double size_km,
                                            const RegionGridSpec& grid) const;
    Region sample_region(const Vec2& center_km, double size_km, const RegionGridSpec& grid) const;

    int n_tracts() const { return static_cast<int>(tracts_.size()); }
    const std::vector<TractRecord>& tracts() const { return tracts_; }
    const std::vector<std::vector<Vec2>>& tract_rings_km() const { return rings_km_; }
    const std::vector<Vec2>& tract_centroids_km() const { return centroids_km_; }
    const std::vector<double>& targets() const { return targets_; }
    const Tensor& raster() const { return raster_; }  // [cells, cells, channels]
    const WorldConfig& config() const { return cfg_; }
    uint64_t seed() const { return seed_; }
    const std::vector<double>& feature_mean() const { return feat_mean_; }
    const std::vector<double>& feature_std() const { return feat_std_; }
    // true per-tract latent averages, generator-side ground truth
    const Tensor& tract_latent_avg() const { return tract_latent_avg_; }

    double raster_cell_km() const { return cfg_.side_km / cfg_.raster_cells; }
    uint64_t content_hash() const;

    void save(const std::string& path) const;
    static SyntheticWorld load(const std::string& path);

private:
    struct Bump {
        double x, y, amp, sigma;
    };

    WorldConfig cfg_;
    uint64_t seed_ = 0;
    std::vector<std::vector<Bump>> bumps_;
    std::vector<double> latent_shift_, latent_scale_;   // raster normalization
    Tensor vis_linear_;                                 // [C, K]
    Tensor vis_tanh_;                                   // [C, K]
    std::vector<double> chan_shift_, chan_scale_;
    Tensor tab_mix_;                                    // [F, K]
    Tensor raster_;                                     // cached channels
    std::vector<TractRecord> tracts_;                   // standardized features
    std::vector<std::vector<Vec2>> rings_km_;           // closed rings, km plane
    std::vector<Vec2> centroids_km_;
    Tensor tract_latent_avg_;                           // [N, K]
    std::vector<double> targets_;
    std::vector<double> feat_mean_, feat_std_;

    double latent_raw(int k, double x, double y) const;
};

// Region container format (write/read round trip, versioned + checksummed).
void write_region(const Region& region, const std::string& path);
Region read_region(const std::string& path);

// Train/val region centers plus a spatially disjoint holdout sub-box.
struct DatasetManifest {
    uint64_t world_seed = 0;
    uint64_t split_seed = 0;
    double region_km = 80.0;
    double holdout_x0 = 0, holdout_y0 = 0, holdout_x1 = 0, holdout_y1 = 0;
    std::vector<Vec2> train_centers;
    std::vector<Vec2> val_centers;

    bool in_holdout(const Vec2& p) const {
        return p.x >= holdout_x0 && p.x <= holdout_x1 && p.y >= holdout_y0 && p.y <= holdout_y1;
    }
    bool box_intersects_holdout(const Vec2& center, double size_km) const;

    std::string to_text() const;
    static DatasetManifest from_text(const std::string& text);
};

// Holdout is the north-west corner square of holdout_frac * side per axis.
// n_regions are split 9:1 train:val; every region box avoids the holdout.
DatasetManifest make_splits(const SyntheticWorld& world, int n_regions, double region_km,
                            double holdout_frac, uint64_t seed);

// Fresh train centers for an epoch (same constraints as the manifest's).
// count <= 0 reuses the manifest's train-center count.
std::vector<Vec2> resample_train_centers(const SyntheticWorld& world,
                                         const DatasetManifest& manifest, int epoch,
                                         int count = 0);

}  // namespace geofusion
