#include "geofusion/world.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "geofusion/io.hpp"

namespace geofusion {

void WorldConfig::validate() const {
    if (side_km <= 0 || raster_cells <= 0) throw std::invalid_argument("world: bad raster config");
    if (channels <= 0) throw std::invalid_argument("world: need at least one vision channel");
    if (tract_grid <= 0) throw std::invalid_argument("world: need at least one tract");
    if (n_features <= 0) throw std::invalid_argument("world: need at least one feature");
    if (latents.size() < 2)
        throw std::invalid_argument("world: need >= 2 latents (vision-only and tabular-only)");
    if (tab_signal_features <= 0 || tab_signal_features > n_features)
        throw std::invalid_argument("world: tab_signal_features out of range");
    validate_geopoint(ref);
}

double SyntheticWorld::latent_raw(int k, double x, double y) const {
    double v = 0.0;
    for (const Bump& b : bumps_[k]) {
        const double dx = x - b.x, dy = y - b.y;
        const double r2 = dx * dx + dy * dy;
        const double s2 = 2.0 * b.sigma * b.sigma;
        if (r2 < 16.0 * b.sigma * b.sigma) v += b.amp * std::exp(-r2 / s2);
    }
    return v;
}

double SyntheticWorld::latent_at(int k, double x, double y) const {
    return (latent_raw(k, x, y) - latent_shift_[k]) * latent_scale_[k];
}

std::vector<double> SyntheticWorld::vision_at(double x, double y) const {
    const int kk = static_cast<int>(bumps_.size());
    std::vector<double> lat(kk);
    for (int k = 0; k < kk; ++k) lat[k] = latent_at(k, x, y);
    std::vector<double> out(cfg_.channels);
    for (int c = 0; c < cfg_.channels; ++c) {
        double lin = 0.0, arg = 0.0;
        for (int k = 0; k < kk; ++k) {
            lin += vis_linear_.at(c, k) * lat[k];
            arg += vis_tanh_.at(c, k) * lat[k];
        }
        double raw = lin + cfg_.vis_tanh_weight * std::tanh(arg);
        out[c] = (raw - chan_shift_[c]) * chan_scale_[c];
    }
    return out;
}

SyntheticWorld SyntheticWorld::generate(const WorldConfig& cfg, uint64_t seed) {
    cfg.validate();
    SyntheticWorld w;
    w.cfg_ = cfg;
    w.seed_ = seed;
    const int kk = static_cast<int>(cfg.latents.size());
    const double side = cfg.side_km;

    // latent bump fields
    Rng bump_rng(Rng::mix(seed, 0xA1));
    w.bumps_.resize(kk);
    for (int k = 0; k < kk; ++k) {
        const auto& spec = cfg.latents[k];
        const double margin = spec.length_km;
        for (int b = 0; b < spec.bumps; ++b) {
            Bump bump;
            bump.x = bump_rng.uniform(-margin, side + margin);
            bump.y = bump_rng.uniform(-margin, side + margin);
            bump.amp = bump_rng.normal();
            bump.sigma = spec.length_km * bump_rng.uniform(0.7, 1.3);
            w.bumps_[k].push_back(bump);
        }
    }

    // normalize each latent over raster cell centers
    const int rc = cfg.raster_cells;
    const double cell = side / rc;
    w.latent_shift_.assign(kk, 0.0);
    w.latent_scale_.assign(kk, 1.0);
    for (int k = 0; k < kk; ++k) {
        double sum = 0.0, sq = 0.0;
        for (int i = 0; i < rc; ++i)
            for (int j = 0; j < rc; ++j) {
                double v = w.latent_raw(k, (j + 0.5) * cell, (i + 0.5) * cell);
                sum += v;
                sq += v * v;
            }
        const double n = static_cast<double>(rc) * rc;
        const double mean = sum / n;
        const double var = std::max(sq / n - mean * mean, 1e-12);
        w.latent_shift_[k] = mean;
        w.latent_scale_[k] = 1.0 / std::sqrt(var);
    }

    // channel mixers; the tabular-only latent (index 1) never enters vision
    Rng mix_rng(Rng::mix(seed, 0xB2));
    const double kscale = 1.0 / std::sqrt(static_cast<double>(kk - 1));
    w.vis_linear_ = Tensor({cfg.channels, kk});
    w.vis_tanh_ = Tensor({cfg.channels, kk});
    for (int c = 0; c < cfg.channels; ++c)
        for (int k = 0; k < kk; ++k) {
            w.vis_linear_.at(c, k) = (k == 1) ? 0.0 : mix_rng.normal() * kscale;
            w.vis_tanh_.at(c, k) = (k == 1) ? 0.0 : mix_rng.normal() * kscale * 1.5;
        }
    // guaranteed footholds: the vision-only latent in even channels, the
    // mid-range shared latent in odd channels
    for (int c = 0; c < cfg.channels; c += 2)
        w.vis_linear_.at(c, 0) = 0.9 + 0.2 * mix_rng.uniform();
    if (kk > 3)
        for (int c = 1; c < cfg.channels; c += 2)
            w.vis_linear_.at(c, 3) = 0.7 + 0.2 * mix_rng.uniform();

    // channel normalization over the raster
    w.chan_shift_.assign(cfg.channels, 0.0);
    w.chan_scale_.assign(cfg.channels, 1.0);
    {
        std::vector<double> sum(cfg.channels, 0.0), sq(cfg.channels, 0.0);
        for (int i = 0; i < rc; ++i)
            for (int j = 0; j < rc; ++j) {
                const double x = (j + 0.5) * cell, y = (i + 0.5) * cell;
                std::vector<double> lat(kk);
                for (int k = 0; k < kk; ++k) lat[k] = w.latent_at(k, x, y);
                for (int c = 0; c < cfg.channels; ++c) {
                    double lin = 0.0, arg = 0.0;
                    for (int k = 0; k < kk; ++k) {
                        lin += w.vis_linear_.at(c, k) * lat[k];
                        arg += w.vis_tanh_.at(c, k) * lat[k];
                    }
                    double raw = lin + cfg.vis_tanh_weight * std::tanh(arg);
                    sum[c] += raw;
                    sq[c] += raw * raw;
                }
            }
        const double n = static_cast<double>(rc) * rc;
        for (int c = 0; c < cfg.channels; ++c) {
            const double mean = sum[c] / n;
            const double var = std::max(sq[c] / n - mean * mean, 1e-12);
            w.chan_shift_[c] = mean;
            w.chan_scale_[c] = 1.0 / std::sqrt(var);
        }
    }

    // cache the raster
    w.raster_ = Tensor({rc, rc, cfg.channels});
    for (int i = 0; i < rc; ++i)
        for (int j = 0; j < rc; ++j) {
            auto v = w.vision_at((j + 0.5) * cell, (i + 0.5) * cell);
            for (int c = 0; c < cfg.channels; ++c) w.raster_.at3(i, j, c) = v[c];
        }

    // jittered-lattice tract polygons; shared nodes keep the tiling overlap-free
    Rng tract_rng(Rng::mix(seed, 0xC3));
    const int g = cfg.tract_grid;
    const double tc = side / g;
    std::vector<Vec2> nodes((g + 1) * (g + 1));
    for (int i = 0; i <= g; ++i)
        for (int j = 0; j <= g; ++j) {
            double x = j * tc, y = i * tc;
            double jx = tract_rng.uniform(-1.0, 1.0) * cfg.tract_jitter * tc;
            double jy = tract_rng.uniform(-1.0, 1.0) * cfg.tract_jitter * tc;
            if (j > 0 && j < g) x += jx;
            if (i > 0 && i < g) y += jy;
            nodes[i * (g + 1) + j] = {x, y};
        }

    const int kk_all = kk;
    Rng feat_rng(Rng::mix(seed, 0xD4));
    for (int i = 0; i < g; ++i)
        for (int j = 0; j < g; ++j) {
            std::vector<Vec2> ring = {nodes[i * (g + 1) + j], nodes[i * (g + 1) + j + 1],
                                      nodes[(i + 1) * (g + 1) + j + 1], nodes[(i + 1) * (g + 1) + j]};
            if (tract_rng.uniform() < cfg.notch_prob) {
                // pull an edge midpoint toward the centroid to create a dent
                std::vector<Vec2> closed = ring;
                closed.push_back(ring.front());
                Vec2 cen = ring_centroid(closed);
                int e = tract_rng.uniform_int(4);
                Vec2 a = ring[e], b = ring[(e + 1) % 4];
                double depth = tract_rng.uniform(0.3, 0.55);
                Vec2 mid{0.5 * (a.x + b.x), 0.5 * (a.y + b.y)};
                Vec2 dent{mid.x + (cen.x - mid.x) * depth, mid.y + (cen.y - mid.y) * depth};
                std::vector<Vec2> notched;
                for (int v = 0; v < 4; ++v) {
                    notched.push_back(ring[v]);
                    if (v == e) notched.push_back(dent);
                }
                std::vector<Vec2> check = notched;
                check.push_back(notched.front());
                if (ring_is_simple(check) && std::abs(shoelace_area(check)) > 0.05 * tc * tc)
                    ring = notched;
            }
            std::vector<Vec2> closed = ring;
            closed.push_back(ring.front());
            w.rings_km_.push_back(closed);
            w.centroids_km_.push_back(ring_centroid(closed));
        }

    const int n_tracts = g * g;
    // per-tract latent averages from interior samples
    w.tract_latent_avg_ = Tensor({n_tracts, kk_all});
    const int s = std::max(cfg.tract_avg_samples, 1);
    for (int ti = 0; ti < n_tracts; ++ti) {
        const auto& ring = w.rings_km_[ti];
        double x0 = 1e18, y0 = 1e18, x1 = -1e18, y1 = -1e18;
        for (const auto& v : ring) {
            x0 = std::min(x0, v.x);
            y0 = std::min(y0, v.y);
            x1 = std::max(x1, v.x);
            y1 = std::max(y1, v.y);
        }
        std::vector<Vec2> inside;
        for (int a = 0; a < s; ++a)
            for (int b = 0; b < s; ++b) {
                Vec2 p{x0 + (b + 0.5) * (x1 - x0) / s, y0 + (a + 0.5) * (y1 - y0) / s};
                if (point_in_polygon(p, ring)) inside.push_back(p);
            }
        if (inside.empty()) inside.push_back(w.centroids_km_[ti]);
        for (int k = 0; k < kk_all; ++k) {
            double acc = 0.0;
            for (const auto& p : inside) acc += w.latent_at(k, p.x, p.y);
            w.tract_latent_avg_.at(ti, k) = acc / static_cast<double>(inside.size());
        }
    }

    // tabular mixing: vision-only latent (0) excluded everywhere; the
    // tabular-only latent (1) is carried by a small set of features; the
    // short-range shared latent (3) gets a clean foothold so the tract table
    // can resolve it for masked vision patches
    w.tab_mix_ = Tensor({cfg.n_features, kk_all});
    const double shared_scale = (kk_all > 2) ? 1.0 / std::sqrt(static_cast<double>(kk_all - 2)) : 0.0;
    for (int f = 0; f < cfg.n_features; ++f) {
        for (int k = 2; k < kk_all; ++k) w.tab_mix_.at(f, k) = feat_rng.normal() * shared_scale;
        w.tab_mix_.at(f, 0) = 0.0;
        w.tab_mix_.at(f, 1) = (f < cfg.tab_signal_features) ? 0.9 + 0.3 * feat_rng.uniform() : 0.0;
        if (kk_all > 3 && f >= cfg.tab_signal_features && f < 2 * cfg.tab_signal_features + 1)
            w.tab_mix_.at(f, 3) = 0.9 + 0.3 * feat_rng.uniform();
    }

    // raw features with per-tract noise
    Tensor raw({n_tracts, cfg.n_features});
    for (int ti = 0; ti < n_tracts; ++ti)
        for (int f = 0; f < cfg.n_features; ++f) {
            double v = 0.0;
            for (int k = 0; k < kk_all; ++k)
                v += w.tab_mix_.at(f, k) * w.tract_latent_avg_.at(ti, k);
            raw.at(ti, f) = v + cfg.feature_noise * feat_rng.normal();
        }

    // planted target: vision-only latent of the tract plus the
    // neighborhood-averaged tabular-only latent, plus label noise
    Rng target_rng(Rng::mix(seed, 0xE5));
    w.targets_.resize(n_tracts);
    const double r2max = 9.0 * cfg.neighbor_radius_km * cfg.neighbor_radius_km;
    for (int ti = 0; ti < n_tracts; ++ti) {
        double wsum = 0.0, tsum = 0.0;
        for (int tj = 0; tj < n_tracts; ++tj) {
            const double dx = w.centroids_km_[ti].x - w.centroids_km_[tj].x;
            const double dy = w.centroids_km_[ti].y - w.centroids_km_[tj].y;
            const double d2 = dx * dx + dy * dy;
            if (d2 > r2max) continue;
            const double kern =
                std::exp(-d2 / (2.0 * cfg.neighbor_radius_km * cfg.neighbor_radius_km));
            wsum += kern;
            tsum += kern * w.tract_latent_avg_.at(tj, 1);
        }
        w.targets_[ti] = cfg.target_vis_weight * w.tract_latent_avg_.at(ti, 0) +
                         cfg.target_tab_weight * tsum / wsum +
                         cfg.target_noise * target_rng.normal();
    }

    // standardization statistics from tracts outside the holdout corner
    // (the same north-west box make_splits uses, at its default fraction)
    const double hfrac = 0.3;
    w.feat_mean_.assign(cfg.n_features, 0.0);
    w.feat_std_.assign(cfg.n_features, 1.0);
    {
        int count = 0;
        std::vector<double> sum(cfg.n_features, 0.0), sq(cfg.n_features, 0.0);
        for (int ti = 0; ti < n_tracts; ++ti) {
            const Vec2& c = w.centroids_km_[ti];
            if (c.x <= hfrac * side && c.y >= (1.0 - hfrac) * side) continue;
            ++count;
            for (int f = 0; f < cfg.n_features; ++f) {
                sum[f] += raw.at(ti, f);
                sq[f] += raw.at(ti, f) * raw.at(ti, f);
            }
        }
        for (int f = 0; f < cfg.n_features; ++f) {
            const double mean = sum[f] / count;
            const double var = std::max(sq[f] / count - mean * mean, 1e-12);
            w.feat_mean_[f] = mean;
            w.feat_std_[f] = std::sqrt(var);
        }
    }

    // assemble tract records with standardized features
    w.tracts_.resize(n_tracts);
    Rng rep_rng(Rng::mix(seed, 0xF6));
    for (int ti = 0; ti < n_tracts; ++ti) {
        TractRecord& rec = w.tracts_[ti];
        rec.id = ti;
        rec.features.resize(cfg.n_features);
        for (int f = 0; f < cfg.n_features; ++f)
            rec.features[f] = (raw.at(ti, f) - w.feat_mean_[f]) / w.feat_std_[f];
        Vec2 rep = w.centroids_km_[ti];
        if (cfg.rep_jitter_km > 0.0) {
            rep.x += rep_rng.uniform(-1.0, 1.0) * cfg.rep_jitter_km;
            rep.y += rep_rng.uniform(-1.0, 1.0) * cfg.rep_jitter_km;
        }
        rec.rep_point = cfg.geopoint_at(rep);
        std::vector<GeoPoint> verts;
        for (size_t v = 0; v + 1 < w.rings_km_[ti].size(); ++v)
            verts.push_back(cfg.geopoint_at(w.rings_km_[ti][v]));
        rec.polygon = TractPolygon::from_vertices(std::move(verts));
    }
    return w;
}

std::optional<Region> SyntheticWorld::try_sample_region(const Vec2& center_km, double size_km,
                                                        const RegionGridSpec& grid) const {
    const double h = size_km / 2.0;
    const double x0 = center_km.x - h, y0 = center_km.y - h;
    const double x1 = center_km.x + h, y1 = center_km.y + h;
    if (x0 < 0 || y0 < 0 || x1 > cfg_.side_km || y1 > cfg_.side_km)
        throw std::invalid_argument("sample_region: box outside world extent");

    Region region;
    region.center = cfg_.geopoint_at(center_km);
    region.size_km = size_km;
    for (int ti = 0; ti < n_tracts(); ++ti)
        if (polygon_intersects_box(rings_km_[ti], x0, y0, x1, y1))
            region.tracts.records.push_back(tracts_[ti]);
    if (region.tracts.records.size() < 2) return std::nullopt;

    VisionGrid& vg = region.vision;
    vg.height = grid.cells;
    vg.width = grid.cells;
    vg.channels = cfg_.channels;
    vg.cell_km = size_km / grid.cells;
    vg.origin = cfg_.geopoint_at({x0, y0});
    vg.data = Tensor({grid.cells, grid.cells, cfg_.channels});
    for (int i = 0; i < grid.cells; ++i)
        for (int j = 0; j < grid.cells; ++j) {
            auto v = vision_at(x0 + (j + 0.5) * vg.cell_km, y0 + (i + 0.5) * vg.cell_km);
            for (int c = 0; c < cfg_.channels; ++c) vg.data.at3(i, j, c) = v[c];
        }
    return region;
}

Region SyntheticWorld::sample_region(const Vec2& center_km, double size_km,
                                     const RegionGridSpec& grid) const {
    auto r = try_sample_region(center_km, size_km, grid);
    if (!r) throw std::runtime_error("sample_region: fewer than 2 intersecting tracts");
    return *r;
}

// ---- region container ----------------------------------------------------

namespace {
constexpr uint32_t kRegionVersion = 1;
constexpr uint32_t kWorldVersion = 1;
}  // namespace

void write_region(const Region& region, const std::string& path) {
    if (region.tracts.records.size() < 2)
        throw std::invalid_argument("write_region: region must contain at least 2 tracts");
    BinWriter w("GFRG", kRegionVersion);
    w.f64(region.center.lon);
    w.f64(region.center.lat);
    w.f64(region.size_km);
    w.u32(static_cast<uint32_t>(region.vision.height));
    w.u32(static_cast<uint32_t>(region.vision.width));
    w.u32(static_cast<uint32_t>(region.vision.channels));
    w.f64(region.vision.origin.lon);
    w.f64(region.vision.origin.lat);
    w.f64(region.vision.cell_km);
    w.tensor(region.vision.data);
    w.u32(static_cast<uint32_t>(region.tracts.records.size()));
    for (const auto& rec : region.tracts.records) {
        w.i64(rec.id);
        w.f64_vec(rec.features);
        w.f64(rec.rep_point.lon);
        w.f64(rec.rep_point.lat);
        w.u32(static_cast<uint32_t>(rec.polygon.ring.size()));
        for (const auto& p : rec.polygon.ring) {
            w.f64(p.lon);
            w.f64(p.lat);
        }
    }
    w.save(path);
}

Region read_region(const std::string& path) {
    BinReader r(path, "GFRG", kRegionVersion);
    Region region;
    region.center.lon = r.f64();
    region.center.lat = r.f64();
    region.size_km = r.f64();
    region.vision.height = static_cast<int>(r.u32());
    region.vision.width = static_cast<int>(r.u32());
    region.vision.channels = static_cast<int>(r.u32());
    region.vision.origin.lon = r.f64();
    region.vision.origin.lat = r.f64();
    region.vision.cell_km = r.f64();
    region.vision.data = r.tensor();
    uint32_t n = r.u32();
    for (uint32_t i = 0; i < n; ++i) {
        TractRecord rec;
        rec.id = r.i64();
        rec.features = r.f64_vec();
        rec.rep_point.lon = r.f64();
        rec.rep_point.lat = r.f64();
        uint32_t ring = r.u32();
        std::vector<GeoPoint> verts;
        for (uint32_t v = 0; v < ring; ++v) {
            GeoPoint p;
            p.lon = r.f64();
            p.lat = r.f64();
            verts.push_back(p);
        }
        rec.polygon.ring = std::move(verts);  // stored closed
        region.tracts.records.push_back(std::move(rec));
    }
    return region;
}

// ---- world container -------------------------------------------------

uint64_t SyntheticWorld::content_hash() const {
    BinWriter w("HASH", 0);
    w.tensor(raster_);
    w.tensor(tract_latent_avg_);
    w.f64_vec(targets_);
    for (const auto& rec : tracts_) w.f64_vec(rec.features);
    return fnv1a64(w.buffer().data(), w.buffer().size());
}

void SyntheticWorld::save(const std::string& path) const {
    BinWriter w("GFWD", kWorldVersion);
    w.u64(seed_);
    w.f64(cfg_.side_km);
    w.u32(static_cast<uint32_t>(cfg_.raster_cells));
    w.u32(static_cast<uint32_t>(cfg_.channels));
    w.u32(static_cast<uint32_t>(cfg_.tract_grid));
    w.f64(cfg_.tract_jitter);
    w.f64(cfg_.notch_prob);
    w.f64(cfg_.rep_jitter_km);
    w.u32(static_cast<uint32_t>(cfg_.n_features));
    w.u32(static_cast<uint32_t>(cfg_.tab_signal_features));
    w.f64(cfg_.feature_noise);
    w.f64(cfg_.target_noise);
    w.f64(cfg_.target_vis_weight);
    w.f64(cfg_.target_tab_weight);
    w.f64(cfg_.neighbor_radius_km);
    w.f64(cfg_.vis_tanh_weight);
    w.u32(static_cast<uint32_t>(cfg_.tract_avg_samples));
    w.f64(cfg_.ref.lon);
    w.f64(cfg_.ref.lat);
    w.u32(static_cast<uint32_t>(cfg_.latents.size()));
    for (const auto& l : cfg_.latents) {
        w.u32(static_cast<uint32_t>(l.bumps));
        w.f64(l.length_km);
    }
    w.u64(content_hash());
    w.save(path);
}

SyntheticWorld SyntheticWorld::load(const std::string& path) {
    BinReader r(path, "GFWD", kWorldVersion);
    uint64_t seed = r.u64();
    WorldConfig cfg;
    cfg.side_km = r.f64();
    cfg.raster_cells = static_cast<int>(r.u32());
    cfg.channels = static_cast<int>(r.u32());
    cfg.tract_grid = static_cast<int>(r.u32());
    cfg.tract_jitter = r.f64();
    cfg.notch_prob = r.f64();
    cfg.rep_jitter_km = r.f64();
    cfg.n_features = static_cast<int>(r.u32());
    cfg.tab_signal_features = static_cast<int>(r.u32());
    cfg.feature_noise = r.f64();
    cfg.target_noise = r.f64();
    cfg.target_vis_weight = r.f64();
    cfg.target_tab_weight = r.f64();
    cfg.neighbor_radius_km = r.f64();
    cfg.vis_tanh_weight = r.f64();
    cfg.tract_avg_samples = static_cast<int>(r.u32());
    cfg.ref.lon = r.f64();
    cfg.ref.lat = r.f64();
    uint32_t nl = r.u32();
    cfg.latents.clear();
    for (uint32_t i = 0; i < nl; ++i) {
        LatentFieldSpec l;
        l.bumps = static_cast<int>(r.u32());
        l.length_km = r.f64();
        cfg.latents.push_back(l);
    }
    uint64_t expect_hash = r.u64();
    SyntheticWorld w = generate(cfg, seed);
    if (w.content_hash() != expect_hash)
        throw ChecksumError("world content hash mismatch (generator changed?): " + path);
    return w;
}

// ---- splits ---------------------------------------------------------

bool DatasetManifest::box_intersects_holdout(const Vec2& center, double size_km) const {
    const double h = size_km / 2.0;
    return center.x - h < holdout_x1 && center.x + h > holdout_x0 && center.y - h < holdout_y1 &&
           center.y + h > holdout_y0;
}

std::string DatasetManifest::to_text() const {
    std::ostringstream out;
    out.precision(17);
    out << "# region split manifest\n";
    out << "world_seed = " << world_seed << "\n";
    out << "split_seed = " << split_seed << "\n";
    out << "region_km = " << region_km << "\n";
    out << "holdout_box_km = " << holdout_x0 << " " << holdout_y0 << " " << holdout_x1 << " "
        << holdout_y1 << "\n";
    for (const auto& c : train_centers) out << "train_center_km = " << c.x << " " << c.y << "\n";
    for (const auto& c : val_centers) out << "val_center_km = " << c.x << " " << c.y << "\n";
    return out.str();
}

DatasetManifest DatasetManifest::from_text(const std::string& text) {
    KvFile kv = KvFile::parse(text);
    DatasetManifest m;
    m.world_seed = std::stoull(kv.get("world_seed"));
    m.split_seed = std::stoull(kv.get("split_seed"));
    m.region_km = std::stod(kv.get("region_km"));
    {
        std::istringstream ss(kv.get("holdout_box_km"));
        ss >> m.holdout_x0 >> m.holdout_y0 >> m.holdout_x1 >> m.holdout_y1;
        if (!ss) throw IoError("manifest: bad holdout_box_km");
    }
    for (const auto& s : kv.all("train_center_km")) {
        Vec2 v;
        std::istringstream ss(s);
        ss >> v.x >> v.y;
        m.train_centers.push_back(v);
    }
    for (const auto& s : kv.all("val_center_km")) {
        Vec2 v;
        std::istringstream ss(s);
        ss >> v.x >> v.y;
        m.val_centers.push_back(v);
    }
    return m;
}

namespace {

std::vector<Vec2> draw_centers(const SyntheticWorld& world, const DatasetManifest& manifest,
                               int count, Rng& rng) {
    const double side = world.config().side_km;
    const double h = manifest.region_km / 2.0;
    if (side < manifest.region_km)
        throw std::invalid_argument("make_splits: region larger than world");
    std::vector<Vec2> out;
    int guard = 0;
    while (static_cast<int>(out.size()) < count) {
        if (++guard > 200 * count + 10000)
            throw std::runtime_error("make_splits: cannot place regions outside holdout");
        Vec2 c{rng.uniform(h, side - h), rng.uniform(h, side - h)};
        if (manifest.box_intersects_holdout(c, manifest.region_km)) continue;
        out.push_back(c);
    }
    return out;
}

}  // namespace

DatasetManifest make_splits(const SyntheticWorld& world, int n_regions, double region_km,
                            double holdout_frac, uint64_t seed) {
    if (n_regions < 2) throw std::invalid_argument("make_splits: need at least 2 regions");
    if (holdout_frac <= 0.0 || holdout_frac * holdout_frac > 0.5)
        throw std::invalid_argument("make_splits: holdout must cover (0, 50%] of the extent");
    const double side = world.config().side_km;
    DatasetManifest m;
    m.world_seed = world.seed();
    m.split_seed = seed;
    m.region_km = region_km;
    // the synthetic north-west corner plays the held-out state
    m.holdout_x0 = 0.0;
    m.holdout_y0 = (1.0 - holdout_frac) * side;
    m.holdout_x1 = holdout_frac * side;
    m.holdout_y1 = side;

    Rng rng(Rng::mix(seed, 0x5157));
    const int n_val = std::max(1, n_regions / 10);
    m.val_centers = draw_centers(world, m, n_val, rng);
    m.train_centers = draw_centers(world, m, n_regions - n_val, rng);
    return m;
}

std::vector<Vec2> resample_train_centers(const SyntheticWorld& world,
                                         const DatasetManifest& manifest, int epoch, int count) {
    Rng rng(Rng::mix(manifest.split_seed, 0xE70C + static_cast<uint64_t>(epoch)));
    if (count <= 0) count = static_cast<int>(manifest.train_centers.size());
    return draw_centers(world, manifest, count, rng);
}

}  // namespace geofusion
