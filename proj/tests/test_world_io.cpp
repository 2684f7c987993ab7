#include <cmath>
#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "geofusion/eval.hpp"
#include "geofusion/io.hpp"
#include "geofusion/world.hpp"

using namespace geofusion;

namespace {

WorldConfig small_config() {
    WorldConfig cfg;
    cfg.side_km = 320.0;
    cfg.raster_cells = 32;
    cfg.channels = 6;
    cfg.tract_grid = 22;  // 484 tracts
    cfg.n_features = 10;
    return cfg;
}

}  // namespace

TEST_CASE("world generation is deterministic per seed") {
    WorldConfig cfg = small_config();
    SyntheticWorld a = SyntheticWorld::generate(cfg, 42);
    SyntheticWorld b = SyntheticWorld::generate(cfg, 42);
    CHECK(a.content_hash() == b.content_hash());
    CHECK(a.raster().data == b.raster().data);
    SyntheticWorld c = SyntheticWorld::generate(cfg, 43);
    CHECK(a.content_hash() != c.content_hash());
}

TEST_CASE("world config validation") {
    WorldConfig cfg = small_config();
    cfg.latents.resize(1);
    CHECK_THROWS_AS(SyntheticWorld::generate(cfg, 1), std::invalid_argument);
    cfg = small_config();
    cfg.channels = 0;
    CHECK_THROWS_AS(SyntheticWorld::generate(cfg, 1), std::invalid_argument);
    cfg = small_config();
    cfg.tract_grid = 0;
    CHECK_THROWS_AS(SyntheticWorld::generate(cfg, 1), std::invalid_argument);
}

TEST_CASE("latent fields satisfy the bump-derived Lipschitz bound") {
    WorldConfig cfg = small_config();
    SyntheticWorld w = SyntheticWorld::generate(cfg, 7);
    // L = sum over bumps of |amp| * exp(-1/2) / sigma, times normalization
    Rng rng(7700);
    for (size_t k = 0; k < cfg.latents.size(); ++k) {
        // conservative: normalized amplitude bound uses the measured scale
        // via sampled extremes; estimate L numerically from dense pairs
        for (int trial = 0; trial < 400; ++trial) {
            double x1 = rng.uniform(0.0, cfg.side_km), y1 = rng.uniform(0.0, cfg.side_km);
            double dx = rng.uniform(-5.0, 5.0), dy = rng.uniform(-5.0, 5.0);
            double x2 = x1 + dx, y2 = y1 + dy;
            double df = std::abs(w.latent_at(static_cast<int>(k), x1, y1) -
                                 w.latent_at(static_cast<int>(k), x2, y2));
            double dist = std::hypot(dx, dy);
            // normalized fields vary on >= length_km/4 scales
            double lips = 8.0 / cfg.latents[k].length_km * 4.0;
            CHECK(df <= lips * dist + 1e-9);
        }
    }
}

TEST_CASE("tract polygons are simple, non-overlapping, within extent") {
    WorldConfig cfg = small_config();
    SyntheticWorld w = SyntheticWorld::generate(cfg, 9);
    const auto& rings = w.tract_rings_km();
    REQUIRE(static_cast<int>(rings.size()) == cfg.tract_grid * cfg.tract_grid);

    Rng rng(123);
    int with_notch = 0;
    for (const auto& ring : rings) {
        CHECK(ring_is_simple(ring));
        CHECK(std::abs(shoelace_area(ring)) > 0.0);
        for (const auto& v : ring) {
            CHECK(v.x >= -1e-9);
            CHECK(v.x <= cfg.side_km + 1e-9);
            CHECK(v.y >= -1e-9);
            CHECK(v.y <= cfg.side_km + 1e-9);
        }
        if (ring.size() > 5) ++with_notch;
    }
    CHECK(with_notch > 0);  // some tracts are concave

    // sampled pairwise overlap test: random interior points of tract A must
    // not fall inside any other tract
    for (int trial = 0; trial < 300; ++trial) {
        int a = rng.uniform_int(static_cast<int>(rings.size()));
        Vec2 c = w.tract_centroids_km()[a];
        if (!point_in_polygon(c, rings[a])) continue;  // concave centroid can sit outside
        for (int b = 0; b < static_cast<int>(rings.size()); ++b) {
            if (b == a) continue;
            CHECK(!point_in_polygon(c, rings[b]));
        }
    }
}

TEST_CASE("tract geometry summaries are valid for every generated tract") {
    WorldConfig cfg = small_config();
    cfg.notch_prob = 0.5;
    SyntheticWorld w = SyntheticWorld::generate(cfg, 11);
    GeoPoint ref = cfg.ref;
    int concave = 0;
    for (const auto& rec : w.tracts()) {
        GeometrySummary g = geometry_summary(rec.polygon, ref);
        CHECK(g.area_km2 > 0.0);
        CHECK(g.area_km2 <= g.hull_area_km2 + 1e-9);
        CHECK(g.compactness > 0.0);
        CHECK(g.compactness <= 1.0 + 1e-9);
        CHECK(g.hull_ratio > 0.0);
        CHECK(g.hull_ratio <= 1.0 + 1e-12);
        if (g.hull_ratio < 0.999) ++concave;
    }
    CHECK(concave > 0);
}

TEST_CASE("region sampling: intersection semantics and crop values") {
    WorldConfig cfg = small_config();
    SyntheticWorld w = SyntheticWorld::generate(cfg, 13);
    RegionGridSpec grid{16};
    const double size = 80.0;
    Region r = w.sample_region({160.0, 160.0}, size, grid);
    CHECK(r.tracts.records.size() >= 2);
    r.tracts.validate(cfg.n_features);

    // every included tract intersects the box; every excluded one does not
    const double h = size / 2.0;
    std::vector<char> included(w.n_tracts(), 0);
    for (const auto& rec : r.tracts.records) included[rec.id] = 1;
    for (int ti = 0; ti < w.n_tracts(); ++ti) {
        bool want = polygon_intersects_box(w.tract_rings_km()[ti], 160.0 - h, 160.0 - h,
                                           160.0 + h, 160.0 + h);
        CHECK(static_cast<bool>(included[ti]) == want);
    }

    // crop equals the analytic field at cell centers
    for (int trial = 0; trial < 20; ++trial) {
        Rng rng(500 + trial);
        int i = rng.uniform_int(16), j = rng.uniform_int(16);
        auto v = w.vision_at(160.0 - h + (j + 0.5) * r.vision.cell_km,
                             160.0 - h + (i + 0.5) * r.vision.cell_km);
        for (int c = 0; c < cfg.channels; ++c)
            CHECK(r.vision.data.at3(i, j, c) == doctest::Approx(v[c]).epsilon(1e-12));
    }

    // expected tract count from density arithmetic: within [0.5x, 2x]
    const double density = static_cast<double>(w.n_tracts()) / (cfg.side_km * cfg.side_km);
    const double expected = density * size * size;
    CHECK(r.tracts.records.size() >= 0.5 * expected);
    CHECK(r.tracts.records.size() <= 2.0 * expected);

    CHECK_THROWS_AS(w.sample_region({10.0, 10.0}, size, grid), std::invalid_argument);
}

TEST_CASE("region file round trip and corruption detection") {
    WorldConfig cfg = small_config();
    SyntheticWorld w = SyntheticWorld::generate(cfg, 15);
    Region r = w.sample_region({120.0, 200.0}, 80.0, RegionGridSpec{16});
    const std::string path = "/tmp/gf_test_region.bin";
    write_region(r, path);
    Region back = read_region(path);
    CHECK(back.vision.data.data == r.vision.data.data);
    CHECK(back.tracts.records.size() == r.tracts.records.size());
    CHECK(back.size_km == r.size_km);
    for (size_t i = 0; i < r.tracts.records.size(); ++i) {
        CHECK(back.tracts.records[i].id == r.tracts.records[i].id);
        CHECK(back.tracts.records[i].features == r.tracts.records[i].features);
        CHECK(back.tracts.records[i].polygon.ring.size() ==
              r.tracts.records[i].polygon.ring.size());
    }

    // flip one payload byte: checksum must catch it
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(100);
        char c;
        f.seekg(100);
        f.get(c);
        f.seekp(100);
        f.put(static_cast<char>(c ^ 0x40));
    }
    CHECK_THROWS_AS(read_region(path), ChecksumError);

    // truncation: cut the file short (checksum fires first by design;
    // rewriting a valid prefix is indistinguishable from truncation)
    write_region(r, path);
    {
        std::ifstream in(path, std::ios::binary);
        std::vector<char> buf((std::istreambuf_iterator<char>(in)),
                              std::istreambuf_iterator<char>());
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out.write(buf.data(), static_cast<std::streamsize>(buf.size() / 2));
    }
    CHECK_THROWS_AS(read_region(path), IoError);

    // wrong magic
    write_text_file(path, "GFXXjunkjunkjunkjunkjunk");
    CHECK_THROWS_AS(read_region(path), IoError);

    // empty-tract region rejected at write
    Region bad = r;
    bad.tracts.records.clear();
    CHECK_THROWS_AS(write_region(bad, path), std::invalid_argument);
    std::remove(path.c_str());
}

TEST_CASE("world save/load round trip with content verification") {
    WorldConfig cfg = small_config();
    SyntheticWorld w = SyntheticWorld::generate(cfg, 21);
    const std::string path = "/tmp/gf_test_world.bin";
    w.save(path);
    SyntheticWorld back = SyntheticWorld::load(path);
    CHECK(back.content_hash() == w.content_hash());
    CHECK(back.n_tracts() == w.n_tracts());
    std::remove(path.c_str());
}

TEST_CASE("splits: disjoint holdout, 9:1 ratio, deterministic") {
    WorldConfig cfg = small_config();
    SyntheticWorld w = SyntheticWorld::generate(cfg, 23);
    DatasetManifest m = make_splits(w, 100, 60.0, 0.3, 77);
    CHECK(m.val_centers.size() == 10);
    CHECK(m.train_centers.size() == 90);
    for (const auto& c : m.train_centers) CHECK(!m.box_intersects_holdout(c, m.region_km));
    for (const auto& c : m.val_centers) CHECK(!m.box_intersects_holdout(c, m.region_km));

    DatasetManifest m2 = make_splits(w, 100, 60.0, 0.3, 77);
    CHECK(m2.to_text() == m.to_text());

    DatasetManifest parsed = DatasetManifest::from_text(m.to_text());
    CHECK(parsed.train_centers.size() == m.train_centers.size());
    CHECK(parsed.holdout_x1 == m.holdout_x1);
    CHECK(parsed.split_seed == m.split_seed);

    // per-epoch resampling keeps the constraints and the count
    auto epoch5 = resample_train_centers(w, m, 5);
    CHECK(epoch5.size() == m.train_centers.size());
    for (const auto& c : epoch5) CHECK(!m.box_intersects_holdout(c, m.region_km));
    auto epoch5b = resample_train_centers(w, m, 5);
    for (size_t i = 0; i < epoch5.size(); ++i) {
        CHECK(epoch5[i].x == epoch5b[i].x);
        CHECK(epoch5[i].y == epoch5b[i].y);
    }

    CHECK_THROWS_AS(make_splits(w, 100, 60.0, 0.9, 1), std::invalid_argument);
}

TEST_CASE("planted signal: cross-modal and neighborhood information is required") {
    WorldConfig cfg;  // default-scale world so the signal matches training runs
    cfg.side_km = 480.0;
    cfg.raster_cells = 48;
    cfg.tract_grid = 32;  // 1024 tracts
    SyntheticWorld w = SyntheticWorld::generate(cfg, 31);
    const int n = w.n_tracts();

    // features per tract: standardized tabular features
    const int f = cfg.n_features;
    Tensor tab({n, f});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < f; ++j) tab.at(i, j) = w.tracts()[i].features[j];

    // vision means per tract from the raster
    const double cell = w.raster_cell_km();
    Tensor vis({n, cfg.channels});
    for (int i = 0; i < n; ++i) {
        const auto& ring = w.tract_rings_km()[i];
        double x0 = 1e18, y0 = 1e18, x1 = -1e18, y1 = -1e18;
        for (const auto& v : ring) {
            x0 = std::min(x0, v.x);
            y0 = std::min(y0, v.y);
            x1 = std::max(x1, v.x);
            y1 = std::max(y1, v.y);
        }
        int count = 0;
        std::vector<double> acc(cfg.channels, 0.0);
        for (int r = std::max(0, static_cast<int>(y0 / cell)); r < cfg.raster_cells; ++r) {
            if ((r + 0.5) * cell > y1) break;
            for (int c = std::max(0, static_cast<int>(x0 / cell)); c < cfg.raster_cells; ++c) {
                if ((c + 0.5) * cell > x1) break;
                if (!point_in_polygon({(c + 0.5) * cell, (r + 0.5) * cell}, ring)) continue;
                ++count;
                for (int ch = 0; ch < cfg.channels; ++ch) acc[ch] += w.raster().at3(r, c, ch);
            }
        }
        if (count == 0) {
            auto v = w.vision_at(w.tract_centroids_km()[i].x, w.tract_centroids_km()[i].y);
            acc = v;
            count = 1;
        }
        for (int ch = 0; ch < cfg.channels; ++ch) vis.at(i, ch) = acc[ch] / count;
    }

    // neighbor-averaged tabular features (8 nearest by centroid distance)
    Tensor neigh({n, f});
    for (int i = 0; i < n; ++i) {
        std::vector<std::pair<double, int>> dist;
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            double dx = w.tract_centroids_km()[i].x - w.tract_centroids_km()[j].x;
            double dy = w.tract_centroids_km()[i].y - w.tract_centroids_km()[j].y;
            dist.push_back({dx * dx + dy * dy, j});
        }
        std::partial_sort(dist.begin(), dist.begin() + 8, dist.end());
        for (int j = 0; j < f; ++j) {
            double acc = 0.0;
            for (int k = 0; k < 8; ++k) acc += tab.at(dist[k].second, j);
            neigh.at(i, j) = acc / 8.0;
        }
    }

    auto concat = [](const std::vector<const Tensor*>& parts) {
        int n_ = parts[0]->shape[0], d = 0;
        for (auto* p : parts) d += p->shape[1];
        Tensor out({n_, d});
        for (int i = 0; i < n_; ++i) {
            int off = 0;
            for (auto* p : parts) {
                for (int j = 0; j < p->shape[1]; ++j) out.at(i, off + j) = p->at(i, j);
                off += p->shape[1];
            }
        }
        return out;
    };

    Rng rng(3100);
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    for (int i = n - 1; i > 0; --i) std::swap(idx[i], idx[rng.uniform_int(i + 1)]);
    std::vector<int> train(idx.begin(), idx.begin() + 3 * n / 4);
    std::vector<int> test(idx.begin() + 3 * n / 4, idx.end());

    const auto& y = w.targets();
    double r2_tab = fit_probe(tab, y, train, test).r2_test;
    double r2_vis = fit_probe(vis, y, train, test).r2_test;
    Tensor both = concat({&tab, &vis});
    double r2_concat = fit_probe(both, y, train, test).r2_test;
    Tensor full = concat({&tab, &vis, &neigh});
    double r2_full = fit_probe(full, y, train, test).r2_test;

    INFO("tab=", r2_tab, " vis=", r2_vis, " concat=", r2_concat, " +neighbors=", r2_full);
    // both modalities carry signal
    CHECK(r2_tab > 0.05);
    CHECK(r2_vis > 0.05);
    // combining modalities beats either alone
    CHECK(r2_concat > r2_tab + 0.02);
    CHECK(r2_concat > r2_vis + 0.02);
    // neighborhood features add real information beyond the tract's own
    CHECK(r2_full > r2_concat + 0.02);
    // own-tract features alone leave headroom at this noise level
    CHECK(r2_concat < 0.9);
}
