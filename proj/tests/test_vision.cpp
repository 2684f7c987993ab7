#include <cmath>

#include "doctest.h"
#include "geofusion/vision.hpp"
#include "test_helpers.hpp"

using namespace geofusion;

namespace {

VisionGrid random_grid(int h, int w, int c, uint64_t seed) {
    VisionGrid g;
    g.height = h;
    g.width = w;
    g.channels = c;
    g.origin = {-100.0, 40.0};
    g.cell_km = 2.5;
    Rng rng(seed);
    g.data = rng.normal_tensor({h, w, c}, 1.0);
    return g;
}

}  // namespace

TEST_CASE("patchify token count and round trip") {
    VisionGrid g = random_grid(16, 16, 3, 1);
    PatchSequence seq = patchify(g, 8);
    CHECK(seq.tokens.shape[0] == 4);
    CHECK(seq.tokens.shape[1] == 8 * 8 * 3);
    CHECK(seq.centers.size() == 4);

    VisionGrid back = unpatchify(seq.tokens, 16, 16, 3, 8, g.origin, g.cell_km);
    CHECK(back.data.data == g.data.data);
}

TEST_CASE("patchify/unpatchify round trip over random shapes (property)") {
    Rng rng(2);
    for (int trial = 0; trial < 12; ++trial) {
        int p = 2 + rng.uniform_int(3);          // 2..4
        int h = p * (1 + rng.uniform_int(4));    // up to 4 patches tall
        int w = p * (1 + rng.uniform_int(4));
        int c = 1 + rng.uniform_int(4);
        VisionGrid g = random_grid(h, w, c, 100 + trial);
        PatchSequence seq = patchify(g, p);
        CHECK(seq.tokens.shape[0] == (h / p) * (w / p));
        VisionGrid back = unpatchify(seq.tokens, h, w, c, p, g.origin, g.cell_km);
        CHECK(back.data.data == g.data.data);
    }
}

TEST_CASE("patchify constant image gives equal token rows; errors on indivisible dims") {
    VisionGrid g = random_grid(8, 8, 2, 3);
    std::fill(g.data.data.begin(), g.data.data.end(), 1.25);
    PatchSequence seq = patchify(g, 4);
    for (int i = 1; i < seq.tokens.shape[0]; ++i)
        for (int j = 0; j < seq.tokens.shape[1]; ++j)
            CHECK(seq.tokens.at(i, j) == seq.tokens.at(0, j));

    VisionGrid bad = random_grid(10, 8, 2, 4);
    CHECK_THROWS_AS(patchify(bad, 4), std::invalid_argument);
}

TEST_CASE("single patch unpatchify is the identity reshape; zero in, zero out") {
    VisionGrid g = random_grid(4, 4, 2, 5);
    PatchSequence seq = patchify(g, 4);
    CHECK(seq.tokens.shape[0] == 1);
    VisionGrid back = unpatchify(seq.tokens, 4, 4, 2, 4, g.origin, g.cell_km);
    CHECK(back.data.data == g.data.data);

    Tensor zeros = Tensor::zeros({4, 2 * 2 * 3});
    VisionGrid z = unpatchify(zeros, 4, 4, 3, 2, g.origin, g.cell_km);
    for (double v : z.data.data) CHECK(v == 0.0);
}

TEST_CASE("patch centers follow grid geometry") {
    VisionGrid g = random_grid(8, 8, 1, 6);
    PatchSequence seq = patchify(g, 4);
    // first patch center at (2, 2) cells = 5 km east/north of origin
    Vec2 km = local_km(seq.centers[0], g.origin);
    CHECK(km.x == doctest::Approx(2.0 * 2.5).epsilon(1e-9));
    CHECK(km.y == doctest::Approx(2.0 * 2.5).epsilon(1e-9));
    Vec2 km3 = local_km(seq.centers[3], g.origin);
    CHECK(km3.x == doctest::Approx(6.0 * 2.5).epsilon(1e-9));
    CHECK(km3.y == doctest::Approx(6.0 * 2.5).epsilon(1e-9));
}

TEST_CASE("sample_mask counts, determinism, degenerate splits") {
    MaskPlan p = sample_mask(4, 0.75, 9);
    CHECK(p.visible.size() == 1);
    CHECK(p.masked.size() == 3);

    MaskPlan a = sample_mask(64, 0.5, 123);
    MaskPlan b = sample_mask(64, 0.5, 123);
    CHECK(a.visible == b.visible);
    CHECK(a.masked == b.masked);

    // union is all indices, disjoint
    std::vector<char> seen(64, 0);
    for (int i : a.visible) seen[i]++;
    for (int i : a.masked) seen[i]++;
    for (char s : seen) CHECK(s == 1);

    CHECK_THROWS_AS(sample_mask(1, 0.5, 0), std::invalid_argument);
    CHECK_THROWS_AS(sample_mask(10, 0.0, 0), std::invalid_argument);
    CHECK_THROWS_AS(sample_mask(3, 0.05, 0), std::invalid_argument);  // floor -> 0 masked
}

TEST_CASE("sample_mask per-index frequency over many draws") {
    const int n = 100, draws = 10000;
    std::vector<int> hits(n, 0);
    for (int d = 0; d < draws; ++d) {
        MaskPlan p = sample_mask(n, 0.5, 7000 + d);
        for (int i : p.masked) hits[i]++;
    }
    for (int i = 0; i < n; ++i) {
        double freq = static_cast<double>(hits[i]) / draws;
        CHECK(freq > 0.48);
        CHECK(freq < 0.52);
    }
}

TEST_CASE("encoder output shape and invariance to masked patch values") {
    ViTConfig cfg;
    cfg.grid_h = 16;
    cfg.grid_w = 16;
    cfg.channels = 2;
    cfg.patch = 8;
    cfg.dim = 16;
    cfg.encoder_blocks = 2;
    cfg.decoder_blocks = 1;
    cfg.decoder_dim = 8;
    cfg.heads = 2;
    Rng rng(11);
    VisionMae mae("vit", cfg, rng);

    VisionGrid g = random_grid(16, 16, 2, 12);
    PatchSequence seq = patchify(g, 8);
    MaskPlan plan = sample_mask(4, 0.5, 3);

    Tape t;
    Var enc = mae.encode_visible(t, seq.tokens, plan, Var());
    CHECK(enc.shape() == std::vector<int>{2, 16});

    Tensor scrambled = seq.tokens;
    Rng r2(77);
    for (int i : plan.masked)
        for (int j = 0; j < scrambled.shape[1]; ++j) scrambled.at(i, j) = r2.normal();
    Var enc2 = mae.encode_visible(t, scrambled, plan, Var());
    CHECK(enc.value().data == enc2.value().data);
}

TEST_CASE("encoder permutation equivariance over visible order") {
    ViTConfig cfg;
    cfg.grid_h = 16;
    cfg.grid_w = 16;
    cfg.channels = 1;
    cfg.patch = 4;
    cfg.dim = 8;
    cfg.encoder_blocks = 1;
    cfg.decoder_blocks = 1;
    cfg.decoder_dim = 8;
    cfg.heads = 2;
    Rng rng(13);
    VisionMae mae("vit", cfg, rng);
    VisionGrid g = random_grid(16, 16, 1, 14);
    PatchSequence seq = patchify(g, 4);

    MaskPlan plan;
    plan.ratio = 0.5;
    plan.visible = {1, 5, 9, 12};
    plan.masked = {0, 2, 3, 4, 6, 7, 8, 10, 11, 13, 14, 15};

    MaskPlan permuted = plan;
    permuted.visible = {9, 1, 12, 5};

    Tape t;
    Var a = mae.encode_visible(t, seq.tokens, plan, Var());
    Var b = mae.encode_visible(t, seq.tokens, permuted, Var());
    // row of `a` for token v must equal row of `b` wherever v moved
    std::vector<int> where = {1, 3, 0, 2};  // position of plan.visible[i] in permuted.visible
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 8; ++j)
            CHECK(a.value().at(i, j) == doctest::Approx(b.value().at(where[i], j)).epsilon(1e-12));
}

TEST_CASE("decoder output shape, masked-slot symmetry, zero-head bias broadcast") {
    ViTConfig cfg;
    cfg.grid_h = 16;
    cfg.grid_w = 16;
    cfg.channels = 2;
    cfg.patch = 8;
    cfg.dim = 16;
    cfg.encoder_blocks = 1;
    cfg.decoder_blocks = 1;
    cfg.decoder_dim = 8;
    cfg.heads = 2;
    Rng rng(15);
    VisionMae mae("vit", cfg, rng);
    VisionGrid g = random_grid(16, 16, 2, 16);
    PatchSequence seq = patchify(g, 8);
    MaskPlan plan = sample_mask(4, 0.5, 5);

    Tape t;
    Var enc = mae.encode_visible(t, seq.tokens, plan, Var());
    Var rec = mae.decode(t, enc, plan, Var());
    CHECK(rec.shape() == std::vector<int>{4, 8 * 8 * 2});

    // the shared mask token means masked slots differ only by positional input:
    // forcing their dec_pos rows equal makes their outputs identical
    int m0 = plan.masked[0], m1 = plan.masked[1];
    for (int j = 0; j < cfg.decoder_dim; ++j)
        mae.dec_pos.value.at(m1, j) = mae.dec_pos.value.at(m0, j);
    Tape t2;
    Var enc2 = mae.encode_visible(t2, seq.tokens, plan, Var());
    Var rec2 = mae.decode(t2, enc2, plan, Var());
    for (int j = 0; j < rec2.value().shape[1]; ++j)
        CHECK(rec2.value().at(m0, j) == rec2.value().at(m1, j));

    // zero decoder head -> output is the head bias broadcast
    std::fill(mae.head.w.value.data.begin(), mae.head.w.value.data.end(), 0.0);
    Rng rb(99);
    for (auto& v : mae.head.b.value.data) v = rb.normal();
    Tape t3;
    Var rec3 = mae.decode(t3, mae.encode_visible(t3, seq.tokens, plan, Var()), plan, Var());
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < rec3.value().shape[1]; ++j)
            CHECK(rec3.value().at(i, j) == mae.head.b.value.data[j]);
}

TEST_CASE("vision_loss identities") {
    Rng rng(17);
    Tensor target = rng.normal_tensor({6, 10}, 1.0);
    MaskPlan plan = sample_mask(6, 0.5, 21);

    Tape t;
    CHECK(scalar_value(vision_loss(t.constant(target), target, plan, 1.0)) < 1e-12);

    Tensor pred = rng.normal_tensor({6, 10}, 1.0);
    double with_beta0 = scalar_value(vision_loss(t.constant(pred), target, plan, 0.0));
    double mse = scalar_value(masked_mse(t.constant(pred), target, plan.masked));
    CHECK(with_beta0 == mse);

    Tensor doubled = target;
    for (auto& v : doubled.data) v *= 2.0;
    double mse_part = scalar_value(masked_mse(t.constant(doubled), target, plan.masked));
    double full = scalar_value(vision_loss(t.constant(doubled), target, plan, 1.0));
    CHECK(mse_part > 0.0);
    CHECK(full - mse_part < 1e-9);  // cosine term vanishes for scaled rows
}

TEST_CASE("end-to-end vision gradient check on toy config") {
    ViTConfig cfg;
    cfg.grid_h = 16;
    cfg.grid_w = 16;
    cfg.channels = 2;
    cfg.patch = 8;
    cfg.dim = 16;
    cfg.encoder_blocks = 1;
    cfg.decoder_blocks = 1;
    cfg.decoder_dim = 8;
    cfg.heads = 2;
    Rng rng(19);
    VisionMae mae("vit", cfg, rng);
    Mlp f_vis("f_vis", 2, 8, cfg.dim, rng);

    VisionGrid g = random_grid(16, 16, 2, 20);
    PatchSequence seq = patchify(g, 8);
    MaskPlan plan = sample_mask(4, 0.5, 7);
    std::vector<std::array<double, 2>> offsets;
    for (const auto& c : seq.centers) offsets.push_back(location_offset(c, g.origin));

    ParamList params;
    mae.collect(params);
    f_vis.collect(params);

    Tensor offs({4, 2});
    for (int i = 0; i < 4; ++i) {
        offs.at(i, 0) = offsets[i][0];
        offs.at(i, 1) = offsets[i][1];
    }
    auto run = [&](bool bw) {
        Tape t;
        Var e_vis = f_vis.forward(t, t.constant(offs));
        Var enc = mae.encode_visible(t, seq.tokens, plan, e_vis);
        Var rec = mae.decode(t, enc, plan, e_vis);
        Var loss = vision_loss(rec, seq.tokens, plan, 1.0);
        if (bw) t.backward(loss);
        return scalar_value(loss);
    };
    CHECK(geofusion::testing::max_grad_rel_err(run, params, 2e-5) < 1e-4);
}
