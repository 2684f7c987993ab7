#include <cmath>

#include "doctest.h"
#include "geofusion/autodiff.hpp"
#include "geofusion/optim.hpp"
#include "test_helpers.hpp"

using namespace geofusion;
using geofusion::testing::max_grad_rel_err;

TEST_CASE("matmul identity and hand-computed product") {
    Tape t;
    Var eye = t.constant(Tensor({2, 2}, {1, 0, 0, 1}));
    Var b = t.constant(Tensor({2, 2}, {3, 4, 5, 6}));
    Var p = matmul(eye, b);
    CHECK(p.value().data == std::vector<double>{3, 4, 5, 6});

    Var r = matmul(t.constant(Tensor({1, 2}, {1, 2})), t.constant(Tensor({2, 1}, {3, 4})));
    CHECK(r.value().data[0] == 11.0);
}

TEST_CASE("matmul shape mismatch raises") {
    Tape t;
    Var a = t.constant(Tensor({2, 3}));
    Var b = t.constant(Tensor({2, 2}));
    CHECK_THROWS_AS(matmul(a, b), std::invalid_argument);
}

TEST_CASE("matmul gradient vs central finite differences on random 3x3") {
    Rng rng(11);
    Parameter a("a", rng.normal_tensor({3, 3}, 1.0));
    Parameter b("b", rng.normal_tensor({3, 3}, 1.0));
    Tensor w = rng.normal_tensor({3, 3}, 1.0);  // fixed weighting makes the loss non-trivial
    auto run = [&](bool bw) {
        Tape t;
        Var prod = mul(matmul(t.leaf(a), t.leaf(b)), t.constant(w));
        Var loss = sum_all(prod);
        if (bw) t.backward(loss);
        return scalar_value(loss);
    };
    CHECK(max_grad_rel_err(run, {&a, &b}) < 1e-6);
}

TEST_CASE("softmax_with_bias basics") {
    Tape t;
    Var s = softmax_with_bias(t.constant(Tensor({1, 2}, {0, 0})), t.constant(Tensor({1, 2}, {0, 0})));
    CHECK(s.value().data[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(s.value().data[1] == doctest::Approx(0.5).epsilon(1e-15));

    const double big = 40.0;
    Var l = softmax_with_bias(t.constant(Tensor({1, 2}, {0, 0})),
                              t.constant(Tensor({1, 2}, {big, -big})));
    CHECK(l.value().data[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(l.value().data[1] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("softmax matches direct exp/sum evaluation") {
    Tape t;
    Var s = softmax(t.constant(Tensor({1, 3}, {1, 2, 3})));
    const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
    for (int j = 0; j < 3; ++j)
        CHECK(std::abs(s.value().data[j] - std::exp(1.0 + j) / z) < 1e-12);
}

TEST_CASE("softmax rows sum to one and shift invariance") {
    Rng rng(5);
    Tensor logits = rng.normal_tensor({6, 9}, 2.0);
    Tape t;
    Var s = softmax(t.constant(logits));
    Tensor shifted = logits;
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 9; ++j) shifted.at(i, j) += 7.25;
    Var s2 = softmax(t.constant(shifted));
    for (int i = 0; i < 6; ++i) {
        double sum = 0.0;
        for (int j = 0; j < 9; ++j) sum += s.value().at(i, j);
        CHECK(std::abs(sum - 1.0) < 1e-12);
        for (int j = 0; j < 9; ++j)
            CHECK(std::abs(s.value().at(i, j) - s2.value().at(i, j)) < 1e-12);
    }
}

TEST_CASE("softmax gradient check") {
    Rng rng(7);
    Parameter logits("l", rng.normal_tensor({4, 5}, 1.0));
    Parameter bias("b", rng.normal_tensor({4, 5}, 1.0));
    Tensor w = rng.normal_tensor({4, 5}, 1.0);
    auto run = [&](bool bw) {
        Tape t;
        Var s = softmax_with_bias(t.leaf(logits), t.leaf(bias));
        Var loss = sum_all(mul(s, t.constant(w)));
        if (bw) t.backward(loss);
        return scalar_value(loss);
    };
    CHECK(max_grad_rel_err(run, {&logits, &bias}) < 1e-6);
}

TEST_CASE("layer_norm constant vector maps to shift") {
    Parameter gain("g", Tensor::full({4}, 1.0));
    Parameter shift("s", Tensor::zeros({4}));
    Tape t;
    Var y = layer_norm(t.constant(Tensor::full({2, 4}, 3.5)), t.leaf(gain), t.leaf(shift), 1e-5);
    for (double v : y.value().data) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("layer_norm output mean equals shift for gain one") {
    Rng rng(3);
    Parameter gain("g", Tensor::full({6}, 1.0));
    Parameter shift("s", Tensor::full({6}, 0.75));
    Tape t;
    Var y = layer_norm(t.constant(rng.normal_tensor({5, 6}, 2.0)), t.leaf(gain), t.leaf(shift), 1e-10);
    for (int i = 0; i < 5; ++i) {
        double m = 0.0;
        for (int j = 0; j < 6; ++j) m += y.value().at(i, j);
        CHECK(std::abs(m / 6.0 - 0.75) < 1e-9);
    }
}

TEST_CASE("layer_norm gradient check") {
    Rng rng(9);
    Parameter x("x", rng.normal_tensor({3, 7}, 1.0));
    Parameter gain("g", rng.normal_tensor({7}, 0.5));
    Parameter shift("s", rng.normal_tensor({7}, 0.5));
    Tensor w = rng.normal_tensor({3, 7}, 1.0);
    auto run = [&](bool bw) {
        Tape t;
        Var y = layer_norm(t.leaf(x), t.leaf(gain), t.leaf(shift), 1e-5);
        Var loss = sum_all(mul(y, t.constant(w)));
        if (bw) t.backward(loss);
        return scalar_value(loss);
    };
    CHECK(max_grad_rel_err(run, {&x, &gain, &shift}) < 1e-5);
}

TEST_CASE("masked_mse contract") {
    Rng rng(13);
    Tensor target = rng.normal_tensor({5, 3}, 1.0);
    std::vector<int> mask = {1, 3};

    Tape t;
    Var perfect = t.constant(target);
    CHECK(scalar_value(masked_mse(perfect, target, mask)) == 0.0);

    // single masked row with error vector [1, -1] -> mean of {1, 1} = 1
    Tensor tgt2 = Tensor::zeros({3, 2});
    Tensor pred2 = Tensor::zeros({3, 2});
    pred2.at(1, 0) = 1.0;
    pred2.at(1, 1) = -1.0;
    CHECK(scalar_value(masked_mse(t.constant(pred2), tgt2, {1})) == 1.0);

    CHECK_THROWS_AS(masked_mse(t.constant(pred2), tgt2, {}), std::invalid_argument);
}

TEST_CASE("masked losses ignore unmasked positions bitwise") {
    Rng rng(17);
    Tensor pred = rng.normal_tensor({6, 4}, 1.0);
    Tensor target = rng.normal_tensor({6, 4}, 1.0);
    std::vector<int> mask = {0, 2, 5};

    Tape t;
    double mse1 = scalar_value(masked_mse(t.constant(pred), target, mask));
    double l11 = scalar_value(masked_l1(t.constant(pred), target, mask));
    double cos1 = scalar_value(cosine_distance_loss(t.constant(pred), target, mask));

    // randomize every unmasked row of the target
    Tensor scrambled = target;
    for (int i : {1, 3, 4})
        for (int j = 0; j < 4; ++j) scrambled.at(i, j) = rng.normal();
    double mse2 = scalar_value(masked_mse(t.constant(pred), scrambled, mask));
    double l12 = scalar_value(masked_l1(t.constant(pred), scrambled, mask));
    double cos2 = scalar_value(cosine_distance_loss(t.constant(pred), scrambled, mask));
    CHECK(mse1 == mse2);
    CHECK(l11 == l12);
    CHECK(cos1 == cos2);
}

TEST_CASE("masked_l1 constant offset and gradient away from zero crossings") {
    Tensor target = Tensor::zeros({4, 3});
    Tensor pred = Tensor::full({4, 3}, 0.6);
    Tape t;
    CHECK(scalar_value(masked_l1(t.constant(pred), target, {0, 2})) ==
          doctest::Approx(0.6).epsilon(1e-15));

    Rng rng(19);
    Parameter p("p", rng.normal_tensor({4, 3}, 1.0));
    // keep entries away from pred == target so |.| is differentiable
    for (auto& v : p.value.data)
        if (std::abs(v) < 0.2) v += 0.5;
    auto run = [&](bool bw) {
        Tape t2;
        Var loss = masked_l1(t2.leaf(p), target, {1, 3});
        if (bw) t2.backward(loss);
        return scalar_value(loss);
    };
    CHECK(max_grad_rel_err(run, {&p}) < 1e-6);
}

TEST_CASE("cosine_distance_loss identities") {
    Rng rng(23);
    Tensor target = rng.normal_tensor({3, 8}, 1.0);
    Tape t;
    CHECK(scalar_value(cosine_distance_loss(t.constant(target), target, {0, 1, 2})) < 1e-9);

    Tensor anti = target;
    for (auto& v : anti.data) v = -v;
    CHECK(scalar_value(cosine_distance_loss(t.constant(anti), target, {0, 1, 2})) ==
          doctest::Approx(2.0).epsilon(1e-9));

    Tensor scaled = target;
    for (auto& v : scaled.data) v *= 2.0;
    CHECK(scalar_value(cosine_distance_loss(t.constant(scaled), target, {0, 1, 2})) < 1e-9);
}

TEST_CASE("cosine_distance_loss invariant to positive rescaling, gradient checks") {
    Rng rng(29);
    Tensor target = rng.normal_tensor({4, 5}, 1.0);
    Parameter p("p", rng.normal_tensor({4, 5}, 1.0));
    auto run = [&](bool bw) {
        Tape t;
        Var loss = cosine_distance_loss(t.leaf(p), target, {0, 2, 3});
        if (bw) t.backward(loss);
        return scalar_value(loss);
    };
    CHECK(max_grad_rel_err(run, {&p}) < 1e-5);

    Tape t;
    double base = scalar_value(cosine_distance_loss(t.constant(p.value), target, {0, 2, 3}));
    Tensor scaled_target = target;
    for (auto& v : scaled_target.data) v *= 3.7;
    double rescaled =
        scalar_value(cosine_distance_loss(t.constant(p.value), scaled_target, {0, 2, 3}));
    CHECK(std::abs(base - rescaled) < 1e-9);
}

TEST_CASE("structural ops gradient checks") {
    Rng rng(31);
    Parameter x("x", rng.normal_tensor({5, 6}, 1.0));
    Parameter fill("f", rng.normal_tensor({6}, 1.0));
    Tensor w = rng.normal_tensor({7, 6}, 1.0);
    std::vector<int> vis = {0, 2, 6};
    auto run = [&](bool bw) {
        Tape t;
        Var taken = take_rows(t.leaf(x), {0, 1, 4});
        Var assembled = assemble_rows(7, vis, taken, t.leaf(fill));
        Var g = gelu(assembled);
        Var loss = sum_all(mul(g, t.constant(w)));
        if (bw) t.backward(loss);
        return scalar_value(loss);
    };
    CHECK(max_grad_rel_err(run, {&x, &fill}) < 1e-6);
}

TEST_CASE("slice/concat/vstack/transpose gradient checks") {
    Rng rng(37);
    Parameter x("x", rng.normal_tensor({4, 8}, 1.0));
    Tensor w = rng.normal_tensor({8, 8}, 1.0);
    auto run = [&](bool bw) {
        Tape t;
        Var a = slice_cols(t.leaf(x), 0, 3);
        Var b = slice_cols(t.leaf(x), 3, 5);
        Var joined = concat_cols({a, b});
        Var doubled = vstack({joined, joined});
        Var tr = transpose(doubled);
        Var loss = sum_all(mul(tr, t.constant(w)));
        if (bw) t.backward(loss);
        return scalar_value(loss);
    };
    CHECK(max_grad_rel_err(run, {&x}) < 1e-6);
}

TEST_CASE("add_scaled_const gradient flows to the gain") {
    Rng rng(41);
    Parameter x("x", rng.normal_tensor({3, 3}, 1.0));
    Parameter s("s", Tensor::scalar(1.3));
    Tensor b = rng.normal_tensor({3, 3}, 1.0);
    auto run = [&](bool bw) {
        Tape t;
        Var out = add_scaled_const(t.leaf(x), b, element(t.leaf(s), 0));
        Var loss = mean_all(mul(out, out));
        if (bw) t.backward(loss);
        return scalar_value(loss);
    };
    CHECK(max_grad_rel_err(run, {&x, &s}) < 1e-6);
}

TEST_CASE("backward raises on non-finite loss") {
    Tape t;
    Var bad = t.constant(Tensor::scalar(std::numeric_limits<double>::quiet_NaN()));
    CHECK_THROWS_AS(t.backward(bad), std::runtime_error);
}

TEST_CASE("adamw single step matches hand-computed update") {
    Parameter p("p", Tensor::scalar(1.0));
    p.grad.data[0] = 1.0;
    AdamW opt({&p}, AdamWConfig{0.9, 0.95, 1e-8, 0.0});
    opt.step(0.1);
    // m_hat = 1, v_hat = 1 after bias correction
    const double expected = 1.0 - 0.1 * 1.0 / (1.0 + 1e-8);
    CHECK(std::abs(p.value.data[0] - expected) < 1e-15);
}

TEST_CASE("adamw zero grad cases") {
    Parameter p("p", Tensor::scalar(2.0));
    AdamW no_decay({&p}, AdamWConfig{0.9, 0.95, 1e-8, 0.0});
    no_decay.step(0.1);
    CHECK(p.value.data[0] == 2.0);

    Parameter q("q", Tensor::scalar(2.0));
    AdamW decay({&q}, AdamWConfig{0.9, 0.95, 1e-8, 0.05});
    decay.step(0.1);
    CHECK(q.value.data[0] == 2.0 * (1.0 - 0.1 * 0.05));
}

TEST_CASE("lr schedule endpoints and midpoint") {
    LrSchedule sched{3e-4, 100, 1100};
    CHECK(sched.at(0) == 0.0);
    CHECK(sched.at(100) == 3e-4);
    CHECK(sched.at(1100) == 0.0);
    CHECK(sched.at(100 + 500) == doctest::Approx(1.5e-4).epsilon(1e-12));
}

TEST_CASE("rng determinism and uniform int range") {
    Rng a(123), b(123);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    Rng c(7);
    for (int i = 0; i < 1000; ++i) {
        int v = c.uniform_int(13);
        CHECK(v >= 0);
        CHECK(v < 13);
    }
}
