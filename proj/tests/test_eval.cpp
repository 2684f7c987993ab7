#include <cmath>

#include "doctest.h"
#include "geofusion/eval.hpp"
#include "test_oracles.hpp"

using namespace geofusion;
using namespace geofusion::testing;

TEST_CASE("hand-solved two-feature ridge system") {
    Tensor x({3, 2}, {1, 0, 0, 1, 1, 1});
    std::vector<double> y = {1, 2, 3};
    RidgeModel m = ridge_fit(x, y, 0.0);
    CHECK(m.coef[0] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(m.coef[1] == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(std::abs(m.intercept) < 1e-9);
    CHECK(r_squared(y, ridge_predict(m, x)) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("exact linear target recovered at lambda zero") {
    Rng rng(81);
    Tensor x = rng.normal_tensor({40, 6}, 1.0);
    std::vector<double> w = {1.5, -2.0, 0.3, 0.0, 4.0, -1.0};
    std::vector<double> y(40, 0.7);
    for (int i = 0; i < 40; ++i)
        for (int j = 0; j < 6; ++j) y[i] += x.at(i, j) * w[j];
    std::vector<int> train, test;
    for (int i = 0; i < 30; ++i) train.push_back(i);
    for (int i = 30; i < 40; ++i) test.push_back(i);
    ProbeResult p = fit_probe(x, y, train, test, 0.0);
    CHECK(p.r2_test == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("independent noise yields non-positive test R2; intercept-only R2 is zero") {
    Rng rng(83);
    Tensor x = rng.normal_tensor({200, 5}, 1.0);
    std::vector<double> y(200);
    for (auto& v : y) v = rng.normal();
    std::vector<int> train, test;
    for (int i = 0; i < 150; ++i) train.push_back(i);
    for (int i = 150; i < 200; ++i) test.push_back(i);
    ProbeResult p = fit_probe(x, y, train, test, 1.0);
    CHECK(p.r2_test < 0.15);

    std::vector<double> mean_pred(y.size());
    double m = 0.0;
    for (double v : y) m += v;
    m /= y.size();
    std::fill(mean_pred.begin(), mean_pred.end(), m);
    CHECK(std::abs(r_squared(y, mean_pred)) < 1e-12);
}

TEST_CASE("r_squared hand case and error paths") {
    CHECK(r_squared({0, 1, 2}, {0, 1, 1}) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK_THROWS_AS(r_squared({1, 1, 1}, {1, 1, 1}), std::invalid_argument);
    CHECK_THROWS_AS(r_squared({1}, {1}), std::invalid_argument);
}

TEST_CASE("singular system at lambda zero raises the advisory error") {
    Tensor x({4, 2}, {1, 2, 2, 4, 3, 6, -1, -2});  // second column is 2x first
    std::vector<double> y = {1, 2, 3, 0};
    CHECK_THROWS_WITH_AS(ridge_fit(x, y, 0.0),
                         "cholesky_solve: singular system; use ridge lambda > 0",
                         std::invalid_argument);
    CHECK_NOTHROW(ridge_fit(x, y, 1e-6));
}

TEST_CASE("probe rejects overlapping splits") {
    Rng rng(85);
    Tensor x = rng.normal_tensor({10, 2}, 1.0);
    std::vector<double> y(10, 0.0);
    for (int i = 0; i < 10; ++i) y[i] = x.at(i, 0);
    CHECK_THROWS_AS(fit_probe(x, y, {0, 1, 2}, {2, 3}, 0.1), std::invalid_argument);
}

TEST_CASE("probe R2 invariant to invertible affine feature transforms") {
    Rng rng(87);
    Tensor x = rng.normal_tensor({60, 4}, 1.0);
    std::vector<double> y(60);
    for (int i = 0; i < 60; ++i)
        y[i] = 2.0 * x.at(i, 0) - x.at(i, 2) + 0.3 * rng.normal();
    std::vector<int> train, test;
    for (int i = 0; i < 45; ++i) train.push_back(i);
    for (int i = 45; i < 60; ++i) test.push_back(i);

    // well-conditioned invertible mix plus shift
    Tensor mix({4, 4}, {2, 0.3, 0, 0.1, 0.1, 1.5, 0.2, 0, 0, 0.2, 0.9, 0.4, 0.3, 0, 0.1, 1.2});
    Tensor xt({60, 4});
    for (int i = 0; i < 60; ++i)
        for (int j = 0; j < 4; ++j) {
            double v = 5.0 + 0.5 * j;
            for (int k = 0; k < 4; ++k) v += x.at(i, k) * mix.at(k, j);
            xt.at(i, j) = v;
        }
    double a = fit_probe(x, y, train, test, 0.0).r2_test;
    double b = fit_probe(xt, y, train, test, 0.0).r2_test;
    CHECK(a == doctest::Approx(b).epsilon(1e-8));
}

TEST_CASE("ridge matches the LU normal-equation oracle on random instances") {
    Rng rng(89);
    for (int trial = 0; trial < 8; ++trial) {
        Tensor x = rng.normal_tensor({50, 10}, 1.0);
        std::vector<double> y(50);
        for (int i = 0; i < 50; ++i) y[i] = rng.normal() + 0.5 * x.at(i, trial % 10);
        const double lambda = 0.05 + 0.1 * trial;

        RidgeModel mine = ridge_fit(x, y, lambda);

        // oracle: centered normal equations solved by LU with partial pivoting
        std::vector<double> xm(10, 0.0);
        double ym = 0.0;
        for (int i = 0; i < 50; ++i) {
            ym += y[i];
            for (int j = 0; j < 10; ++j) xm[j] += x.at(i, j);
        }
        ym /= 50;
        for (auto& v : xm) v /= 50;
        Tensor a = Tensor::zeros({10, 10});
        std::vector<double> b(10, 0.0);
        for (int i = 0; i < 50; ++i)
            for (int j = 0; j < 10; ++j) {
                b[j] += (x.at(i, j) - xm[j]) * (y[i] - ym);
                for (int k = 0; k < 10; ++k)
                    a.at(j, k) += (x.at(i, j) - xm[j]) * (x.at(i, k) - xm[k]);
            }
        for (int j = 0; j < 10; ++j) a.at(j, j) += lambda;
        std::vector<double> oracle = lu_solve(a, b);
        for (int j = 0; j < 10; ++j)
            CHECK(std::abs(mine.coef[j] - oracle[j]) < 1e-8);
    }
}

TEST_CASE("pca on a line and fixed covariance ratios") {
    // points on a line in 2D: PC1 explains everything
    Tensor line({20, 2});
    for (int i = 0; i < 20; ++i) {
        line.at(i, 0) = 0.5 * i;
        line.at(i, 1) = -1.5 * i + 3.0;
    }
    PcaResult one = pca(line, 2);
    CHECK(one.explained_ratio[0] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(!one.warning.empty());  // rank 1 < requested 2

    // anisotropic Gaussian with covariance diag(2, 1): ratios -> [2/3, 1/3]
    Rng rng(91);
    const int n = 20000;
    Tensor g({n, 2});
    for (int i = 0; i < n; ++i) {
        g.at(i, 0) = rng.normal() * std::sqrt(2.0);
        g.at(i, 1) = rng.normal();
    }
    PcaResult two = pca(g, 2);
    CHECK(two.explained_ratio[0] == doctest::Approx(2.0 / 3.0).epsilon(0.02));
    CHECK(two.explained_ratio[1] == doctest::Approx(1.0 / 3.0).epsilon(0.03));
}

TEST_CASE("pca invariants: orthonormal components, ordered ratios, lossless at full rank") {
    Rng rng(93);
    Tensor x = rng.normal_tensor({40, 6}, 1.0);
    PcaResult res = pca(x, 6);
    REQUIRE(res.k == 6);
    for (int a = 0; a < 6; ++a)
        for (int b = 0; b < 6; ++b) {
            double dot = 0.0;
            for (int j = 0; j < 6; ++j) dot += res.components.at(a, j) * res.components.at(b, j);
            CHECK(std::abs(dot - (a == b ? 1.0 : 0.0)) < 1e-10);
        }
    double sum = 0.0;
    for (int c = 0; c + 1 < 6; ++c) CHECK(res.explained_ratio[c] >= res.explained_ratio[c + 1]);
    for (double r : res.explained_ratio) sum += r;
    CHECK(sum <= 1.0 + 1e-12);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));

    // reconstruct: x = mean + scores @ components
    for (int i = 0; i < 40; ++i)
        for (int j = 0; j < 6; ++j) {
            double v = res.mean[j];
            for (int c = 0; c < 6; ++c) v += res.scores.at(i, c) * res.components.at(c, j);
            CHECK(std::abs(v - x.at(i, j)) < 1e-8);
        }
}

TEST_CASE("pca matches the cyclic Jacobi oracle on random 50x10 instances") {
    Rng rng(95);
    for (int trial = 0; trial < 5; ++trial) {
        Tensor x = rng.normal_tensor({50, 10}, 1.0);
        PcaResult res = pca(x, 10);

        std::vector<double> xm(10, 0.0);
        for (int i = 0; i < 50; ++i)
            for (int j = 0; j < 10; ++j) xm[j] += x.at(i, j);
        for (auto& v : xm) v /= 50;
        Tensor cov = Tensor::zeros({10, 10});
        for (int i = 0; i < 50; ++i)
            for (int j = 0; j < 10; ++j)
                for (int k = 0; k < 10; ++k)
                    cov.at(j, k) += (x.at(i, j) - xm[j]) * (x.at(i, k) - xm[k]) / 49.0;
        std::vector<double> evals;
        Tensor evecs;
        jacobi_eigen(cov, evals, evecs);

        double total = 0.0;
        for (double v : evals) total += std::max(v, 0.0);
        for (int c = 0; c < 10; ++c) {
            const int src = 9 - c;
            CHECK(std::abs(res.explained_ratio[c] - std::max(evals[src], 0.0) / total) < 1e-8);
            // compare components up to sign
            double dot = 0.0;
            for (int j = 0; j < 10; ++j) dot += res.components.at(c, j) * evecs.at(j, src);
            CHECK(std::abs(std::abs(dot) - 1.0) < 1e-8);
        }
    }
}

TEST_CASE("sym_eigen agrees with Jacobi on random symmetric matrices") {
    Rng rng(97);
    for (int trial = 0; trial < 6; ++trial) {
        const int n = 3 + trial * 2;
        Tensor a({n, n});
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j) {
                a.at(i, j) = rng.normal();
                a.at(j, i) = a.at(i, j);
            }
        std::vector<double> d1, d2;
        Tensor v1, v2;
        sym_eigen(a, d1, v1);
        jacobi_eigen(a, d2, v2);
        for (int i = 0; i < n; ++i) CHECK(std::abs(d1[i] - d2[i]) < 1e-9);
        // residual check: A v = lambda v
        for (int c = 0; c < n; ++c)
            for (int i = 0; i < n; ++i) {
                double av = 0.0;
                for (int j = 0; j < n; ++j) av += a.at(i, j) * v1.at(j, c);
                CHECK(std::abs(av - d1[c] * v1.at(i, c)) < 1e-9);
            }
    }
}

TEST_CASE("embedding table round trip and validation") {
    EmbeddingTable t;
    t.ids = {3, 1, 7};
    t.vectors = Tensor({3, 2}, {0.5, -1.25, 3.75, 0.0, 1e-7, 42.0});
    t.provenance = "unit-test";
    t.save_tsv("/tmp/gf_test_embed.tsv");
    EmbeddingTable back = EmbeddingTable::load_tsv("/tmp/gf_test_embed.tsv");
    CHECK(back.ids == t.ids);
    CHECK(back.provenance == t.provenance);
    for (int64_t i = 0; i < t.vectors.numel(); ++i)
        CHECK(back.vectors.data[i] == t.vectors.data[i]);

    EmbeddingTable dup;
    dup.ids = {1, 1};
    dup.vectors = Tensor({2, 1});
    CHECK_THROWS_AS(dup.validate(), std::invalid_argument);
}
