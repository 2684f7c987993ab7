#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "geofusion/tensor.hpp"

namespace geofusion {

// ---- dense linear algebra (small systems) ------------------------------

// Solves A x = b for symmetric positive definite A via Cholesky.
// Throws std::invalid_argument when A is not positive definite.
std::vector<double> cholesky_solve(const Tensor& a, const std::vector<double>& b);

// Eigendecomposition of a real symmetric matrix: Householder tridiagonal
// reduction followed by implicitly shifted QL. values ascending, vectors in
// the corresponding columns of `vectors`.
void sym_eigen(const Tensor& a, std::vector<double>& values, Tensor& vectors);

// ---- ridge probes --------------------------------------------------------

struct RidgeModel {
    std::vector<double> coef;
    double intercept = 0.0;
};

// Closed-form ridge with an unpenalized intercept (via centering).
// lambda = 0 is allowed for well-conditioned systems; a singular system
// raises an error advising lambda > 0.
RidgeModel ridge_fit(const Tensor& x, const std::vector<double>& y, double lambda);
std::vector<double> ridge_predict(const RidgeModel& model, const Tensor& x);

// 1 - SS_res/SS_tot with SS_tot about mean(y). Requires len >= 2, var(y) > 0.
double r_squared(const std::vector<double>& y, const std::vector<double>& y_hat);

struct ProbeResult {
    double r2_train = 0.0;
    double r2_test = 0.0;
    double ridge_lambda = 0.0;
    std::string split_name;
    RidgeModel model;
};

// lambda < 0 selects the scale-aware default 1e-3 * trace(Xc^T Xc) / dim.
ProbeResult fit_probe(const Tensor& x, const std::vector<double>& y,
                      const std::vector<int>& train_idx, const std::vector<int>& test_idx,
                      double lambda = -1.0, const std::string& split_name = "random");

// ---- PCA ------------------------------------------------------------

struct PcaResult {
    Tensor components;                    // [k, d], rows orthonormal
    std::vector<double> explained_ratio;  // non-increasing, sums <= 1
    Tensor scores;                        // [n, k]
    std::vector<double> mean;             // column means used for centering
    int k = 0;
    std::string warning;  // set when k was reduced to the numerical rank
};

PcaResult pca(const Tensor& x, int k);

// ---- embedding tables ------------------------------------------------

struct EmbeddingTable {
    std::vector<int64_t> ids;
    Tensor vectors;  // [n, d]
    std::string provenance;

    int size() const { return static_cast<int>(ids.size()); }
    int dim() const { return vectors.shape.size() == 2 ? vectors.shape[1] : 0; }
    void validate() const;
    void save_tsv(const std::string& path) const;
    static EmbeddingTable load_tsv(const std::string& path);
};

}  // namespace geofusion
