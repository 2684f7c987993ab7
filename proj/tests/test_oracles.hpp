#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "geofusion/tensor.hpp"

// Brute-force reference implementations, independent of the library paths
// they check: LU with partial pivoting for linear systems and a cyclic
// Jacobi eigensolver for symmetric matrices.
namespace geofusion::testing {

inline std::vector<double> lu_solve(Tensor a, std::vector<double> b) {
    const int n = a.shape[0];
    std::vector<int> piv(n);
    for (int i = 0; i < n; ++i) piv[i] = i;
    for (int col = 0; col < n; ++col) {
        int best = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(a.at(r, col)) > std::abs(a.at(best, col))) best = r;
        if (std::abs(a.at(best, col)) < 1e-300) throw std::runtime_error("lu_solve: singular");
        if (best != col) {
            for (int j = 0; j < n; ++j) std::swap(a.at(col, j), a.at(best, j));
            std::swap(b[col], b[best]);
        }
        for (int r = col + 1; r < n; ++r) {
            const double f = a.at(r, col) / a.at(col, col);
            a.at(r, col) = 0.0;
            for (int j = col + 1; j < n; ++j) a.at(r, j) -= f * a.at(col, j);
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n);
    for (int i = n - 1; i >= 0; --i) {
        double s = b[i];
        for (int j = i + 1; j < n; ++j) s -= a.at(i, j) * x[j];
        x[i] = s / a.at(i, i);
    }
    return x;
}

// Returns eigenvalues ascending; vectors in the corresponding columns.
inline void jacobi_eigen(Tensor a, std::vector<double>& values, Tensor& vectors) {
    const int n = a.shape[0];
    vectors = Tensor::zeros({n, n});
    for (int i = 0; i < n; ++i) vectors.at(i, i) = 1.0;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += a.at(p, q) * a.at(p, q);
        if (off < 1e-24) break;
        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                if (std::abs(a.at(p, q)) < 1e-300) continue;
                const double theta = (a.at(q, q) - a.at(p, p)) / (2.0 * a.at(p, q));
                const double t =
                    (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = a.at(k, p), akq = a.at(k, q);
                    a.at(k, p) = c * akp - s * akq;
                    a.at(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = a.at(p, k), aqk = a.at(q, k);
                    a.at(p, k) = c * apk - s * aqk;
                    a.at(q, k) = s * apk + c * aqk;
                }
                for (int k = 0; k < n; ++k) {
                    const double vkp = vectors.at(k, p), vkq = vectors.at(k, q);
                    vectors.at(k, p) = c * vkp - s * vkq;
                    vectors.at(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    values.resize(n);
    for (int i = 0; i < n; ++i) values[i] = a.at(i, i);
    for (int i = 0; i < n - 1; ++i) {
        int k = i;
        for (int j = i + 1; j < n; ++j)
            if (values[j] < values[k]) k = j;
        if (k != i) {
            std::swap(values[i], values[k]);
            for (int r = 0; r < n; ++r) std::swap(vectors.at(r, i), vectors.at(r, k));
        }
    }
}

}  // namespace geofusion::testing
