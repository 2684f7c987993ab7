#include "geofusion/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "geofusion/io.hpp"

namespace geofusion {

std::vector<double> cholesky_solve(const Tensor& a, const std::vector<double>& b) {
    if (a.rank() != 2 || a.shape[0] != a.shape[1])
        throw std::invalid_argument("cholesky_solve: square matrix required");
    const int n = a.shape[0];
    if (static_cast<int>(b.size()) != n)
        throw std::invalid_argument("cholesky_solve: rhs length mismatch");
    Tensor l = Tensor::zeros({n, n});
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            double s = a.at(i, j);
            for (int k = 0; k < j; ++k) s -= l.at(i, k) * l.at(j, k);
            if (i == j) {
                if (s <= 0.0)
                    throw std::invalid_argument(
                        "cholesky_solve: singular system; use ridge lambda > 0");
                l.at(i, i) = std::sqrt(s);
            } else {
                l.at(i, j) = s / l.at(j, j);
            }
        }
    }
    std::vector<double> y(n), x(n);
    for (int i = 0; i < n; ++i) {
        double s = b[i];
        for (int k = 0; k < i; ++k) s -= l.at(i, k) * y[k];
        y[i] = s / l.at(i, i);
    }
    for (int i = n - 1; i >= 0; --i) {
        double s = y[i];
        for (int k = i + 1; k < n; ++k) s -= l.at(k, i) * x[k];
        x[i] = s / l.at(i, i);
    }
    return x;
}

void sym_eigen(const Tensor& a, std::vector<double>& d, Tensor& z) {
    if (a.rank() != 2 || a.shape[0] != a.shape[1])
        throw std::invalid_argument("sym_eigen: square matrix required");
    const int n = a.shape[0];
    z = a;
    d.assign(n, 0.0);
    std::vector<double> e(n, 0.0);

    // Householder reduction to tridiagonal form (tred2)
    for (int i = n - 1; i > 0; --i) {
        const int l = i - 1;
        double h = 0.0, scale = 0.0;
        if (l > 0) {
            for (int k = 0; k <= l; ++k) scale += std::abs(z.at(i, k));
            if (scale == 0.0) {
                e[i] = z.at(i, l);
            } else {
                for (int k = 0; k <= l; ++k) {
                    z.at(i, k) /= scale;
                    h += z.at(i, k) * z.at(i, k);
                }
                double f = z.at(i, l);
                double g = (f >= 0.0) ? -std::sqrt(h) : std::sqrt(h);
                e[i] = scale * g;
                h -= f * g;
                z.at(i, l) = f - g;
                f = 0.0;
                for (int j = 0; j <= l; ++j) {
                    z.at(j, i) = z.at(i, j) / h;
                    g = 0.0;
                    for (int k = 0; k <= j; ++k) g += z.at(j, k) * z.at(i, k);
                    for (int k = j + 1; k <= l; ++k) g += z.at(k, j) * z.at(i, k);
                    e[j] = g / h;
                    f += e[j] * z.at(i, j);
                }
                const double hh = f / (h + h);
                for (int j = 0; j <= l; ++j) {
                    f = z.at(i, j);
                    e[j] = g = e[j] - hh * f;
                    for (int k = 0; k <= j; ++k) z.at(j, k) -= f * e[k] + g * z.at(i, k);
                }
            }
        } else {
            e[i] = z.at(i, l);
        }
        d[i] = h;
    }
    d[0] = 0.0;
    e[0] = 0.0;
    for (int i = 0; i < n; ++i) {
        const int l = i - 1;
        if (d[i] != 0.0) {
            for (int j = 0; j <= l; ++j) {
                double g = 0.0;
                for (int k = 0; k <= l; ++k) g += z.at(i, k) * z.at(k, j);
                for (int k = 0; k <= l; ++k) z.at(k, j) -= g * z.at(k, i);
            }
        }
        d[i] = z.at(i, i);
        z.at(i, i) = 1.0;
        for (int j = 0; j <= l; ++j) {
            z.at(j, i) = 0.0;
            z.at(i, j) = 0.0;
        }
    }

    // implicitly shifted QL on the tridiagonal form (tql2)
    for (int i = 1; i < n; ++i) e[i - 1] = e[i];
    e[n - 1] = 0.0;
    for (int l = 0; l < n; ++l) {
        int iter = 0;
        int m;
        do {
            for (m = l; m < n - 1; ++m) {
                const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
                if (std::abs(e[m]) <= std::numeric_limits<double>::epsilon() * dd) break;
            }
            if (m != l) {
                if (iter++ == 64) throw std::runtime_error("sym_eigen: QL failed to converge");
                double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                double r = std::hypot(g, 1.0);
                g = d[m] - d[l] + e[l] / (g + (g >= 0.0 ? std::abs(r) : -std::abs(r)));
                double s = 1.0, c = 1.0, p = 0.0;
                int i;
                for (i = m - 1; i >= l; --i) {
                    double f = s * e[i];
                    const double b = c * e[i];
                    r = std::hypot(f, g);
                    e[i + 1] = r;
                    if (r == 0.0) {
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                    for (int k = 0; k < n; ++k) {
                        f = z.at(k, i + 1);
                        z.at(k, i + 1) = s * z.at(k, i) + c * f;
                        z.at(k, i) = c * z.at(k, i) - s * f;
                    }
                }
                if (r == 0.0 && i >= l) continue;
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        } while (m != l);
    }

    // ascending order with matching columns
    for (int i = 0; i < n - 1; ++i) {
        int k = i;
        for (int j = i + 1; j < n; ++j)
            if (d[j] < d[k]) k = j;
        if (k != i) {
            std::swap(d[i], d[k]);
            for (int r = 0; r < n; ++r) std::swap(z.at(r, i), z.at(r, k));
        }
    }
}

// ---- ridge ---------------------------------------------------------------

namespace {

void check_xy(const Tensor& x, const std::vector<double>& y, const char* op) {
    if (x.rank() != 2) throw std::invalid_argument(std::string(op) + ": X must be rank-2");
    if (x.shape[0] != static_cast<int>(y.size()))
        throw std::invalid_argument(std::string(op) + ": row count mismatch");
    if (x.shape[0] < 2) throw std::invalid_argument(std::string(op) + ": need >= 2 samples");
}

}  // namespace

RidgeModel ridge_fit(const Tensor& x, const std::vector<double>& y, double lambda) {
    check_xy(x, y, "ridge_fit");
    if (lambda < 0.0) throw std::invalid_argument("ridge_fit: lambda must be >= 0");
    const int n = x.shape[0], d = x.shape[1];
    std::vector<double> xm(d, 0.0);
    double ym = 0.0;
    for (int i = 0; i < n; ++i) {
        ym += y[i];
        for (int j = 0; j < d; ++j) xm[j] += x.at(i, j);
    }
    ym /= n;
    for (auto& v : xm) v /= n;

    Tensor a = Tensor::zeros({d, d});
    std::vector<double> b(d, 0.0);
    for (int i = 0; i < n; ++i) {
        const double yc = y[i] - ym;
        for (int j = 0; j < d; ++j) {
            const double xj = x.at(i, j) - xm[j];
            b[j] += xj * yc;
            for (int k = j; k < d; ++k) a.at(j, k) += xj * (x.at(i, k) - xm[k]);
        }
    }
    for (int j = 0; j < d; ++j) {
        a.at(j, j) += lambda;
        for (int k = j + 1; k < d; ++k) a.at(k, j) = a.at(j, k);
    }

    RidgeModel model;
    model.coef = cholesky_solve(a, b);
    model.intercept = ym;
    for (int j = 0; j < d; ++j) model.intercept -= xm[j] * model.coef[j];
    return model;
}

std::vector<double> ridge_predict(const RidgeModel& model, const Tensor& x) {
    if (x.rank() != 2 || x.shape[1] != static_cast<int>(model.coef.size()))
        throw std::invalid_argument("ridge_predict: dimension mismatch");
    std::vector<double> out(x.shape[0], model.intercept);
    for (int i = 0; i < x.shape[0]; ++i)
        for (int j = 0; j < x.shape[1]; ++j) out[i] += x.at(i, j) * model.coef[j];
    return out;
}

double r_squared(const std::vector<double>& y, const std::vector<double>& y_hat) {
    if (y.size() != y_hat.size()) throw std::invalid_argument("r_squared: length mismatch");
    if (y.size() < 2) throw std::invalid_argument("r_squared: need >= 2 samples");
    double mean = std::accumulate(y.begin(), y.end(), 0.0) / y.size();
    double ss_tot = 0.0, ss_res = 0.0;
    for (size_t i = 0; i < y.size(); ++i) {
        ss_tot += (y[i] - mean) * (y[i] - mean);
        ss_res += (y[i] - y_hat[i]) * (y[i] - y_hat[i]);
    }
    if (ss_tot <= 0.0) throw std::invalid_argument("r_squared: zero variance target");
    return 1.0 - ss_res / ss_tot;
}

namespace {

Tensor take_rows_tensor(const Tensor& x, const std::vector<int>& idx) {
    Tensor out({static_cast<int>(idx.size()), x.shape[1]});
    for (size_t r = 0; r < idx.size(); ++r) {
        if (idx[r] < 0 || idx[r] >= x.shape[0])
            throw std::invalid_argument("fit_probe: split index out of range");
        for (int j = 0; j < x.shape[1]; ++j) out.at(static_cast<int>(r), j) = x.at(idx[r], j);
    }
    return out;
}

std::vector<double> take_vals(const std::vector<double>& y, const std::vector<int>& idx) {
    std::vector<double> out;
    out.reserve(idx.size());
    for (int i : idx) out.push_back(y.at(i));
    return out;
}

}  // namespace

ProbeResult fit_probe(const Tensor& x, const std::vector<double>& y,
                      const std::vector<int>& train_idx, const std::vector<int>& test_idx,
                      double lambda, const std::string& split_name) {
    check_xy(x, y, "fit_probe");
    {
        std::unordered_set<int> train_set(train_idx.begin(), train_idx.end());
        for (int i : test_idx)
            if (train_set.count(i))
                throw std::invalid_argument("fit_probe: train and test splits overlap");
    }
    Tensor xtr = take_rows_tensor(x, train_idx);
    std::vector<double> ytr = take_vals(y, train_idx);
    Tensor xte = take_rows_tensor(x, test_idx);
    std::vector<double> yte = take_vals(y, test_idx);

    if (lambda < 0.0) {
        // scale-aware default: 1e-3 * trace(Xc^T Xc) / dim
        const int n = xtr.shape[0], d = xtr.shape[1];
        std::vector<double> xm(d, 0.0);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < d; ++j) xm[j] += xtr.at(i, j);
        for (auto& v : xm) v /= n;
        double trace = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < d; ++j) {
                const double c = xtr.at(i, j) - xm[j];
                trace += c * c;
            }
        lambda = 1e-3 * trace / d;
    }

    ProbeResult result;
    result.ridge_lambda = lambda;
    result.split_name = split_name;
    result.model = ridge_fit(xtr, ytr, lambda);
    result.r2_train = r_squared(ytr, ridge_predict(result.model, xtr));
    result.r2_test = r_squared(yte, ridge_predict(result.model, xte));
    return result;
}

// ---- PCA ------------------------------------------------------------

PcaResult pca(const Tensor& x, int k) {
    if (x.rank() != 2) throw std::invalid_argument("pca: X must be rank-2");
    const int n = x.shape[0], d = x.shape[1];
    if (k <= 0 || k > d) throw std::invalid_argument("pca: k must be in [1, dim]");
    if (n < k + 1) throw std::invalid_argument("pca: need at least k+1 samples");

    PcaResult res;
    res.mean.assign(d, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) res.mean[j] += x.at(i, j);
    for (auto& v : res.mean) v /= n;

    Tensor cov = Tensor::zeros({d, d});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) {
            const double cj = x.at(i, j) - res.mean[j];
            for (int l = j; l < d; ++l) cov.at(j, l) += cj * (x.at(i, l) - res.mean[l]);
        }
    for (int j = 0; j < d; ++j)
        for (int l = j; l < d; ++l) {
            cov.at(j, l) /= (n - 1);
            cov.at(l, j) = cov.at(j, l);
        }

    std::vector<double> evals;
    Tensor evecs;
    sym_eigen(cov, evals, evecs);

    double total = 0.0;
    for (double v : evals) total += std::max(v, 0.0);
    if (total <= 0.0) throw std::invalid_argument("pca: zero-variance data");

    // numerical rank; reduce k with a warning if it exceeds the rank
    const double tol = evals.back() * d * std::numeric_limits<double>::epsilon();
    int rank = 0;
    for (double v : evals)
        if (v > std::max(tol, 0.0)) ++rank;
    int k_eff = k;
    if (k > rank) {
        k_eff = std::max(rank, 1);
        res.warning = "pca: requested " + std::to_string(k) + " components but rank is " +
                      std::to_string(rank) + "; reduced";
    }

    res.k = k_eff;
    res.components = Tensor({k_eff, d});
    res.explained_ratio.resize(k_eff);
    for (int c = 0; c < k_eff; ++c) {
        const int src = d - 1 - c;  // eigenvalues ascend
        res.explained_ratio[c] = std::max(evals[src], 0.0) / total;
        // sign convention: the largest-magnitude loading is positive
        int arg = 0;
        for (int j = 1; j < d; ++j)
            if (std::abs(evecs.at(j, src)) > std::abs(evecs.at(arg, src))) arg = j;
        const double flip = (evecs.at(arg, src) < 0.0) ? -1.0 : 1.0;
        for (int j = 0; j < d; ++j) res.components.at(c, j) = flip * evecs.at(j, src);
    }

    res.scores = Tensor({n, k_eff});
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < k_eff; ++c) {
            double s = 0.0;
            for (int j = 0; j < d; ++j) s += (x.at(i, j) - res.mean[j]) * res.components.at(c, j);
            res.scores.at(i, c) = s;
        }
    return res;
}

// ---- embedding tables ------------------------------------------------

void EmbeddingTable::validate() const {
    if (vectors.rank() != 2 || vectors.shape[0] != static_cast<int>(ids.size()))
        throw std::invalid_argument("EmbeddingTable: id/vector count mismatch");
    std::unordered_set<int64_t> seen;
    for (int64_t id : ids)
        if (!seen.insert(id).second)
            throw std::invalid_argument("EmbeddingTable: duplicate tract id");
}

void EmbeddingTable::save_tsv(const std::string& path) const {
    validate();
    std::ostringstream out;
    out.precision(17);
    out << "# provenance: " << provenance << "\n";
    out << "id";
    for (int j = 0; j < dim(); ++j) out << "\tz" << j;
    out << "\n";
    for (int i = 0; i < size(); ++i) {
        out << ids[i];
        for (int j = 0; j < dim(); ++j) out << "\t" << vectors.at(i, j);
        out << "\n";
    }
    write_text_file(path, out.str());
}

EmbeddingTable EmbeddingTable::load_tsv(const std::string& path) {
    std::istringstream in(read_text_file(path));
    EmbeddingTable table;
    std::string line;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            auto p = line.find("provenance: ");
            if (p != std::string::npos) table.provenance = line.substr(p + 12);
            continue;
        }
        if (line.rfind("id", 0) == 0) continue;  // header
        std::istringstream ls(line);
        int64_t id;
        ls >> id;
        std::vector<double> vals;
        double v;
        while (ls >> v) vals.push_back(v);
        table.ids.push_back(id);
        rows.push_back(std::move(vals));
    }
    if (rows.empty()) throw IoError("empty embedding table: " + path);
    const int d = static_cast<int>(rows[0].size());
    table.vectors = Tensor({static_cast<int>(rows.size()), d});
    for (size_t i = 0; i < rows.size(); ++i) {
        if (static_cast<int>(rows[i].size()) != d) throw IoError("ragged embedding table: " + path);
        for (int j = 0; j < d; ++j) table.vectors.at(static_cast<int>(i), j) = rows[i][j];
    }
    table.validate();
    return table;
}

}  // namespace geofusion
