#include "geofusion/autodiff.hpp"

#include <algorithm>
#include <cmath>

namespace geofusion {

const Tensor& Var::value() const { return tape_->value(id_); }
const std::vector<int>& Var::shape() const { return tape_->value(id_).shape; }

Var Tape::emit(Tensor value, std::function<void(Tape&, int)> back) {
    Node n;
    n.grad = Tensor::zeros(value.shape);
    n.value = std::move(value);
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::leaf(Parameter& p) {
    auto it = leaf_cache_.find(&p);
    if (it != leaf_cache_.end()) return Var(this, it->second);
    Var v = emit(p.value, nullptr);
    nodes_.back().param = &p;
    leaf_cache_[&p] = v.id();
    return v;
}

Var Tape::constant(Tensor t) { return emit(std::move(t), nullptr); }

void Tape::backward(const Var& loss) {
    if (loss.tape() != this) throw std::invalid_argument("backward: var from another tape");
    const Tensor& lv = value(loss.id());
    if (lv.numel() != 1) throw std::invalid_argument("backward: loss must be scalar");
    if (!std::isfinite(lv.data[0]))
        throw std::runtime_error("backward: non-finite loss (NaN/Inf propagated through forward pass)");
    nodes_[loss.id()].grad.data[0] = 1.0;
    for (int id = loss.id(); id >= 0; --id) {
        Node& n = nodes_[id];
        if (n.back) n.back(*this, id);
        if (n.param) {
            Tensor& g = n.param->grad;
            const Tensor& ng = n.grad;
            for (int64_t i = 0; i < ng.numel(); ++i) g.data[i] += ng.data[i];
        }
    }
}

// ---- kernels ----------------------------------------------------------

void matmul_nn_acc(const Tensor& a, const Tensor& b, Tensor& out) {
    const int m = a.shape[0], k = a.shape[1], n = b.shape[1];
    for (int i = 0; i < m; ++i) {
        double* oi = out.row(i);
        const double* ai = a.row(i);
        for (int l = 0; l < k; ++l) {
            const double al = ai[l];
            const double* bl = b.row(l);
            for (int j = 0; j < n; ++j) oi[j] += al * bl[j];
        }
    }
}

void matmul_nt_acc(const Tensor& a, const Tensor& b, Tensor& out) {
    // out[m,n] += a[m,k] @ b[n,k]^T
    const int m = a.shape[0], k = a.shape[1], n = b.shape[0];
    for (int i = 0; i < m; ++i) {
        const double* ai = a.row(i);
        double* oi = out.row(i);
        for (int j = 0; j < n; ++j) {
            const double* bj = b.row(j);
            double acc = 0.0;
            for (int l = 0; l < k; ++l) acc += ai[l] * bj[l];
            oi[j] += acc;
        }
    }
}

void matmul_tn_acc(const Tensor& a, const Tensor& b, Tensor& out) {
    // out[k,n] += a[m,k]^T @ b[m,n]
    const int m = a.shape[0], k = a.shape[1], n = b.shape[1];
    for (int i = 0; i < m; ++i) {
        const double* ai = a.row(i);
        const double* bi = b.row(i);
        for (int l = 0; l < k; ++l) {
            const double al = ai[l];
            double* ol = out.row(l);
            for (int j = 0; j < n; ++j) ol[j] += al * bi[j];
        }
    }
}

double gelu_scalar(double x) {
    const double c = std::sqrt(2.0 / M_PI);
    double u = c * (x + 0.044715 * x * x * x);
    return 0.5 * x * (1.0 + std::tanh(u));
}

// ---- ops --------------------------------------------------------------

namespace {

Tape& tape_of(const Var& a) {
    if (!a.valid()) throw std::invalid_argument("op on default-constructed Var");
    return *a.tape();
}

void require_rank2(const Var& v, const char* op) {
    if (v.shape().size() != 2)
        throw std::invalid_argument(std::string(op) + ": expected rank-2 tensor");
}

void acc(Tensor& dst, const Tensor& src) {
    for (int64_t i = 0; i < src.numel(); ++i) dst.data[i] += src.data[i];
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
    require_rank2(a, "matmul");
    require_rank2(b, "matmul");
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.shape[1] != bv.shape[0])
        throw std::invalid_argument("matmul: inner extents differ, " + av.shape_str() + " @ " +
                                    bv.shape_str());
    Tensor out({av.shape[0], bv.shape[1]});
    matmul_nn_acc(av, bv, out);
    int ia = a.id(), ib = b.id();
    return tape_of(a).emit(std::move(out), [ia, ib](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        matmul_nt_acc(g, t.value(ib), t.grad(ia));  // dA += g @ B^T
        matmul_tn_acc(t.value(ia), g, t.grad(ib));  // dB += A^T @ g
    });
}

Var transpose(const Var& a) {
    require_rank2(a, "transpose");
    const Tensor& av = a.value();
    Tensor out({av.shape[1], av.shape[0]});
    for (int i = 0; i < av.shape[0]; ++i)
        for (int j = 0; j < av.shape[1]; ++j) out.at(j, i) = av.at(i, j);
    int ia = a.id();
    return tape_of(a).emit(std::move(out), [ia](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        Tensor& da = t.grad(ia);
        for (int i = 0; i < g.shape[0]; ++i)
            for (int j = 0; j < g.shape[1]; ++j) da.at(j, i) += g.at(i, j);
    });
}

Var add(const Var& a, const Var& b) {
    check_same_shape(a.value(), b.value(), "add");
    Tensor out = a.value();
    acc(out, b.value());
    int ia = a.id(), ib = b.id();
    return tape_of(a).emit(std::move(out), [ia, ib](Tape& t, int self) {
        acc(t.grad(ia), t.grad(self));
        acc(t.grad(ib), t.grad(self));
    });
}

Var sub(const Var& a, const Var& b) {
    check_same_shape(a.value(), b.value(), "sub");
    Tensor out = a.value();
    for (int64_t i = 0; i < out.numel(); ++i) out.data[i] -= b.value().data[i];
    int ia = a.id(), ib = b.id();
    return tape_of(a).emit(std::move(out), [ia, ib](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        acc(t.grad(ia), g);
        Tensor& db = t.grad(ib);
        for (int64_t i = 0; i < g.numel(); ++i) db.data[i] -= g.data[i];
    });
}

Var mul(const Var& a, const Var& b) {
    check_same_shape(a.value(), b.value(), "mul");
    Tensor out = a.value();
    for (int64_t i = 0; i < out.numel(); ++i) out.data[i] *= b.value().data[i];
    int ia = a.id(), ib = b.id();
    return tape_of(a).emit(std::move(out), [ia, ib](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        Tensor& da = t.grad(ia);
        Tensor& db = t.grad(ib);
        const Tensor& av = t.value(ia);
        const Tensor& bv = t.value(ib);
        for (int64_t i = 0; i < g.numel(); ++i) {
            da.data[i] += g.data[i] * bv.data[i];
            db.data[i] += g.data[i] * av.data[i];
        }
    });
}

Var scale(const Var& a, double c) {
    Tensor out = a.value();
    for (auto& v : out.data) v *= c;
    int ia = a.id();
    return tape_of(a).emit(std::move(out), [ia, c](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        Tensor& da = t.grad(ia);
        for (int64_t i = 0; i < g.numel(); ++i) da.data[i] += c * g.data[i];
    });
}

Var add_rowvec(const Var& m, const Var& v) {
    require_rank2(m, "add_rowvec");
    const Tensor& mv = m.value();
    const Tensor& vv = v.value();
    if (vv.rank() != 1 || vv.shape[0] != mv.shape[1])
        throw std::invalid_argument("add_rowvec: vector length must match columns");
    Tensor out = mv;
    for (int i = 0; i < mv.shape[0]; ++i) {
        double* oi = out.row(i);
        for (int j = 0; j < mv.shape[1]; ++j) oi[j] += vv.data[j];
    }
    int im = m.id(), iv = v.id();
    return tape_of(m).emit(std::move(out), [im, iv](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        acc(t.grad(im), g);
        Tensor& dv = t.grad(iv);
        for (int i = 0; i < g.shape[0]; ++i) {
            const double* gi = g.row(i);
            for (int j = 0; j < g.shape[1]; ++j) dv.data[j] += gi[j];
        }
    });
}

Var gelu(const Var& x) {
    Tensor out = x.value();
    for (auto& v : out.data) v = gelu_scalar(v);
    int ix = x.id();
    return tape_of(x).emit(std::move(out), [ix](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        const Tensor& xv = t.value(ix);
        Tensor& dx = t.grad(ix);
        const double c = std::sqrt(2.0 / M_PI);
        for (int64_t i = 0; i < g.numel(); ++i) {
            double v = xv.data[i];
            double u = c * (v + 0.044715 * v * v * v);
            double th = std::tanh(u);
            double du = c * (1.0 + 3.0 * 0.044715 * v * v);
            double d = 0.5 * (1.0 + th) + 0.5 * v * (1.0 - th * th) * du;
            dx.data[i] += g.data[i] * d;
        }
    });
}

Var layer_norm(const Var& x, const Var& gain, const Var& shift, double eps) {
    require_rank2(x, "layer_norm");
    const Tensor& xv = x.value();
    const int n = xv.shape[0], d = xv.shape[1];
    if (d <= 0 || eps <= 0) throw std::invalid_argument("layer_norm: need d > 0 and eps > 0");
    if (gain.value().numel() != d || shift.value().numel() != d)
        throw std::invalid_argument("layer_norm: gain/shift length must equal feature dim");
    Tensor out({n, d});
    for (int i = 0; i < n; ++i) {
        const double* xi = xv.row(i);
        double mu = 0.0;
        for (int j = 0; j < d; ++j) mu += xi[j];
        mu /= d;
        double var = 0.0;
        for (int j = 0; j < d; ++j) var += (xi[j] - mu) * (xi[j] - mu);
        var /= d;
        double inv = 1.0 / std::sqrt(var + eps);
        double* oi = out.row(i);
        for (int j = 0; j < d; ++j)
            oi[j] = gain.value().data[j] * (xi[j] - mu) * inv + shift.value().data[j];
    }
    int ix = x.id(), ig = gain.id(), is = shift.id();
    return tape_of(x).emit(std::move(out), [ix, ig, is, eps](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        const Tensor& xv = t.value(ix);
        const Tensor& gv = t.value(ig);
        Tensor& dx = t.grad(ix);
        Tensor& dg = t.grad(ig);
        Tensor& ds = t.grad(is);
        const int n = xv.shape[0], d = xv.shape[1];
        std::vector<double> xhat(d), dxh(d);
        for (int i = 0; i < n; ++i) {
            const double* xi = xv.row(i);
            const double* gi = g.row(i);
            double mu = 0.0;
            for (int j = 0; j < d; ++j) mu += xi[j];
            mu /= d;
            double var = 0.0;
            for (int j = 0; j < d; ++j) var += (xi[j] - mu) * (xi[j] - mu);
            var /= d;
            double inv = 1.0 / std::sqrt(var + eps);
            double m1 = 0.0, m2 = 0.0;
            for (int j = 0; j < d; ++j) {
                xhat[j] = (xi[j] - mu) * inv;
                dg.data[j] += gi[j] * xhat[j];
                ds.data[j] += gi[j];
                dxh[j] = gi[j] * gv.data[j];
                m1 += dxh[j];
                m2 += dxh[j] * xhat[j];
            }
            m1 /= d;
            m2 /= d;
            double* dxi = dx.row(i);
            for (int j = 0; j < d; ++j) dxi[j] += inv * (dxh[j] - m1 - xhat[j] * m2);
        }
    });
}

namespace {

// softmax over the last axis of (logits + bias); bias may be empty (id < 0),
// same-shape, or a length-n row vector broadcast over rows.
Var softmax_impl(const Var& logits, const Var* bias) {
    const Tensor& lv = logits.value();
    if (lv.rank() < 1) throw std::invalid_argument("softmax: rank must be >= 1");
    const int n = lv.shape.back();
    const int64_t rows = lv.numel() / n;
    bool rowvec = false;
    if (bias) {
        const Tensor& bv = bias->value();
        if (bv.shape == lv.shape) {
            rowvec = false;
        } else if (bv.rank() == 1 && bv.shape[0] == n) {
            rowvec = true;
        } else {
            throw std::invalid_argument("softmax_with_bias: bias must match logits or last axis");
        }
    }
    Tensor out(lv.shape);
    for (int64_t r = 0; r < rows; ++r) {
        const double* li = lv.data.data() + r * n;
        const double* bi = bias ? (rowvec ? bias->value().data.data()
                                          : bias->value().data.data() + r * n)
                                : nullptr;
        double* oi = out.data.data() + r * n;
        double mx = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < n; ++j) {
            double z = li[j] + (bi ? bi[j] : 0.0);
            oi[j] = z;
            mx = std::max(mx, z);
        }
        double sum = 0.0;
        for (int j = 0; j < n; ++j) {
            oi[j] = std::exp(oi[j] - mx);
            sum += oi[j];
        }
        for (int j = 0; j < n; ++j) oi[j] /= sum;
    }
    int il = logits.id();
    int ib = bias ? bias->id() : -1;
    return tape_of(logits).emit(std::move(out), [il, ib, n, rows, rowvec](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        const Tensor& s = t.value(self);
        Tensor& dl = t.grad(il);
        for (int64_t r = 0; r < rows; ++r) {
            const double* gi = g.data.data() + r * n;
            const double* si = s.data.data() + r * n;
            double dot = 0.0;
            for (int j = 0; j < n; ++j) dot += gi[j] * si[j];
            double* dli = dl.data.data() + r * n;
            for (int j = 0; j < n; ++j) {
                double dz = si[j] * (gi[j] - dot);
                dli[j] += dz;
                if (ib >= 0) {
                    Tensor& db = t.grad(ib);
                    if (rowvec)
                        db.data[j] += dz;
                    else
                        db.data[r * n + j] += dz;
                }
            }
        }
    });
}

}  // namespace

Var softmax(const Var& logits) { return softmax_impl(logits, nullptr); }

Var softmax_with_bias(const Var& logits, const Var& bias) { return softmax_impl(logits, &bias); }

Var slice_cols(const Var& x, int c0, int width) {
    require_rank2(x, "slice_cols");
    const Tensor& xv = x.value();
    if (c0 < 0 || width <= 0 || c0 + width > xv.shape[1])
        throw std::invalid_argument("slice_cols: range out of bounds");
    Tensor out({xv.shape[0], width});
    for (int i = 0; i < xv.shape[0]; ++i) {
        const double* xi = xv.row(i) + c0;
        double* oi = out.row(i);
        for (int j = 0; j < width; ++j) oi[j] = xi[j];
    }
    int ix = x.id();
    return tape_of(x).emit(std::move(out), [ix, c0, width](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        Tensor& dx = t.grad(ix);
        for (int i = 0; i < g.shape[0]; ++i) {
            const double* gi = g.row(i);
            double* di = dx.row(i) + c0;
            for (int j = 0; j < width; ++j) di[j] += gi[j];
        }
    });
}

Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: empty");
    const int n = parts[0].value().shape[0];
    int total = 0;
    for (const auto& p : parts) {
        require_rank2(p, "concat_cols");
        if (p.value().shape[0] != n)
            throw std::invalid_argument("concat_cols: row count mismatch");
        total += p.value().shape[1];
    }
    Tensor out({n, total});
    std::vector<int> ids, offs;
    int off = 0;
    for (const auto& p : parts) {
        const Tensor& pv = p.value();
        for (int i = 0; i < n; ++i) {
            const double* pi = pv.row(i);
            double* oi = out.row(i) + off;
            for (int j = 0; j < pv.shape[1]; ++j) oi[j] = pi[j];
        }
        ids.push_back(p.id());
        offs.push_back(off);
        off += pv.shape[1];
    }
    return tape_of(parts[0]).emit(std::move(out), [ids, offs, n](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        for (size_t k = 0; k < ids.size(); ++k) {
            Tensor& dp = t.grad(ids[k]);
            const int w = dp.shape[1];
            for (int i = 0; i < n; ++i) {
                const double* gi = g.row(i) + offs[k];
                double* di = dp.row(i);
                for (int j = 0; j < w; ++j) di[j] += gi[j];
            }
        }
    });
}

Var vstack(const std::vector<Var>& blocks) {
    if (blocks.empty()) throw std::invalid_argument("vstack: empty");
    const int d = blocks[0].value().shape.back();
    int rows = 0;
    for (const auto& b : blocks) {
        require_rank2(b, "vstack");
        if (b.value().shape[1] != d) throw std::invalid_argument("vstack: column mismatch");
        rows += b.value().shape[0];
    }
    Tensor out({rows, d});
    std::vector<int> ids, offs;
    int off = 0;
    for (const auto& b : blocks) {
        const Tensor& bv = b.value();
        std::copy(bv.data.begin(), bv.data.end(), out.data.begin() + static_cast<int64_t>(off) * d);
        ids.push_back(b.id());
        offs.push_back(off);
        off += bv.shape[0];
    }
    return tape_of(blocks[0]).emit(std::move(out), [ids, offs, d](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        for (size_t k = 0; k < ids.size(); ++k) {
            Tensor& db = t.grad(ids[k]);
            const double* gk = g.data.data() + static_cast<int64_t>(offs[k]) * d;
            for (int64_t i = 0; i < db.numel(); ++i) db.data[i] += gk[i];
        }
    });
}

Var take_rows(const Var& x, const std::vector<int>& idx) {
    require_rank2(x, "take_rows");
    const Tensor& xv = x.value();
    const int d = xv.shape[1];
    Tensor out({static_cast<int>(idx.size()), d});
    for (size_t r = 0; r < idx.size(); ++r) {
        if (idx[r] < 0 || idx[r] >= xv.shape[0])
            throw std::invalid_argument("take_rows: index out of range");
        std::copy(xv.row(idx[r]), xv.row(idx[r]) + d, out.row(static_cast<int>(r)));
    }
    int ix = x.id();
    return tape_of(x).emit(std::move(out), [ix, idx, d](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        Tensor& dx = t.grad(ix);
        for (size_t r = 0; r < idx.size(); ++r) {
            const double* gr = g.row(static_cast<int>(r));
            double* dr = dx.row(idx[r]);
            for (int j = 0; j < d; ++j) dr[j] += gr[j];
        }
    });
}

Var assemble_rows(int n_rows, const std::vector<int>& vis_idx, const Var& vis, const Var& fill) {
    require_rank2(vis, "assemble_rows");
    const Tensor& vv = vis.value();
    const Tensor& fv = fill.value();
    const int d = vv.shape[1];
    if (static_cast<int>(vis_idx.size()) != vv.shape[0])
        throw std::invalid_argument("assemble_rows: index count must match vis rows");
    if (fv.numel() != d) throw std::invalid_argument("assemble_rows: fill length mismatch");
    Tensor out({n_rows, d});
    std::vector<char> is_vis(n_rows, 0);
    for (int i = 0; i < n_rows; ++i)
        std::copy(fv.data.begin(), fv.data.end(), out.row(i));
    for (size_t r = 0; r < vis_idx.size(); ++r) {
        int i = vis_idx[r];
        if (i < 0 || i >= n_rows) throw std::invalid_argument("assemble_rows: index out of range");
        if (is_vis[i]) throw std::invalid_argument("assemble_rows: duplicate index");
        is_vis[i] = 1;
        std::copy(vv.row(static_cast<int>(r)), vv.row(static_cast<int>(r)) + d, out.row(i));
    }
    int iv = vis.id(), ifl = fill.id();
    return tape_of(vis).emit(std::move(out), [iv, ifl, vis_idx, n_rows, d](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        Tensor& dv = t.grad(iv);
        Tensor& df = t.grad(ifl);
        std::vector<char> is_vis(n_rows, 0);
        for (size_t r = 0; r < vis_idx.size(); ++r) {
            is_vis[vis_idx[r]] = 1;
            const double* gr = g.row(vis_idx[r]);
            double* dr = dv.row(static_cast<int>(r));
            for (int j = 0; j < d; ++j) dr[j] += gr[j];
        }
        for (int i = 0; i < n_rows; ++i) {
            if (is_vis[i]) continue;
            const double* gr = g.row(i);
            for (int j = 0; j < d; ++j) df.data[j] += gr[j];
        }
    });
}

Var reshape(const Var& x, std::vector<int> shape) {
    if (Tensor::numel_of(shape) != x.value().numel())
        throw std::invalid_argument("reshape: element count mismatch");
    Tensor out(std::move(shape), x.value().data);
    int ix = x.id();
    return tape_of(x).emit(std::move(out), [ix](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        Tensor& dx = t.grad(ix);
        for (int64_t i = 0; i < g.numel(); ++i) dx.data[i] += g.data[i];
    });
}

Var mean_all(const Var& x) {
    const int64_t n = x.value().numel();
    double s = 0.0;
    for (double v : x.value().data) s += v;
    int ix = x.id();
    return tape_of(x).emit(Tensor::scalar(s / n), [ix, n](Tape& t, int self) {
        const double g = t.grad(self).data[0] / n;
        Tensor& dx = t.grad(ix);
        for (auto& v : dx.data) v += g;
    });
}

Var sum_all(const Var& x) {
    double s = 0.0;
    for (double v : x.value().data) s += v;
    int ix = x.id();
    return tape_of(x).emit(Tensor::scalar(s), [ix](Tape& t, int self) {
        const double g = t.grad(self).data[0];
        Tensor& dx = t.grad(ix);
        for (auto& v : dx.data) v += g;
    });
}

Var element(const Var& x, int64_t flat_index) {
    if (flat_index < 0 || flat_index >= x.value().numel())
        throw std::invalid_argument("element: index out of range");
    int ix = x.id();
    return tape_of(x).emit(Tensor::scalar(x.value().data[flat_index]),
                           [ix, flat_index](Tape& t, int self) {
                               t.grad(ix).data[flat_index] += t.grad(self).data[0];
                           });
}

Var add_scaled_const(const Var& x, const Tensor& b, const Var& s) {
    check_same_shape(x.value(), b, "add_scaled_const");
    if (s.value().numel() != 1) throw std::invalid_argument("add_scaled_const: s must be scalar");
    const double sv = s.value().data[0];
    Tensor out = x.value();
    for (int64_t i = 0; i < out.numel(); ++i) out.data[i] += sv * b.data[i];
    int ix = x.id(), is = s.id();
    return tape_of(x).emit(std::move(out), [ix, is, b](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        acc(t.grad(ix), g);
        double ds = 0.0;
        for (int64_t i = 0; i < g.numel(); ++i) ds += g.data[i] * b.data[i];
        t.grad(is).data[0] += ds;
    });
}

namespace {

void check_mask(const Tensor& pred, const Tensor& target, const std::vector<int>& mask,
                const char* op) {
    check_same_shape(pred, target, op);
    if (pred.rank() != 2) throw std::invalid_argument(std::string(op) + ": expected rank-2");
    if (mask.empty())
        throw std::invalid_argument(std::string(op) + ": empty mask (degenerate objective)");
    for (int i : mask)
        if (i < 0 || i >= pred.shape[0])
            throw std::invalid_argument(std::string(op) + ": mask index out of range");
}

}  // namespace

Var masked_mse(const Var& pred, const Tensor& target, const std::vector<int>& mask) {
    const Tensor& pv = pred.value();
    check_mask(pv, target, mask, "masked_mse");
    const int d = pv.shape[1];
    const double count = static_cast<double>(mask.size()) * d;
    double loss = 0.0;
    for (int i : mask) {
        const double* pi = pv.row(i);
        const double* ti = target.row(i);
        for (int j = 0; j < d; ++j) {
            double e = pi[j] - ti[j];
            loss += e * e;
        }
    }
    int ip = pred.id();
    return tape_of(pred).emit(Tensor::scalar(loss / count),
                              [ip, target, mask, d, count](Tape& t, int self) {
                                  const double g = t.grad(self).data[0];
                                  const Tensor& pv = t.value(ip);
                                  Tensor& dp = t.grad(ip);
                                  for (int i : mask) {
                                      const double* pi = pv.row(i);
                                      const double* ti = target.row(i);
                                      double* di = dp.row(i);
                                      for (int j = 0; j < d; ++j)
                                          di[j] += g * 2.0 * (pi[j] - ti[j]) / count;
                                  }
                              });
}

Var masked_l1(const Var& pred, const Tensor& target, const std::vector<int>& mask) {
    const Tensor& pv = pred.value();
    check_mask(pv, target, mask, "masked_l1");
    const int d = pv.shape[1];
    const double count = static_cast<double>(mask.size()) * d;
    double loss = 0.0;
    for (int i : mask) {
        const double* pi = pv.row(i);
        const double* ti = target.row(i);
        for (int j = 0; j < d; ++j) loss += std::abs(pi[j] - ti[j]);
    }
    int ip = pred.id();
    return tape_of(pred).emit(Tensor::scalar(loss / count),
                              [ip, target, mask, d, count](Tape& t, int self) {
                                  const double g = t.grad(self).data[0];
                                  const Tensor& pv = t.value(ip);
                                  Tensor& dp = t.grad(ip);
                                  for (int i : mask) {
                                      const double* pi = pv.row(i);
                                      const double* ti = target.row(i);
                                      double* di = dp.row(i);
                                      for (int j = 0; j < d; ++j) {
                                          double e = pi[j] - ti[j];
                                          double s = (e > 0.0) ? 1.0 : (e < 0.0 ? -1.0 : 0.0);
                                          di[j] += g * s / count;
                                      }
                                  }
                              });
}

Var cosine_distance_loss(const Var& pred, const Tensor& target, const std::vector<int>& mask,
                         double eps) {
    const Tensor& pv = pred.value();
    check_mask(pv, target, mask, "cosine_distance_loss");
    const int d = pv.shape[1];
    double loss = 0.0;
    for (int i : mask) {
        const double* pi = pv.row(i);
        const double* ti = target.row(i);
        double pp = 0.0, tt = 0.0, pt = 0.0;
        for (int j = 0; j < d; ++j) {
            pp += pi[j] * pi[j];
            tt += ti[j] * ti[j];
            pt += pi[j] * ti[j];
        }
        loss += 1.0 - pt / (std::sqrt(pp + eps) * std::sqrt(tt + eps));
    }
    const double m = static_cast<double>(mask.size());
    int ip = pred.id();
    return tape_of(pred).emit(
        Tensor::scalar(loss / m), [ip, target, mask, d, m, eps](Tape& t, int self) {
            const double g = t.grad(self).data[0];
            const Tensor& pv = t.value(ip);
            Tensor& dp = t.grad(ip);
            for (int i : mask) {
                const double* pi = pv.row(i);
                const double* ti = target.row(i);
                double* di = dp.row(i);
                double pp = 0.0, tt = 0.0, pt = 0.0;
                for (int j = 0; j < d; ++j) {
                    pp += pi[j] * pi[j];
                    tt += ti[j] * ti[j];
                    pt += pi[j] * ti[j];
                }
                double np = std::sqrt(pp + eps), nt = std::sqrt(tt + eps);
                for (int j = 0; j < d; ++j) {
                    double dcos = ti[j] / (np * nt) - pt * pi[j] / (np * np * np * nt);
                    di[j] += g * (-dcos) / m;
                }
            }
        });
}

double scalar_value(const Var& v) {
    if (v.value().numel() != 1) throw std::invalid_argument("scalar_value: not a scalar");
    return v.value().data[0];
}

}  // namespace geofusion
