#pragma once

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "geofusion/tensor.hpp"

namespace geofusion {

// Named trainable tensor. grad has the same shape as value and is accumulated
// by Tape::backward; the optimizer consumes and zeroes it.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;

    Parameter() = default;
    Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)) {
        grad = Tensor::zeros(value.shape);
    }

    void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), 0.0); }
};

class Tape;

// Handle to a node on a Tape. Cheap to copy; invalid after the tape dies.
class Var {
public:
    Var() = default;
    const Tensor& value() const;
    const std::vector<int>& shape() const;
    bool valid() const { return tape_ != nullptr; }
    Tape* tape() const { return tape_; }
    int id() const { return id_; }

private:
    friend class Tape;
    Var(Tape* t, int id) : tape_(t), id_(id) {}
    Tape* tape_ = nullptr;
    int id_ = -1;
};

// Reverse-mode tape. One tape per forward pass; creation order is the
// topological order used (in reverse) by backward(). Discarded afterwards;
// no higher-order derivatives.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var leaf(Parameter& p);
    Var constant(Tensor t);

    // Seeds d(loss)=1 and accumulates gradients into every contributing
    // Parameter::grad. loss must be a finite scalar; a non-finite value means
    // NaN/Inf propagated through the forward pass and raises std::runtime_error.
    void backward(const Var& loss);

    const Tensor& value(int id) const { return nodes_[id].value; }
    Tensor& grad(int id) { return nodes_[id].grad; }
    size_t size() const { return nodes_.size(); }

    // --- internal: used by the op implementations ---
    Var emit(Tensor value, std::function<void(Tape&, int)> back);

private:
    struct Node {
        Tensor value;
        Tensor grad;
        std::function<void(Tape&, int)> back;  // null for constants
        Parameter* param = nullptr;
    };
    std::vector<Node> nodes_;
    std::unordered_map<const Parameter*, int> leaf_cache_;
};

// ---- ops -------------------------------------------------------------
// All ops are pure: inputs immutable, output a fresh node on the same tape.

Var matmul(const Var& a, const Var& b);                    // [m,k]@[k,n] -> [m,n]
Var transpose(const Var& a);                               // rank-2
Var add(const Var& a, const Var& b);                       // same shape
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);                       // elementwise
Var scale(const Var& a, double c);
Var add_rowvec(const Var& m, const Var& v);                // [n,d] + [d]
Var gelu(const Var& x);                                    // tanh approximation
Var layer_norm(const Var& x, const Var& gain, const Var& shift, double eps);
Var softmax(const Var& logits);                            // over last axis
Var softmax_with_bias(const Var& logits, const Var& bias); // softmax(logits+bias)
Var slice_cols(const Var& x, int c0, int width);
Var concat_cols(const std::vector<Var>& parts);
Var vstack(const std::vector<Var>& rows);                  // concat along rows
Var take_rows(const Var& x, const std::vector<int>& idx);
// Rows at vis_idx come (in order) from vis; every other row is the shared
// fill vector. Gradient of fill accumulates over all filled rows.
Var assemble_rows(int n_rows, const std::vector<int>& vis_idx, const Var& vis, const Var& fill);
Var reshape(const Var& x, std::vector<int> shape);
Var mean_all(const Var& x);                                // -> [1]
Var sum_all(const Var& x);                                 // -> [1]
Var element(const Var& x, int64_t flat_index);             // -> [1]
// out = x + s * b where b is constant and s a scalar [1] var (bias gains)
Var add_scaled_const(const Var& x, const Tensor& b, const Var& s);

// Masked losses: mean over the masked rows only. mask holds row indices.
Var masked_mse(const Var& pred, const Tensor& target, const std::vector<int>& mask);
Var masked_l1(const Var& pred, const Tensor& target, const std::vector<int>& mask);
// mean over masked rows of (1 - cos(pred_i, target_i)); norms guarded by eps
Var cosine_distance_loss(const Var& pred, const Tensor& target, const std::vector<int>& mask,
                         double eps = 1e-12);

double scalar_value(const Var& v);

// ---- raw-tensor kernels (shared by forward and backward paths) -------
void matmul_nn_acc(const Tensor& a, const Tensor& b, Tensor& out);  // out += a@b
void matmul_nt_acc(const Tensor& a, const Tensor& b, Tensor& out);  // out += a@b^T
void matmul_tn_acc(const Tensor& a, const Tensor& b, Tensor& out);  // out += a^T@b
double gelu_scalar(double x);

}  // namespace geofusion
