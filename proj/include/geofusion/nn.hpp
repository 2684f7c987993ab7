#pragma once

#include <string>
#include <vector>

#include "geofusion/autodiff.hpp"
#include "geofusion/tensor.hpp"

namespace geofusion {

using ParamList = std::vector<Parameter*>;

class Linear {
public:
    Linear() = default;
    // w_std <= 0 (default) uses the uniform fan-in init; > 0 a normal init
    Linear(const std::string& name, int in, int out, Rng& rng, double w_std = 0.0);

    Var forward(Tape& t, const Var& x) const;
    void collect(ParamList& out);

    Parameter w;  // [in, out]
    Parameter b;  // [out]
};

class LayerNormLayer {
public:
    LayerNormLayer() = default;
    LayerNormLayer(const std::string& name, int dim);

    Var forward(Tape& t, const Var& x) const;
    void collect(ParamList& out);

    Parameter gain;  // init 1
    Parameter shift; // init 0
    double eps = 1e-5;
};

// Two affine layers with GELU between.
class Mlp {
public:
    Mlp() = default;
    Mlp(const std::string& name, int in, int hidden, int out, Rng& rng);

    Var forward(Tape& t, const Var& x) const;
    void collect(ParamList& out);

    Linear fc1;
    Linear fc2;
};

// Multi-head scaled dot-product attention over row tokens. Shared by
// self-attention (kv == q) and cross-attention; an optional constant bias
// matrix scaled by a per-head learnable gain is added to the pre-softmax
// scores. Captured weights are the post-softmax [n_q, n_k] maps per head.
class MultiheadAttention {
public:
    MultiheadAttention() = default;
    MultiheadAttention(const std::string& name, int dim_q, int dim_kv, int heads, Rng& rng,
                       bool with_gains);

    Var forward(Tape& t, const Var& q_tokens, const Var& kv_tokens, const Tensor* bias,
                std::vector<Tensor>* captured_weights = nullptr) const;
    void collect(ParamList& out);

    int heads = 0;
    int head_dim = 0;
    Linear wq, wk, wv, wo;
    Parameter gains;  // [heads], present only when with_gains
    bool has_gains = false;
};

// Pre-norm transformer encoder block: x + attn(ln1(x)), then x + mlp(ln2(x)).
// With attention disabled only the feed-forward path remains, so row tokens
// never interact.
class TransformerBlock {
public:
    TransformerBlock() = default;
    TransformerBlock(const std::string& name, int dim, int heads, double mlp_ratio, Rng& rng,
                     bool attention = true);

    Var forward(Tape& t, const Var& x) const;
    void collect(ParamList& out);

    bool attention = true;
    LayerNormLayer ln1, ln2;
    MultiheadAttention attn;
    Mlp mlp;
};

}  // namespace geofusion
