#include "geofusion/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace geofusion {

Linear::Linear(const std::string& name, int in, int out, Rng& rng, double w_std) {
    // torch-style default: U(-1/sqrt(in), 1/sqrt(in)) for weights and bias;
    // w_std > 0 selects a normal init with that scale instead
    if (w_std > 0.0) {
        w = Parameter(name + ".w", rng.normal_tensor({in, out}, w_std));
        b = Parameter(name + ".b", Tensor::zeros({out}));
        return;
    }
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    Tensor wt({in, out});
    for (auto& v : wt.data) v = rng.uniform(-bound, bound);
    Tensor bt({out});
    for (auto& v : bt.data) v = rng.uniform(-bound, bound);
    w = Parameter(name + ".w", std::move(wt));
    b = Parameter(name + ".b", std::move(bt));
}

Var Linear::forward(Tape& t, const Var& x) const {
    auto& self = const_cast<Linear&>(*this);
    return add_rowvec(matmul(x, t.leaf(self.w)), t.leaf(self.b));
}

void Linear::collect(ParamList& out) {
    out.push_back(&w);
    out.push_back(&b);
}

LayerNormLayer::LayerNormLayer(const std::string& name, int dim)
    : gain(name + ".gain", Tensor::full({dim}, 1.0)), shift(name + ".shift", Tensor::zeros({dim})) {}

Var LayerNormLayer::forward(Tape& t, const Var& x) const {
    auto& self = const_cast<LayerNormLayer&>(*this);
    return layer_norm(x, t.leaf(self.gain), t.leaf(self.shift), eps);
}

void LayerNormLayer::collect(ParamList& out) {
    out.push_back(&gain);
    out.push_back(&shift);
}

Mlp::Mlp(const std::string& name, int in, int hidden, int out, Rng& rng)
    : fc1(name + ".fc1", in, hidden, rng), fc2(name + ".fc2", hidden, out, rng) {}

Var Mlp::forward(Tape& t, const Var& x) const {
    return fc2.forward(t, gelu(fc1.forward(t, x)));
}

void Mlp::collect(ParamList& out) {
    fc1.collect(out);
    fc2.collect(out);
}

MultiheadAttention::MultiheadAttention(const std::string& name, int dim_q, int dim_kv, int heads_,
                                       Rng& rng, bool with_gains)
    : heads(heads_), has_gains(with_gains) {
    if (heads <= 0 || dim_q % heads != 0)
        throw std::invalid_argument("MultiheadAttention: dim_q must be divisible by heads");
    head_dim = dim_q / heads;
    wq = Linear(name + ".q", dim_q, dim_q, rng);
    wk = Linear(name + ".k", dim_kv, dim_q, rng);
    wv = Linear(name + ".v", dim_kv, dim_q, rng);
    wo = Linear(name + ".o", dim_q, dim_q, rng);
    if (with_gains) gains = Parameter(name + ".gains", Tensor::full({heads}, 1.0));
}

Var MultiheadAttention::forward(Tape& t, const Var& q_tokens, const Var& kv_tokens,
                                const Tensor* bias, std::vector<Tensor>* captured_weights) const {
    const int n_k = kv_tokens.value().shape[0];
    if (n_k == 0) throw std::invalid_argument("attention: no context tokens");
    if (bias) {
        if (bias->rank() != 2 || bias->shape[0] != q_tokens.value().shape[0] ||
            bias->shape[1] != n_k)
            throw std::invalid_argument("attention: bias shape must be [n_q, n_k]");
    }
    auto& self = const_cast<MultiheadAttention&>(*this);
    Var q = wq.forward(t, q_tokens);
    Var k = wk.forward(t, kv_tokens);
    Var v = wv.forward(t, kv_tokens);
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
    std::vector<Var> ctx;
    ctx.reserve(heads);
    for (int h = 0; h < heads; ++h) {
        Var qh = slice_cols(q, h * head_dim, head_dim);
        Var kh = slice_cols(k, h * head_dim, head_dim);
        Var vh = slice_cols(v, h * head_dim, head_dim);
        Var scores = scale(matmul(qh, transpose(kh)), inv_sqrt);
        if (bias) {
            Var alpha = has_gains ? element(t.leaf(self.gains), h) : t.constant(Tensor::scalar(1.0));
            scores = add_scaled_const(scores, *bias, alpha);
        }
        Var weights = softmax(scores);
        if (captured_weights) captured_weights->push_back(weights.value());
        ctx.push_back(matmul(weights, vh));
    }
    return wo.forward(t, concat_cols(ctx));
}

void MultiheadAttention::collect(ParamList& out) {
    wq.collect(out);
    wk.collect(out);
    wv.collect(out);
    wo.collect(out);
    if (has_gains) out.push_back(&gains);
}

TransformerBlock::TransformerBlock(const std::string& name, int dim, int heads, double mlp_ratio,
                                   Rng& rng, bool attention_)
    : attention(attention_), ln2(name + ".ln2", dim) {
    if (attention) {
        ln1 = LayerNormLayer(name + ".ln1", dim);
        attn = MultiheadAttention(name + ".attn", dim, dim, heads, rng, false);
    }
    int hidden = static_cast<int>(dim * mlp_ratio);
    mlp = Mlp(name + ".mlp", dim, hidden, dim, rng);
}

Var TransformerBlock::forward(Tape& t, const Var& x) const {
    Var h = x;
    if (attention) {
        Var n1 = ln1.forward(t, h);
        h = add(h, attn.forward(t, n1, n1, nullptr));
    }
    return add(h, mlp.forward(t, ln2.forward(t, h)));
}

void TransformerBlock::collect(ParamList& out) {
    if (attention) {
        ln1.collect(out);
        attn.collect(out);
    }
    ln2.collect(out);
    mlp.collect(out);
}

}  // namespace geofusion
