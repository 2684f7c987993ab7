#include "geofusion/tabular.hpp"

#include <stdexcept>
#include <unordered_set>

namespace geofusion {

void TractTable::validate(int n_features) const {
    if (records.size() < 2) throw std::invalid_argument("TractTable: need at least 2 tracts");
    std::unordered_set<int64_t> ids;
    for (const auto& r : records) {
        if (static_cast<int>(r.features.size()) != n_features)
            throw std::invalid_argument("TractTable: feature width mismatch");
        for (double v : r.features)
            if (!std::isfinite(v)) throw std::invalid_argument("TractTable: non-finite feature");
        if (!ids.insert(r.id).second)
            throw std::invalid_argument("TractTable: duplicate tract id");
    }
}

void TabTConfig::validate() const {
    if (col_dim % col_heads != 0 || row_dim % row_heads != 0)
        throw std::invalid_argument("TabTConfig: dims must be divisible by heads");
    if (n_features <= 0) throw std::invalid_argument("TabTConfig: n_features must be positive");
}

FeatureTokenizer::FeatureTokenizer(const std::string& name, int n_features, int col_dim, Rng& rng)
    : weight(name + ".w", rng.normal_tensor({n_features, col_dim}, 0.02)),
      bias(name + ".b", rng.normal_tensor({n_features, col_dim}, 0.02)) {}

Var FeatureTokenizer::tokenize(Tape& t, const std::vector<double>& x) const {
    auto& self = const_cast<FeatureTokenizer&>(*this);
    const int f = weight.value.shape[0];
    const int d = weight.value.shape[1];
    if (static_cast<int>(x.size()) != f)
        throw std::invalid_argument("tokenize: feature count mismatch");
    Tensor xb({f, d});
    for (int j = 0; j < f; ++j) {
        if (!std::isfinite(x[j])) throw std::invalid_argument("tokenize: non-finite feature");
        double* r = xb.row(j);
        for (int k = 0; k < d; ++k) r[k] = x[j];
    }
    return add(mul(t.leaf(self.weight), t.constant(std::move(xb))), t.leaf(self.bias));
}

void FeatureTokenizer::collect(ParamList& out) {
    out.push_back(&weight);
    out.push_back(&bias);
}

TabularTransformer::TabularTransformer(const std::string& name, const TabTConfig& config, Rng& rng)
    : cfg(config) {
    cfg.validate();
    tokenizer = FeatureTokenizer(name + ".tok", cfg.n_features, cfg.col_dim, rng);
    for (int i = 0; i < cfg.col_blocks; ++i)
        col_blocks.emplace_back(name + ".col" + std::to_string(i), cfg.col_dim, cfg.col_heads,
                                cfg.mlp_ratio, rng);
    reduce = Linear(name + ".reduce", cfg.n_features * cfg.col_dim, cfg.row_dim, rng);
    for (int i = 0; i < cfg.row_blocks; ++i)
        row_blocks.emplace_back(name + ".row" + std::to_string(i), cfg.row_dim, cfg.row_heads,
                                cfg.mlp_ratio, rng, cfg.row_attention);
    enc_norm = LayerNormLayer(name + ".enc_norm", cfg.row_dim);
    mask_token = Parameter(name + ".mask_token", rng.normal_tensor({cfg.row_dim}, 0.02));
    for (int i = 0; i < cfg.decoder_blocks; ++i)
        dec_blocks.emplace_back(name + ".dec" + std::to_string(i), cfg.row_dim, cfg.row_heads,
                                cfg.mlp_ratio, rng, cfg.decoder_row_attention);
    dec_norm = LayerNormLayer(name + ".dec_norm", cfg.row_dim);
    head = Linear(name + ".head", cfg.row_dim, cfg.n_features, rng);
}

Var TabularTransformer::column_encode(Tape& t, const Var& tokens) const {
    Var x = tokens;
    for (const auto& blk : col_blocks) x = blk.forward(t, x);
    return x;
}

Var TabularTransformer::reduce_rows(Tape& t, const std::vector<std::vector<double>>& rows) const {
    if (rows.empty()) throw std::invalid_argument("reduce_rows: no rows");
    std::vector<Var> flat;
    flat.reserve(rows.size());
    for (const auto& x : rows) {
        Var tokens = column_encode(t, tokenizer.tokenize(t, x));
        // concatenate column tokens in feature order: row-major flatten
        flat.push_back(reshape(tokens, {1, cfg.n_features * cfg.col_dim}));
    }
    return reduce.forward(t, vstack(flat));
}

Var TabularTransformer::row_encode(Tape& t, const Var& reduced, const Var& e_tab) const {
    Var x = reduced;
    if (e_tab.valid()) x = add(x, e_tab);
    for (const auto& blk : row_blocks) x = blk.forward(t, x);
    return enc_norm.forward(t, x);
}

Var TabularTransformer::encode_visible(Tape& t, const std::vector<std::vector<double>>& all_rows,
                                       const MaskPlan& plan, const Var& e_tab_visible) const {
    std::vector<std::vector<double>> visible;
    visible.reserve(plan.visible.size());
    for (int i : plan.visible) visible.push_back(all_rows.at(i));
    return row_encode(t, reduce_rows(t, visible), e_tab_visible);
}

Var TabularTransformer::decode(Tape& t, const Var& fused, const MaskPlan& plan, int n_rows,
                               const Var& e_tab_all) const {
    auto& self = const_cast<TabularTransformer&>(*this);
    Var seq = assemble_rows(n_rows, plan.visible, fused, t.leaf(self.mask_token));
    if (e_tab_all.valid()) seq = add(seq, e_tab_all);
    for (const auto& blk : dec_blocks) seq = blk.forward(t, seq);
    return head.forward(t, dec_norm.forward(t, seq));
}

void TabularTransformer::collect(ParamList& out) {
    tokenizer.collect(out);
    for (auto& b : col_blocks) b.collect(out);
    reduce.collect(out);
    for (auto& b : row_blocks) b.collect(out);
    enc_norm.collect(out);
    out.push_back(&mask_token);
    for (auto& b : dec_blocks) b.collect(out);
    dec_norm.collect(out);
    head.collect(out);
}

}  // namespace geofusion
