#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "geofusion/geo.hpp"
#include "geofusion/nn.hpp"
#include "geofusion/vision.hpp"

namespace geofusion {

struct TractRecord {
    int64_t id = 0;
    std::vector<double> features;  // standardized, length F
    GeoPoint rep_point;
    TractPolygon polygon;
};

struct TractTable {
    std::vector<TractRecord> records;

    int size() const { return static_cast<int>(records.size()); }
    void validate(int n_features) const;
};

struct TabTConfig {
    int n_features = 12;  // F
    int col_dim = 16;     // D_col
    int col_blocks = 3;
    int col_heads = 4;
    int row_dim = 64;  // D_t
    int row_blocks = 2;
    int row_heads = 4;
    double mlp_ratio = 4.0;
    bool row_attention = true;          // Table 5(e) axis: encoder row mixing
    bool decoder_row_attention = true;  // false -> per-row MLP decoder
    int decoder_blocks = 2;

    void validate() const;
};

// Per-feature affine scalar embedding: token j = x_j * w_j + b_j.
class FeatureTokenizer {
public:
    FeatureTokenizer() = default;
    FeatureTokenizer(const std::string& name, int n_features, int col_dim, Rng& rng);

    Var tokenize(Tape& t, const std::vector<double>& x) const;  // [F, D_col]
    void collect(ParamList& out);

    Parameter weight;  // [F, D_col]
    Parameter bias;    // [F, D_col]
};

// Tabular pathway: tokenizer, column self-attention blocks applied per row,
// concat + row reduction to D_t, geospatial encoding, row self-attention.
// The decoder inserts a shared mask token at D_t level for masked rows.
class TabularTransformer {
public:
    TabularTransformer() = default;
    TabularTransformer(const std::string& name, const TabTConfig& cfg, Rng& rng);

    // column stage for one record's token matrix [F, D_col]
    Var column_encode(Tape& t, const Var& tokens) const;
    // tokenize + column stage + reduction for the given feature rows [n, F]
    Var reduce_rows(Tape& t, const std::vector<std::vector<double>>& rows) const;
    // add e_tab and run row blocks; e_tab must align with `reduced` rows
    Var row_encode(Tape& t, const Var& reduced, const Var& e_tab) const;
    // full encoder over the visible rows
    Var encode_visible(Tape& t, const std::vector<std::vector<double>>& all_rows,
                       const MaskPlan& plan, const Var& e_tab_visible) const;
    // fused: [n_visible, D_t] in plan.visible order; e_tab_all: [N, D_t]
    Var decode(Tape& t, const Var& fused, const MaskPlan& plan, int n_rows,
               const Var& e_tab_all) const;

    void collect(ParamList& out);

    TabTConfig cfg;
    FeatureTokenizer tokenizer;
    std::vector<TransformerBlock> col_blocks;
    Linear reduce;  // F*D_col -> D_t
    std::vector<TransformerBlock> row_blocks;
    LayerNormLayer enc_norm;
    Parameter mask_token;  // [D_t]
    std::vector<TransformerBlock> dec_blocks;
    LayerNormLayer dec_norm;
    Linear head;  // D_t -> F
};

}  // namespace geofusion
