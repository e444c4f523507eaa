#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "scenegraft/rng.hpp"
#include "scenegraft/spatial_relations.hpp"
#include "scenegraft/tensor.hpp"

namespace scenegraft {

// How global spatial features enter the attention logits. The literal
// per-query scalar reading is softmax-inert (adding a constant to a softmax
// row changes nothing); query_bias folds the projected features into Q
// instead, which keeps the additive-logit semantics and actually does
// something. Both are kept so the inertness is testable.
enum class BiasMode { QueryBias, ScalarBias };

enum class LayerOrder { LangPairGlb, PairGlbLang, PairLangGlb };

const char* bias_mode_name(BiasMode m);
BiasMode bias_mode_from_name(const std::string& s);
const char* layer_order_name(LayerOrder o);
LayerOrder layer_order_from_name(const std::string& s);

struct AttentionParams {
    Dense2 w_q, w_k, w_v, w_o;  // d x d, no biases
    Dense2 w_s;                 // d x d (query bias) or d x H (scalar bias); may be empty
    std::size_t heads = 1;

    std::size_t dim() const { return w_q.rows; }
    std::size_t head_dim() const { return dim() / heads; }

    static AttentionParams zeros(std::size_t d, std::size_t heads);
    static AttentionParams random(std::size_t d, std::size_t heads, Rng& rng, double stddev = 0.1);
};

struct LayerNormParams {
    std::vector<double> gamma, beta;
    static LayerNormParams identity(std::size_t d);
};

struct FfnParams {
    Dense2 w1;  // d x h_ffn
    std::vector<double> b1;
    Dense2 w2;  // h_ffn x d
    std::vector<double> b2;

    static FfnParams zeros(std::size_t d, std::size_t hidden);
    static FfnParams random(std::size_t d, std::size_t hidden, Rng& rng, double stddev = 0.1);
};

struct DecoderLayerParams {
    AttentionParams cross;  // queries F_o, keys/values text
    AttentionParams psa;    // self-attention with pairwise logit bias
    AttentionParams gsa;    // queries F_o, keys/values scene points
    SpatialMlpParams mlp_g;  // 3 -> d -> d
    SpatialMlpParams mlp_p;  // 5 -> d -> d
    Dense2 psa_head;         // d x H, maps pair embeddings to per-head logits
    std::vector<double> psa_head_bias;
    FfnParams ffn;
    LayerNormParams norm_cross, norm_psa, norm_gsa, norm_ffn;

    static DecoderLayerParams zeros(std::size_t d, std::size_t heads, std::size_t h_ffn,
                                    BiasMode mode);
    static DecoderLayerParams random(std::size_t d, std::size_t heads, std::size_t h_ffn,
                                     BiasMode mode, Rng& rng, double stddev = 0.1);
};

struct DecoderConfig {
    std::size_t d = 288;
    std::size_t heads = 8;
    std::size_t k_objects = 256;   // candidate count K
    std::size_t n_layers = 6;      // N_D
    std::size_t n_encoder = 3;     // N_E, encoder depth (bookkeeping only here)
    std::size_t n_points = 1024;   // N_p visual tokens
    std::size_t n_boxes = 133;     // N_b box proposals (encoder side, bookkeeping)
    std::size_t h_ffn = 1152;
    BiasMode bias_mode = BiasMode::QueryBias;
    LayerOrder layer_order = LayerOrder::LangPairGlb;

    std::size_t head_dim() const { return d / heads; }
    void validate() const;  // d % heads == 0, n_layers >= 1
};

// Forward caches, filled on demand so the backward pass can reuse
// activations instead of recomputing them.
struct AttnCache {
    Dense2 xq, xkv;
    Dense2 q, k, v;      // post projection; q includes any query-side bias
    Dense2 s_add;        // query-side bias term, empty if unused
    Dense3 probs;        // H x n_q x n_kv attention weights (or raw logits in bypass mode)
    Dense2 heads_concat; // pre-W_O
    Dense2 out;          // post-W_O, pre-residual
};

struct NormCache {
    Dense2 z;      // input to the norm (x + sublayer(x))
    Dense2 xhat;
    std::vector<double> inv_std;
};

struct FfnCache {
    Dense2 x;
    Dense2 h_pre;  // x w1 + b1, pre-activation
};

struct LayerCache {
    std::vector<int> seq;  // 0 cross, 1 psa, 2 gsa, 3 ffn, in application order
    Dense2 input[4];       // sublayer inputs in application order
    AttnCache attn[3];     // indexed by sublayer id (0..2)
    NormCache norm[4];     // in application order
    FfnCache ffn;
};

inline constexpr double kLayerNormEps = 1e-5;

// y = gamma * (x - mean) / sqrt(var + eps) + beta, per row.
Dense2 layer_norm(const Dense2& x, const LayerNormParams& p, NormCache* cache = nullptr);

// Scaled dot-product attention over H heads with an optional per-head
// additive logit bias and an optional query-side additive term. softmax_bypass
// treats the scaled logits directly as weights (diagnostic, used to validate
// the linear part of the gradient machinery).
Dense2 multihead_attention(const Dense2& queries, const Dense2& keys_values, const Dense3* bias,
                           const AttentionParams& params, double scale,
                           AttnCache* cache = nullptr, const Dense2* query_add = nullptr,
                           bool softmax_bypass = false);

// Residual sublayers. Each computes attention, adds the input back, then
// normalizes. pre_residual (optional) receives the attention output alone.
Dense2 cross_attention_text(const Dense2& f_o, const Dense2& f_t, const AttentionParams& params,
                            const LayerNormParams& norm, Dense2* pre_residual = nullptr);
Dense2 psa(const Dense2& f_o, const Dense3& s_p_logits, const AttentionParams& params,
           const LayerNormParams& norm, Dense2* pre_residual = nullptr);
Dense2 gsa(const Dense2& f_o, const Dense2& f_v, const Dense2& f_g, const AttentionParams& params,
           const LayerNormParams& norm, BiasMode mode, Dense2* pre_residual = nullptr);

// Per-head pairwise logits from embedded pair features: embed R_p with the
// layer's mlp_p, then project each pair embedding to one scalar per head.
Dense3 psa_logits(const Dense3& r_p, const DecoderLayerParams& params, std::size_t heads);

Dense2 decoder_layer(const Dense2& f_o, const Dense2& f_t, const Dense2& f_v,
                     const Dense3& s_p_logits, const Dense2& f_g,
                     const DecoderLayerParams& params, const DecoderConfig& config,
                     LayerCache* cache = nullptr);

Dense2 decoder_stack(const Dense2& f_o, const Dense2& f_t, const Dense2& f_v, const Dense3& r_p,
                     const Dense2& r_g, const std::vector<DecoderLayerParams>& layers,
                     const DecoderConfig& config);

struct TopkResult {
    Dense2 features;                  // K x d
    std::vector<std::size_t> indices; // original row indices, score-descending
};

// Linear scoring of visual tokens; keeps the K best rows. Ties broken by
// original index, ascending.
TopkResult encode_select_topk(const Dense2& f_v_all, const std::vector<double>& score_w,
                              double score_b, std::size_t k);

struct GroundingHeadParams {
    Dense2 w1;  // d x d
    std::vector<double> b1;
    Dense2 w2;  // d x 7: center(3), raw size(3), confidence(1)
    std::vector<double> b2;
    Dense2 w_v;  // d x 64
    Dense2 w_t;  // d x 64

    static GroundingHeadParams zeros(std::size_t d);
    static GroundingHeadParams random(std::size_t d, Rng& rng, double stddev = 0.1);
};

struct GroundingOutput {
    Dense2 boxes;                    // K x 6, sizes mapped through softplus
    std::vector<double> confidence;  // K
    Dense2 visual_proj;              // K x 64
    Dense2 text_proj;                // N_l x 64
    std::size_t best_index = 0;      // argmax confidence, first on ties
};

GroundingOutput grounding_head(const Dense2& f, const Dense2& f_t,
                               const GroundingHeadParams& params);

// ---------------------------------------------------------------------------
// Gradient verification (implemented in lsad_grad.cpp)

struct GradCheckDims {
    std::size_t d = 8;
    std::size_t heads = 2;
    std::size_t k = 4;    // objects
    std::size_t n_p = 6;  // visual tokens
    std::size_t n_l = 3;  // text tokens
};

// Compares the analytic gradient of sum(output) w.r.t. the object features
// (and, for gsa, the global spatial features) against central finite
// differences. Returns the max relative error, |a-n| / max(1,|a|,|n|).
// op_id: cross | psa | gsa | layer.
double gradient_check(const std::string& op_id, const GradCheckDims& dims, std::uint64_t seed,
                      double eps, bool softmax_bypass = false);

struct CheckResult {
    std::string name;
    bool pass = false;
    double max_err = 0.0;
    double seconds = 0.0;
};

// Self-contained invariant + gradient suite backing the `check` subcommand.
std::vector<CheckResult> run_check_suite(std::uint64_t seed);

}  // namespace scenegraft
