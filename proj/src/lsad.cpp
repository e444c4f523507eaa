#include "scenegraft/lsad.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>

#include "scenegraft/errors.hpp"

namespace scenegraft {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Map = Eigen::Map<RowMat>;
using CMap = Eigen::Map<const RowMat>;

CMap cmap(const Dense2& m) {
    return CMap(m.data.data(), static_cast<Eigen::Index>(m.rows),
                static_cast<Eigen::Index>(m.cols));
}

Map mmap(Dense2& m) {
    return Map(m.data.data(), static_cast<Eigen::Index>(m.rows),
               static_cast<Eigen::Index>(m.cols));
}

void require(bool ok, const char* what) {
    if (!ok) throw ValidationError(what);
}

}  // namespace

const char* bias_mode_name(BiasMode m) {
    return m == BiasMode::QueryBias ? "query_bias" : "scalar_bias";
}

BiasMode bias_mode_from_name(const std::string& s) {
    if (s == "query_bias") return BiasMode::QueryBias;
    if (s == "scalar_bias") return BiasMode::ScalarBias;
    throw ConfigError("unknown bias mode: " + s);
}

const char* layer_order_name(LayerOrder o) {
    switch (o) {
        case LayerOrder::LangPairGlb: return "lang-pair-glb";
        case LayerOrder::PairGlbLang: return "pair-glb-lang";
        case LayerOrder::PairLangGlb: return "pair-lang-glb";
    }
    return "?";
}

LayerOrder layer_order_from_name(const std::string& s) {
    if (s == "lang-pair-glb") return LayerOrder::LangPairGlb;
    if (s == "pair-glb-lang") return LayerOrder::PairGlbLang;
    if (s == "pair-lang-glb") return LayerOrder::PairLangGlb;
    throw ConfigError("unknown layer order: " + s);
}

AttentionParams AttentionParams::zeros(std::size_t d, std::size_t heads_) {
    AttentionParams p;
    p.w_q = Dense2(d, d);
    p.w_k = Dense2(d, d);
    p.w_v = Dense2(d, d);
    p.w_o = Dense2(d, d);
    p.heads = heads_;
    return p;
}

AttentionParams AttentionParams::random(std::size_t d, std::size_t heads_, Rng& rng,
                                        double stddev) {
    AttentionParams p = zeros(d, heads_);
    for (Dense2* w : {&p.w_q, &p.w_k, &p.w_v, &p.w_o})
        for (double& v : w->data) v = rng.normal(0.0, stddev);
    return p;
}

LayerNormParams LayerNormParams::identity(std::size_t d) {
    LayerNormParams p;
    p.gamma.assign(d, 1.0);
    p.beta.assign(d, 0.0);
    return p;
}

FfnParams FfnParams::zeros(std::size_t d, std::size_t hidden) {
    FfnParams p;
    p.w1 = Dense2(d, hidden);
    p.b1.assign(hidden, 0.0);
    p.w2 = Dense2(hidden, d);
    p.b2.assign(d, 0.0);
    return p;
}

FfnParams FfnParams::random(std::size_t d, std::size_t hidden, Rng& rng, double stddev) {
    FfnParams p = zeros(d, hidden);
    for (double& v : p.w1.data) v = rng.normal(0.0, stddev);
    for (double& v : p.w2.data) v = rng.normal(0.0, stddev);
    for (double& v : p.b1) v = rng.normal(0.0, stddev);
    for (double& v : p.b2) v = rng.normal(0.0, stddev);
    return p;
}

DecoderLayerParams DecoderLayerParams::zeros(std::size_t d, std::size_t heads, std::size_t h_ffn,
                                             BiasMode mode) {
    DecoderLayerParams p;
    p.cross = AttentionParams::zeros(d, heads);
    p.psa = AttentionParams::zeros(d, heads);
    p.gsa = AttentionParams::zeros(d, heads);
    p.gsa.w_s = mode == BiasMode::QueryBias ? Dense2(d, d) : Dense2(d, heads);
    p.mlp_g = SpatialMlpParams::zeros(3, d, d);
    p.mlp_p = SpatialMlpParams::zeros(5, d, d);
    p.psa_head = Dense2(d, heads);
    p.psa_head_bias.assign(heads, 0.0);
    p.ffn = FfnParams::zeros(d, h_ffn);
    p.norm_cross = LayerNormParams::identity(d);
    p.norm_psa = LayerNormParams::identity(d);
    p.norm_gsa = LayerNormParams::identity(d);
    p.norm_ffn = LayerNormParams::identity(d);
    return p;
}

DecoderLayerParams DecoderLayerParams::random(std::size_t d, std::size_t heads, std::size_t h_ffn,
                                              BiasMode mode, Rng& rng, double stddev) {
    DecoderLayerParams p = zeros(d, heads, h_ffn, mode);
    p.cross = AttentionParams::random(d, heads, rng, stddev);
    p.psa = AttentionParams::random(d, heads, rng, stddev);
    p.gsa = AttentionParams::random(d, heads, rng, stddev);
    p.gsa.w_s = mode == BiasMode::QueryBias ? Dense2(d, d) : Dense2(d, heads);
    for (double& v : p.gsa.w_s.data) v = rng.normal(0.0, stddev);
    p.mlp_g = SpatialMlpParams::random(3, d, d, rng, stddev);
    p.mlp_p = SpatialMlpParams::random(5, d, d, rng, stddev);
    for (double& v : p.psa_head.data) v = rng.normal(0.0, stddev);
    for (double& v : p.psa_head_bias) v = rng.normal(0.0, stddev);
    p.ffn = FfnParams::random(d, h_ffn, rng, stddev);
    return p;
}

void DecoderConfig::validate() const {
    if (heads == 0 || d % heads != 0) throw ConfigError("decoder: d must be divisible by heads");
    if (n_layers < 1) throw ConfigError("decoder: need at least one layer");
}

Dense2 layer_norm(const Dense2& x, const LayerNormParams& p, NormCache* cache) {
    require(p.gamma.size() == x.cols && p.beta.size() == x.cols, "layer_norm: param width mismatch");
    Dense2 y(x.rows, x.cols);
    Dense2 xhat(x.rows, x.cols);
    std::vector<double> inv_std(x.rows);
    const double n = static_cast<double>(x.cols);
    for (std::size_t i = 0; i < x.rows; ++i) {
        double mean = 0.0;
        for (std::size_t j = 0; j < x.cols; ++j) mean += x(i, j);
        mean /= n;
        double var = 0.0;
        for (std::size_t j = 0; j < x.cols; ++j) {
            const double c = x(i, j) - mean;
            var += c * c;
        }
        var /= n;
        const double is = 1.0 / std::sqrt(var + kLayerNormEps);
        inv_std[i] = is;
        for (std::size_t j = 0; j < x.cols; ++j) {
            const double h = (x(i, j) - mean) * is;
            xhat(i, j) = h;
            y(i, j) = p.gamma[j] * h + p.beta[j];
        }
    }
    if (cache) {
        cache->z = x;
        cache->xhat = std::move(xhat);
        cache->inv_std = std::move(inv_std);
    }
    return y;
}

Dense2 multihead_attention(const Dense2& queries, const Dense2& keys_values, const Dense3* bias,
                           const AttentionParams& params, double scale, AttnCache* cache,
                           const Dense2* query_add, bool softmax_bypass) {
    const std::size_t d = params.dim();
    const std::size_t h_count = params.heads;
    require(h_count > 0 && d % h_count == 0, "attention: d not divisible by head count");
    require(queries.cols == d && keys_values.cols == d, "attention: feature width mismatch");
    require(params.w_k.rows == d && params.w_v.rows == d && params.w_o.rows == d,
            "attention: parameter shape mismatch");
    require(scale > 0.0, "attention: scale must be positive");
    if (!all_finite(queries) || !all_finite(keys_values))
        throw ValidationError("attention: non-finite input");
    if (bias) {
        require(bias->d0 == h_count && bias->d1 == queries.rows && bias->d2 == keys_values.rows,
                "attention: bias shape mismatch");
        if (!all_finite(*bias)) throw ValidationError("attention: non-finite bias");
    }
    if (query_add) {
        require(query_add->rows == queries.rows && query_add->cols == d,
                "attention: query bias shape mismatch");
        if (!all_finite(*query_add)) throw ValidationError("attention: non-finite query bias");
    }

    const std::size_t n_q = queries.rows;
    const std::size_t n_kv = keys_values.rows;
    const std::size_t d_h = d / h_count;

    Dense2 q = matmul(queries, params.w_q);
    if (query_add) add_inplace(q, *query_add);
    Dense2 k = matmul(keys_values, params.w_k);
    Dense2 v = matmul(keys_values, params.w_v);

    Dense3 probs(h_count, n_q, n_kv);
    Dense2 heads_concat(n_q, d);

    const auto eq = cmap(q), ek = cmap(k), ev = cmap(v);
    auto eh = mmap(heads_concat);
    const auto iq = static_cast<Eigen::Index>(n_q);
    const auto ikv = static_cast<Eigen::Index>(n_kv);
    const auto idh = static_cast<Eigen::Index>(d_h);

    for (std::size_t h = 0; h < h_count; ++h) {
        const auto c0 = static_cast<Eigen::Index>(h * d_h);
        RowMat logits = eq.middleCols(c0, idh) * ek.middleCols(c0, idh).transpose();
        if (bias) {
            CMap b(bias->data.data() + h * n_q * n_kv, iq, ikv);
            logits += b;
        }
        logits /= scale;
        if (softmax_bypass) {
            for (std::size_t i = 0; i < n_q; ++i)
                for (std::size_t j = 0; j < n_kv; ++j) probs(h, i, j) = logits(i, j);
        } else {
            for (std::size_t i = 0; i < n_q; ++i) {
                double mx = logits(i, 0);
                for (std::size_t j = 1; j < n_kv; ++j) mx = std::max(mx, logits(i, j));
                double sum = 0.0;
                for (std::size_t j = 0; j < n_kv; ++j) {
                    const double e = std::exp(logits(i, j) - mx);
                    probs(h, i, j) = e;
                    sum += e;
                }
                for (std::size_t j = 0; j < n_kv; ++j) probs(h, i, j) /= sum;
            }
        }
        CMap p(probs.data.data() + h * n_q * n_kv, iq, ikv);
        eh.middleCols(c0, idh) = p * ev.middleCols(c0, idh);
    }

    Dense2 out = matmul(heads_concat, params.w_o);
    if (cache) {
        cache->xq = queries;
        cache->xkv = keys_values;
        cache->q = std::move(q);
        cache->k = std::move(k);
        cache->v = std::move(v);
        cache->s_add = query_add ? *query_add : Dense2();
        cache->probs = std::move(probs);
        cache->heads_concat = std::move(heads_concat);
        cache->out = out;
    }
    return out;
}

namespace {

Dense2 residual_norm(const Dense2& x, const Dense2& sub, const LayerNormParams& norm,
                     NormCache* nc) {
    return layer_norm(add(x, sub), norm, nc);
}

Dense2 gsa_query_term(const Dense2& f_g, const AttentionParams& params) {
    require(params.w_s.rows == params.dim() && params.w_s.cols == params.dim(),
            "gsa: query-bias W_S must be d x d");
    return matmul(f_g, params.w_s);
}

Dense3 gsa_scalar_bias(const Dense2& f_g, const AttentionParams& params, std::size_t n_kv) {
    require(params.w_s.rows == params.dim() && params.w_s.cols == params.heads,
            "gsa: scalar-bias W_S must be d x heads");
    Dense2 s = matmul(f_g, params.w_s);  // n_q x H
    Dense3 bias(params.heads, s.rows, n_kv);
    for (std::size_t h = 0; h < params.heads; ++h)
        for (std::size_t i = 0; i < s.rows; ++i)
            for (std::size_t j = 0; j < n_kv; ++j) bias(h, i, j) = s(i, h);
    return bias;
}

// Sublayer cores with optional caches; the public ops and decoder_layer share these.
Dense2 cross_core(const Dense2& f_o, const Dense2& f_t, const AttentionParams& p,
                  const LayerNormParams& norm, AttnCache* ac, NormCache* nc, Dense2* pre) {
    const double scale = std::sqrt(static_cast<double>(p.head_dim()));
    Dense2 attn = multihead_attention(f_o, f_t, nullptr, p, scale, ac);
    if (pre) *pre = attn;
    return residual_norm(f_o, attn, norm, nc);
}

Dense2 psa_core(const Dense2& f_o, const Dense3& s_p_logits, const AttentionParams& p,
                const LayerNormParams& norm, AttnCache* ac, NormCache* nc, Dense2* pre) {
    const double scale = std::sqrt(2.0 * static_cast<double>(p.head_dim()));
    Dense2 attn = multihead_attention(f_o, f_o, &s_p_logits, p, scale, ac);
    if (pre) *pre = attn;
    return residual_norm(f_o, attn, norm, nc);
}

Dense2 gsa_core(const Dense2& f_o, const Dense2& f_v, const Dense2& f_g,
                const AttentionParams& p, const LayerNormParams& norm, BiasMode mode,
                AttnCache* ac, NormCache* nc, Dense2* pre) {
    const double scale = std::sqrt(2.0 * static_cast<double>(p.head_dim()));
    Dense2 attn;
    switch (mode) {
        case BiasMode::QueryBias: {
            Dense2 s_add = gsa_query_term(f_g, p);
            attn = multihead_attention(f_o, f_v, nullptr, p, scale, ac, &s_add);
            break;
        }
        case BiasMode::ScalarBias: {
            Dense3 bias = gsa_scalar_bias(f_g, p, f_v.rows);
            attn = multihead_attention(f_o, f_v, &bias, p, scale, ac);
            break;
        }
        default:
            throw ConfigError("gsa: unknown bias mode");
    }
    if (pre) *pre = attn;
    return residual_norm(f_o, attn, norm, nc);
}

Dense2 ffn_core(const Dense2& x, const FfnParams& p, const LayerNormParams& norm, FfnCache* fc,
                NormCache* nc) {
    Dense2 h = matmul(x, p.w1);
    for (std::size_t i = 0; i < h.rows; ++i)
        for (std::size_t j = 0; j < h.cols; ++j) h(i, j) += p.b1[j];
    if (fc) {
        fc->x = x;
        fc->h_pre = h;
    }
    for (double& v : h.data) v = std::max(v, 0.0);
    Dense2 y = matmul(h, p.w2);
    for (std::size_t i = 0; i < y.rows; ++i)
        for (std::size_t j = 0; j < y.cols; ++j) y(i, j) += p.b2[j];
    return residual_norm(x, y, norm, nc);
}

}  // namespace

Dense2 cross_attention_text(const Dense2& f_o, const Dense2& f_t, const AttentionParams& params,
                            const LayerNormParams& norm, Dense2* pre_residual) {
    return cross_core(f_o, f_t, params, norm, nullptr, nullptr, pre_residual);
}

Dense2 psa(const Dense2& f_o, const Dense3& s_p_logits, const AttentionParams& params,
           const LayerNormParams& norm, Dense2* pre_residual) {
    return psa_core(f_o, s_p_logits, params, norm, nullptr, nullptr, pre_residual);
}

Dense2 gsa(const Dense2& f_o, const Dense2& f_v, const Dense2& f_g, const AttentionParams& params,
           const LayerNormParams& norm, BiasMode mode, Dense2* pre_residual) {
    return gsa_core(f_o, f_v, f_g, params, norm, mode, nullptr, nullptr, pre_residual);
}

Dense3 psa_logits(const Dense3& r_p, const DecoderLayerParams& params, std::size_t heads) {
    const std::size_t k = r_p.d0;
    require(r_p.d1 == k, "psa_logits: pair tensor must be square");
    Dense2 embedded = embed_spatial(r_p.as_matrix(), params.mlp_p);  // (K*K) x d
    Dense2 per_head = matmul(embedded, params.psa_head);             // (K*K) x H
    require(params.psa_head_bias.size() == per_head.cols, "psa_logits: head bias size");
    Dense3 logits(heads, k, k);
    for (std::size_t h = 0; h < heads; ++h)
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < k; ++j)
                logits(h, i, j) = per_head(i * k + j, h) + params.psa_head_bias[h];
    return logits;
}

Dense2 decoder_layer(const Dense2& f_o, const Dense2& f_t, const Dense2& f_v,
                     const Dense3& s_p_logits, const Dense2& f_g,
                     const DecoderLayerParams& params, const DecoderConfig& config,
                     LayerCache* cache) {
    config.validate();
    require(f_o.cols == config.d && f_t.cols == config.d && f_v.cols == config.d &&
                f_g.cols == config.d,
            "decoder_layer: feature width mismatch");

    std::vector<int> seq;
    switch (config.layer_order) {
        case LayerOrder::LangPairGlb: seq = {0, 1, 2, 3}; break;
        case LayerOrder::PairGlbLang: seq = {1, 2, 0, 3}; break;
        case LayerOrder::PairLangGlb: seq = {1, 0, 2, 3}; break;
    }

    Dense2 x = f_o;
    for (std::size_t step = 0; step < seq.size(); ++step) {
        const int op = seq[step];
        AttnCache* ac = (cache && op < 3) ? &cache->attn[op] : nullptr;
        NormCache* nc = cache ? &cache->norm[step] : nullptr;
        if (cache) cache->input[step] = x;
        switch (op) {
            case 0: x = cross_core(x, f_t, params.cross, params.norm_cross, ac, nc, nullptr); break;
            case 1: x = psa_core(x, s_p_logits, params.psa, params.norm_psa, ac, nc, nullptr); break;
            case 2:
                x = gsa_core(x, f_v, f_g, params.gsa, params.norm_gsa, config.bias_mode, ac, nc,
                             nullptr);
                break;
            case 3: x = ffn_core(x, params.ffn, params.norm_ffn, cache ? &cache->ffn : nullptr, nc); break;
        }
    }
    if (cache) cache->seq = std::move(seq);
    return x;
}

Dense2 decoder_stack(const Dense2& f_o, const Dense2& f_t, const Dense2& f_v, const Dense3& r_p,
                     const Dense2& r_g, const std::vector<DecoderLayerParams>& layers,
                     const DecoderConfig& config) {
    config.validate();
    require(layers.size() == config.n_layers, "decoder_stack: layer count mismatch");
    require(r_g.rows == f_o.rows && r_g.cols == 3, "decoder_stack: R_g must be K x 3");
    require(r_p.d0 == f_o.rows && r_p.d1 == f_o.rows && r_p.d2 == 5,
            "decoder_stack: R_p must be K x K x 5");
    Dense2 x = f_o;
    for (const DecoderLayerParams& layer : layers) {
        Dense3 s_p = psa_logits(r_p, layer, config.heads);
        Dense2 f_g = embed_spatial(r_g, layer.mlp_g);
        x = decoder_layer(x, f_t, f_v, s_p, f_g, layer, config, nullptr);
    }
    return x;
}

TopkResult encode_select_topk(const Dense2& f_v_all, const std::vector<double>& score_w,
                              double score_b, std::size_t k) {
    if (k > f_v_all.rows)
        throw ValidationError("encode_select_topk: k exceeds token count");
    require(score_w.size() == f_v_all.cols, "encode_select_topk: score weight width mismatch");
    std::vector<double> scores(f_v_all.rows, score_b);
    for (std::size_t i = 0; i < f_v_all.rows; ++i)
        for (std::size_t j = 0; j < f_v_all.cols; ++j) scores[i] += f_v_all(i, j) * score_w[j];

    std::vector<std::size_t> order(f_v_all.rows);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });

    TopkResult out;
    out.indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    out.features = Dense2(k, f_v_all.cols);
    for (std::size_t r = 0; r < k; ++r)
        for (std::size_t j = 0; j < f_v_all.cols; ++j)
            out.features(r, j) = f_v_all(out.indices[r], j);
    return out;
}

GroundingHeadParams GroundingHeadParams::zeros(std::size_t d) {
    GroundingHeadParams p;
    p.w1 = Dense2(d, d);
    p.b1.assign(d, 0.0);
    p.w2 = Dense2(d, 7);
    p.b2.assign(7, 0.0);
    p.w_v = Dense2(d, 64);
    p.w_t = Dense2(d, 64);
    return p;
}

GroundingHeadParams GroundingHeadParams::random(std::size_t d, Rng& rng, double stddev) {
    GroundingHeadParams p = zeros(d);
    for (Dense2* w : {&p.w1, &p.w2, &p.w_v, &p.w_t})
        for (double& v : w->data) v = rng.normal(0.0, stddev);
    for (double& v : p.b1) v = rng.normal(0.0, stddev);
    for (double& v : p.b2) v = rng.normal(0.0, stddev);
    return p;
}

namespace {
double softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}
}  // namespace

GroundingOutput grounding_head(const Dense2& f, const Dense2& f_t,
                               const GroundingHeadParams& params) {
    require(f.cols == params.w1.rows && f_t.cols == params.w_t.rows,
            "grounding_head: feature width mismatch");
    Dense2 h = matmul(f, params.w1);
    for (std::size_t i = 0; i < h.rows; ++i)
        for (std::size_t j = 0; j < h.cols; ++j) h(i, j) = std::max(h(i, j) + params.b1[j], 0.0);
    Dense2 raw = matmul(h, params.w2);
    for (std::size_t i = 0; i < raw.rows; ++i)
        for (std::size_t j = 0; j < raw.cols; ++j) raw(i, j) += params.b2[j];

    GroundingOutput out;
    out.boxes = Dense2(f.rows, 6);
    out.confidence.resize(f.rows);
    for (std::size_t i = 0; i < f.rows; ++i) {
        out.boxes(i, 0) = raw(i, 0);
        out.boxes(i, 1) = raw(i, 1);
        out.boxes(i, 2) = raw(i, 2);
        out.boxes(i, 3) = softplus(raw(i, 3));
        out.boxes(i, 4) = softplus(raw(i, 4));
        out.boxes(i, 5) = softplus(raw(i, 5));
        out.confidence[i] = raw(i, 6);
    }
    out.visual_proj = matmul(f, params.w_v);
    out.text_proj = matmul(f_t, params.w_t);
    out.best_index = 0;
    for (std::size_t i = 1; i < out.confidence.size(); ++i)
        if (out.confidence[i] > out.confidence[out.best_index]) out.best_index = i;
    return out;
}

}  // namespace scenegraft
