#include <chrono>
#include <cmath>
#include <functional>
#include <limits>

#include <Eigen/Dense>

#include "scenegraft/errors.hpp"
#include "scenegraft/lsad.hpp"

// Analytic backward passes for the decoder sublayers, plus the finite
// difference harness that keeps them honest. The backward code exists for
// verification, not training; it covers input gradients (and the global
// feature path for gsa), which is what the checks exercise.

namespace scenegraft {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Map = Eigen::Map<RowMat>;
using CMap = Eigen::Map<const RowMat>;

CMap cmap(const Dense2& m) {
    return CMap(m.data.data(), static_cast<Eigen::Index>(m.rows),
                static_cast<Eigen::Index>(m.cols));
}

Dense2 ln_backward(const NormCache& c, const LayerNormParams& p, const Dense2& dy) {
    Dense2 dz(dy.rows, dy.cols);
    const double n = static_cast<double>(dy.cols);
    for (std::size_t i = 0; i < dy.rows; ++i) {
        double m1 = 0.0, m2 = 0.0;
        for (std::size_t j = 0; j < dy.cols; ++j) {
            const double dxh = dy(i, j) * p.gamma[j];
            m1 += dxh;
            m2 += dxh * c.xhat(i, j);
        }
        m1 /= n;
        m2 /= n;
        for (std::size_t j = 0; j < dy.cols; ++j) {
            const double dxh = dy(i, j) * p.gamma[j];
            dz(i, j) = c.inv_std[i] * (dxh - m1 - c.xhat(i, j) * m2);
        }
    }
    return dz;
}

struct AttnGrads {
    Dense2 d_xq;
    Dense2 d_xkv;
    Dense2 d_s_add;  // empty unless the forward used a query-side term
};

AttnGrads mha_backward(const AttnCache& c, const AttentionParams& params, double scale,
                       const Dense2& dy, bool softmax_bypass) {
    const std::size_t d = params.dim();
    const std::size_t d_h = params.head_dim();
    const std::size_t n_q = c.xq.rows;
    const std::size_t n_kv = c.xkv.rows;

    Dense2 d_heads = matmul_nt(dy, params.w_o);
    Dense2 dq(n_q, d), dk(n_kv, d), dv(n_kv, d);

    const auto iq = static_cast<Eigen::Index>(n_q);
    const auto ikv = static_cast<Eigen::Index>(n_kv);
    const auto idh = static_cast<Eigen::Index>(d_h);
    const auto eq = cmap(c.q), ek = cmap(c.k), ev = cmap(c.v), edh = cmap(d_heads);
    Map edq(dq.data.data(), iq, static_cast<Eigen::Index>(d));
    Map edk(dk.data.data(), ikv, static_cast<Eigen::Index>(d));
    Map edv(dv.data.data(), ikv, static_cast<Eigen::Index>(d));

    for (std::size_t h = 0; h < params.heads; ++h) {
        const auto c0 = static_cast<Eigen::Index>(h * d_h);
        CMap p(c.probs.data.data() + h * n_q * n_kv, iq, ikv);
        RowMat d_o = edh.middleCols(c0, idh);
        RowMat dp = d_o * ev.middleCols(c0, idh).transpose();
        edv.middleCols(c0, idh) = p.transpose() * d_o;

        RowMat dl;
        if (softmax_bypass) {
            dl = dp;
        } else {
            // softmax Jacobian per row: p * (dp - <dp, p>)
            dl.resize(iq, ikv);
            for (Eigen::Index i = 0; i < iq; ++i) {
                const double dot = dp.row(i).cwiseProduct(p.row(i)).sum();
                dl.row(i) = p.row(i).cwiseProduct(dp.row(i) - RowMat::Constant(1, ikv, dot));
            }
        }
        dl /= scale;
        edq.middleCols(c0, idh) = dl * ek.middleCols(c0, idh);
        edk.middleCols(c0, idh) = dl.transpose() * eq.middleCols(c0, idh);
    }

    AttnGrads g;
    g.d_xq = matmul_nt(dq, params.w_q);
    g.d_xkv = add(matmul_nt(dk, params.w_k), matmul_nt(dv, params.w_v));
    if (c.s_add.size() > 0) g.d_s_add = dq;
    return g;
}

Dense2 ffn_backward(const FfnCache& c, const FfnParams& p, const Dense2& dy) {
    Dense2 dh = matmul_nt(dy, p.w2);
    for (std::size_t i = 0; i < dh.rows; ++i)
        for (std::size_t j = 0; j < dh.cols; ++j)
            if (c.h_pre(i, j) <= 0.0) dh(i, j) = 0.0;
    return matmul_nt(dh, p.w1);
}

double cross_scale(const AttentionParams& p) {
    return std::sqrt(static_cast<double>(p.head_dim()));
}
double spatial_scale(const AttentionParams& p) {
    return std::sqrt(2.0 * static_cast<double>(p.head_dim()));
}

Dense2 decoder_layer_backward(const LayerCache& cache, const DecoderLayerParams& params,
                              const Dense2& dy_out) {
    Dense2 g = dy_out;
    for (std::size_t s = cache.seq.size(); s-- > 0;) {
        const int op = cache.seq[s];
        const LayerNormParams* norm = nullptr;
        switch (op) {
            case 0: norm = &params.norm_cross; break;
            case 1: norm = &params.norm_psa; break;
            case 2: norm = &params.norm_gsa; break;
            case 3: norm = &params.norm_ffn; break;
        }
        Dense2 dz = ln_backward(cache.norm[s], *norm, g);
        switch (op) {
            case 0: {
                AttnGrads ag = mha_backward(cache.attn[0], params.cross, cross_scale(params.cross),
                                            dz, false);
                g = add(dz, ag.d_xq);
                break;
            }
            case 1: {
                AttnGrads ag =
                    mha_backward(cache.attn[1], params.psa, spatial_scale(params.psa), dz, false);
                g = add(dz, add(ag.d_xq, ag.d_xkv));
                break;
            }
            case 2: {
                AttnGrads ag =
                    mha_backward(cache.attn[2], params.gsa, spatial_scale(params.gsa), dz, false);
                g = add(dz, ag.d_xq);
                break;
            }
            case 3: g = add(dz, ffn_backward(cache.ffn, params.ffn, dz)); break;
        }
    }
    return g;
}

double sum_all(const Dense2& m) {
    double s = 0.0;
    for (double v : m.data) s += v;
    return s;
}

Dense2 randn(std::size_t r, std::size_t c, Rng& rng, double stddev = 1.0) {
    Dense2 m(r, c);
    for (double& v : m.data) v = rng.normal(0.0, stddev);
    return m;
}

LayerNormParams random_norm(std::size_t d, Rng& rng) {
    LayerNormParams p = LayerNormParams::identity(d);
    for (double& v : p.gamma) v += rng.normal(0.0, 0.2);
    for (double& v : p.beta) v = rng.normal(0.0, 0.2);
    return p;
}

// Max over entries of |analytic - numeric| / max(1, |analytic|, |numeric|),
// central differences on a scalar loss.
double compare_grad(Dense2& x, const Dense2& analytic, double eps,
                    const std::function<double()>& loss) {
    double worst = 0.0;
    for (std::size_t idx = 0; idx < x.data.size(); ++idx) {
        const double keep = x.data[idx];
        x.data[idx] = keep + eps;
        const double up = loss();
        x.data[idx] = keep - eps;
        const double dn = loss();
        x.data[idx] = keep;
        const double numeric = (up - dn) / (2.0 * eps);
        const double a = analytic.data[idx];
        const double err = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
        worst = std::max(worst, err);
    }
    return worst;
}

}  // namespace

double gradient_check(const std::string& op_id, const GradCheckDims& dims, std::uint64_t seed,
                      double eps, bool softmax_bypass) {
    Rng rng(seed);
    const std::size_t d = dims.d, h = dims.heads, k = dims.k;
    if (softmax_bypass && op_id != "cross")
        throw ValidationError("gradient_check: bypass probe only supports the cross op");

    if (op_id == "cross") {
        AttentionParams params = AttentionParams::random(d, h, rng, 0.4);
        LayerNormParams norm = random_norm(d, rng);
        Dense2 f_o = randn(k, d, rng);
        Dense2 f_t = randn(dims.n_l, d, rng);
        const double scale = cross_scale(params);

        if (softmax_bypass) {
            // Bare core; output is linear in f_o, so central differences are
            // exact up to roundoff.
            AttnCache ac;
            multihead_attention(f_o, f_t, nullptr, params, scale, &ac, nullptr, true);
            Dense2 dy(k, d, 1.0);
            Dense2 analytic = mha_backward(ac, params, scale, dy, true).d_xq;
            return compare_grad(f_o, analytic, eps, [&] {
                return sum_all(multihead_attention(f_o, f_t, nullptr, params, scale, nullptr,
                                                   nullptr, true));
            });
        }

        AttnCache ac;
        NormCache nc;
        Dense2 attn = multihead_attention(f_o, f_t, nullptr, params, scale, &ac);
        layer_norm(add(f_o, attn), norm, &nc);
        Dense2 dy(k, d, 1.0);
        Dense2 dz = ln_backward(nc, norm, dy);
        Dense2 analytic = add(dz, mha_backward(ac, params, scale, dz, false).d_xq);
        return compare_grad(f_o, analytic, eps, [&] {
            return sum_all(cross_attention_text(f_o, f_t, params, norm));
        });
    }

    if (op_id == "psa") {
        AttentionParams params = AttentionParams::random(d, h, rng, 0.4);
        LayerNormParams norm = random_norm(d, rng);
        Dense2 f_o = randn(k, d, rng);
        Dense3 bias(h, k, k);
        for (double& v : bias.data) v = rng.normal(0.0, 0.5);
        const double scale = spatial_scale(params);

        AttnCache ac;
        NormCache nc;
        Dense2 attn = multihead_attention(f_o, f_o, &bias, params, scale, &ac);
        layer_norm(add(f_o, attn), norm, &nc);
        Dense2 dy(k, d, 1.0);
        Dense2 dz = ln_backward(nc, norm, dy);
        AttnGrads ag = mha_backward(ac, params, scale, dz, false);
        Dense2 analytic = add(dz, add(ag.d_xq, ag.d_xkv));
        return compare_grad(f_o, analytic, eps,
                            [&] { return sum_all(psa(f_o, bias, params, norm)); });
    }

    if (op_id == "gsa") {
        AttentionParams params = AttentionParams::random(d, h, rng, 0.4);
        params.w_s = randn(d, d, rng, 0.4);
        LayerNormParams norm = random_norm(d, rng);
        Dense2 f_o = randn(k, d, rng);
        Dense2 f_v = randn(dims.n_p, d, rng);
        Dense2 f_g = randn(k, d, rng);
        const double scale = spatial_scale(params);

        AttnCache ac;
        NormCache nc;
        Dense2 s_add = matmul(f_g, params.w_s);
        Dense2 attn = multihead_attention(f_o, f_v, nullptr, params, scale, &ac, &s_add);
        layer_norm(add(f_o, attn), norm, &nc);
        Dense2 dy(k, d, 1.0);
        Dense2 dz = ln_backward(nc, norm, dy);
        AttnGrads ag = mha_backward(ac, params, scale, dz, false);
        Dense2 analytic_o = add(dz, ag.d_xq);
        Dense2 analytic_g = matmul_nt(ag.d_s_add, params.w_s);

        auto loss = [&] {
            return sum_all(gsa(f_o, f_v, f_g, params, norm, BiasMode::QueryBias));
        };
        const double err_o = compare_grad(f_o, analytic_o, eps, loss);
        const double err_g = compare_grad(f_g, analytic_g, eps, loss);
        return std::max(err_o, err_g);
    }

    if (op_id == "layer") {
        DecoderConfig config;
        config.d = d;
        config.heads = h;
        config.k_objects = k;
        config.n_points = dims.n_p;
        config.h_ffn = 2 * d;
        DecoderLayerParams params =
            DecoderLayerParams::random(d, h, config.h_ffn, config.bias_mode, rng, 0.3);
        for (LayerNormParams* n :
             {&params.norm_cross, &params.norm_psa, &params.norm_gsa, &params.norm_ffn})
            *n = random_norm(d, rng);
        Dense2 f_o = randn(k, d, rng);
        Dense2 f_t = randn(dims.n_l, d, rng);
        Dense2 f_v = randn(dims.n_p, d, rng);
        Dense2 f_g = randn(k, d, rng);
        Dense3 bias(h, k, k);
        for (double& v : bias.data) v = rng.normal(0.0, 0.5);

        LayerCache cache;
        decoder_layer(f_o, f_t, f_v, bias, f_g, params, config, &cache);
        Dense2 dy(k, d, 1.0);
        Dense2 analytic = decoder_layer_backward(cache, params, dy);
        return compare_grad(f_o, analytic, eps, [&] {
            return sum_all(decoder_layer(f_o, f_t, f_v, bias, f_g, params, config));
        });
    }

    throw ValidationError("gradient_check: unknown op " + op_id);
}

// ---------------------------------------------------------------------------
// Invariant suite

namespace {

struct SuiteTimer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

void run_one(std::vector<CheckResult>& out, const std::string& name, double tol,
             const std::function<double()>& max_err) {
    SuiteTimer timer;
    CheckResult r;
    r.name = name;
    try {
        r.max_err = max_err();
        r.pass = r.max_err < tol;
    } catch (const std::exception&) {
        r.pass = false;
        r.max_err = std::numeric_limits<double>::infinity();
    }
    r.seconds = timer.seconds();
    out.push_back(r);
}

std::vector<std::size_t> random_permutation(std::size_t n, Rng& rng) {
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    for (std::size_t i = n; i-- > 1;) {
        const std::size_t j = rng.uniform_index(i + 1);
        std::swap(perm[i], perm[j]);
    }
    return perm;
}

Dense2 permute_rows(const Dense2& m, const std::vector<std::size_t>& perm) {
    Dense2 out(m.rows, m.cols);
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) out(i, j) = m(perm[i], j);
    return out;
}

}  // namespace

std::vector<CheckResult> run_check_suite(std::uint64_t seed) {
    std::vector<CheckResult> out;
    const std::size_t d = 8, h = 2, k = 5, n_p = 7, n_l = 3;

    run_one(out, "softmax_row_sums", 1e-9, [&] {
        Rng rng(seed);
        AttentionParams params = AttentionParams::random(d, h, rng, 0.5);
        Dense2 f_o = randn(k, d, rng);
        Dense3 bias(h, k, k);
        for (double& v : bias.data) v = rng.normal(0.0, 1.0);
        AttnCache ac;
        multihead_attention(f_o, f_o, &bias, params, spatial_scale(params), &ac);
        double worst = 0.0;
        for (std::size_t hh = 0; hh < h; ++hh)
            for (std::size_t i = 0; i < k; ++i) {
                double s = 0.0;
                for (std::size_t j = 0; j < k; ++j) s += ac.probs(hh, i, j);
                worst = std::max(worst, std::abs(s - 1.0));
            }
        return worst;
    });

    run_one(out, "softmax_shift_invariance", 1e-12, [&] {
        Rng rng(seed + 1);
        AttentionParams params = AttentionParams::random(d, h, rng, 0.5);
        Dense2 f_o = randn(k, d, rng);
        Dense3 bias(h, k, k);
        for (double& v : bias.data) v = rng.normal(0.0, 1.0);
        Dense3 shifted = bias;
        for (std::size_t hh = 0; hh < h; ++hh)
            for (std::size_t i = 0; i < k; ++i) {
                const double c = rng.uniform(-3.0, 3.0);
                for (std::size_t j = 0; j < k; ++j) shifted(hh, i, j) += c;
            }
        const double scale = spatial_scale(params);
        Dense2 a = multihead_attention(f_o, f_o, &bias, params, scale);
        Dense2 b = multihead_attention(f_o, f_o, &shifted, params, scale);
        return max_abs_diff(a, b);
    });

    run_one(out, "scalar_bias_inertness", 1e-12, [&] {
        Rng rng(seed + 2);
        AttentionParams params = AttentionParams::random(d, h, rng, 0.5);
        LayerNormParams norm = LayerNormParams::identity(d);
        Dense2 f_o = randn(k, d, rng);
        Dense2 f_v = randn(n_p, d, rng);
        Dense2 f_g = randn(k, d, rng);
        params.w_s = randn(d, h, rng, 1.0);
        Dense2 with_bias = gsa(f_o, f_v, f_g, params, norm, BiasMode::ScalarBias);
        params.w_s = Dense2(d, h);
        Dense2 without = gsa(f_o, f_v, f_g, params, norm, BiasMode::ScalarBias);
        return max_abs_diff(with_bias, without);
    });

    run_one(out, "psa_permutation_equivariance", 1e-12, [&] {
        Rng rng(seed + 3);
        AttentionParams params = AttentionParams::random(d, h, rng, 0.5);
        LayerNormParams norm = LayerNormParams::identity(d);
        Dense2 f_o = randn(k, d, rng);
        Dense3 bias(h, k, k);
        for (double& v : bias.data) v = rng.normal(0.0, 1.0);
        const std::vector<std::size_t> perm = random_permutation(k, rng);
        Dense2 f_perm = permute_rows(f_o, perm);
        Dense3 bias_perm(h, k, k);
        for (std::size_t hh = 0; hh < h; ++hh)
            for (std::size_t i = 0; i < k; ++i)
                for (std::size_t j = 0; j < k; ++j)
                    bias_perm(hh, i, j) = bias(hh, perm[i], perm[j]);
        Dense2 base = psa(f_o, bias, params, norm);
        Dense2 permuted = psa(f_perm, bias_perm, params, norm);
        return max_abs_diff(permuted, permute_rows(base, perm));
    });

    run_one(out, "gsa_key_order_invariance", 1e-12, [&] {
        Rng rng(seed + 4);
        AttentionParams params = AttentionParams::random(d, h, rng, 0.5);
        params.w_s = randn(d, d, rng, 0.5);
        LayerNormParams norm = LayerNormParams::identity(d);
        Dense2 f_o = randn(k, d, rng);
        Dense2 f_v = randn(n_p, d, rng);
        Dense2 f_g = randn(k, d, rng);
        const std::vector<std::size_t> perm = random_permutation(n_p, rng);
        Dense2 a = gsa(f_o, f_v, f_g, params, norm, BiasMode::QueryBias);
        Dense2 b = gsa(f_o, permute_rows(f_v, perm), f_g, params, norm, BiasMode::QueryBias);
        return max_abs_diff(a, b);
    });

    run_one(out, "zero_weight_layer_norm_only", 1e-12, [&] {
        Rng rng(seed + 5);
        DecoderConfig config;
        config.d = d;
        config.heads = h;
        config.h_ffn = 2 * d;
        DecoderLayerParams params = DecoderLayerParams::zeros(d, h, config.h_ffn, config.bias_mode);
        Dense2 f_o = randn(k, d, rng);
        Dense2 f_t = randn(n_l, d, rng);
        Dense2 f_v = randn(n_p, d, rng);
        Dense2 f_g = randn(k, d, rng);
        Dense3 bias(h, k, k);
        Dense2 got = decoder_layer(f_o, f_t, f_v, bias, f_g, params, config);
        Dense2 want = f_o;
        const LayerNormParams id = LayerNormParams::identity(d);
        for (int i = 0; i < 4; ++i) want = layer_norm(want, id);
        return all_finite(got) ? max_abs_diff(got, want)
                               : std::numeric_limits<double>::infinity();
    });

    const GradCheckDims dims;
    run_one(out, "grad_cross", 1e-4, [&] { return gradient_check("cross", dims, seed + 6, 1e-5); });
    run_one(out, "grad_psa", 1e-4, [&] { return gradient_check("psa", dims, seed + 7, 1e-5); });
    run_one(out, "grad_gsa", 1e-4, [&] { return gradient_check("gsa", dims, seed + 8, 1e-5); });
    run_one(out, "grad_layer", 1e-4, [&] { return gradient_check("layer", dims, seed + 9, 1e-5); });
    run_one(out, "grad_linear_probe", 1e-10,
            [&] { return gradient_check("cross", dims, seed + 10, 1e-3, true); });

    return out;
}

}  // namespace scenegraft
