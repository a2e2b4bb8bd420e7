#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "trlv/graph.hpp"
#include "trlv/rng.hpp"
#include "trlv/tensor.hpp"

namespace trlv {

struct PolicyConfig {
    int vocab = 32;
    int context_limit = 128;
    int width = 64;
    int n_layers = 2;
    int n_heads = 2;

    int head_dim() const { return width / n_heads; }

    void validate() const {
        if (vocab < 2 || context_limit < 1 || width < 1 || n_layers < 1 || n_heads < 1)
            throw std::invalid_argument("PolicyConfig: nonpositive dimension");
        if (width % n_heads != 0)
            throw std::invalid_argument("PolicyConfig: width must be divisible by n_heads");
    }
};

struct DecodingConfig {
    double temperature = 1.0;
    double top_p = 1.0;
    int max_response_len = 64;
    bool greedy = false;  // argmax decoding (temperature -> 0 limit)
    int eos_id = 29;
    bool record_raw_entropy = false;

    void validate() const {
        if (!(temperature > 0.0)) throw std::invalid_argument("DecodingConfig: temperature <= 0");
        if (!(top_p > 0.0 && top_p <= 1.0)) throw std::invalid_argument("DecodingConfig: top_p");
        if (max_response_len < 1) throw std::invalid_argument("DecodingConfig: max_response_len");
    }
};

/// One sampled response with sampling-time bookkeeping and verifier reward.
struct Trajectory {
    std::vector<int> prompt_ids;
    std::vector<int> response_ids;
    std::vector<double> old_logprobs;   // from the full temperature-scaled distribution
    std::vector<double> old_entropies;  // same distribution
    std::vector<double> raw_entropies;  // optional, temperature-1 distribution
    int reward = 0;

    int length() const { return static_cast<int>(response_ids.size()); }
};

template <class Real>
struct AttentionLayerParams {
    Tensor<Real> ln1_g, ln1_b;
    Tensor<Real> wq, bq, wk, bk, wv, bv, wo, bo;
    Tensor<Real> ln2_g, ln2_b;
    Tensor<Real> w1, b1, w2, b2;
};

/// Pre-norm decoder-only transformer parameters.
template <class Real>
struct PolicyParams {
    PolicyConfig cfg;
    Tensor<Real> tok_emb, pos_emb;
    std::vector<AttentionLayerParams<Real>> layers;
    Tensor<Real> lnf_g, lnf_b;
    Tensor<Real> w_out, b_out;

    static PolicyParams zeros(const PolicyConfig& cfg) {
        cfg.validate();
        PolicyParams p;
        p.cfg = cfg;
        const int d = cfg.width, dff = 4 * cfg.width;
        p.tok_emb = Tensor<Real>({cfg.vocab, d});
        p.pos_emb = Tensor<Real>({cfg.context_limit, d});
        p.layers.resize(cfg.n_layers);
        for (auto& l : p.layers) {
            l.ln1_g = Tensor<Real>({d});
            l.ln1_b = Tensor<Real>({d});
            l.wq = Tensor<Real>({d, d});
            l.bq = Tensor<Real>({d});
            l.wk = Tensor<Real>({d, d});
            l.bk = Tensor<Real>({d});
            l.wv = Tensor<Real>({d, d});
            l.bv = Tensor<Real>({d});
            l.wo = Tensor<Real>({d, d});
            l.bo = Tensor<Real>({d});
            l.ln2_g = Tensor<Real>({d});
            l.ln2_b = Tensor<Real>({d});
            l.w1 = Tensor<Real>({d, dff});
            l.b1 = Tensor<Real>({dff});
            l.w2 = Tensor<Real>({dff, d});
            l.b2 = Tensor<Real>({d});
        }
        p.lnf_g = Tensor<Real>({d});
        p.lnf_b = Tensor<Real>({d});
        p.w_out = Tensor<Real>({d, cfg.vocab});
        p.b_out = Tensor<Real>({cfg.vocab});
        return p;
    }

    /// Scaled-normal init (std 0.02) for weight matrices, unit layer-norm
    /// gains, zero biases.
    static PolicyParams init(const PolicyConfig& cfg, std::uint64_t seed) {
        PolicyParams p = zeros(cfg);
        Rng rng(Rng::mix(seed, 0x706f6c6963ULL));
        auto fill_normal = [&](Tensor<Real>& t) {
            for (Real& v : t.data) v = static_cast<Real>(0.02 * rng.normal());
        };
        auto fill_ones = [](Tensor<Real>& t) {
            for (Real& v : t.data) v = Real(1);
        };
        fill_normal(p.tok_emb);
        fill_normal(p.pos_emb);
        for (auto& l : p.layers) {
            fill_ones(l.ln1_g);
            fill_normal(l.wq);
            fill_normal(l.wk);
            fill_normal(l.wv);
            fill_normal(l.wo);
            fill_ones(l.ln2_g);
            fill_normal(l.w1);
            fill_normal(l.w2);
        }
        fill_ones(p.lnf_g);
        fill_normal(p.w_out);
        return p;
    }

    /// Visits every tensor in canonical (checkpoint and gradient) order.
    template <class F>
    void for_each_tensor(F&& f) {
        f("tok_emb", tok_emb);
        f("pos_emb", pos_emb);
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const std::string pre = "layers." + std::to_string(i) + ".";
            auto& l = layers[i];
            f(pre + "ln1_g", l.ln1_g);
            f(pre + "ln1_b", l.ln1_b);
            f(pre + "wq", l.wq);
            f(pre + "bq", l.bq);
            f(pre + "wk", l.wk);
            f(pre + "bk", l.bk);
            f(pre + "wv", l.wv);
            f(pre + "bv", l.bv);
            f(pre + "wo", l.wo);
            f(pre + "bo", l.bo);
            f(pre + "ln2_g", l.ln2_g);
            f(pre + "ln2_b", l.ln2_b);
            f(pre + "w1", l.w1);
            f(pre + "b1", l.b1);
            f(pre + "w2", l.w2);
            f(pre + "b2", l.b2);
        }
        f("lnf_g", lnf_g);
        f("lnf_b", lnf_b);
        f("w_out", w_out);
        f("b_out", b_out);
    }

    template <class F>
    void for_each_tensor(F&& f) const {
        const_cast<PolicyParams*>(this)->for_each_tensor(
            [&](const std::string& n, Tensor<Real>& t) { f(n, static_cast<const Tensor<Real>&>(t)); });
    }

    std::size_t param_count() const {
        std::size_t n = 0;
        for_each_tensor([&](const std::string&, const Tensor<Real>& t) { n += t.numel(); });
        return n;
    }

    std::vector<Tensor<Real>> tensors() const {
        std::vector<Tensor<Real>> out;
        for_each_tensor([&](const std::string&, const Tensor<Real>& t) { out.push_back(t); });
        return out;
    }

    static PolicyParams from_tensors(const PolicyConfig& cfg, const std::vector<Tensor<Real>>& ts) {
        PolicyParams p = zeros(cfg);
        std::size_t i = 0;
        p.for_each_tensor([&](const std::string&, Tensor<Real>& t) {
            if (i >= ts.size() || ts[i].shape != t.shape)
                throw std::invalid_argument("from_tensors: tensor list mismatch");
            t = ts[i++];
        });
        if (i != ts.size()) throw std::invalid_argument("from_tensors: extra tensors");
        return p;
    }

    bool shape_audit() const {
        bool ok = true;
        for_each_tensor([&](const std::string&, const Tensor<Real>& t) {
            if (!t.all_finite()) ok = false;
        });
        return ok;
    }
};

namespace detail {

template <class Real>
inline void row_layernorm(const Real* x, int n, const Real* gain, const Real* bias, Real* out) {
    Real mean = 0;
    for (int j = 0; j < n; ++j) mean += x[j];
    mean /= Real(n);
    Real var = 0;
    for (int j = 0; j < n; ++j) {
        const Real c = x[j] - mean;
        var += c * c;
    }
    var /= Real(n);
    const Real inv_std = Real(1) / std::sqrt(var + Real(1e-5));
    for (int j = 0; j < n; ++j) out[j] = gain[j] * ((x[j] - mean) * inv_std) + bias[j];
}

/// out[j] = sum_p x[p] * W[p][j] + b[j], accumulated in ascending p to match
/// the graph matmul summation order exactly.
template <class Real>
inline void row_affine(const Real* x, int k, const Tensor<Real>& w, const Tensor<Real>& b,
                       Real* out) {
    const int n = w.cols();
    for (int j = 0; j < n; ++j) out[j] = Real(0);
    for (int p = 0; p < k; ++p) {
        const Real xp = x[p];
        if (xp == Real(0)) continue;
        const Real* wrow = &w.data[static_cast<std::size_t>(p) * n];
        for (int j = 0; j < n; ++j) out[j] += xp * wrow[j];
    }
    for (int j = 0; j < n; ++j) out[j] += b.data[j];
}

}  // namespace detail

/// Incremental causal decoder with per-layer key/value history. Arithmetic
/// matches the autograd forward bit for bit, so sampling-time logprobs agree
/// with graph re-scoring.
template <class Real>
class InferenceRun {
public:
    explicit InferenceRun(const PolicyParams<Real>& params)
        : p_(params), keys_(params.cfg.n_layers), vals_(params.cfg.n_layers) {}

    int position() const { return pos_; }

    /// Appends one token; returns next-token logits (length V).
    std::vector<Real> push_token(int token_id) {
        const PolicyConfig& c = p_.cfg;
        if (token_id < 0 || token_id >= c.vocab)
            throw std::invalid_argument("push_token: token id out of vocab");
        if (pos_ >= c.context_limit)
            throw std::invalid_argument("push_token: context limit exceeded");
        const int d = c.width, dh = c.head_dim(), dff = 4 * d;
        std::vector<Real> x(d), tmp(d), q(d), o(d), ff(dff);
        for (int j = 0; j < d; ++j)
            x[j] = p_.tok_emb.at(token_id, j) + p_.pos_emb.at(pos_, j);

        const Real att_scale = Real(1) / std::sqrt(Real(dh));
        for (int l = 0; l < c.n_layers; ++l) {
            const auto& lp = p_.layers[l];
            detail::row_layernorm(x.data(), d, lp.ln1_g.data.data(), lp.ln1_b.data.data(),
                                  tmp.data());
            detail::row_affine(tmp.data(), d, lp.wq, lp.bq, q.data());
            keys_[l].resize(static_cast<std::size_t>(pos_ + 1) * d);
            vals_[l].resize(static_cast<std::size_t>(pos_ + 1) * d);
            detail::row_affine(tmp.data(), d, lp.wk, lp.bk, &keys_[l][static_cast<std::size_t>(pos_) * d]);
            detail::row_affine(tmp.data(), d, lp.wv, lp.bv, &vals_[l][static_cast<std::size_t>(pos_) * d]);

            // per-head causal attention over the stored history
            std::vector<Real> scores(pos_ + 1), headed(d);
            for (int h = 0; h < c.n_heads; ++h) {
                const int off = h * dh;
                for (int t = 0; t <= pos_; ++t) {
                    Real s = 0;
                    const Real* kr = &keys_[l][static_cast<std::size_t>(t) * d + off];
                    for (int j = 0; j < dh; ++j) s += q[off + j] * kr[j];
                    scores[t] = s * att_scale;
                }
                Real mx = scores[0];
                for (int t = 1; t <= pos_; ++t) mx = std::max(mx, scores[t]);
                Real sum = 0;
                for (int t = 0; t <= pos_; ++t) {
                    scores[t] = std::exp(scores[t] - mx);
                    sum += scores[t];
                }
                for (int j = 0; j < dh; ++j) headed[off + j] = Real(0);
                for (int t = 0; t <= pos_; ++t) {
                    const Real w = scores[t] / sum;
                    const Real* vr = &vals_[l][static_cast<std::size_t>(t) * d + off];
                    for (int j = 0; j < dh; ++j) headed[off + j] += w * vr[j];
                }
            }
            detail::row_affine(headed.data(), d, lp.wo, lp.bo, o.data());
            for (int j = 0; j < d; ++j) x[j] += o[j];

            detail::row_layernorm(x.data(), d, lp.ln2_g.data.data(), lp.ln2_b.data.data(),
                                  tmp.data());
            detail::row_affine(tmp.data(), d, lp.w1, lp.b1, ff.data());
            for (int j = 0; j < dff; ++j) ff[j] = Graph<Real>::gelu_fwd(ff[j]);
            detail::row_affine(ff.data(), dff, lp.w2, lp.b2, tmp.data());
            for (int j = 0; j < d; ++j) x[j] += tmp[j];
        }
        detail::row_layernorm(x.data(), d, p_.lnf_g.data.data(), p_.lnf_b.data.data(), tmp.data());
        std::vector<Real> logits(c.vocab);
        detail::row_affine(tmp.data(), d, p_.w_out, p_.b_out, logits.data());
        ++pos_;
        return logits;
    }

private:
    const PolicyParams<Real>& p_;
    std::vector<std::vector<Real>> keys_, vals_;  // per layer, rows of width d
    int pos_ = 0;
};

/// Per-position next-token logits for a full sequence.
template <class Real>
std::vector<std::vector<Real>> policy_forward(const PolicyParams<Real>& params,
                                              const std::vector<int>& token_ids) {
    if (token_ids.empty()) throw std::invalid_argument("policy_forward: empty input");
    if (static_cast<int>(token_ids.size()) > params.cfg.context_limit)
        throw std::invalid_argument("policy_forward: input exceeds context limit");
    InferenceRun<Real> run(params);
    std::vector<std::vector<Real>> out;
    out.reserve(token_ids.size());
    for (int id : token_ids) out.push_back(run.push_token(id));
    return out;
}

/// Nucleus truncation: smallest prefix of probability-sorted tokens with
/// cumulative mass >= top_p, ties broken by (prob desc, id asc).
template <class Real>
std::vector<std::pair<int, Real>> nucleus_truncate(const std::vector<Real>& probs, double top_p) {
    std::vector<int> order(probs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return probs[a] > probs[b]; });
    Real cum = 0;
    std::vector<std::pair<int, Real>> kept;
    for (int id : order) {
        kept.emplace_back(id, probs[id]);
        cum += probs[id];
        if (static_cast<double>(cum) >= top_p) break;
    }
    Real total = 0;
    for (auto& [id, p] : kept) total += p;
    for (auto& [id, p] : kept) p /= total;
    return kept;
}

template <class Real>
Trajectory sample_trajectory(const PolicyParams<Real>& params, const std::vector<int>& prompt_ids,
                             const DecodingConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    if (prompt_ids.empty()) throw std::invalid_argument("sample_trajectory: empty prompt");
    if (static_cast<int>(prompt_ids.size()) + cfg.max_response_len > params.cfg.context_limit)
        throw std::invalid_argument("sample_trajectory: prompt + response exceeds context limit");

    InferenceRun<Real> run(params);
    std::vector<Real> logits;
    for (int id : prompt_ids) logits = run.push_token(id);

    Rng rng(Rng::mix(seed, 0x73616d70ULL));
    Trajectory traj;
    traj.prompt_ids = prompt_ids;
    const Real temp = static_cast<Real>(cfg.temperature);
    while (traj.length() < cfg.max_response_len) {
        const std::vector<Real> lp = log_softmax(logits, temp);
        std::vector<Real> probs(lp.size());
        for (std::size_t i = 0; i < lp.size(); ++i) probs[i] = std::exp(lp[i]);

        int chosen;
        if (cfg.greedy) {
            chosen = 0;
            for (std::size_t i = 1; i < probs.size(); ++i)
                if (probs[i] > probs[chosen]) chosen = static_cast<int>(i);
        } else {
            const auto kept = nucleus_truncate(probs, cfg.top_p);
            const double u = rng.uniform();
            double cum = 0;
            chosen = kept.back().first;
            for (const auto& [id, p] : kept) {
                cum += static_cast<double>(p);
                if (u < cum) {
                    chosen = id;
                    break;
                }
            }
        }
        traj.response_ids.push_back(chosen);
        traj.old_logprobs.push_back(static_cast<double>(lp[chosen]));
        traj.old_entropies.push_back(static_cast<double>(categorical_entropy(probs)));
        if (cfg.record_raw_entropy)
            traj.raw_entropies.push_back(
                static_cast<double>(categorical_entropy(softmax(logits, Real(1)))));
        if (chosen == cfg.eos_id) break;
        logits = run.push_token(chosen);
    }
    return traj;
}

/// Per-token (logprob, entropy) of the trajectory response under the given
/// params and sampling temperature. Matches stored values bit for bit when
/// params are unchanged since sampling.
template <class Real>
std::pair<std::vector<double>, std::vector<double>> token_logprobs_and_entropy(
    const PolicyParams<Real>& params, const Trajectory& traj, double temperature) {
    if (traj.response_ids.empty())
        throw std::invalid_argument("token_logprobs_and_entropy: empty response");
    InferenceRun<Real> run(params);
    std::vector<Real> logits;
    for (int id : traj.prompt_ids) logits = run.push_token(id);
    std::vector<double> lps, ents;
    const Real temp = static_cast<Real>(temperature);
    for (std::size_t t = 0; t < traj.response_ids.size(); ++t) {
        const std::vector<Real> lp = log_softmax(logits, temp);
        std::vector<Real> probs(lp.size());
        for (std::size_t i = 0; i < lp.size(); ++i) probs[i] = std::exp(lp[i]);
        const int tok = traj.response_ids[t];
        if (tok < 0 || tok >= params.cfg.vocab)
            throw std::invalid_argument("token_logprobs_and_entropy: token id out of vocab");
        lps.push_back(static_cast<double>(lp[tok]));
        ents.push_back(static_cast<double>(categorical_entropy(probs)));
        if (t + 1 < traj.response_ids.size()) logits = run.push_token(tok);
    }
    return {lps, ents};
}

/// Registers all policy tensors as graph parameter leaves (canonical order).
template <class Real>
std::vector<typename Graph<Real>::Id> register_policy_params(Graph<Real>& g,
                                                             const PolicyParams<Real>& params) {
    std::vector<typename Graph<Real>::Id> ids;
    params.for_each_tensor(
        [&](const std::string&, const Tensor<Real>& t) { ids.push_back(g.param(t)); });
    return ids;
}

/// Builds the differentiable forward pass and returns the node holding
/// log pi(targets[i] | ...) for each requested row of the final hidden state.
/// `param_nodes` must follow canonical tensor order for `cfg`.
template <class Real>
typename Graph<Real>::Id policy_logprobs_node(Graph<Real>& g,
                                              const std::vector<typename Graph<Real>::Id>& param_nodes,
                                              const PolicyConfig& cfg,
                                              const std::vector<int>& input_ids,
                                              const std::vector<int>& rows,
                                              const std::vector<int>& targets, Real inv_temp) {
    using Id = typename Graph<Real>::Id;
    const int dh = cfg.head_dim();
    std::size_t k = 0;
    auto next = [&]() { return param_nodes.at(k++); };
    const Id tok_emb = next(), pos_emb = next();
    Id x = g.embed(tok_emb, pos_emb, input_ids);
    const Real att_scale = Real(1) / std::sqrt(Real(dh));
    for (int l = 0; l < cfg.n_layers; ++l) {
        const Id ln1_g = next(), ln1_b = next();
        const Id wq = next(), bq = next(), wk = next(), bk = next(), wv = next(), bv = next();
        const Id wo = next(), bo = next();
        const Id ln2_g = next(), ln2_b = next();
        const Id w1 = next(), b1 = next(), w2 = next(), b2 = next();

        Id a = g.layer_norm(x, ln1_g, ln1_b);
        Id q = g.add_bias(g.matmul(a, wq), bq);
        Id kk = g.add_bias(g.matmul(a, wk), bk);
        Id v = g.add_bias(g.matmul(a, wv), bv);
        std::vector<Id> heads;
        for (int h = 0; h < cfg.n_heads; ++h) {
            Id qh = g.slice_cols(q, h * dh, dh);
            Id kh = g.slice_cols(kk, h * dh, dh);
            Id vh = g.slice_cols(v, h * dh, dh);
            Id att = g.causal_softmax(g.scale(g.matmul_nt(qh, kh), att_scale));
            heads.push_back(g.matmul(att, vh));
        }
        Id o = g.add_bias(g.matmul(g.concat_cols(heads), wo), bo);
        x = g.add(x, o);

        Id f = g.layer_norm(x, ln2_g, ln2_b);
        f = g.gelu(g.add_bias(g.matmul(f, w1), b1));
        f = g.add_bias(g.matmul(f, w2), b2);
        x = g.add(x, f);
    }
    const Id lnf_g = next(), lnf_b = next(), w_out = next(), b_out = next();
    x = g.layer_norm(x, lnf_g, lnf_b);
    Id sel = g.rows_subset(x, rows);
    Id logits = g.add_bias(g.matmul(sel, w_out), b_out);
    return g.pick_log_softmax(logits, targets, inv_temp);
}

// ---------------------------------------------------------------------------
// Checkpoint format: little-endian, magic "TRLV", version u32, then per
// tensor: name length u32, name bytes, rank u32, dims u32..., f32 payload.

namespace detail {

inline void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void write_f32(std::ostream& os, float v) {
    std::uint32_t u;
    std::memcpy(&u, &v, 4);
    write_u32(os, u);
}

inline float read_f32(std::istream& is) {
    const std::uint32_t u = read_u32(is);
    float v;
    std::memcpy(&v, &u, 4);
    return v;
}

}  // namespace detail

inline constexpr std::uint32_t kCheckpointVersion = 1;

template <class Real>
void save_checkpoint(const PolicyParams<Real>& params, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("checkpoint: cannot open for write: " + path);
    os.write("TRLV", 4);
    detail::write_u32(os, kCheckpointVersion);
    auto write_tensor = [&](const std::string& name, const std::vector<int>& shape,
                            const auto& data) {
        detail::write_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        detail::write_u32(os, static_cast<std::uint32_t>(shape.size()));
        for (int d : shape) detail::write_u32(os, static_cast<std::uint32_t>(d));
        for (auto v : data) detail::write_f32(os, static_cast<float>(v));
    };
    const PolicyConfig& c = params.cfg;
    write_tensor("meta", {5},
                 std::vector<float>{static_cast<float>(c.vocab), static_cast<float>(c.context_limit),
                                    static_cast<float>(c.width), static_cast<float>(c.n_layers),
                                    static_cast<float>(c.n_heads)});
    params.for_each_tensor([&](const std::string& name, const Tensor<Real>& t) {
        write_tensor(name, t.shape, t.data);
    });
    if (!os) throw std::runtime_error("checkpoint: write failed: " + path);
}

template <class Real>
PolicyParams<Real> load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "TRLV", 4) != 0)
        throw std::runtime_error("checkpoint: bad magic: " + path);
    const std::uint32_t version = detail::read_u32(is);
    if (version != kCheckpointVersion)
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));

    std::map<std::string, std::pair<std::vector<int>, std::vector<float>>> records;
    while (true) {
        is.peek();
        if (is.eof()) break;
        const std::uint32_t name_len = detail::read_u32(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        const std::uint32_t rank = detail::read_u32(is);
        std::vector<int> shape(rank);
        std::size_t numel = 1;
        for (std::uint32_t i = 0; i < rank; ++i) {
            shape[i] = static_cast<int>(detail::read_u32(is));
            numel *= static_cast<std::size_t>(shape[i]);
        }
        std::vector<float> data(numel);
        for (float& v : data) v = detail::read_f32(is);
        records[name] = {std::move(shape), std::move(data)};
    }
    auto meta_it = records.find("meta");
    if (meta_it == records.end() || meta_it->second.second.size() != 5)
        throw std::runtime_error("checkpoint: missing meta record");
    const auto& m = meta_it->second.second;
    PolicyConfig cfg;
    cfg.vocab = static_cast<int>(m[0]);
    cfg.context_limit = static_cast<int>(m[1]);
    cfg.width = static_cast<int>(m[2]);
    cfg.n_layers = static_cast<int>(m[3]);
    cfg.n_heads = static_cast<int>(m[4]);

    PolicyParams<Real> p = PolicyParams<Real>::zeros(cfg);
    p.for_each_tensor([&](const std::string& name, Tensor<Real>& t) {
        auto it = records.find(name);
        if (it == records.end())
            throw std::runtime_error("checkpoint: missing tensor " + name);
        if (it->second.first != t.shape)
            throw std::runtime_error("checkpoint: shape mismatch for " + name);
        for (std::size_t i = 0; i < t.data.size(); ++i)
            t.data[i] = static_cast<Real>(it->second.second[i]);
    });
    return p;
}

}  // namespace trlv
