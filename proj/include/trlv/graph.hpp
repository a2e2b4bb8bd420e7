#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "trlv/tensor.hpp"

namespace trlv {

// Reverse-mode tape. Ops evaluate eagerly on construction; backward walks
// the tape once in reverse. One graph per trajectory, single-threaded.
template <class Real>
class Graph {
public:
    using Id = std::size_t;

    enum class Op {
        Param,
        Constant,
        Embed,           // gather token rows + positional rows
        LayerNorm,       // row-wise, learnable gain/bias
        MatMul,          // [m,k] x [k,n]
        MatMulNT,        // [m,k] x [n,k]^T
        Add,
        AddBias,         // [m,n] + [n] broadcast over rows
        Mul,             // elementwise
        Scale,
        Gelu,            // tanh approximation
        CausalSoftmax,   // row t normalized over columns 0..t
        SliceCols,
        ConcatCols,
        RowsSubset,
        PickLogSoftmax,  // per-row log-softmax evaluated at one column
        SoftmaxEntropy,  // per-row entropy of softmax(logits)
        Sum,
        Surrogate,       // clipped PPO surrogate, credit-weighted sum over tokens
    };

    struct Node {
        Op op;
        std::vector<Id> inputs;
        Tensor<Real> out;
        std::vector<int> ints;    // token ids / row indices / slice bounds
        std::vector<Real> reals;  // scalars: scale factor, surrogate config...
        Tensor<Real> cache;       // op-specific forward cache (softmax probs etc.)
    };

    Id param(Tensor<Real> t) {
        Id id = push(Op::Param, {}, std::move(t));
        param_ids_.push_back(id);
        return id;
    }

    Id constant(Tensor<Real> t) { return push(Op::Constant, {}, std::move(t)); }

    const std::vector<Id>& params() const { return param_ids_; }
    const Tensor<Real>& value(Id id) const { return nodes_.at(id).out; }
    std::size_t size() const { return nodes_.size(); }

    /// out[t] = tok_emb[ids[t]] + pos_emb[t]
    Id embed(Id tok_emb, Id pos_emb, std::vector<int> ids) {
        const auto& te = val(tok_emb);
        const auto& pe = val(pos_emb);
        const int d = te.cols();
        const int n = static_cast<int>(ids.size());
        if (n > pe.rows()) throw std::invalid_argument("embed: sequence exceeds context limit");
        Tensor<Real> out({n, d});
        for (int t = 0; t < n; ++t) {
            const int id = ids[t];
            if (id < 0 || id >= te.rows()) throw std::invalid_argument("embed: token id out of vocab");
            for (int j = 0; j < d; ++j) out.at(t, j) = te.at(id, j) + pe.at(t, j);
        }
        Node node{Op::Embed, {tok_emb, pos_emb}, std::move(out), std::move(ids), {}, {}};
        return push_node(std::move(node));
    }

    Id layer_norm(Id x, Id gain, Id bias, Real eps = Real(1e-5)) {
        const auto& xv = val(x);
        const int m = xv.rows(), n = xv.cols();
        Tensor<Real> out({m, n});
        Tensor<Real> cache({m, n + 1});  // xhat per row + inv_std in last column
        for (int i = 0; i < m; ++i) {
            Real mean = 0;
            for (int j = 0; j < n; ++j) mean += xv.at(i, j);
            mean /= Real(n);
            Real var = 0;
            for (int j = 0; j < n; ++j) {
                const Real c = xv.at(i, j) - mean;
                var += c * c;
            }
            var /= Real(n);
            const Real inv_std = Real(1) / std::sqrt(var + eps);
            cache.at(i, n) = inv_std;
            for (int j = 0; j < n; ++j) {
                const Real xhat = (xv.at(i, j) - mean) * inv_std;
                cache.at(i, j) = xhat;
                out.at(i, j) = val(gain).data[j] * xhat + val(bias).data[j];
            }
        }
        Node node{Op::LayerNorm, {x, gain, bias}, std::move(out), {}, {eps}, std::move(cache)};
        return push_node(std::move(node));
    }

    Id matmul(Id a, Id b) {
        const auto& av = val(a);
        const auto& bv = val(b);
        if (av.cols() != bv.rows()) throw std::invalid_argument("matmul: inner dim mismatch");
        const int m = av.rows(), k = av.cols(), n = bv.cols();
        Tensor<Real> out({m, n});
        for (int i = 0; i < m; ++i)
            for (int p = 0; p < k; ++p) {
                const Real aip = av.at(i, p);
                if (aip == Real(0)) continue;
                const Real* brow = &bv.data[static_cast<std::size_t>(p) * n];
                Real* crow = &out.data[static_cast<std::size_t>(i) * n];
                for (int j = 0; j < n; ++j) crow[j] += aip * brow[j];
            }
        return push(Op::MatMul, {a, b}, std::move(out));
    }

    /// C = A * B^T with A [m,k], B [n,k].
    Id matmul_nt(Id a, Id b) {
        const auto& av = val(a);
        const auto& bv = val(b);
        if (av.cols() != bv.cols()) throw std::invalid_argument("matmul_nt: inner dim mismatch");
        const int m = av.rows(), k = av.cols(), n = bv.rows();
        Tensor<Real> out({m, n});
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) {
                Real s = 0;
                const Real* arow = &av.data[static_cast<std::size_t>(i) * k];
                const Real* brow = &bv.data[static_cast<std::size_t>(j) * k];
                for (int p = 0; p < k; ++p) s += arow[p] * brow[p];
                out.at(i, j) = s;
            }
        return push(Op::MatMulNT, {a, b}, std::move(out));
    }

    Id add(Id a, Id b) {
        const auto& av = val(a);
        const auto& bv = val(b);
        if (!same_shape(av, bv)) throw std::invalid_argument("add: shape mismatch");
        Tensor<Real> out = av;
        for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += bv.data[i];
        return push(Op::Add, {a, b}, std::move(out));
    }

    Id add_bias(Id a, Id bias) {
        const auto& av = val(a);
        const auto& bv = val(bias);
        if (static_cast<int>(bv.numel()) != av.cols())
            throw std::invalid_argument("add_bias: bias length mismatch");
        Tensor<Real> out = av;
        for (int i = 0; i < av.rows(); ++i)
            for (int j = 0; j < av.cols(); ++j) out.at(i, j) += bv.data[j];
        return push(Op::AddBias, {a, bias}, std::move(out));
    }

    Id mul(Id a, Id b) {
        const auto& av = val(a);
        const auto& bv = val(b);
        if (!same_shape(av, bv)) throw std::invalid_argument("mul: shape mismatch");
        Tensor<Real> out = av;
        for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= bv.data[i];
        return push(Op::Mul, {a, b}, std::move(out));
    }

    Id scale(Id a, Real c) {
        Tensor<Real> out = val(a);
        for (Real& v : out.data) v *= c;
        Node node{Op::Scale, {a}, std::move(out), {}, {c}, {}};
        return push_node(std::move(node));
    }

    Id gelu(Id a) {
        Tensor<Real> out = val(a);
        for (Real& v : out.data) v = gelu_fwd(v);
        return push(Op::Gelu, {a}, std::move(out));
    }

    /// Row t is softmax over columns 0..t; later columns are zero.
    Id causal_softmax(Id scores) {
        const auto& sv = val(scores);
        const int m = sv.rows();
        if (sv.cols() != m) throw std::invalid_argument("causal_softmax: expects square scores");
        Tensor<Real> out({m, m});
        for (int i = 0; i < m; ++i) {
            Real mx = sv.at(i, 0);
            for (int j = 1; j <= i; ++j) mx = std::max(mx, sv.at(i, j));
            Real sum = 0;
            for (int j = 0; j <= i; ++j) {
                out.at(i, j) = std::exp(sv.at(i, j) - mx);
                sum += out.at(i, j);
            }
            for (int j = 0; j <= i; ++j) out.at(i, j) /= sum;
        }
        return push(Op::CausalSoftmax, {scores}, std::move(out));
    }

    Id slice_cols(Id a, int c0, int len) {
        const auto& av = val(a);
        if (c0 < 0 || len <= 0 || c0 + len > av.cols())
            throw std::invalid_argument("slice_cols: bounds");
        Tensor<Real> out({av.rows(), len});
        for (int i = 0; i < av.rows(); ++i)
            for (int j = 0; j < len; ++j) out.at(i, j) = av.at(i, c0 + j);
        Node node{Op::SliceCols, {a}, std::move(out), {c0, len}, {}, {}};
        return push_node(std::move(node));
    }

    Id concat_cols(const std::vector<Id>& parts) {
        if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
        const int m = val(parts[0]).rows();
        int total = 0;
        for (Id p : parts) {
            if (val(p).rows() != m) throw std::invalid_argument("concat_cols: row mismatch");
            total += val(p).cols();
        }
        Tensor<Real> out({m, total});
        int off = 0;
        for (Id p : parts) {
            const auto& pv = val(p);
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < pv.cols(); ++j) out.at(i, off + j) = pv.at(i, j);
            off += pv.cols();
        }
        return push(Op::ConcatCols, parts, std::move(out));
    }

    Id rows_subset(Id a, std::vector<int> rows) {
        const auto& av = val(a);
        Tensor<Real> out({static_cast<int>(rows.size()), av.cols()});
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i] < 0 || rows[i] >= av.rows())
                throw std::invalid_argument("rows_subset: row index out of range");
            for (int j = 0; j < av.cols(); ++j) out.at(static_cast<int>(i), j) = av.at(rows[i], j);
        }
        Node node{Op::RowsSubset, {a}, std::move(out), std::move(rows), {}, {}};
        return push_node(std::move(node));
    }

    /// out[i] = log_softmax(logits[i] * inv_temp)[ids[i]]
    Id pick_log_softmax(Id logits, std::vector<int> ids, Real inv_temp = Real(1)) {
        const auto& lv = val(logits);
        const int m = lv.rows(), n = lv.cols();
        if (static_cast<int>(ids.size()) != m)
            throw std::invalid_argument("pick_log_softmax: one id per row required");
        Tensor<Real> out({m});
        Tensor<Real> cache({m, n});  // softmax probs per row
        for (int i = 0; i < m; ++i) {
            if (ids[i] < 0 || ids[i] >= n) throw std::invalid_argument("pick_log_softmax: id range");
            Real mx = lv.at(i, 0);
            for (int j = 1; j < n; ++j) mx = std::max(mx, lv.at(i, j));
            Real sum = 0;
            for (int j = 0; j < n; ++j) {
                cache.at(i, j) = std::exp((lv.at(i, j) - mx) * inv_temp);
                sum += cache.at(i, j);
            }
            for (int j = 0; j < n; ++j) cache.at(i, j) /= sum;
            out.data[i] = (lv.at(i, ids[i]) - mx) * inv_temp - std::log(sum);
        }
        Node node{Op::PickLogSoftmax, {logits}, std::move(out), std::move(ids), {inv_temp},
                  std::move(cache)};
        return push_node(std::move(node));
    }

    /// out[i] = H(softmax(logits[i] * inv_temp))
    Id softmax_entropy(Id logits, Real inv_temp = Real(1)) {
        const auto& lv = val(logits);
        const int m = lv.rows(), n = lv.cols();
        Tensor<Real> out({m});
        Tensor<Real> cache({m, n});
        for (int i = 0; i < m; ++i) {
            Real mx = lv.at(i, 0);
            for (int j = 1; j < n; ++j) mx = std::max(mx, lv.at(i, j));
            Real sum = 0;
            for (int j = 0; j < n; ++j) {
                cache.at(i, j) = std::exp((lv.at(i, j) - mx) * inv_temp);
                sum += cache.at(i, j);
            }
            Real h = 0;
            for (int j = 0; j < n; ++j) {
                cache.at(i, j) /= sum;
                if (cache.at(i, j) > Real(0)) h -= cache.at(i, j) * std::log(cache.at(i, j));
            }
            out.data[i] = h;
        }
        Node node{Op::SoftmaxEntropy, {logits}, std::move(out), {}, {inv_temp}, std::move(cache)};
        return push_node(std::move(node));
    }

    Id sum(Id a) {
        Real s = 0;
        for (Real v : val(a).data) s += v;
        return push(Op::Sum, {a}, Tensor<Real>({1}, {s}));
    }

    /// Credit-weighted clipped surrogate over one trajectory:
    ///   out = (1/|y|) * sum_t f_t * min(w_t*A, clip(w_t, 1-el, 1+eh)*A)
    /// with w_t = exp(logprob_t - old_logprob_t).
    Id surrogate(Id logprobs, const std::vector<Real>& old_logprobs,
                 const std::vector<Real>& credits, Real advantage, Real eps_low, Real eps_high) {
        const auto& lp = val(logprobs);
        const std::size_t T = lp.numel();
        if (old_logprobs.size() != T || credits.size() != T)
            throw std::invalid_argument("surrogate: per-token list length mismatch");
        const Real inv_len = Real(1) / Real(T);
        Real obj = 0;
        for (std::size_t t = 0; t < T; ++t) {
            const Real w = std::exp(lp.data[t] - old_logprobs[t]);
            const Real wc = std::clamp(w, Real(1) - eps_low, Real(1) + eps_high);
            obj += credits[t] * std::min(w * advantage, wc * advantage);
        }
        Node node{Op::Surrogate, {logprobs}, Tensor<Real>({1}, {obj * inv_len}), {}, {}, {}};
        node.reals = {advantage, eps_low, eps_high, inv_len};
        node.reals.insert(node.reals.end(), old_logprobs.begin(), old_logprobs.end());
        node.reals.insert(node.reals.end(), credits.begin(), credits.end());
        return push_node(std::move(node));
    }

    /// Reverse pass. Returns one gradient tensor per parameter leaf, in
    /// registration order. Deterministic: single fixed reverse sweep.
    std::vector<Tensor<Real>> backward(Id out, const Tensor<Real>& seed) const {
        if (!same_shape(seed, val(out)))
            throw std::invalid_argument("backward: seed shape does not match output");
        std::vector<Tensor<Real>> grads(nodes_.size());
        grads[out] = seed;
        for (std::size_t idx = nodes_.size(); idx-- > 0;) {
            if (grads[idx].data.empty()) continue;
            backward_node(idx, grads);
        }
        std::vector<Tensor<Real>> result;
        result.reserve(param_ids_.size());
        for (Id p : param_ids_) {
            if (grads[p].data.empty()) grads[p] = Tensor<Real>(val(p).shape);
            result.push_back(std::move(grads[p]));
        }
        return result;
    }

    static Real gelu_fwd(Real x) {
        const Real c = Real(0.7978845608028653);  // sqrt(2/pi)
        const Real a = Real(0.044715);
        return Real(0.5) * x * (Real(1) + std::tanh(c * (x + a * x * x * x)));
    }

    static Real gelu_bwd(Real x) {
        const Real c = Real(0.7978845608028653);
        const Real a = Real(0.044715);
        const Real u = c * (x + a * x * x * x);
        const Real th = std::tanh(u);
        return Real(0.5) * (Real(1) + th) +
               Real(0.5) * x * (Real(1) - th * th) * c * (Real(1) + Real(3) * a * x * x);
    }

private:
    std::vector<Node> nodes_;
    std::vector<Id> param_ids_;

    const Tensor<Real>& val(Id id) const { return nodes_.at(id).out; }

    Id push(Op op, std::vector<Id> inputs, Tensor<Real> out) {
        return push_node(Node{op, std::move(inputs), std::move(out), {}, {}, {}});
    }

    Id push_node(Node node) {
        if (!node.out.all_finite())
            throw std::invalid_argument("graph op produced non-finite output");
        nodes_.push_back(std::move(node));
        return nodes_.size() - 1;
    }

    static void accum(Tensor<Real>& g, const std::vector<int>& shape) {
        if (g.data.empty()) g = Tensor<Real>(shape);
    }

    void backward_node(std::size_t idx, std::vector<Tensor<Real>>& grads) const {
        const Node& nd = nodes_[idx];
        const Tensor<Real>& gout = grads[idx];
        auto gin = [&](std::size_t k) -> Tensor<Real>& {
            Id in = nd.inputs[k];
            accum(grads[in], val(in).shape);
            return grads[in];
        };
        switch (nd.op) {
        case Op::Param:
        case Op::Constant:
            break;
        case Op::Embed: {
            auto& gt = gin(0);
            auto& gp = gin(1);
            const int d = gt.cols();
            for (std::size_t t = 0; t < nd.ints.size(); ++t) {
                const int id = nd.ints[t];
                for (int j = 0; j < d; ++j) {
                    gt.at(id, j) += gout.at(static_cast<int>(t), j);
                    gp.at(static_cast<int>(t), j) += gout.at(static_cast<int>(t), j);
                }
            }
            break;
        }
        case Op::LayerNorm: {
            auto& gx = gin(0);
            auto& gg = gin(1);
            auto& gb = gin(2);
            const auto& gain = val(nd.inputs[1]);
            const int m = gout.rows(), n = gout.cols();
            for (int i = 0; i < m; ++i) {
                const Real inv_std = nd.cache.at(i, n);
                Real sum_dxhat = 0, sum_dxhat_xhat = 0;
                for (int j = 0; j < n; ++j) {
                    const Real dxhat = gout.at(i, j) * gain.data[j];
                    sum_dxhat += dxhat;
                    sum_dxhat_xhat += dxhat * nd.cache.at(i, j);
                }
                for (int j = 0; j < n; ++j) {
                    const Real xhat = nd.cache.at(i, j);
                    const Real dxhat = gout.at(i, j) * gain.data[j];
                    gx.at(i, j) += inv_std * (dxhat - (sum_dxhat + xhat * sum_dxhat_xhat) / Real(n));
                    gg.data[j] += gout.at(i, j) * xhat;
                    gb.data[j] += gout.at(i, j);
                }
            }
            break;
        }
        case Op::MatMul: {
            auto& ga = gin(0);
            auto& gb = gin(1);
            const auto& av = val(nd.inputs[0]);
            const auto& bv = val(nd.inputs[1]);
            const int m = av.rows(), k = av.cols(), n = bv.cols();
            for (int i = 0; i < m; ++i)
                for (int p = 0; p < k; ++p) {
                    Real s = 0;
                    const Real* grow = &gout.data[static_cast<std::size_t>(i) * n];
                    const Real* brow = &bv.data[static_cast<std::size_t>(p) * n];
                    for (int j = 0; j < n; ++j) s += grow[j] * brow[j];
                    ga.at(i, p) += s;
                }
            for (int p = 0; p < k; ++p)
                for (int i = 0; i < m; ++i) {
                    const Real aip = av.at(i, p);
                    if (aip == Real(0)) continue;
                    const Real* grow = &gout.data[static_cast<std::size_t>(i) * n];
                    Real* brow = &gb.data[static_cast<std::size_t>(p) * n];
                    for (int j = 0; j < n; ++j) brow[j] += aip * grow[j];
                }
            break;
        }
        case Op::MatMulNT: {
            auto& ga = gin(0);
            auto& gb = gin(1);
            const auto& av = val(nd.inputs[0]);
            const auto& bv = val(nd.inputs[1]);
            const int m = av.rows(), k = av.cols(), n = bv.rows();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) {
                    const Real g = gout.at(i, j);
                    if (g == Real(0)) continue;
                    for (int p = 0; p < k; ++p) {
                        ga.at(i, p) += g * bv.at(j, p);
                        gb.at(j, p) += g * av.at(i, p);
                    }
                }
            break;
        }
        case Op::Add: {
            auto& ga = gin(0);
            auto& gb = gin(1);
            for (std::size_t i = 0; i < gout.data.size(); ++i) {
                ga.data[i] += gout.data[i];
                gb.data[i] += gout.data[i];
            }
            break;
        }
        case Op::AddBias: {
            auto& ga = gin(0);
            auto& gb = gin(1);
            for (int i = 0; i < gout.rows(); ++i)
                for (int j = 0; j < gout.cols(); ++j) {
                    ga.at(i, j) += gout.at(i, j);
                    gb.data[j] += gout.at(i, j);
                }
            break;
        }
        case Op::Mul: {
            auto& ga = gin(0);
            auto& gb = gin(1);
            const auto& av = val(nd.inputs[0]);
            const auto& bv = val(nd.inputs[1]);
            for (std::size_t i = 0; i < gout.data.size(); ++i) {
                ga.data[i] += gout.data[i] * bv.data[i];
                gb.data[i] += gout.data[i] * av.data[i];
            }
            break;
        }
        case Op::Scale: {
            auto& ga = gin(0);
            for (std::size_t i = 0; i < gout.data.size(); ++i)
                ga.data[i] += gout.data[i] * nd.reals[0];
            break;
        }
        case Op::Gelu: {
            auto& ga = gin(0);
            const auto& av = val(nd.inputs[0]);
            for (std::size_t i = 0; i < gout.data.size(); ++i)
                ga.data[i] += gout.data[i] * gelu_bwd(av.data[i]);
            break;
        }
        case Op::CausalSoftmax: {
            auto& ga = gin(0);
            const int m = gout.rows();
            for (int i = 0; i < m; ++i) {
                Real dot = 0;
                for (int j = 0; j <= i; ++j) dot += gout.at(i, j) * nd.out.at(i, j);
                for (int j = 0; j <= i; ++j)
                    ga.at(i, j) += nd.out.at(i, j) * (gout.at(i, j) - dot);
            }
            break;
        }
        case Op::SliceCols: {
            auto& ga = gin(0);
            const int c0 = nd.ints[0], len = nd.ints[1];
            for (int i = 0; i < gout.rows(); ++i)
                for (int j = 0; j < len; ++j) ga.at(i, c0 + j) += gout.at(i, j);
            break;
        }
        case Op::ConcatCols: {
            int off = 0;
            for (std::size_t k = 0; k < nd.inputs.size(); ++k) {
                auto& ga = gin(k);
                for (int i = 0; i < gout.rows(); ++i)
                    for (int j = 0; j < ga.cols(); ++j) ga.at(i, j) += gout.at(i, off + j);
                off += ga.cols();
            }
            break;
        }
        case Op::RowsSubset: {
            auto& ga = gin(0);
            for (std::size_t i = 0; i < nd.ints.size(); ++i)
                for (int j = 0; j < gout.cols(); ++j)
                    ga.at(nd.ints[i], j) += gout.at(static_cast<int>(i), j);
            break;
        }
        case Op::PickLogSoftmax: {
            auto& ga = gin(0);
            const Real inv_temp = nd.reals[0];
            const int n = ga.cols();
            for (std::size_t i = 0; i < nd.ints.size(); ++i) {
                const Real g = gout.data[i];
                if (g == Real(0)) continue;
                const int row = static_cast<int>(i);
                for (int j = 0; j < n; ++j) {
                    Real d = -nd.cache.at(row, j);
                    if (j == nd.ints[i]) d += Real(1);
                    ga.at(row, j) += g * d * inv_temp;
                }
            }
            break;
        }
        case Op::SoftmaxEntropy: {
            auto& ga = gin(0);
            const Real inv_temp = nd.reals[0];
            const int n = ga.cols();
            for (int i = 0; i < static_cast<int>(gout.numel()); ++i) {
                const Real g = gout.data[i];
                if (g == Real(0)) continue;
                const Real h = nd.out.data[i];
                for (int j = 0; j < n; ++j) {
                    const Real p = nd.cache.at(i, j);
                    if (p > Real(0))
                        ga.at(i, j) += g * (-p * (std::log(p) + h)) * inv_temp;
                }
            }
            break;
        }
        case Op::Sum: {
            auto& ga = gin(0);
            for (Real& v : ga.data) v += gout.data[0];
            break;
        }
        case Op::Surrogate: {
            auto& ga = gin(0);
            const auto& lp = val(nd.inputs[0]);
            const std::size_t T = lp.numel();
            const Real A = nd.reals[0], el = nd.reals[1], eh = nd.reals[2], inv_len = nd.reals[3];
            const Real* old_lp = &nd.reals[4];
            const Real* credits = &nd.reals[4 + T];
            for (std::size_t t = 0; t < T; ++t) {
                const Real w = std::exp(lp.data[t] - old_lp[t]);
                const Real wc = std::clamp(w, Real(1) - el, Real(1) + eh);
                // min picks the unclipped branch on ties; a clipped selected
                // branch is constant in theta so its derivative vanishes
                const Real d = (w * A <= wc * A) ? w * A : Real(0);
                ga.data[t] += gout.data[0] * inv_len * credits[t] * d;
            }
            break;
        }
        }
    }
};

/// Max relative error between analytic gradients and central differences.
/// `eval` must rebuild the scalar function from scratch for perturbed params.
/// Errors are measured relative to the gradient's infinity norm (not per
/// coordinate): at coordinates where the true derivative is ~0, the central
/// difference is dominated by cancellation noise of order eps/h, and dividing
/// by it would report spurious mismatches.
template <class Real>
Real finite_difference_check(
    const std::function<Real(const std::vector<Tensor<Real>>&)>& eval,
    std::vector<Tensor<Real>> params, const std::vector<Tensor<Real>>& analytic, Real h) {
    if (params.size() != analytic.size())
        throw std::invalid_argument("finite_difference_check: param/grad count mismatch");
    Real scale = 0;
    for (const auto& t : analytic)
        for (const Real v : t.data) scale = std::max(scale, std::abs(v));
    Real max_rel = 0;
    for (std::size_t p = 0; p < params.size(); ++p) {
        for (std::size_t i = 0; i < params[p].data.size(); ++i) {
            const Real orig = params[p].data[i];
            params[p].data[i] = orig + h;
            const Real fp = eval(params);
            params[p].data[i] = orig - h;
            const Real fm = eval(params);
            params[p].data[i] = orig;
            const Real fd = (fp - fm) / (Real(2) * h);
            const Real rel = std::abs(analytic[p].data[i] - fd) /
                             (std::max(std::abs(fd), scale) + Real(1e-12));
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

}  // namespace trlv
