#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <thread>
#include <vector>

#include "trlv/policy.hpp"

namespace trlv {

struct ClipConfig {
    double eps_low = 0.2;
    double eps_high = 0.28;

    void validate() const {
        if (!(eps_low > 0.0 && eps_low <= eps_high && eps_high < 1.0))
            throw std::invalid_argument("ClipConfig: require 0 < eps_low <= eps_high < 1");
    }
};

/// G trajectories for one prompt sharing group-relative advantages.
struct RolloutGroup {
    std::vector<Trajectory> trajectories;
    std::vector<double> advantages;
};

/// A_i = (r_i - mean) / (std_pop + 1e-6); exact zeros for degenerate groups.
/// mean_only skips the std normalizer.
inline std::vector<double> group_advantages(const std::vector<double>& rewards,
                                            bool mean_only = false) {
    const std::size_t g = rewards.size();
    if (g < 2) throw std::invalid_argument("group_advantages: need G >= 2");
    double mean = 0;
    for (double r : rewards) mean += r;
    mean /= static_cast<double>(g);
    double var = 0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    var /= static_cast<double>(g);
    const double sd = std::sqrt(var);
    std::vector<double> adv(g, 0.0);
    if (sd == 0.0) return adv;  // uniform rewards carry no signal
    for (std::size_t i = 0; i < g; ++i)
        adv[i] = mean_only ? rewards[i] - mean : (rewards[i] - mean) / (sd + 1e-6);
    return adv;
}

inline double importance_ratio(double new_logprob, double old_logprob) {
    if (!std::isfinite(new_logprob) || !std::isfinite(old_logprob))
        throw std::invalid_argument("importance_ratio: non-finite logprob");
    if (new_logprob > 0.0 || old_logprob > 0.0)
        throw std::invalid_argument("importance_ratio: logprobs must be <= 0");
    return std::exp(new_logprob - old_logprob);
}

inline double clipped_token_objective(double w, double advantage, const ClipConfig& clip) {
    if (!(w > 0.0)) throw std::invalid_argument("clipped_token_objective: ratio must be > 0");
    clip.validate();
    const double wc = std::min(std::max(w, 1.0 - clip.eps_low), 1.0 + clip.eps_high);
    return std::min(w * advantage, wc * advantage);
}

struct GradStats {
    double grad_norm = 0.0;                // L2 norm of the accumulated objective gradient
    std::vector<int> included_tokens;      // per trajectory, count of nonzero credit factors
    bool all_zero_advantages = false;
};

/// Gradient of the scheduled GRPO objective over a rollout batch:
///   (1/B) sum_groups (1/G) sum_i A_i (1/|y_i|) sum_t f_t g_t(theta)
/// with g_t the clipped-ratio-weighted token logprob gradient. Returned flat
/// in canonical tensor order (ascent direction). Reduction uses a fixed
/// block partition so results are bit-stable for any worker count.
template <class Real>
std::vector<Real> accumulate_policy_gradient(const std::vector<RolloutGroup>& groups,
                                             const std::vector<std::vector<std::vector<double>>>& credits,
                                             const PolicyParams<Real>& params,
                                             const ClipConfig& clip, double temperature,
                                             GradStats* stats = nullptr, int n_threads = 0) {
    clip.validate();
    if (credits.size() != groups.size())
        throw std::invalid_argument("accumulate_policy_gradient: credits/groups size mismatch");

    struct Item {
        const Trajectory* traj;
        const std::vector<double>* credit;
        double advantage;
    };
    std::vector<Item> items;
    bool any_advantage = false;
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        const auto& grp = groups[gi];
        if (grp.trajectories.size() < 2 || grp.advantages.size() != grp.trajectories.size())
            throw std::invalid_argument("accumulate_policy_gradient: malformed group");
        if (credits[gi].size() != grp.trajectories.size())
            throw std::invalid_argument("accumulate_policy_gradient: credits length mismatch");
        for (std::size_t ti = 0; ti < grp.trajectories.size(); ++ti) {
            const auto& traj = grp.trajectories[ti];
            if (credits[gi][ti].size() != traj.response_ids.size())
                throw std::invalid_argument(
                    "accumulate_policy_gradient: per-token credit length mismatch");
            for (double f : credits[gi][ti])
                if (f < 0.0)
                    throw std::invalid_argument("accumulate_policy_gradient: negative credit");
            items.push_back({&traj, &credits[gi][ti], grp.advantages[ti]});
            any_advantage = any_advantage || grp.advantages[ti] != 0.0;
        }
    }

    const std::size_t n_params = params.param_count();
    if (stats) {
        stats->included_tokens.clear();
        for (const Item& it : items) {
            int n = 0;
            for (double f : *it.credit)
                if (f != 0.0) ++n;
            stats->included_tokens.push_back(n);
        }
        stats->all_zero_advantages = !any_advantage;
    }

    const double n_groups = static_cast<double>(groups.size());
    const double group_size = groups.empty() ? 1.0 : static_cast<double>(groups[0].trajectories.size());
    const Real seed_scale = static_cast<Real>(1.0 / (n_groups * group_size));
    const Real inv_temp = Real(1) / static_cast<Real>(temperature);

    constexpr std::size_t kBlocks = 16;
    const std::size_t n_blocks = std::min(kBlocks, items.empty() ? std::size_t(1) : items.size());
    std::vector<std::vector<Real>> block_grads(n_blocks, std::vector<Real>(n_params, Real(0)));

    auto process_item = [&](const Item& it, std::vector<Real>& acc) {
        if (it.advantage == 0.0) return;  // exact zero contribution, skip the graph
        const Trajectory& traj = *it.traj;
        const int plen = static_cast<int>(traj.prompt_ids.size());
        const int T = traj.length();
        std::vector<int> input_ids = traj.prompt_ids;
        input_ids.insert(input_ids.end(), traj.response_ids.begin(), traj.response_ids.end() - 1);
        std::vector<int> rows(T), targets(T);
        for (int t = 0; t < T; ++t) {
            rows[t] = plen - 1 + t;
            targets[t] = traj.response_ids[t];
        }
        Graph<Real> g;
        const auto pnodes = register_policy_params(g, params);
        const auto lp = policy_logprobs_node(g, pnodes, params.cfg, input_ids, rows, targets,
                                             inv_temp);
        std::vector<Real> old_lp(traj.old_logprobs.begin(), traj.old_logprobs.end());
        std::vector<Real> f(it.credit->begin(), it.credit->end());
        const auto obj = g.surrogate(lp, old_lp, f, static_cast<Real>(it.advantage),
                                     static_cast<Real>(clip.eps_low),
                                     static_cast<Real>(clip.eps_high));
        const auto grads = g.backward(obj, Tensor<Real>({1}, {seed_scale}));
        std::size_t off = 0;
        for (const auto& t : grads) {
            for (std::size_t i = 0; i < t.data.size(); ++i) acc[off + i] += t.data[i];
            off += t.data.size();
        }
    };

    if (n_threads <= 0) n_threads = static_cast<int>(std::thread::hardware_concurrency());
    n_threads = std::max(1, std::min<int>(n_threads, static_cast<int>(n_blocks)));
    std::atomic<std::size_t> next_block{0};
    auto worker = [&]() {
        while (true) {
            const std::size_t b = next_block.fetch_add(1);
            if (b >= n_blocks) break;
            const std::size_t lo = items.size() * b / n_blocks;
            const std::size_t hi = items.size() * (b + 1) / n_blocks;
            for (std::size_t i = lo; i < hi; ++i) process_item(items[i], block_grads[b]);
        }
    };
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    std::vector<Real> grad(n_params, Real(0));
    for (const auto& bg : block_grads)
        for (std::size_t i = 0; i < n_params; ++i) grad[i] += bg[i];

    if (stats) {
        double sq = 0;
        for (Real v : grad) sq += static_cast<double>(v) * static_cast<double>(v);
        stats->grad_norm = std::sqrt(sq);
    }
    return grad;
}

/// Rescales grad in place when its L2 norm exceeds max_norm; returns the
/// pre-clip norm.
template <class Real>
double clip_grad_norm(std::vector<Real>& grad, double max_norm) {
    double sq = 0;
    for (Real v : grad) sq += static_cast<double>(v) * static_cast<double>(v);
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        const Real scale = static_cast<Real>(max_norm / norm);
        for (Real& v : grad) v *= scale;
    }
    return norm;
}

struct OptimConfig {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
    double max_grad_norm = 1.0;

    void validate() const {
        if (!(lr > 0.0)) throw std::invalid_argument("OptimConfig: lr must be > 0");
        if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0))
            throw std::invalid_argument("OptimConfig: betas must be in [0,1)");
        if (!(max_grad_norm > 0.0))
            throw std::invalid_argument("OptimConfig: max_grad_norm must be > 0");
    }
};

/// Adam with decoupled weight decay. Minimizes: pass the gradient of the
/// loss (negated objective gradient for ascent).
template <class Real>
class AdamW {
public:
    AdamW(OptimConfig cfg, std::size_t n_params)
        : cfg_(cfg), m_(n_params, Real(0)), v_(n_params, Real(0)) {
        cfg.validate();
    }

    void step(PolicyParams<Real>& params, const std::vector<Real>& grad) {
        if (grad.size() != m_.size()) throw std::invalid_argument("AdamW: gradient size mismatch");
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
        const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
        std::size_t off = 0;
        params.for_each_tensor([&](const std::string&, Tensor<Real>& tensor) {
            for (std::size_t i = 0; i < tensor.data.size(); ++i, ++off) {
                const Real g = grad[off];
                m_[off] = static_cast<Real>(cfg_.beta1) * m_[off] +
                          static_cast<Real>(1.0 - cfg_.beta1) * g;
                v_[off] = static_cast<Real>(cfg_.beta2) * v_[off] +
                          static_cast<Real>(1.0 - cfg_.beta2) * g * g;
                const double mhat = static_cast<double>(m_[off]) / bc1;
                const double vhat = static_cast<double>(v_[off]) / bc2;
                double upd = cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
                upd += cfg_.lr * cfg_.weight_decay * static_cast<double>(tensor.data[i]);
                tensor.data[i] -= static_cast<Real>(upd);
            }
        });
        if (off != grad.size()) throw std::invalid_argument("AdamW: parameter layout changed");
    }

private:
    OptimConfig cfg_;
    std::vector<Real> m_, v_;
    long t_ = 0;
};

}  // namespace trlv
