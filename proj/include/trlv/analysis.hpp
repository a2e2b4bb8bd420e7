#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "trlv/policy.hpp"
#include "trlv/tensor.hpp"

namespace trlv {

/// Open position ranges (p_i - delta, p_i + delta) over normalized
/// trajectory positions t/T.
struct PositionRangeSet {
    std::vector<double> centers{0.05, 0.5, 0.95};
    double delta = 0.05;

    void validate() const;
    /// Index of the range containing normalized position x, or -1.
    int range_of(double x) const;
};

/// Occurrence counts per (token, position range).
struct TPScoreTable {
    std::vector<std::vector<long long>> counts;  // [vocab][n_ranges]

    long long total(int token) const {
        long long n = 0;
        for (long long c : counts[token]) n += c;
        return n;
    }
};

/// Count token occurrences per position range over a rollout corpus.
/// Token at 0-based position t in a length-T response lands in range i iff
/// t/T lies strictly inside (p_i - delta, p_i + delta).
TPScoreTable position_histogram(const std::vector<Trajectory>& corpus,
                                const PositionRangeSet& ranges, int vocab_size);

/// Occurrence-weighted mean range center; nullopt when the token never
/// appeared inside any range.
std::optional<double> tp_score(const std::vector<long long>& counts,
                               const std::vector<double>& centers);

struct PercentileBins {
    std::vector<std::optional<double>> mean;  // nullopt for empty bins
    std::vector<long long> count;
};

/// Mean recorded entropy per trajectory-percentile bin; token at position t
/// of a length-T response goes to bin floor(n_bins * t / T).
PercentileBins entropy_by_percentile(const std::vector<Trajectory>& corpus, int n_bins);

struct KlBinResult {
    std::vector<double> raw_mean;     // per-bin mean KL (0 for empty bins)
    std::vector<double> normalized;   // raw means divided by their sum
    std::vector<long long> count;
    std::vector<bool> tainted;        // bin saw an infinite divergence
    bool all_zero = false;            // total divergence was 0; normalization skipped
};

/// (mean included-token count, mean included fraction) over binary masks.
std::pair<double, double> scheduled_length_stats(const std::vector<std::vector<double>>& masks);

/// Per-percentile-bin token-level KL(pi_a || pi_b) on probe trajectories,
/// normalized so the bins sum to 1 when total divergence is positive.
template <class Real>
KlBinResult kl_by_percentile(const PolicyParams<Real>& params_a,
                             const PolicyParams<Real>& params_b,
                             const std::vector<Trajectory>& probes, int n_bins) {
    if (n_bins < 1) throw std::invalid_argument("kl_by_percentile: n_bins must be >= 1");
    if (params_a.cfg.vocab != params_b.cfg.vocab ||
        params_a.cfg.context_limit != params_b.cfg.context_limit)
        throw std::invalid_argument("kl_by_percentile: policy shape mismatch");
    KlBinResult out;
    out.raw_mean.assign(n_bins, 0.0);
    out.normalized.assign(n_bins, 0.0);
    out.count.assign(n_bins, 0);
    out.tainted.assign(n_bins, false);
    std::vector<double> sums(n_bins, 0.0);

    for (const Trajectory& traj : probes) {
        const int T = traj.length();
        if (T < 1) throw std::invalid_argument("kl_by_percentile: empty probe trajectory");
        InferenceRun<Real> run_a(params_a), run_b(params_b);
        std::vector<Real> la, lb;
        for (int id : traj.prompt_ids) {
            la = run_a.push_token(id);
            lb = run_b.push_token(id);
        }
        for (int t = 0; t < T; ++t) {
            const int bin = std::min(n_bins - 1, static_cast<int>(n_bins * t / T));
            const auto pa = softmax(la, Real(1));
            const auto pb = softmax(lb, Real(1));
            try {
                std::vector<double> pad(pa.begin(), pa.end()), pbd(pb.begin(), pb.end());
                sums[bin] += categorical_kl(pad, pbd);
                ++out.count[bin];
            } catch (const infinite_divergence_error&) {
                out.tainted[bin] = true;
            }
            if (t + 1 < T) {
                la = run_a.push_token(traj.response_ids[t]);
                lb = run_b.push_token(traj.response_ids[t]);
            }
        }
    }
    double total = 0;
    for (int b = 0; b < n_bins; ++b) {
        out.raw_mean[b] = out.count[b] > 0 ? sums[b] / static_cast<double>(out.count[b]) : 0.0;
        total += out.raw_mean[b];
    }
    if (total > 0.0) {
        for (int b = 0; b < n_bins; ++b) out.normalized[b] = out.raw_mean[b] / total;
    } else {
        out.all_zero = true;
    }
    return out;
}

// Rollout dump: one JSON record per line with prompt ids, response ids,
// per-token logprobs/entropies, and the reward.
void dump_rollouts(const std::vector<Trajectory>& corpus, const std::string& path);
std::vector<Trajectory> load_rollouts(const std::string& path);

}  // namespace trlv
