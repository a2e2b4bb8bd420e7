#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace trlv {

enum class ScheduleKind { linear, sigmoid, gamma };

ScheduleKind schedule_kind_from_string(const std::string& s);
std::string to_string(ScheduleKind k);

/// Monotone non-increasing schedule over normalized training progress.
struct ScheduleConfig {
    ScheduleKind kind = ScheduleKind::linear;
    double tau_low = 0.0;
    double tau_high = 0.8;
    double sigmoid_k = 8.0;
    double sigmoid_beta = 0.5;
    double gamma_exp = 2.0;

    void validate() const;
};

enum class ProxyKind { none, tp_suffix, tp_prefix, entropy, random };
enum class AllocationMode { discrete, continuous };
enum class ContinuousForm { literal, interpolated };

ProxyKind proxy_kind_from_string(const std::string& s);
std::string to_string(ProxyKind k);

struct AllocationConfig {
    ProxyKind proxy = ProxyKind::tp_suffix;
    AllocationMode mode = AllocationMode::discrete;
    double epsilon = 1.0;  // discrete threshold; 1 for scheduled, 0.2 for stagnant entropy
    ContinuousForm continuous_form = ContinuousForm::interpolated;
    double psi_clip_low = 0.2;
    double psi_clip_high = 5.0;

    void validate() const;
};

/// Raw progress step/N clipped into [tau_low, tau_high] and rescaled to [0,1].
double normalized_progress(int step, int total_steps, const ScheduleConfig& cfg);

/// S(tau): linear 1-tau, sigmoid 1/(1+exp(k(tau-beta))), gamma (1-tau)^gamma.
double schedule_value(const ScheduleConfig& cfg, double tau);

/// Per-token proxy values mu_t. tp proxies: t/T with 0-based t; entropy:
/// recorded sampling-time entropies; random: Bernoulli(tau) per token.
std::vector<double> proxy_values(ProxyKind proxy, int response_len,
                                 const std::vector<double>& entropies, double scheduled_tau,
                                 std::uint64_t seed);

/// Binary factor list. Suffix reading keeps mu >= S*eps, prefix keeps
/// mu <= 1 - S*eps. An all-zero mask force-includes one token (last for
/// suffix-style proxies, first for prefix) so gradients never vanish outright.
std::vector<double> discrete_mask(const std::vector<double>& mu, double s, double epsilon,
                                  bool prefix);

/// Continuous factors: literal S*psi (Eq-verbatim) or interpolated
/// (1-S) + S*psi which decays to uniform weighting at S=0.
std::vector<double> continuous_factor(const std::vector<double>& psi, double s,
                                      ContinuousForm form);

/// Entropy wrap function: psi_t = clip(H_t / (Hbar + 1e-8), lo, hi).
std::vector<double> entropy_psi(const std::vector<double>& entropies, double batch_mean_entropy,
                                double clip_low, double clip_high);

}  // namespace trlv
