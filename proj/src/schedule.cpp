#include "trlv/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "trlv/rng.hpp"

namespace trlv {

ScheduleKind schedule_kind_from_string(const std::string& s) {
    if (s == "linear") return ScheduleKind::linear;
    if (s == "sigmoid") return ScheduleKind::sigmoid;
    if (s == "gamma") return ScheduleKind::gamma;
    throw std::invalid_argument("unknown schedule kind: " + s);
}

std::string to_string(ScheduleKind k) {
    switch (k) {
    case ScheduleKind::linear: return "linear";
    case ScheduleKind::sigmoid: return "sigmoid";
    case ScheduleKind::gamma: return "gamma";
    }
    return "?";
}

ProxyKind proxy_kind_from_string(const std::string& s) {
    if (s == "none") return ProxyKind::none;
    if (s == "tp_suffix") return ProxyKind::tp_suffix;
    if (s == "tp_prefix") return ProxyKind::tp_prefix;
    if (s == "entropy") return ProxyKind::entropy;
    if (s == "random") return ProxyKind::random;
    throw std::invalid_argument("unknown allocation proxy: " + s);
}

std::string to_string(ProxyKind k) {
    switch (k) {
    case ProxyKind::none: return "none";
    case ProxyKind::tp_suffix: return "tp_suffix";
    case ProxyKind::tp_prefix: return "tp_prefix";
    case ProxyKind::entropy: return "entropy";
    case ProxyKind::random: return "random";
    }
    return "?";
}

void ScheduleConfig::validate() const {
    if (!(tau_low >= 0.0 && tau_low < 1.0))
        throw std::invalid_argument("ScheduleConfig: tau_low must be in [0,1)");
    if (!(tau_high > 0.0 && tau_high <= 1.0))
        throw std::invalid_argument("ScheduleConfig: tau_high must be in (0,1]");
    if (!(tau_low < tau_high))
        throw std::invalid_argument("ScheduleConfig: tau_low must be < tau_high");
    if (!(sigmoid_k > 0.0)) throw std::invalid_argument("ScheduleConfig: sigmoid_k must be > 0");
    if (!(sigmoid_beta > 0.0 && sigmoid_beta < 1.0))
        throw std::invalid_argument("ScheduleConfig: sigmoid_beta must be in (0,1)");
    if (!(gamma_exp > 0.0)) throw std::invalid_argument("ScheduleConfig: gamma_exp must be > 0");
}

void AllocationConfig::validate() const {
    if (epsilon < 0.0) throw std::invalid_argument("AllocationConfig: epsilon must be >= 0");
    if (!(psi_clip_low > 0.0 && psi_clip_high >= psi_clip_low))
        throw std::invalid_argument("AllocationConfig: psi clip bounds");
}

double normalized_progress(int step, int total_steps, const ScheduleConfig& cfg) {
    if (total_steps < 1) throw std::invalid_argument("normalized_progress: total_steps >= 1");
    if (step < 0 || step > total_steps)
        throw std::invalid_argument("normalized_progress: step out of range");
    cfg.validate();
    const double tau = static_cast<double>(step) / static_cast<double>(total_steps);
    const double clipped = std::clamp(tau, cfg.tau_low, cfg.tau_high);
    return (clipped - cfg.tau_low) / (cfg.tau_high - cfg.tau_low);
}

double schedule_value(const ScheduleConfig& cfg, double tau) {
    if (!(tau >= 0.0 && tau <= 1.0))
        throw std::invalid_argument("schedule_value: tau must be in [0,1]");
    switch (cfg.kind) {
    case ScheduleKind::linear:
        return 1.0 - tau;
    case ScheduleKind::sigmoid:
        return 1.0 / (1.0 + std::exp(cfg.sigmoid_k * (tau - cfg.sigmoid_beta)));
    case ScheduleKind::gamma:
        return std::pow(1.0 - tau, cfg.gamma_exp);
    }
    throw std::invalid_argument("schedule_value: unknown schedule kind");
}

std::vector<double> proxy_values(ProxyKind proxy, int response_len,
                                 const std::vector<double>& entropies, double scheduled_tau,
                                 std::uint64_t seed) {
    if (response_len < 1) throw std::invalid_argument("proxy_values: response_len must be >= 1");
    std::vector<double> mu(static_cast<std::size_t>(response_len));
    switch (proxy) {
    case ProxyKind::none:
        std::fill(mu.begin(), mu.end(), 1.0);
        break;
    case ProxyKind::tp_suffix:
    case ProxyKind::tp_prefix:
        for (int t = 0; t < response_len; ++t)
            mu[t] = static_cast<double>(t) / static_cast<double>(response_len);
        break;
    case ProxyKind::entropy:
        if (static_cast<int>(entropies.size()) != response_len)
            throw std::invalid_argument("proxy_values: entropy list length mismatch");
        mu = entropies;
        break;
    case ProxyKind::random: {
        Rng rng(Rng::mix(seed, 0x72616e64ULL));
        for (double& v : mu) v = rng.uniform() < scheduled_tau ? 1.0 : 0.0;
        break;
    }
    }
    return mu;
}

std::vector<double> discrete_mask(const std::vector<double>& mu, double s, double epsilon,
                                  bool prefix) {
    if (!(s >= 0.0 && s <= 1.0)) throw std::invalid_argument("discrete_mask: S must be in [0,1]");
    if (epsilon < 0.0) throw std::invalid_argument("discrete_mask: epsilon must be >= 0");
    std::vector<double> mask(mu.size(), 0.0);
    const double thr = s * epsilon;
    bool any = false;
    for (std::size_t t = 0; t < mu.size(); ++t) {
        const bool in = prefix ? (mu[t] <= 1.0 - thr) : (mu[t] >= thr);
        mask[t] = in ? 1.0 : 0.0;
        any = any || in;
    }
    if (!any && !mask.empty()) {
        // never hand the optimizer an empty mask
        if (prefix)
            mask.front() = 1.0;
        else
            mask.back() = 1.0;
    }
    return mask;
}

std::vector<double> continuous_factor(const std::vector<double>& psi, double s,
                                      ContinuousForm form) {
    if (!(s >= 0.0 && s <= 1.0))
        throw std::invalid_argument("continuous_factor: S must be in [0,1]");
    std::vector<double> f(psi.size());
    for (std::size_t t = 0; t < psi.size(); ++t) {
        if (psi[t] < 0.0) throw std::invalid_argument("continuous_factor: negative psi");
        f[t] = form == ContinuousForm::literal ? s * psi[t] : (1.0 - s) + s * psi[t];
    }
    return f;
}

std::vector<double> entropy_psi(const std::vector<double>& entropies, double batch_mean_entropy,
                                double clip_low, double clip_high) {
    std::vector<double> psi(entropies.size());
    for (std::size_t t = 0; t < entropies.size(); ++t)
        psi[t] = std::clamp(entropies[t] / (batch_mean_entropy + 1e-8), clip_low, clip_high);
    return psi;
}

}  // namespace trlv
