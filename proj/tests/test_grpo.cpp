#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "trlv/grpo.hpp"
#include "trlv/rng.hpp"

using namespace trlv;

namespace {

PolicyConfig tiny_cfg() {
    PolicyConfig c;
    c.vocab = 9;
    c.context_limit = 20;
    c.width = 8;
    c.n_layers = 1;
    c.n_heads = 2;
    return c;
}

template <class Real>
Trajectory make_traj(const PolicyParams<Real>& params, std::uint64_t seed, int max_len = 8) {
    DecodingConfig dec;
    dec.temperature = 1.0;
    dec.max_response_len = max_len;
    dec.eos_id = 8;
    return sample_trajectory(params, {1, 2}, dec, seed);
}

}  // namespace

TEST_CASE("group advantage oracles") {
    // rewards [1, 0]: mean 0.5, population std 0.5
    const auto a2 = group_advantages({1.0, 0.0});
    CHECK(a2[0] == doctest::Approx(0.99999800000399997).epsilon(1e-14));
    CHECK(a2[1] == doctest::Approx(-0.99999800000399997).epsilon(1e-14));

    // rewards [1, 0, 0, 0]: mean 0.25, population std sqrt(3)/4
    const auto a4 = group_advantages({1.0, 0.0, 0.0, 0.0});
    CHECK(a4[0] == doctest::Approx(1.732046807578115).epsilon(1e-14));
    for (int i = 1; i < 4; ++i)
        CHECK(a4[i] == doctest::Approx(-0.57734893585937175).epsilon(1e-14));

    // advantages always sum to ~0
    double sum = 0;
    for (double v : group_advantages({0.0, 1.0, 1.0, 0.0, 1.0})) sum += v;
    CHECK(sum == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("degenerate groups yield exact zero advantages") {
    for (const auto& rewards :
         {std::vector<double>{0.0, 0.0, 0.0}, std::vector<double>{1.0, 1.0, 1.0, 1.0}}) {
        for (double v : group_advantages(rewards)) CHECK(v == 0.0);
    }
    CHECK_THROWS_AS(group_advantages({1.0}), std::invalid_argument);
}

TEST_CASE("mean-only advantage skips the std normalizer") {
    const auto adv = group_advantages({1.0, 0.0, 0.0, 0.0}, true);
    CHECK(adv[0] == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(adv[1] == doctest::Approx(-0.25).epsilon(1e-15));
}

TEST_CASE("importance ratio and clipped objective oracles") {
    CHECK(importance_ratio(-1.0, -1.3) == doctest::Approx(1.3498588075760032).epsilon(1e-14));
    CHECK(importance_ratio(-2.0, -2.0) == doctest::Approx(1.0));
    CHECK_THROWS_AS(importance_ratio(0.5, -1.0), std::invalid_argument);
    CHECK_THROWS_AS(importance_ratio(std::nan(""), -1.0), std::invalid_argument);

    ClipConfig clip;  // (0.2, 0.28)
    // w=1.5, A=1: min(1.5, 1.28) = 1.28
    CHECK(clipped_token_objective(1.5, 1.0, clip) == doctest::Approx(1.28).epsilon(1e-14));
    // w=0.5, A=-1: min(-0.5, -0.8) = -0.8 (pessimistic branch)
    CHECK(clipped_token_objective(0.5, -1.0, clip) == doctest::Approx(-0.8).epsilon(1e-14));
    // inside the band the raw ratio passes through
    CHECK(clipped_token_objective(1.1, 2.0, clip) == doctest::Approx(2.2).epsilon(1e-14));
    CHECK(clipped_token_objective(0.9, -2.0, clip) == doctest::Approx(-1.8).epsilon(1e-14));
    CHECK_THROWS_AS(clipped_token_objective(-0.1, 1.0, clip), std::invalid_argument);

    ClipConfig bad{0.0, 0.28};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("on-policy ratios are within 1e-4 of one and clipping stays inactive") {
    const auto params = PolicyParams<float>::init(tiny_cfg(), 3);
    for (int s = 0; s < 10; ++s) {
        const auto traj = make_traj(params, s);
        const auto [lps, _] = token_logprobs_and_entropy(params, traj, 1.0);
        for (std::size_t t = 0; t < lps.size(); ++t) {
            const double w = importance_ratio(lps[t], traj.old_logprobs[t]);
            CHECK(std::abs(w - 1.0) < 1e-4);
        }
    }
}

TEST_CASE("credit-mask gradient decomposes as the sum of per-token gradients") {
    const auto params = PolicyParams<double>::init(tiny_cfg(), 4);
    Rng rng(5);
    ClipConfig clip;

    for (int rep = 0; rep < 4; ++rep) {
        RolloutGroup grp;
        grp.trajectories = {make_traj(params, 100 + rep), make_traj(params, 200 + rep)};
        grp.advantages = {0.7, -0.7};

        std::vector<std::vector<std::vector<double>>> credits(1);
        credits[0].resize(2);
        for (int i = 0; i < 2; ++i) {
            credits[0][i].resize(grp.trajectories[i].response_ids.size());
            for (double& f : credits[0][i]) f = rng.below(2) ? 1.0 : 0.0;
        }

        const auto full =
            accumulate_policy_gradient<double>({grp}, credits, params, clip, 1.0, nullptr, 1);

        // brute force: one pass per nonzero token
        std::vector<double> sum(full.size(), 0.0);
        for (int i = 0; i < 2; ++i) {
            for (std::size_t t = 0; t < credits[0][i].size(); ++t) {
                if (credits[0][i][t] == 0.0) continue;
                auto single = credits;
                for (auto& fs : single[0]) std::fill(fs.begin(), fs.end(), 0.0);
                single[0][i][t] = credits[0][i][t];
                // zero the other trajectory's advantage so only token (i, t) contributes
                RolloutGroup one = grp;
                one.advantages[1 - i] = 0.0;
                const auto g = accumulate_policy_gradient<double>({one}, single, params, clip, 1.0,
                                                                  nullptr, 1);
                for (std::size_t j = 0; j < sum.size(); ++j) sum[j] += g[j];
            }
        }
        double num = 0, den = 0;
        for (std::size_t j = 0; j < full.size(); ++j) {
            num += (full[j] - sum[j]) * (full[j] - sum[j]);
            den += full[j] * full[j];
        }
        CHECK(std::sqrt(num) <= 1e-9 * std::sqrt(den) + 1e-15);
    }
}

TEST_CASE("gradient is linear in the advantage on-policy") {
    const auto params = PolicyParams<double>::init(tiny_cfg(), 6);
    ClipConfig clip;
    RolloutGroup g1;
    g1.trajectories = {make_traj(params, 11), make_traj(params, 12)};
    g1.advantages = {0.5, -0.5};
    RolloutGroup g2 = g1;
    g2.advantages = {1.0, -1.0};

    std::vector<std::vector<std::vector<double>>> credits(1);
    credits[0] = {std::vector<double>(g1.trajectories[0].response_ids.size(), 1.0),
                  std::vector<double>(g1.trajectories[1].response_ids.size(), 1.0)};

    const auto a = accumulate_policy_gradient<double>({g1}, credits, params, clip, 1.0, nullptr, 1);
    const auto b = accumulate_policy_gradient<double>({g2}, credits, params, clip, 1.0, nullptr, 1);
    for (std::size_t j = 0; j < a.size(); ++j)
        CHECK(b[j] == doctest::Approx(2.0 * a[j]).epsilon(1e-9));
}

TEST_CASE("zero advantages contribute exactly nothing") {
    const auto params = PolicyParams<double>::init(tiny_cfg(), 7);
    ClipConfig clip;
    RolloutGroup grp;
    grp.trajectories = {make_traj(params, 21), make_traj(params, 22)};
    grp.advantages = {0.0, 0.0};
    std::vector<std::vector<std::vector<double>>> credits(1);
    credits[0] = {std::vector<double>(grp.trajectories[0].response_ids.size(), 1.0),
                  std::vector<double>(grp.trajectories[1].response_ids.size(), 1.0)};
    GradStats stats;
    const auto g = accumulate_policy_gradient<double>({grp}, credits, params, clip, 1.0, &stats, 1);
    for (double v : g) CHECK(v == 0.0);
    CHECK(stats.all_zero_advantages);
    CHECK(stats.grad_norm == 0.0);
}

TEST_CASE("gradient accumulation is bit-identical for any worker count") {
    const auto params = PolicyParams<float>::init(tiny_cfg(), 8);
    ClipConfig clip;
    std::vector<RolloutGroup> groups(6);
    std::vector<std::vector<std::vector<double>>> credits(6);
    Rng rng(9);
    for (int p = 0; p < 6; ++p) {
        for (int i = 0; i < 4; ++i)
            groups[p].trajectories.push_back(make_traj(params, 1000 + p * 4 + i));
        groups[p].advantages = group_advantages(
            {static_cast<double>(rng.below(2)), static_cast<double>(rng.below(2)),
             static_cast<double>(rng.below(2)), static_cast<double>(rng.below(2))});
        credits[p].resize(4);
        for (int i = 0; i < 4; ++i)
            credits[p][i].assign(groups[p].trajectories[i].response_ids.size(), 1.0);
    }
    const auto g1 = accumulate_policy_gradient<float>(groups, credits, params, clip, 1.0, nullptr, 1);
    const auto g2 = accumulate_policy_gradient<float>(groups, credits, params, clip, 1.0, nullptr, 2);
    const auto g5 = accumulate_policy_gradient<float>(groups, credits, params, clip, 1.0, nullptr, 5);
    REQUIRE(g1.size() == g2.size());
    for (std::size_t j = 0; j < g1.size(); ++j) {
        CHECK(g1[j] == g2[j]);
        CHECK(g1[j] == g5[j]);
    }
}

TEST_CASE("included-token stats count nonzero credits") {
    const auto params = PolicyParams<double>::init(tiny_cfg(), 10);
    ClipConfig clip;
    RolloutGroup grp;
    grp.trajectories = {make_traj(params, 31), make_traj(params, 32)};
    grp.advantages = {1.0, -1.0};
    std::vector<std::vector<std::vector<double>>> credits(1);
    credits[0].resize(2);
    credits[0][0].assign(grp.trajectories[0].response_ids.size(), 1.0);
    credits[0][1].assign(grp.trajectories[1].response_ids.size(), 0.0);
    if (!credits[0][1].empty()) credits[0][1].back() = 1.0;
    GradStats stats;
    accumulate_policy_gradient<double>({grp}, credits, params, clip, 1.0, &stats, 1);
    REQUIRE(stats.included_tokens.size() == 2);
    CHECK(stats.included_tokens[0] == grp.trajectories[0].length());
    CHECK(stats.included_tokens[1] == 1);
    CHECK_FALSE(stats.all_zero_advantages);
}

TEST_CASE("clip_grad_norm rescales only above the threshold") {
    std::vector<double> g{3.0, 4.0};  // norm 5
    CHECK(clip_grad_norm(g, 10.0) == doctest::Approx(5.0));
    CHECK(g[0] == 3.0);
    CHECK(clip_grad_norm(g, 1.0) == doctest::Approx(5.0));
    CHECK(g[0] == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(g[1] == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("optimizer first step matches the closed form and weight decay decouples") {
    PolicyConfig c;
    c.vocab = 2;
    c.context_limit = 2;
    c.width = 2;
    c.n_layers = 1;
    c.n_heads = 1;
    auto params = PolicyParams<double>::zeros(c);
    params.tok_emb.at(0, 0) = 2.0;

    OptimConfig oc;
    oc.lr = 0.1;
    oc.weight_decay = 0.5;
    AdamW<double> opt(oc, params.param_count());
    std::vector<double> grad(params.param_count(), 0.0);
    grad[0] = 0.3;  // tok_emb[0][0] is the first flat coordinate

    opt.step(params, grad);
    // first step: mhat/(sqrt(vhat)+eps) ~ sign(g); plus decoupled decay lr*wd*theta
    const double expect = 2.0 - 0.1 * (0.3 / (std::sqrt(0.3 * 0.3) + 1e-8)) - 0.1 * 0.5 * 2.0;
    CHECK(params.tok_emb.at(0, 0) == doctest::Approx(expect).epsilon(1e-9));
    // untouched zero weights stay exactly zero (no decay on zero, no gradient)
    CHECK(params.tok_emb.at(0, 1) == 0.0);

    CHECK_THROWS_AS(opt.step(params, std::vector<double>(3, 0.0)), std::invalid_argument);
}
