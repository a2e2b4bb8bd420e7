#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "trlv/rng.hpp"
#include "trlv/schedule.hpp"

using namespace trlv;

TEST_CASE("schedule values match closed forms at the probe grid") {
    ScheduleConfig lin;  // linear, defaults
    ScheduleConfig sig = lin;
    sig.kind = ScheduleKind::sigmoid;
    ScheduleConfig gam = lin;
    gam.kind = ScheduleKind::gamma;

    const double taus[] = {0.0, 0.25, 0.5, 0.75, 1.0};
    const double sig_expect[] = {0.98201379003790845, 0.88079707797788231, 0.5,
                                 0.11920292202211755, 0.017986209962091559};
    const double gam_expect[] = {1.0, 0.5625, 0.25, 0.0625, 0.0};
    for (int i = 0; i < 5; ++i) {
        CHECK(std::abs(schedule_value(lin, taus[i]) - (1.0 - taus[i])) < 1e-12);
        CHECK(std::abs(schedule_value(sig, taus[i]) - sig_expect[i]) < 1e-12);
        CHECK(std::abs(schedule_value(gam, taus[i]) - gam_expect[i]) < 1e-12);
    }
    CHECK_THROWS_AS(schedule_value(lin, 1.5), std::invalid_argument);
    CHECK_THROWS_AS(schedule_value(lin, -0.1), std::invalid_argument);
}

TEST_CASE("progress clipping and rescaling is exact") {
    ScheduleConfig cfg;  // (tau_low, tau_high) = (0, 0.8)
    CHECK(normalized_progress(0, 200, cfg) == 0.0);
    CHECK(normalized_progress(200, 200, cfg) == 1.0);
    CHECK(normalized_progress(160, 200, cfg) == 1.0);  // tau = 0.8 hits the upper clip
    CHECK(normalized_progress(180, 200, cfg) == 1.0);
    CHECK(normalized_progress(80, 200, cfg) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(normalized_progress(40, 200, cfg) == doctest::Approx(0.25).epsilon(1e-15));

    ScheduleConfig window;
    window.tau_low = 0.2;
    window.tau_high = 0.6;
    CHECK(normalized_progress(20, 200, window) == 0.0);   // below the window
    CHECK(normalized_progress(40, 200, window) == 0.0);   // tau = 0.2, lower edge
    CHECK(normalized_progress(80, 200, window) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(normalized_progress(120, 200, window) == 1.0);
    CHECK(normalized_progress(199, 200, window) == 1.0);

    CHECK_THROWS_AS(normalized_progress(-1, 200, cfg), std::invalid_argument);
    CHECK_THROWS_AS(normalized_progress(201, 200, cfg), std::invalid_argument);
    ScheduleConfig bad;
    bad.tau_low = 0.8;
    bad.tau_high = 0.8;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("schedules are monotone non-increasing on [0,1]") {
    for (ScheduleKind kind : {ScheduleKind::linear, ScheduleKind::sigmoid, ScheduleKind::gamma}) {
        ScheduleConfig cfg;
        cfg.kind = kind;
        double prev = schedule_value(cfg, 0.0);
        CHECK(prev <= 1.0);
        for (int i = 1; i <= 100; ++i) {
            const double s = schedule_value(cfg, i / 100.0);
            CHECK(s <= prev + 1e-15);
            CHECK(s >= 0.0);
            prev = s;
        }
    }
}

TEST_CASE("trajectory-percentile proxy values are t/T, zero-based") {
    const auto mu = proxy_values(ProxyKind::tp_suffix, 4, {}, 0.0, 0);
    REQUIRE(mu.size() == 4);
    CHECK(mu[0] == 0.0);
    CHECK(mu[1] == 0.25);
    CHECK(mu[2] == 0.5);
    CHECK(mu[3] == 0.75);
    CHECK(proxy_values(ProxyKind::tp_prefix, 4, {}, 0.0, 0) == mu);

    const auto ent = proxy_values(ProxyKind::entropy, 3, {0.5, 1.5, 0.25}, 0.0, 0);
    CHECK(ent == std::vector<double>{0.5, 1.5, 0.25});
    CHECK_THROWS_AS(proxy_values(ProxyKind::entropy, 3, {0.5}, 0.0, 0), std::invalid_argument);

    for (double v : proxy_values(ProxyKind::none, 5, {}, 0.0, 0)) CHECK(v == 1.0);
    CHECK_THROWS_AS(proxy_values(ProxyKind::tp_suffix, 0, {}, 0.0, 0), std::invalid_argument);
}

TEST_CASE("suffix masks expand backward as S decreases, and nest") {
    const int T = 10;
    const auto mu = proxy_values(ProxyKind::tp_suffix, T, {}, 0.0, 0);

    // S=1, eps=1: threshold 1 exceeds every mu -> forced last token only
    const auto m1 = discrete_mask(mu, 1.0, 1.0, false);
    for (int t = 0; t < T - 1; ++t) CHECK(m1[t] == 0.0);
    CHECK(m1[T - 1] == 1.0);

    // S=0: everything included (vanilla recovery)
    const auto m0 = discrete_mask(mu, 0.0, 1.0, false);
    for (double v : m0) CHECK(v == 1.0);

    // S=0.5: keep t/T >= 0.5 -> positions 5..9
    const auto mh = discrete_mask(mu, 0.5, 1.0, false);
    for (int t = 0; t < T; ++t) CHECK(mh[t] == (t >= 5 ? 1.0 : 0.0));

    // masks nest: lower S never drops a token that higher S kept
    std::vector<double> prev(T, 0.0);
    for (double s : {1.0, 0.8, 0.6, 0.4, 0.2, 0.0}) {
        const auto m = discrete_mask(mu, s, 1.0, false);
        for (int t = 0; t < T; ++t) CHECK(m[t] >= prev[t]);
        prev = m;
    }
}

TEST_CASE("prefix masks mirror suffix masks") {
    const int T = 8;
    const auto mu = proxy_values(ProxyKind::tp_prefix, T, {}, 0.0, 0);
    // S=1, eps=1: keep mu <= 0 -> only position 0
    const auto m1 = discrete_mask(mu, 1.0, 1.0, true);
    CHECK(m1[0] == 1.0);
    for (int t = 1; t < T; ++t) CHECK(m1[t] == 0.0);
    // S=0.5: keep t/T <= 0.5 -> positions 0..4
    const auto mh = discrete_mask(mu, 0.5, 1.0, true);
    for (int t = 0; t < T; ++t) CHECK(mh[t] == (t <= 4 ? 1.0 : 0.0));
    // forced inclusion picks the first token when everything is excluded
    const auto forced = discrete_mask({0.9, 0.95, 1.0}, 1.0, 1.0, true);
    CHECK(forced == std::vector<double>{1.0, 0.0, 0.0});
}

TEST_CASE("entropy-threshold masks use S*eps in nats") {
    const std::vector<double> h{0.1, 0.5, 1.2, 0.05, 0.9};
    // stagnant-phase style: eps = 0.2 at S = 1 keeps H >= 0.2
    const auto m = discrete_mask(h, 1.0, 0.2, false);
    CHECK(m == std::vector<double>{0.0, 1.0, 1.0, 0.0, 1.0});
    // forced inclusion when the threshold excludes every token
    const auto none = discrete_mask({0.01, 0.02}, 1.0, 0.2, false);
    CHECK(none == std::vector<double>{0.0, 1.0});
}

TEST_CASE("random proxy draws Bernoulli(tau) with deterministic seeds") {
    const auto a = proxy_values(ProxyKind::random, 1000, {}, 0.3, 42);
    const auto b = proxy_values(ProxyKind::random, 1000, {}, 0.3, 42);
    CHECK(a == b);
    double mean = 0;
    for (double v : a) {
        CHECK((v == 0.0 || v == 1.0));
        mean += v;
    }
    mean /= 1000.0;
    CHECK(mean == doctest::Approx(0.3).epsilon(0.15));

    const auto c = proxy_values(ProxyKind::random, 1000, {}, 0.3, 43);
    CHECK(a != c);
    // tau=0 excludes everything pre-mask; tau=1 includes everything
    for (double v : proxy_values(ProxyKind::random, 50, {}, 0.0, 1)) CHECK(v == 0.0);
    for (double v : proxy_values(ProxyKind::random, 50, {}, 1.0, 1)) CHECK(v == 1.0);
}

TEST_CASE("continuous factors: literal and interpolated forms") {
    const std::vector<double> psi{0.5, 1.0, 2.0};
    const auto lit = continuous_factor(psi, 0.4, ContinuousForm::literal);
    CHECK(lit[0] == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(lit[1] == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(lit[2] == doctest::Approx(0.8).epsilon(1e-15));

    const auto interp = continuous_factor(psi, 0.4, ContinuousForm::interpolated);
    CHECK(interp[0] == doctest::Approx(0.6 + 0.2).epsilon(1e-15));
    CHECK(interp[1] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(interp[2] == doctest::Approx(0.6 + 0.8).epsilon(1e-15));

    // S=0 interpolated degenerates to uniform unit credit, literal to zero
    for (double v : continuous_factor(psi, 0.0, ContinuousForm::interpolated)) CHECK(v == 1.0);
    for (double v : continuous_factor(psi, 0.0, ContinuousForm::literal)) CHECK(v == 0.0);
    CHECK_THROWS_AS(continuous_factor({-0.5}, 0.5, ContinuousForm::literal),
                    std::invalid_argument);
}

TEST_CASE("entropy psi oracle: self-normalized clipped ratio") {
    // Hbar = 1.0, H = [0.1, 10.0] -> clipped to [0.2, 5.0]
    const auto psi = entropy_psi({0.1, 10.0}, 1.0, 0.2, 5.0);
    CHECK(psi[0] == doctest::Approx(0.2).epsilon(1e-9));
    CHECK(psi[1] == doctest::Approx(5.0).epsilon(1e-9));
    // H = 2*Hbar -> psi = 2 within the clip band
    const auto mid = entropy_psi({2.0}, 1.0, 0.2, 5.0);
    CHECK(mid[0] == doctest::Approx(2.0).epsilon(1e-7));
}

TEST_CASE("scheduled fraction tracks 1 - S within 1/T for the tp proxy") {
    for (int T : {1, 2, 3, 5, 8, 13, 21, 34, 64}) {
        const auto mu = proxy_values(ProxyKind::tp_suffix, T, {}, 0.0, 0);
        for (int i = 0; i <= 20; ++i) {
            const double s = i / 20.0;
            const auto mask = discrete_mask(mu, s, 1.0, false);
            double frac = 0;
            for (double v : mask) frac += v;
            frac /= T;
            CHECK(std::abs(frac - (1.0 - s)) <= 1.0 / T + 1e-12);
        }
    }
}

TEST_CASE("string conversions round-trip") {
    for (ScheduleKind k : {ScheduleKind::linear, ScheduleKind::sigmoid, ScheduleKind::gamma})
        CHECK(schedule_kind_from_string(to_string(k)) == k);
    for (ProxyKind k : {ProxyKind::none, ProxyKind::tp_suffix, ProxyKind::tp_prefix,
                        ProxyKind::entropy, ProxyKind::random})
        CHECK(proxy_kind_from_string(to_string(k)) == k);
    CHECK_THROWS_AS(schedule_kind_from_string("cosine"), std::invalid_argument);
    CHECK_THROWS_AS(proxy_kind_from_string("tp"), std::invalid_argument);
}
