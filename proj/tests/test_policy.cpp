#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "trlv/policy.hpp"
#include "trlv/tasks.hpp"

using namespace trlv;

namespace {

PolicyConfig tiny_cfg() {
    PolicyConfig c;
    c.vocab = 11;
    c.context_limit = 24;
    c.width = 8;
    c.n_layers = 2;
    c.n_heads = 2;
    return c;
}

}  // namespace

TEST_CASE("zero parameters give the uniform next-token distribution") {
    const auto cfg = tiny_cfg();
    const auto params = PolicyParams<double>::zeros(cfg);
    const auto logits = policy_forward(params, {1, 2, 3});
    for (const auto& row : logits) {
        const auto lp = log_softmax(row, 1.0);
        for (double v : lp) CHECK(v == doctest::Approx(-std::log(11.0)).epsilon(1e-12));
    }
    // and uniform sampling entropy is ln V
    DecodingConfig dec;
    dec.temperature = 1.0;
    dec.max_response_len = 5;
    dec.eos_id = 10;
    const auto traj = sample_trajectory(params, {0}, dec, 77);
    for (double h : traj.old_entropies) CHECK(h == doctest::Approx(std::log(11.0)).epsilon(1e-12));
}

TEST_CASE("causality: a future token never affects earlier logits") {
    const auto params = PolicyParams<double>::init(tiny_cfg(), 5);
    const std::vector<int> a{1, 2, 3, 4, 5};
    std::vector<int> b = a;
    b[4] = 9;
    const auto la = policy_forward(params, a);
    const auto lb = policy_forward(params, b);
    for (int t = 0; t < 4; ++t)
        for (int v = 0; v < 11; ++v) CHECK(la[t][v] == lb[t][v]);
    // while the changed position itself does differ
    bool any_diff = false;
    for (int v = 0; v < 11; ++v) any_diff = any_diff || la[4][v] != lb[4][v];
    CHECK(any_diff);
}

TEST_CASE("incremental decode equals full forward") {
    const auto params = PolicyParams<double>::init(tiny_cfg(), 6);
    const std::vector<int> ids{3, 1, 4, 1, 5, 9, 2, 6};
    const auto full = policy_forward(params, ids);
    InferenceRun<double> run(params);
    for (std::size_t t = 0; t < ids.size(); ++t) {
        const auto step = run.push_token(ids[t]);
        for (int v = 0; v < 11; ++v) CHECK(step[v] == full[t][v]);
    }
}

TEST_CASE("sampling is deterministic in the seed and varies across seeds") {
    const auto params = PolicyParams<float>::init(tiny_cfg(), 7);
    DecodingConfig dec;
    dec.temperature = 1.1;
    dec.max_response_len = 12;
    dec.eos_id = 10;
    const auto t1 = sample_trajectory(params, {1, 2}, dec, 1000);
    const auto t2 = sample_trajectory(params, {1, 2}, dec, 1000);
    CHECK(t1.response_ids == t2.response_ids);
    CHECK(t1.old_logprobs == t2.old_logprobs);
    CHECK(t1.old_entropies == t2.old_entropies);

    bool any_diff = false;
    for (int s = 0; s < 20 && !any_diff; ++s)
        any_diff = sample_trajectory(params, {1, 2}, dec, 2000 + s).response_ids !=
                   t1.response_ids;
    CHECK(any_diff);
}

TEST_CASE("trajectories stop at EOS or at the length cap") {
    const auto params = PolicyParams<float>::init(tiny_cfg(), 8);
    DecodingConfig dec;
    dec.max_response_len = 9;
    dec.eos_id = 10;
    for (int s = 0; s < 30; ++s) {
        const auto t = sample_trajectory(params, {2, 3}, dec, s);
        CHECK(t.length() >= 1);
        CHECK(t.length() <= 9);
        for (int i = 0; i + 1 < t.length(); ++i) CHECK(t.response_ids[i] != dec.eos_id);
        CHECK(t.old_logprobs.size() == t.response_ids.size());
        CHECK(t.old_entropies.size() == t.response_ids.size());
        for (double lp : t.old_logprobs) CHECK(lp <= 0.0);
    }
}

TEST_CASE("nucleus truncation oracle") {
    // [0.6, 0.3, 0.06, 0.04] with top_p=0.85: cumulative 0.6, 0.9 -> keep two,
    // renormalized to [2/3, 1/3]
    const auto kept = nucleus_truncate<double>({0.6, 0.3, 0.06, 0.04}, 0.85);
    REQUIRE(kept.size() == 2);
    CHECK(kept[0].first == 0);
    CHECK(kept[1].first == 1);
    CHECK(kept[0].second == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(kept[1].second == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

    // top_p = 1 keeps everything
    CHECK(nucleus_truncate<double>({0.25, 0.25, 0.25, 0.25}, 1.0).size() == 4);
    // tiny top_p keeps exactly the argmax
    const auto one = nucleus_truncate<double>({0.1, 0.7, 0.2}, 0.05);
    REQUIRE(one.size() == 1);
    CHECK(one[0].first == 1);
    CHECK(one[0].second == doctest::Approx(1.0));
    // ties broken by ascending id
    const auto tie = nucleus_truncate<double>({0.25, 0.25, 0.25, 0.25}, 0.5);
    REQUIRE(tie.size() == 2);
    CHECK(tie[0].first == 0);
    CHECK(tie[1].first == 1);
}

TEST_CASE("greedy decoding picks the modal token") {
    const auto params = PolicyParams<float>::init(tiny_cfg(), 9);
    DecodingConfig dec;
    dec.greedy = true;
    dec.max_response_len = 6;
    dec.eos_id = 10;
    const auto t1 = sample_trajectory(params, {4}, dec, 1);
    const auto t2 = sample_trajectory(params, {4}, dec, 999);  // seed must not matter
    CHECK(t1.response_ids == t2.response_ids);
}

TEST_CASE("stored logprobs and entropies re-score bit-identically on-policy") {
    const auto params = PolicyParams<float>::init(tiny_cfg(), 10);
    DecodingConfig dec;
    dec.temperature = 1.2;
    dec.max_response_len = 16;
    dec.eos_id = 10;
    for (int s = 0; s < 10; ++s) {
        const auto traj = sample_trajectory(params, {1, 2, 3}, dec, s);
        const auto [lps, ents] = token_logprobs_and_entropy(params, traj, dec.temperature);
        REQUIRE(lps.size() == traj.old_logprobs.size());
        for (std::size_t t = 0; t < lps.size(); ++t) {
            CHECK(lps[t] == traj.old_logprobs[t]);
            CHECK(ents[t] == traj.old_entropies[t]);
        }
    }
}

TEST_CASE("graph forward agrees with the incremental decoder") {
    const auto cfg = tiny_cfg();
    const auto params = PolicyParams<double>::init(cfg, 11);
    const std::vector<int> input{2, 7, 1, 8, 2, 8};
    const std::vector<int> rows{2, 3, 4, 5};
    const std::vector<int> targets{8, 2, 8, 1};

    Graph<double> g;
    const auto pnodes = register_policy_params(g, params);
    const auto lp_node = policy_logprobs_node(g, pnodes, cfg, input, rows, targets, 1.0);
    const auto& lp = g.value(lp_node);

    const auto logits = policy_forward(params, input);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto ref = log_softmax(logits[rows[i]], 1.0);
        CHECK(lp.data[i] == doctest::Approx(ref[targets[i]]).epsilon(1e-12));
    }
}

TEST_CASE("parameter traversal order is stable and counts are exact") {
    const auto cfg = tiny_cfg();
    auto params = PolicyParams<float>::init(cfg, 12);
    std::vector<std::string> names;
    params.for_each_tensor([&](const std::string& n, Tensor<float>&) { names.push_back(n); });
    REQUIRE(names.size() == 2 + 16 * 2 + 4);
    CHECK(names.front() == "tok_emb");
    CHECK(names[2] == "layers.0.ln1_g");
    CHECK(names[18] == "layers.1.ln1_g");
    CHECK(names.back() == "b_out");

    const int d = cfg.width, dff = 4 * d, V = cfg.vocab, L = cfg.context_limit;
    const std::size_t per_layer = 2 * d + 4 * (d * d + d) + 2 * d + (d * dff + dff) + (dff * d + d);
    CHECK(params.param_count() ==
          static_cast<std::size_t>(V * d + L * d + 2 * per_layer + 2 * d + d * V + V));
}

TEST_CASE("checkpoint round-trip preserves every parameter bit") {
    const auto dir = std::filesystem::temp_directory_path() / "trlv_policy_test";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "roundtrip.trlv").string();

    const auto params = PolicyParams<float>::init(tiny_cfg(), 13);
    save_checkpoint(params, path);
    const auto loaded = load_checkpoint<float>(path);
    CHECK(loaded.cfg.vocab == params.cfg.vocab);
    CHECK(loaded.cfg.context_limit == params.cfg.context_limit);
    CHECK(loaded.cfg.width == params.cfg.width);
    CHECK(loaded.cfg.n_layers == params.cfg.n_layers);
    CHECK(loaded.cfg.n_heads == params.cfg.n_heads);

    const auto a = params.tensors();
    const auto b = loaded.tensors();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        REQUIRE(a[i].shape == b[i].shape);
        for (std::size_t j = 0; j < a[i].data.size(); ++j) CHECK(a[i].data[j] == b[i].data[j]);
    }

    // loaded params decode identically
    DecodingConfig dec;
    dec.max_response_len = 8;
    dec.eos_id = 10;
    CHECK(sample_trajectory(params, {1}, dec, 5).response_ids ==
          sample_trajectory(loaded, {1}, dec, 5).response_ids);

    CHECK_THROWS_AS(load_checkpoint<float>((dir / "missing.trlv").string()), std::runtime_error);
    std::ofstream((dir / "garbage.trlv").string()) << "not a checkpoint";
    CHECK_THROWS_AS(load_checkpoint<float>((dir / "garbage.trlv").string()), std::runtime_error);
}

TEST_CASE("input validation") {
    const auto params = PolicyParams<double>::zeros(tiny_cfg());
    CHECK_THROWS_AS(policy_forward(params, std::vector<int>{}), std::invalid_argument);
    CHECK_THROWS_AS(policy_forward(params, std::vector<int>{11}), std::invalid_argument);
    CHECK_THROWS_AS(policy_forward(params, std::vector<int>(25, 1)), std::invalid_argument);
    DecodingConfig dec;
    dec.max_response_len = 30;  // prompt + response would exceed the context
    dec.eos_id = 10;
    CHECK_THROWS_AS(sample_trajectory(params, {1}, dec, 0), std::invalid_argument);
    PolicyConfig bad = tiny_cfg();
    bad.n_heads = 3;  // does not divide width
    CHECK_THROWS_AS(PolicyParams<double>::zeros(bad), std::invalid_argument);
}
