// Command-line front end: train / eval / analyze / schedule subcommands.
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "trlv/analysis.hpp"
#include "trlv/harness.hpp"

namespace {

int log_verbosity() {
    const char* v = std::getenv("TRLV_LOG");
    if (!v) return 1;
    const std::string s = v;
    if (s == "quiet" || s == "0") return 0;
    if (s == "debug" || s == "2") return 2;
    return 1;
}

int run_train(const std::string& config_path, long long seed_override, const std::string& out_dir) {
    trlv::ExperimentConfig cfg = trlv::load_config(config_path);
    if (seed_override >= 0) {
        cfg.seeds.sampling = static_cast<std::uint64_t>(seed_override);
        cfg.seeds.init = trlv::Rng::mix(static_cast<std::uint64_t>(seed_override), 1);
        cfg.seeds.data = trlv::Rng::mix(static_cast<std::uint64_t>(seed_override), 2);
    }
    if (!out_dir.empty()) cfg.output.dir = out_dir;
    cfg.validate();

    trlv::Trainer trainer(std::move(cfg));
    const int verbosity = log_verbosity();
    while (!trainer.done()) {
        const trlv::MetricsRecord& r = trainer.step();
        if (verbosity >= 1 &&
            (verbosity >= 2 || r.step % 10 == 0 || r.step == 1 ||
             r.step == trainer.config().training.total_steps)) {
            std::fprintf(stderr,
                         "step %4d  S=%.4f  reward=%.4f  entropy=%.4f  grad_norm=%.4f  "
                         "sched_frac=%.3f  len=%.1f\n",
                         r.step, r.s_value, r.mean_reward, r.mean_entropy, r.grad_norm,
                         r.scheduled_frac_mean, r.mean_response_len);
        }
    }
    if (!trainer.config().output.dir.empty()) {
        trlv::export_metrics(trainer.log(), trainer.config().output.dir + "/metrics.csv",
                             trainer.config().output.dir + "/metrics.jsonl");
        trlv::save_checkpoint(trainer.params(), trainer.config().output.dir + "/ckpt_final.trlv");
        const double avg = trlv::run_eval(trainer.params(), trainer.eval_instances(), 4,
                                          trainer.config().eval_decoding,
                                          trlv::Rng::mix(trainer.config().seeds.sampling, 0xe7a1ULL),
                                          trainer.config().training.threads);
        std::printf("final_avg_at_4 %.6f\n", avg);
    } else {
        std::printf("final_mean_reward %.6f\n", trainer.log().back().mean_reward);
    }
    return 0;
}

int run_eval_cmd(const std::string& ckpt_path, const std::string& task, int k, int difficulty,
                 int instances, long long seed, double temperature, double top_p, int threads) {
    const auto params = trlv::load_checkpoint<float>(ckpt_path);
    const auto insts = trlv::generate_instances(trlv::task_kind_from_string(task), instances,
                                                difficulty, static_cast<std::uint64_t>(seed));
    trlv::DecodingConfig dec;
    dec.temperature = temperature;
    dec.top_p = top_p;
    dec.max_response_len = 64;
    const double avg = trlv::run_eval(params, insts, k, dec,
                                      trlv::Rng::mix(static_cast<std::uint64_t>(seed), 0x1eadULL),
                                      threads);
    std::printf("avg_at_%d %.6f\n", k, avg);
    return 0;
}

int run_analyze_tpscore(const std::string& rollouts_path, const std::string& out_path) {
    const auto corpus = trlv::load_rollouts(rollouts_path);
    trlv::PositionRangeSet ranges;
    const auto table = trlv::position_histogram(corpus, ranges, trlv::vocab::kSize);
    std::ostream* os = &std::cout;
    std::ofstream file;
    if (!out_path.empty()) {
        file.open(out_path);
        if (!file) throw std::runtime_error("analyze: cannot open " + out_path);
        os = &file;
    }
    *os << "token_id";
    for (double c : ranges.centers) *os << ",count_" << c;
    *os << ",score\n";
    for (int tok = 0; tok < trlv::vocab::kSize; ++tok) {
        *os << tok;
        for (long long c : table.counts[tok]) *os << ',' << c;
        const auto score = trlv::tp_score(table.counts[tok], ranges.centers);
        if (score)
            *os << ',' << *score << "\n";
        else
            *os << ",\n";
    }
    return 0;
}

int run_analyze_entropy(const std::string& rollouts_path, int bins, const std::string& out_path) {
    const auto corpus = trlv::load_rollouts(rollouts_path);
    const auto result = trlv::entropy_by_percentile(corpus, bins);
    std::ostream* os = &std::cout;
    std::ofstream file;
    if (!out_path.empty()) {
        file.open(out_path);
        if (!file) throw std::runtime_error("analyze: cannot open " + out_path);
        os = &file;
    }
    *os << "bin,count,mean_entropy\n";
    for (int b = 0; b < bins; ++b) {
        *os << b << ',' << result.count[b] << ',';
        if (result.mean[b])
            *os << *result.mean[b] << "\n";
        else
            *os << "\n";
    }
    return 0;
}

int run_analyze_kl(const std::string& rollouts_path, const std::string& ckpt_a,
                   const std::string& ckpt_b, int bins, const std::string& out_path) {
    const auto corpus = trlv::load_rollouts(rollouts_path);
    const auto pa = trlv::load_checkpoint<float>(ckpt_a);
    const auto pb = trlv::load_checkpoint<float>(ckpt_b);
    const auto result = trlv::kl_by_percentile(pa, pb, corpus, bins);
    std::ostream* os = &std::cout;
    std::ofstream file;
    if (!out_path.empty()) {
        file.open(out_path);
        if (!file) throw std::runtime_error("analyze: cannot open " + out_path);
        os = &file;
    }
    *os << "bin,count,mean_kl,normalized,tainted\n";
    for (int b = 0; b < bins; ++b) {
        *os << b << ',' << result.count[b] << ',' << result.raw_mean[b] << ','
            << (result.all_zero ? 0.0 : result.normalized[b]) << ','
            << (result.tainted[b] ? 1 : 0) << "\n";
    }
    if (result.all_zero) std::fprintf(stderr, "analyze kl: total divergence is zero\n");
    return 0;
}

int run_schedule_preview(const std::string& kind, double tau_low, double tau_high, int steps,
                         const std::string& out_path) {
    trlv::ScheduleConfig cfg;
    cfg.kind = trlv::schedule_kind_from_string(kind);
    cfg.tau_low = tau_low;
    cfg.tau_high = tau_high;
    const auto rows = trlv::schedule_preview(cfg, steps);
    if (out_path.empty()) {
        trlv::write_schedule_preview_csv(rows, std::cout);
    } else {
        std::ofstream file(out_path);
        if (!file) throw std::runtime_error("schedule preview: cannot open " + out_path);
        trlv::write_schedule_preview_csv(rows, file);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Scheduled-credit GRPO laboratory"};
    app.require_subcommand(1);

    // train
    auto* train = app.add_subcommand("train", "Run a training experiment from a JSON config");
    std::string train_config, train_out;
    long long train_seed = -1;
    train->add_option("--config", train_config, "Experiment config (JSON)")->required();
    train->add_option("--seed", train_seed, "Override sampling/init/data seeds");
    train->add_option("--out", train_out, "Override output directory");

    // eval
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint with Avg@k");
    std::string eval_ckpt, eval_task = "mod_add";
    int eval_k = 4, eval_difficulty = 1, eval_instances = 20, eval_threads = 0;
    long long eval_seed = 7;
    double eval_temp = 0.6, eval_top_p = 0.95;
    eval->add_option("--checkpoint", eval_ckpt, "Checkpoint path")->required();
    eval->add_option("--task", eval_task, "Task kind: mod_add|reverse|brackets")->required();
    eval->add_option("--k", eval_k, "Samples per instance")->required();
    eval->add_option("--difficulty", eval_difficulty, "Task difficulty");
    eval->add_option("--instances", eval_instances, "Number of instances");
    eval->add_option("--seed", eval_seed, "Instance/sampling seed");
    eval->add_option("--temperature", eval_temp, "Sampling temperature");
    eval->add_option("--top-p", eval_top_p, "Nucleus truncation mass");
    eval->add_option("--threads", eval_threads, "Worker threads (0 = hardware)");

    // analyze tpscore|entropy|kl
    auto* analyze = app.add_subcommand("analyze", "Analysis over rollout dumps");
    analyze->require_subcommand(1);
    std::string an_rollouts, an_out, an_ckpt_a, an_ckpt_b;
    int an_bins = 4;
    auto* tpscore = analyze->add_subcommand("tpscore", "Per-token positional scores");
    tpscore->add_option("--rollouts", an_rollouts, "Rollout dump (JSONL)")->required();
    tpscore->add_option("--out", an_out, "Output CSV (default stdout)");
    auto* entropy = analyze->add_subcommand("entropy", "Mean entropy by percentile bin");
    entropy->add_option("--rollouts", an_rollouts, "Rollout dump (JSONL)")->required();
    entropy->add_option("--bins", an_bins, "Percentile bin count");
    entropy->add_option("--out", an_out, "Output CSV (default stdout)");
    auto* kl = analyze->add_subcommand("kl", "Policy divergence by percentile bin");
    kl->add_option("--rollouts", an_rollouts, "Probe trajectories (JSONL)")->required();
    kl->add_option("--checkpoint-a", an_ckpt_a, "First checkpoint")->required();
    kl->add_option("--checkpoint-b", an_ckpt_b, "Second checkpoint")->required();
    kl->add_option("--bins", an_bins, "Percentile bin count");
    kl->add_option("--out", an_out, "Output CSV (default stdout)");

    // schedule preview
    auto* schedule = app.add_subcommand("schedule", "Schedule utilities");
    schedule->require_subcommand(1);
    auto* preview = schedule->add_subcommand("preview", "Emit the S(tau) curve as CSV");
    std::string sp_kind = "linear", sp_out;
    double sp_tau_low = 0.0, sp_tau_high = 0.8;
    int sp_steps = 200;
    preview->add_option("--kind", sp_kind, "linear|sigmoid|gamma")->required();
    preview->add_option("--tau-low", sp_tau_low, "Temporal range lower bound");
    preview->add_option("--tau-high", sp_tau_high, "Temporal range upper bound");
    preview->add_option("--steps", sp_steps, "Total training steps")->required();
    preview->add_option("--out", sp_out, "Output CSV (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // bad usage is a config error
    }

    try {
        if (*train) return run_train(train_config, train_seed, train_out);
        if (*eval)
            return run_eval_cmd(eval_ckpt, eval_task, eval_k, eval_difficulty, eval_instances,
                                eval_seed, eval_temp, eval_top_p, eval_threads);
        if (*tpscore) return run_analyze_tpscore(an_rollouts, an_out);
        if (*entropy) return run_analyze_entropy(an_rollouts, an_bins, an_out);
        if (*kl) return run_analyze_kl(an_rollouts, an_ckpt_a, an_ckpt_b, an_bins, an_out);
        if (*preview) return run_schedule_preview(sp_kind, sp_tau_low, sp_tau_high, sp_steps, sp_out);
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 2;
}
