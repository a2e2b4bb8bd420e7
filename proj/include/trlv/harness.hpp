#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "trlv/analysis.hpp"
#include "trlv/grpo.hpp"
#include "trlv/policy.hpp"
#include "trlv/schedule.hpp"
#include "trlv/tasks.hpp"

namespace trlv {

struct TaskConfig {
    TaskKind kind = TaskKind::mod_add;
    int difficulty = 1;
    int train_instances = 80;
    int eval_instances = 20;
};

struct TrainLoopConfig {
    int total_steps = 200;
    int prompts_per_batch = 32;
    int group_size = 8;
    bool mean_only_advantage = false;
    int threads = 0;  // 0 = hardware concurrency
};

struct SeedConfig {
    std::uint64_t data = 1;
    std::uint64_t sampling = 2;
    std::uint64_t init = 3;
};

struct OutputConfig {
    std::string dir;           // empty = no files written
    int entropy_bins = 4;
    bool dump_rollouts = false;
};

struct ExperimentConfig {
    TaskConfig task;
    PolicyConfig policy;
    TrainLoopConfig training;
    DecodingConfig train_decoding{1.2, 1.0, 64, false, vocab::kEos, false};
    DecodingConfig eval_decoding{0.6, 0.95, 64, false, vocab::kEos, false};
    OptimConfig optimizer;
    ClipConfig clip;
    ScheduleConfig schedule;
    AllocationConfig allocation;
    std::optional<double> force_s;  // pins S(tau) to a constant (vanilla/equivalence presets)
    SeedConfig seeds;
    OutputConfig output;

    void validate() const;
};

/// Strict parse: every unknown key is a hard error, every field has a default.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);
std::string config_to_json(const ExperimentConfig& cfg);

struct MetricsRecord {
    int step = 0;               // 1-based update index
    double tau_raw = 0.0;       // (step-1)/N
    double tau_scheduled = 0.0;
    double s_value = 0.0;
    double mean_reward = 0.0;
    double mean_entropy = 0.0;  // full-sequence token entropy
    double grad_norm = 0.0;
    double scheduled_len_mean = 0.0;
    double scheduled_frac_mean = 0.0;
    double mean_response_len = 0.0;
    std::vector<double> entropy_bin_means;  // NaN marks empty bins
};

void export_metrics(const std::vector<MetricsRecord>& log, const std::string& csv_path,
                    const std::string& jsonl_path);
std::vector<MetricsRecord> import_metrics_csv(const std::string& path);

/// Scheduled training loop: rollout -> verify -> advantage -> credit ->
/// gradient -> update, one optimizer step per rollout batch.
class Trainer {
public:
    explicit Trainer(ExperimentConfig cfg);

    const MetricsRecord& step();
    void run_all();
    bool done() const { return step_ >= cfg_.training.total_steps; }

    const ExperimentConfig& config() const { return cfg_; }
    const PolicyParams<float>& params() const { return params_; }
    const std::vector<MetricsRecord>& log() const { return log_; }
    const std::vector<TaskInstance>& train_instances() const { return train_instances_; }
    const std::vector<TaskInstance>& eval_instances() const { return eval_instances_; }

    /// Test hook: observes the accumulated objective gradient each step.
    std::function<void(int step, const std::vector<float>&)> grad_hook;
    /// Test hook: observes the binary inclusion masks (one per trajectory).
    std::function<void(int step, const std::vector<std::vector<double>>&)> mask_hook;

private:
    ExperimentConfig cfg_;
    PolicyParams<float> params_;
    AdamW<float> optim_;
    std::vector<TaskInstance> train_instances_, eval_instances_;
    std::vector<MetricsRecord> log_;
    int step_ = 0;
    bool probe03_written_ = false, probe08_written_ = false;

    void write_outputs_for_step(const std::vector<Trajectory>& batch);
    void maybe_checkpoint();
};

double run_eval(const PolicyParams<float>& params, const std::vector<TaskInstance>& instances,
                int k, const DecodingConfig& decoding, std::uint64_t seed, int threads = 0);

struct SchedulePreviewRow {
    int step;
    double tau_raw, tau_clipped, s, expected_fraction;
};
std::vector<SchedulePreviewRow> schedule_preview(const ScheduleConfig& cfg, int steps);
void write_schedule_preview_csv(const std::vector<SchedulePreviewRow>& rows, std::ostream& os);

}  // namespace trlv
