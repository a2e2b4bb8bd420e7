#include "trlv/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "trlv/rng.hpp"

namespace trlv {

using nlohmann::json;

void ExperimentConfig::validate() const {
    policy.validate();
    train_decoding.validate();
    eval_decoding.validate();
    optimizer.validate();
    clip.validate();
    schedule.validate();
    allocation.validate();
    if (training.total_steps < 1) throw std::invalid_argument("config: total_steps must be >= 1");
    if (training.prompts_per_batch < 1)
        throw std::invalid_argument("config: prompts_per_batch must be >= 1");
    if (training.group_size < 2) throw std::invalid_argument("config: group_size must be >= 2");
    if (task.train_instances < 1 || task.eval_instances < 0)
        throw std::invalid_argument("config: instance counts");
    if (output.entropy_bins < 1) throw std::invalid_argument("config: entropy_bins must be >= 1");
    if (force_s && !(*force_s >= 0.0 && *force_s <= 1.0))
        throw std::invalid_argument("config: force_s must be in [0,1]");
    const int plen_bound = 2 * task.difficulty + 2;  // generous prompt bound for all kinds
    if (plen_bound + train_decoding.max_response_len > policy.context_limit)
        throw std::invalid_argument("config: prompt + max_response_len exceeds context limit");
}

namespace {

void check_keys(const json& j, const std::vector<std::string>& allowed, const std::string& ctx) {
    if (!j.is_object()) throw std::invalid_argument("config: " + ctx + " must be an object");
    for (const auto& [key, _] : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw std::invalid_argument("config: unknown key '" + key + "' in " + ctx);
    }
}

template <class T>
void get_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

void parse_decoding(const json& j, DecodingConfig& d, const std::string& ctx) {
    check_keys(j, {"temperature", "top_p", "max_response_len", "greedy", "record_raw_entropy"},
               ctx);
    get_if(j, "temperature", d.temperature);
    get_if(j, "top_p", d.top_p);
    get_if(j, "max_response_len", d.max_response_len);
    get_if(j, "greedy", d.greedy);
    get_if(j, "record_raw_entropy", d.record_raw_entropy);
}

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
    }
    ExperimentConfig cfg;
    check_keys(j,
               {"task", "policy", "training", "decoding", "optimizer", "clip", "schedule",
                "allocation", "seeds", "output"},
               "top level");
    if (j.contains("task")) {
        const auto& t = j["task"];
        check_keys(t, {"kind", "difficulty", "train_instances", "eval_instances"}, "task");
        if (t.contains("kind")) cfg.task.kind = task_kind_from_string(t["kind"].get<std::string>());
        get_if(t, "difficulty", cfg.task.difficulty);
        get_if(t, "train_instances", cfg.task.train_instances);
        get_if(t, "eval_instances", cfg.task.eval_instances);
    }
    if (j.contains("policy")) {
        const auto& p = j["policy"];
        check_keys(p, {"vocab", "context_limit", "width", "n_layers", "n_heads"}, "policy");
        get_if(p, "vocab", cfg.policy.vocab);
        get_if(p, "context_limit", cfg.policy.context_limit);
        get_if(p, "width", cfg.policy.width);
        get_if(p, "n_layers", cfg.policy.n_layers);
        get_if(p, "n_heads", cfg.policy.n_heads);
    }
    if (j.contains("training")) {
        const auto& t = j["training"];
        check_keys(t,
                   {"total_steps", "prompts_per_batch", "group_size", "mean_only_advantage",
                    "threads"},
                   "training");
        get_if(t, "total_steps", cfg.training.total_steps);
        get_if(t, "prompts_per_batch", cfg.training.prompts_per_batch);
        get_if(t, "group_size", cfg.training.group_size);
        get_if(t, "mean_only_advantage", cfg.training.mean_only_advantage);
        get_if(t, "threads", cfg.training.threads);
    }
    if (j.contains("decoding")) {
        const auto& d = j["decoding"];
        check_keys(d, {"train", "eval"}, "decoding");
        if (d.contains("train")) parse_decoding(d["train"], cfg.train_decoding, "decoding.train");
        if (d.contains("eval")) parse_decoding(d["eval"], cfg.eval_decoding, "decoding.eval");
    }
    if (j.contains("optimizer")) {
        const auto& o = j["optimizer"];
        check_keys(o, {"lr", "beta1", "beta2", "eps", "weight_decay", "max_grad_norm"},
                   "optimizer");
        get_if(o, "lr", cfg.optimizer.lr);
        get_if(o, "beta1", cfg.optimizer.beta1);
        get_if(o, "beta2", cfg.optimizer.beta2);
        get_if(o, "eps", cfg.optimizer.eps);
        get_if(o, "weight_decay", cfg.optimizer.weight_decay);
        get_if(o, "max_grad_norm", cfg.optimizer.max_grad_norm);
    }
    if (j.contains("clip")) {
        const auto& c = j["clip"];
        check_keys(c, {"eps_low", "eps_high"}, "clip");
        get_if(c, "eps_low", cfg.clip.eps_low);
        get_if(c, "eps_high", cfg.clip.eps_high);
    }
    if (j.contains("schedule")) {
        const auto& s = j["schedule"];
        check_keys(s,
                   {"kind", "tau_low", "tau_high", "sigmoid_k", "sigmoid_beta", "gamma_exp",
                    "force_s"},
                   "schedule");
        if (s.contains("kind"))
            cfg.schedule.kind = schedule_kind_from_string(s["kind"].get<std::string>());
        get_if(s, "tau_low", cfg.schedule.tau_low);
        get_if(s, "tau_high", cfg.schedule.tau_high);
        get_if(s, "sigmoid_k", cfg.schedule.sigmoid_k);
        get_if(s, "sigmoid_beta", cfg.schedule.sigmoid_beta);
        get_if(s, "gamma_exp", cfg.schedule.gamma_exp);
        if (s.contains("force_s") && !s["force_s"].is_null())
            cfg.force_s = s["force_s"].get<double>();
    }
    if (j.contains("allocation")) {
        const auto& a = j["allocation"];
        check_keys(a,
                   {"proxy", "mode", "epsilon", "continuous_form", "psi_clip_low",
                    "psi_clip_high"},
                   "allocation");
        if (a.contains("proxy"))
            cfg.allocation.proxy = proxy_kind_from_string(a["proxy"].get<std::string>());
        if (a.contains("mode")) {
            const std::string m = a["mode"].get<std::string>();
            if (m == "discrete")
                cfg.allocation.mode = AllocationMode::discrete;
            else if (m == "continuous")
                cfg.allocation.mode = AllocationMode::continuous;
            else
                throw std::invalid_argument("config: unknown allocation mode '" + m + "'");
        }
        get_if(a, "epsilon", cfg.allocation.epsilon);
        if (a.contains("continuous_form")) {
            const std::string f = a["continuous_form"].get<std::string>();
            if (f == "literal")
                cfg.allocation.continuous_form = ContinuousForm::literal;
            else if (f == "interpolated")
                cfg.allocation.continuous_form = ContinuousForm::interpolated;
            else
                throw std::invalid_argument("config: unknown continuous_form '" + f + "'");
        }
        get_if(a, "psi_clip_low", cfg.allocation.psi_clip_low);
        get_if(a, "psi_clip_high", cfg.allocation.psi_clip_high);
    }
    if (j.contains("seeds")) {
        const auto& s = j["seeds"];
        check_keys(s, {"data", "sampling", "init"}, "seeds");
        get_if(s, "data", cfg.seeds.data);
        get_if(s, "sampling", cfg.seeds.sampling);
        get_if(s, "init", cfg.seeds.init);
    }
    if (j.contains("output")) {
        const auto& o = j["output"];
        check_keys(o, {"dir", "entropy_bins", "dump_rollouts"}, "output");
        get_if(o, "dir", cfg.output.dir);
        get_if(o, "entropy_bins", cfg.output.entropy_bins);
        get_if(o, "dump_rollouts", cfg.output.dump_rollouts);
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::invalid_argument("config: cannot open " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config(ss.str());
}

std::string config_to_json(const ExperimentConfig& cfg) {
    json j;
    j["task"] = {{"kind", to_string(cfg.task.kind)},
                 {"difficulty", cfg.task.difficulty},
                 {"train_instances", cfg.task.train_instances},
                 {"eval_instances", cfg.task.eval_instances}};
    j["policy"] = {{"vocab", cfg.policy.vocab},
                   {"context_limit", cfg.policy.context_limit},
                   {"width", cfg.policy.width},
                   {"n_layers", cfg.policy.n_layers},
                   {"n_heads", cfg.policy.n_heads}};
    j["training"] = {{"total_steps", cfg.training.total_steps},
                     {"prompts_per_batch", cfg.training.prompts_per_batch},
                     {"group_size", cfg.training.group_size},
                     {"mean_only_advantage", cfg.training.mean_only_advantage},
                     {"threads", cfg.training.threads}};
    auto dec = [](const DecodingConfig& d) {
        return json{{"temperature", d.temperature},
                    {"top_p", d.top_p},
                    {"max_response_len", d.max_response_len},
                    {"greedy", d.greedy},
                    {"record_raw_entropy", d.record_raw_entropy}};
    };
    j["decoding"] = {{"train", dec(cfg.train_decoding)}, {"eval", dec(cfg.eval_decoding)}};
    j["optimizer"] = {{"lr", cfg.optimizer.lr},
                      {"beta1", cfg.optimizer.beta1},
                      {"beta2", cfg.optimizer.beta2},
                      {"eps", cfg.optimizer.eps},
                      {"weight_decay", cfg.optimizer.weight_decay},
                      {"max_grad_norm", cfg.optimizer.max_grad_norm}};
    j["clip"] = {{"eps_low", cfg.clip.eps_low}, {"eps_high", cfg.clip.eps_high}};
    j["schedule"] = {{"kind", to_string(cfg.schedule.kind)},
                     {"tau_low", cfg.schedule.tau_low},
                     {"tau_high", cfg.schedule.tau_high},
                     {"sigmoid_k", cfg.schedule.sigmoid_k},
                     {"sigmoid_beta", cfg.schedule.sigmoid_beta},
                     {"gamma_exp", cfg.schedule.gamma_exp}};
    if (cfg.force_s) j["schedule"]["force_s"] = *cfg.force_s;
    j["allocation"] = {
        {"proxy", to_string(cfg.allocation.proxy)},
        {"mode", cfg.allocation.mode == AllocationMode::discrete ? "discrete" : "continuous"},
        {"epsilon", cfg.allocation.epsilon},
        {"continuous_form",
         cfg.allocation.continuous_form == ContinuousForm::literal ? "literal" : "interpolated"},
        {"psi_clip_low", cfg.allocation.psi_clip_low},
        {"psi_clip_high", cfg.allocation.psi_clip_high}};
    j["seeds"] = {{"data", cfg.seeds.data}, {"sampling", cfg.seeds.sampling},
                  {"init", cfg.seeds.init}};
    j["output"] = {{"dir", cfg.output.dir},
                   {"entropy_bins", cfg.output.entropy_bins},
                   {"dump_rollouts", cfg.output.dump_rollouts}};
    return j.dump(2);
}

// ---------------------------------------------------------------------------
// Metrics export

void export_metrics(const std::vector<MetricsRecord>& log, const std::string& csv_path,
                    const std::string& jsonl_path) {
    const std::size_t n_bins = log.empty() ? 0 : log.front().entropy_bin_means.size();
    {
        std::ofstream os(csv_path);
        if (!os) throw std::runtime_error("export_metrics: cannot open " + csv_path);
        os << "step,tau_raw,tau_scheduled,s_value,mean_reward,mean_entropy,grad_norm,"
              "scheduled_len_mean,scheduled_frac_mean,mean_response_len";
        for (std::size_t b = 0; b < n_bins; ++b) os << ",ent_bin_" << b;
        os << "\n";
        if (log.empty()) {
            std::fprintf(stderr, "export_metrics: warning: empty metrics log\n");
        }
        for (const auto& r : log) {
            os << r.step << ',' << fmt17(r.tau_raw) << ',' << fmt17(r.tau_scheduled) << ','
               << fmt17(r.s_value) << ',' << fmt17(r.mean_reward) << ',' << fmt17(r.mean_entropy)
               << ',' << fmt17(r.grad_norm) << ',' << fmt17(r.scheduled_len_mean) << ','
               << fmt17(r.scheduled_frac_mean) << ',' << fmt17(r.mean_response_len);
            for (double b : r.entropy_bin_means) os << ',' << fmt17(b);
            os << "\n";
        }
        if (!os) throw std::runtime_error("export_metrics: write failed: " + csv_path);
    }
    if (!jsonl_path.empty()) {
        std::ofstream os(jsonl_path);
        if (!os) throw std::runtime_error("export_metrics: cannot open " + jsonl_path);
        for (const auto& r : log) {
            json j{{"step", r.step},
                   {"tau_raw", r.tau_raw},
                   {"tau_scheduled", r.tau_scheduled},
                   {"s_value", r.s_value},
                   {"mean_reward", r.mean_reward},
                   {"mean_entropy", r.mean_entropy},
                   {"grad_norm", r.grad_norm},
                   {"scheduled_len_mean", r.scheduled_len_mean},
                   {"scheduled_frac_mean", r.scheduled_frac_mean},
                   {"mean_response_len", r.mean_response_len}};
            json bins = json::array();
            for (double b : r.entropy_bin_means)
                bins.push_back(std::isnan(b) ? json() : json(b));
            j["entropy_bin_means"] = bins;
            os << j.dump() << '\n';
        }
    }
}

std::vector<MetricsRecord> import_metrics_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("import_metrics_csv: cannot open " + path);
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("import_metrics_csv: empty file");
    std::vector<MetricsRecord> out;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<double> fields;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) fields.push_back(std::strtod(cell.c_str(), nullptr));
        if (fields.size() < 10) throw std::runtime_error("import_metrics_csv: short row");
        MetricsRecord r;
        r.step = static_cast<int>(fields[0]);
        r.tau_raw = fields[1];
        r.tau_scheduled = fields[2];
        r.s_value = fields[3];
        r.mean_reward = fields[4];
        r.mean_entropy = fields[5];
        r.grad_norm = fields[6];
        r.scheduled_len_mean = fields[7];
        r.scheduled_frac_mean = fields[8];
        r.mean_response_len = fields[9];
        r.entropy_bin_means.assign(fields.begin() + 10, fields.end());
        out.push_back(std::move(r));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Trainer

Trainer::Trainer(ExperimentConfig cfg)
    : cfg_(std::move(cfg)),
      params_(PolicyParams<float>::init(
          [&] {
              cfg_.validate();
              return cfg_.policy;
          }(),
          cfg_.seeds.init)),
      optim_(cfg_.optimizer, params_.param_count()) {
    auto all = generate_instances(cfg_.task.kind, cfg_.task.train_instances + cfg_.task.eval_instances,
                                  cfg_.task.difficulty, cfg_.seeds.data);
    train_instances_.assign(all.begin(), all.begin() + cfg_.task.train_instances);
    eval_instances_.assign(all.begin() + cfg_.task.train_instances, all.end());

    if (!cfg_.output.dir.empty()) {
        std::filesystem::create_directories(cfg_.output.dir);
        std::ofstream(cfg_.output.dir + "/config.json") << config_to_json(cfg_);
        dump_instances(train_instances_, cfg_.output.dir + "/train_instances.jsonl");
        dump_instances(eval_instances_, cfg_.output.dir + "/eval_instances.jsonl");
        save_checkpoint(params_, cfg_.output.dir + "/ckpt_init.trlv");
    }
}

const MetricsRecord& Trainer::step() {
    if (done()) throw std::runtime_error("Trainer::step: training already finished");
    const int step0 = step_;  // 0-based progress index for the schedule
    const int N = cfg_.training.total_steps;
    const int B = cfg_.training.prompts_per_batch;
    const int G = cfg_.training.group_size;

    const double tau_raw = static_cast<double>(step0) / static_cast<double>(N);
    const double tau_sched = normalized_progress(step0, N, cfg_.schedule);
    const double s_value = cfg_.force_s ? *cfg_.force_s : schedule_value(cfg_.schedule, tau_sched);

    // prompt selection: partial Fisher-Yates over the train pool
    Rng data_rng(Rng::mix(cfg_.seeds.data, 0xda7a5e1ULL, static_cast<std::uint64_t>(step0)));
    std::vector<int> pool(train_instances_.size());
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = static_cast<int>(i);
    std::vector<int> chosen(B);
    for (int i = 0; i < B; ++i) {
        if (static_cast<std::size_t>(i) < pool.size()) {
            const std::size_t j = i + static_cast<std::size_t>(data_rng.below(pool.size() - i));
            std::swap(pool[i], pool[j]);
            chosen[i] = pool[i];
        } else {
            chosen[i] = pool[data_rng.below(pool.size())];
        }
    }

    // parallel rollout generation, one seeded stream per (prompt, sample)
    std::vector<Trajectory> batch(static_cast<std::size_t>(B) * G);
    {
        std::atomic<int> next{0};
        auto worker = [&]() {
            while (true) {
                const int i = next.fetch_add(1);
                if (i >= B * G) break;
                const int p = i / G, g = i % G;
                const std::uint64_t seed =
                    Rng::mix(cfg_.seeds.sampling, static_cast<std::uint64_t>(step0),
                             static_cast<std::uint64_t>(p), static_cast<std::uint64_t>(g));
                const TaskInstance& inst = train_instances_[chosen[p]];
                batch[i] = sample_trajectory(params_, inst.prompt_ids, cfg_.train_decoding, seed);
                batch[i].reward = verify(inst, batch[i].response_ids).reward;
            }
        };
        int n_threads = cfg_.training.threads > 0
                            ? cfg_.training.threads
                            : static_cast<int>(std::thread::hardware_concurrency());
        n_threads = std::max(1, std::min(n_threads, B * G));
        std::vector<std::thread> ts;
        for (int t = 1; t < n_threads; ++t) ts.emplace_back(worker);
        worker();
        for (auto& t : ts) t.join();
    }

    std::vector<RolloutGroup> groups(B);
    double reward_sum = 0, ent_sum = 0, len_sum = 0;
    long long tok_count = 0;
    for (int p = 0; p < B; ++p) {
        std::vector<double> rewards(G);
        for (int g = 0; g < G; ++g) {
            Trajectory& t = batch[static_cast<std::size_t>(p) * G + g];
            rewards[g] = t.reward;
            reward_sum += t.reward;
            len_sum += t.length();
            for (double e : t.old_entropies) ent_sum += e;
            tok_count += t.length();
            groups[p].trajectories.push_back(std::move(t));
        }
        groups[p].advantages = group_advantages(rewards, cfg_.training.mean_only_advantage);
    }
    const double batch_mean_entropy = tok_count > 0 ? ent_sum / static_cast<double>(tok_count) : 0;

    // credit allocation factors
    std::vector<std::vector<std::vector<double>>> credits(B);
    std::vector<std::vector<double>> binary_masks;
    for (int p = 0; p < B; ++p) {
        credits[p].resize(G);
        for (int g = 0; g < G; ++g) {
            const Trajectory& t = groups[p].trajectories[g];
            const std::uint64_t cred_seed =
                Rng::mix(cfg_.seeds.sampling, 0xc4ed17ULL, static_cast<std::uint64_t>(step0),
                         static_cast<std::uint64_t>(p * G + g));
            std::vector<double>& f = credits[p][g];
            if (cfg_.allocation.proxy == ProxyKind::none) {
                f.assign(t.response_ids.size(), 1.0);
            } else {
                const auto mu = proxy_values(cfg_.allocation.proxy, t.length(), t.old_entropies,
                                             tau_sched, cred_seed);
                if (cfg_.allocation.mode == AllocationMode::discrete) {
                    f = discrete_mask(mu, s_value, cfg_.allocation.epsilon,
                                      cfg_.allocation.proxy == ProxyKind::tp_prefix);
                } else {
                    std::vector<double> psi =
                        cfg_.allocation.proxy == ProxyKind::entropy
                            ? entropy_psi(t.old_entropies, batch_mean_entropy,
                                          cfg_.allocation.psi_clip_low,
                                          cfg_.allocation.psi_clip_high)
                            : mu;
                    f = continuous_factor(psi, s_value, cfg_.allocation.continuous_form);
                }
            }
            std::vector<double> bin(f.size());
            for (std::size_t i = 0; i < f.size(); ++i) bin[i] = f[i] != 0.0 ? 1.0 : 0.0;
            binary_masks.push_back(std::move(bin));
        }
    }

    if (mask_hook) mask_hook(step_ + 1, binary_masks);

    GradStats stats;
    std::vector<float> grad = accumulate_policy_gradient(
        groups, credits, params_, cfg_.clip, cfg_.train_decoding.temperature, &stats,
        cfg_.training.threads);
    if (grad_hook) grad_hook(step_ + 1, grad);
    for (float v : grad)
        if (!std::isfinite(v))
            throw std::runtime_error("training aborted: non-finite gradient at step " +
                                     std::to_string(step_ + 1));

    // ascent on the objective: minimize its negation, clip at the stated norm
    std::vector<float> loss_grad(grad.size());
    for (std::size_t i = 0; i < grad.size(); ++i) loss_grad[i] = -grad[i];
    clip_grad_norm(loss_grad, cfg_.optimizer.max_grad_norm);
    optim_.step(params_, loss_grad);
    if (!params_.shape_audit())
        throw std::runtime_error("training aborted: non-finite parameters at step " +
                                 std::to_string(step_ + 1));

    MetricsRecord rec;
    rec.step = step_ + 1;
    rec.tau_raw = tau_raw;
    rec.tau_scheduled = tau_sched;
    rec.s_value = s_value;
    rec.mean_reward = reward_sum / static_cast<double>(B * G);
    rec.mean_entropy = batch_mean_entropy;
    rec.grad_norm = stats.grad_norm;
    const auto [len_mean, frac_mean] = scheduled_length_stats(binary_masks);
    rec.scheduled_len_mean = len_mean;
    rec.scheduled_frac_mean = frac_mean;
    rec.mean_response_len = len_sum / static_cast<double>(B * G);
    std::vector<Trajectory> flat;
    for (auto& grp : groups)
        for (auto& t : grp.trajectories) flat.push_back(std::move(t));
    const auto bins = entropy_by_percentile(flat, cfg_.output.entropy_bins);
    for (const auto& m : bins.mean)
        rec.entropy_bin_means.push_back(m ? *m : std::numeric_limits<double>::quiet_NaN());
    log_.push_back(std::move(rec));
    ++step_;

    if (!cfg_.output.dir.empty()) {
        maybe_checkpoint();
        if (cfg_.output.dump_rollouts) write_outputs_for_step(flat);
    }
    return log_.back();
}

void Trainer::maybe_checkpoint() {
    const int cadence = std::max(1, cfg_.training.total_steps / 10);
    char buf[64];
    if (step_ % cadence == 0 || step_ == cfg_.training.total_steps) {
        std::snprintf(buf, sizeof(buf), "/ckpt_step%04d.trlv", step_);
        save_checkpoint(params_, cfg_.output.dir + buf);
    }
    const double tau_sched = log_.back().tau_scheduled;
    if (!probe03_written_ && tau_sched >= 0.3) {
        probe03_written_ = true;
        save_checkpoint(params_, cfg_.output.dir + "/ckpt_probe_tau03.trlv");
    }
    if (!probe08_written_ && tau_sched >= 0.8) {
        probe08_written_ = true;
        save_checkpoint(params_, cfg_.output.dir + "/ckpt_probe_tau08.trlv");
    }
}

void Trainer::write_outputs_for_step(const std::vector<Trajectory>& batch) {
    const int cadence = std::max(1, cfg_.training.total_steps / 10);
    if (step_ % cadence != 0 && step_ != 1 && step_ != cfg_.training.total_steps) return;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "/rollouts_step%04d.jsonl", step_);
    dump_rollouts(batch, cfg_.output.dir + buf);
}

void Trainer::run_all() {
    while (!done()) step();
    if (!cfg_.output.dir.empty()) {
        export_metrics(log_, cfg_.output.dir + "/metrics.csv", cfg_.output.dir + "/metrics.jsonl");
        save_checkpoint(params_, cfg_.output.dir + "/ckpt_final.trlv");
    }
}

double run_eval(const PolicyParams<float>& params, const std::vector<TaskInstance>& instances,
                int k, const DecodingConfig& decoding, std::uint64_t seed, int threads) {
    if (k < 1) throw std::invalid_argument("run_eval: k must be >= 1");
    if (instances.empty()) throw std::invalid_argument("run_eval: no instances");
    for (const auto& inst : instances)
        for (int id : inst.prompt_ids)
            if (id >= params.cfg.vocab)
                throw std::invalid_argument("run_eval: instance vocabulary exceeds checkpoint vocab");
    const int total = static_cast<int>(instances.size()) * k;
    std::vector<int> correct(total, 0);
    std::atomic<int> next{0};
    auto worker = [&]() {
        while (true) {
            const int i = next.fetch_add(1);
            if (i >= total) break;
            const int inst_idx = i / k, sample = i % k;
            const std::uint64_t s = Rng::mix(seed, 0xe7a1ULL, static_cast<std::uint64_t>(inst_idx),
                                             static_cast<std::uint64_t>(sample));
            const Trajectory t =
                sample_trajectory(params, instances[inst_idx].prompt_ids, decoding, s);
            correct[i] = verify(instances[inst_idx], t.response_ids).reward;
        }
    };
    int n_threads = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
    n_threads = std::max(1, std::min(n_threads, total));
    std::vector<std::thread> ts;
    for (int t = 1; t < n_threads; ++t) ts.emplace_back(worker);
    worker();
    for (auto& t : ts) t.join();
    double sum = 0;
    for (int c : correct) sum += c;
    return sum / static_cast<double>(total);
}

std::vector<SchedulePreviewRow> schedule_preview(const ScheduleConfig& cfg, int steps) {
    if (steps < 1) throw std::invalid_argument("schedule_preview: steps must be >= 1");
    cfg.validate();
    std::vector<SchedulePreviewRow> rows;
    for (int s = 0; s <= steps; ++s) {
        SchedulePreviewRow r;
        r.step = s;
        r.tau_raw = static_cast<double>(s) / static_cast<double>(steps);
        r.tau_clipped = normalized_progress(s, steps, cfg);
        r.s = schedule_value(cfg, r.tau_clipped);
        r.expected_fraction = std::max(0.0, 1.0 - r.s);
        rows.push_back(r);
    }
    return rows;
}

void write_schedule_preview_csv(const std::vector<SchedulePreviewRow>& rows, std::ostream& os) {
    os << "step,tau_raw,tau_clipped,S,expected_fraction\n";
    for (const auto& r : rows)
        os << r.step << ',' << fmt17(r.tau_raw) << ',' << fmt17(r.tau_clipped) << ','
           << fmt17(r.s) << ',' << fmt17(r.expected_fraction) << "\n";
}

}  // namespace trlv
