#include "trlv/analysis.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace trlv {

void PositionRangeSet::validate() const {
    if (centers.empty()) throw std::invalid_argument("PositionRangeSet: no centers");
    if (!(delta > 0.0)) throw std::invalid_argument("PositionRangeSet: delta must be > 0");
    double prev = 0.0;
    for (double p : centers) {
        if (!(p > 0.0 && p <= 1.0))
            throw std::invalid_argument("PositionRangeSet: centers must lie in (0,1]");
        if (p <= prev && prev != 0.0)
            throw std::invalid_argument("PositionRangeSet: centers must be strictly increasing");
        if (p + delta <= 0.0 || p - delta >= 1.0)
            throw std::invalid_argument("PositionRangeSet: range does not intersect (0,1]");
        prev = p;
    }
}

int PositionRangeSet::range_of(double x) const {
    for (std::size_t i = 0; i < centers.size(); ++i)
        if (x > centers[i] - delta && x < centers[i] + delta) return static_cast<int>(i);
    return -1;
}

TPScoreTable position_histogram(const std::vector<Trajectory>& corpus,
                                const PositionRangeSet& ranges, int vocab_size) {
    ranges.validate();
    TPScoreTable table;
    table.counts.assign(vocab_size, std::vector<long long>(ranges.centers.size(), 0));
    for (const Trajectory& traj : corpus) {
        const int T = traj.length();
        if (T < 1) throw std::invalid_argument("position_histogram: empty trajectory");
        for (int t = 0; t < T; ++t) {
            const int r = ranges.range_of(static_cast<double>(t) / static_cast<double>(T));
            if (r < 0) continue;
            const int tok = traj.response_ids[t];
            if (tok < 0 || tok >= vocab_size)
                throw std::invalid_argument("position_histogram: token id out of vocab");
            ++table.counts[tok][r];
        }
    }
    return table;
}

std::optional<double> tp_score(const std::vector<long long>& counts,
                               const std::vector<double>& centers) {
    if (counts.size() != centers.size())
        throw std::invalid_argument("tp_score: counts/centers length mismatch");
    long long total = 0;
    double weighted = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (counts[i] < 0) throw std::invalid_argument("tp_score: negative count");
        total += counts[i];
        weighted += static_cast<double>(counts[i]) * centers[i];
    }
    if (total == 0) return std::nullopt;
    return weighted / static_cast<double>(total);
}

PercentileBins entropy_by_percentile(const std::vector<Trajectory>& corpus, int n_bins) {
    if (n_bins < 1) throw std::invalid_argument("entropy_by_percentile: n_bins must be >= 1");
    std::vector<double> sums(n_bins, 0.0);
    PercentileBins bins;
    bins.count.assign(n_bins, 0);
    bins.mean.assign(n_bins, std::nullopt);
    for (const Trajectory& traj : corpus) {
        const int T = traj.length();
        if (static_cast<int>(traj.old_entropies.size()) != T)
            throw std::invalid_argument("entropy_by_percentile: entropy list length mismatch");
        for (int t = 0; t < T; ++t) {
            const int bin = std::min(n_bins - 1, static_cast<int>(n_bins * t / T));
            sums[bin] += traj.old_entropies[t];
            ++bins.count[bin];
        }
    }
    for (int b = 0; b < n_bins; ++b)
        if (bins.count[b] > 0) bins.mean[b] = sums[b] / static_cast<double>(bins.count[b]);
    return bins;
}

std::pair<double, double> scheduled_length_stats(const std::vector<std::vector<double>>& masks) {
    if (masks.empty()) return {0.0, 0.0};
    double count_sum = 0.0, frac_sum = 0.0;
    for (const auto& mask : masks) {
        if (mask.empty()) throw std::invalid_argument("scheduled_length_stats: empty mask");
        double n = 0;
        for (double m : mask) {
            if (m != 0.0 && m != 1.0)
                throw std::invalid_argument("scheduled_length_stats: mask must be binary");
            n += m;
        }
        count_sum += n;
        frac_sum += n / static_cast<double>(mask.size());
    }
    const double b = static_cast<double>(masks.size());
    return {count_sum / b, frac_sum / b};
}

void dump_rollouts(const std::vector<Trajectory>& corpus, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("dump_rollouts: cannot open " + path);
    for (const Trajectory& t : corpus) {
        nlohmann::json j{{"prompt_ids", t.prompt_ids},
                         {"response_ids", t.response_ids},
                         {"logprobs", t.old_logprobs},
                         {"entropies", t.old_entropies},
                         {"reward", t.reward}};
        os << j.dump() << '\n';
    }
}

std::vector<Trajectory> load_rollouts(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("load_rollouts: cannot open " + path);
    std::vector<Trajectory> out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const nlohmann::json j = nlohmann::json::parse(line);
        Trajectory t;
        t.prompt_ids = j.at("prompt_ids").get<std::vector<int>>();
        t.response_ids = j.at("response_ids").get<std::vector<int>>();
        t.old_logprobs = j.at("logprobs").get<std::vector<double>>();
        t.old_entropies = j.at("entropies").get<std::vector<double>>();
        t.reward = j.at("reward").get<int>();
        out.push_back(std::move(t));
    }
    return out;
}

}  // namespace trlv
