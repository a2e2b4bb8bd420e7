#include "trlv/tasks.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "trlv/rng.hpp"

namespace trlv {

namespace vocab {

std::string token_name(int id) {
    if (id >= kDigit0 && id < kDigit0 + 10) return std::string(1, static_cast<char>('0' + id));
    if (id >= kLetterA && id < kLetterA + kNumLetters)
        return std::string(1, static_cast<char>('a' + id - kLetterA));
    switch (id) {
    case kOpenParen: return "(";
    case kCloseParen: return ")";
    case kOpenSquare: return "[";
    case kCloseSquare: return "]";
    case kPlus: return "+";
    case kQuery: return "=";
    case kAnswer: return "#";
    case kEos: return "<eos>";
    case kBos: return "<bos>";
    case kSpare: return "*";
    default: return "<?" + std::to_string(id) + ">";
    }
}

std::string render(const std::vector<int>& ids) {
    std::string out;
    for (int id : ids) out += token_name(id);
    return out;
}

}  // namespace vocab

TaskKind task_kind_from_string(const std::string& s) {
    if (s == "mod_add") return TaskKind::mod_add;
    if (s == "reverse") return TaskKind::reverse;
    if (s == "brackets") return TaskKind::brackets;
    throw std::invalid_argument("unknown task kind: " + s);
}

std::string to_string(TaskKind k) {
    switch (k) {
    case TaskKind::mod_add: return "mod_add";
    case TaskKind::reverse: return "reverse";
    case TaskKind::brackets: return "brackets";
    }
    return "?";
}

namespace {

std::vector<int> encode_decimal(long long v) {
    if (v == 0) return {vocab::kDigit0};
    std::vector<int> digits;
    while (v > 0) {
        digits.push_back(vocab::kDigit0 + static_cast<int>(v % 10));
        v /= 10;
    }
    std::reverse(digits.begin(), digits.end());
    return digits;
}

long long ipow(long long b, int e) {
    long long r = 1;
    while (e-- > 0) r *= b;
    return r;
}

// a + b (mod 10^difficulty); prompt "<a>+<b>=".
TaskInstance make_mod_add(long long a, long long b, int difficulty) {
    TaskInstance inst;
    inst.kind = TaskKind::mod_add;
    inst.difficulty = difficulty;
    const long long mod = ipow(10, difficulty);
    for (int d : encode_decimal(a)) inst.prompt_ids.push_back(d);
    inst.prompt_ids.push_back(vocab::kPlus);
    for (int d : encode_decimal(b)) inst.prompt_ids.push_back(d);
    inst.prompt_ids.push_back(vocab::kQuery);
    inst.canonical_answer_ids = encode_decimal((a + b) % mod);
    return inst;
}

// Reverse a letter string; prompt "<s>=".
TaskInstance make_reverse(const std::vector<int>& letters) {
    TaskInstance inst;
    inst.kind = TaskKind::reverse;
    inst.difficulty = static_cast<int>(letters.size());
    inst.prompt_ids = letters;
    inst.prompt_ids.push_back(vocab::kQuery);
    inst.canonical_answer_ids.assign(letters.rbegin(), letters.rend());
    return inst;
}

// Close a run of open brackets; prompt "([[=" -> answer "]])".
TaskInstance make_brackets(const std::vector<int>& opens) {
    TaskInstance inst;
    inst.kind = TaskKind::brackets;
    inst.difficulty = static_cast<int>(opens.size());
    inst.prompt_ids = opens;
    inst.prompt_ids.push_back(vocab::kQuery);
    for (auto it = opens.rbegin(); it != opens.rend(); ++it)
        inst.canonical_answer_ids.push_back(*it == vocab::kOpenParen ? vocab::kCloseParen
                                                                     : vocab::kCloseSquare);
    return inst;
}

long long instance_space(TaskKind kind, int difficulty) {
    switch (kind) {
    case TaskKind::mod_add: return ipow(10, difficulty) * ipow(10, difficulty);
    case TaskKind::reverse: return ipow(vocab::kNumLetters, difficulty);
    case TaskKind::brackets: return ipow(2, difficulty);
    }
    return 0;
}

}  // namespace

std::vector<TaskInstance> generate_instances(TaskKind kind, int count, int difficulty,
                                             std::uint64_t seed) {
    if (count < 1) throw std::invalid_argument("generate_instances: count must be >= 1");
    if (difficulty < 1 || difficulty > 8)
        throw std::invalid_argument("generate_instances: difficulty out of bounds");
    const long long space = instance_space(kind, difficulty);
    if (count > space)
        throw std::invalid_argument("generate_instances: count " + std::to_string(count) +
                                    " exceeds instance space " + std::to_string(space));

    Rng rng(Rng::mix(seed, static_cast<std::uint64_t>(kind), 0x7461736bULL));
    std::vector<TaskInstance> out;
    std::set<std::vector<int>> seen_prompts;
    while (static_cast<int>(out.size()) < count) {
        TaskInstance inst;
        switch (kind) {
        case TaskKind::mod_add: {
            const long long mod = ipow(10, difficulty);
            inst = make_mod_add(static_cast<long long>(rng.below(mod)),
                                static_cast<long long>(rng.below(mod)), difficulty);
            break;
        }
        case TaskKind::reverse: {
            std::vector<int> letters(difficulty);
            for (int& l : letters)
                l = vocab::kLetterA + static_cast<int>(rng.below(vocab::kNumLetters));
            inst = make_reverse(letters);
            break;
        }
        case TaskKind::brackets: {
            std::vector<int> opens(difficulty);
            for (int& o : opens)
                o = rng.below(2) == 0 ? vocab::kOpenParen : vocab::kOpenSquare;
            inst = make_brackets(opens);
            break;
        }
        }
        if (seen_prompts.insert(inst.prompt_ids).second) out.push_back(std::move(inst));
    }
    return out;
}

VerifierResult verify(const TaskInstance& instance, const std::vector<int>& response_ids) {
    VerifierResult result;
    // last marker wins, so arbitrary scratch (including stray markers) stays free
    int marker = -1;
    for (int i = 0; i < static_cast<int>(response_ids.size()); ++i)
        if (response_ids[i] == vocab::kAnswer) marker = i;
    if (marker < 0) return result;

    const auto& ans = instance.canonical_answer_ids;
    const int start = marker + 1;
    const int end = start + static_cast<int>(ans.size());
    if (end > static_cast<int>(response_ids.size())) return result;
    for (std::size_t j = 0; j < ans.size(); ++j)
        if (response_ids[start + static_cast<int>(j)] != ans[j]) return result;
    // answer must be terminated by EOS or by the end of the response
    if (end < static_cast<int>(response_ids.size()) && response_ids[end] != vocab::kEos)
        return result;
    result.reward = 1;
    result.matched_span = {start, end};
    return result;
}

std::vector<int> canonical_completion(const TaskInstance& instance) {
    std::vector<int> out{vocab::kAnswer};
    out.insert(out.end(), instance.canonical_answer_ids.begin(),
               instance.canonical_answer_ids.end());
    out.push_back(vocab::kEos);
    return out;
}

void dump_instances(const std::vector<TaskInstance>& instances, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("dump_instances: cannot open " + path);
    for (const auto& inst : instances) {
        nlohmann::json j{{"kind", to_string(inst.kind)},
                         {"difficulty", inst.difficulty},
                         {"prompt_ids", inst.prompt_ids},
                         {"answer_ids", inst.canonical_answer_ids}};
        os << j.dump() << '\n';
    }
}

std::vector<TaskInstance> load_instances(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("load_instances: cannot open " + path);
    std::vector<TaskInstance> out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const nlohmann::json j = nlohmann::json::parse(line);
        TaskInstance inst;
        inst.kind = task_kind_from_string(j.at("kind").get<std::string>());
        inst.difficulty = j.at("difficulty").get<int>();
        inst.prompt_ids = j.at("prompt_ids").get<std::vector<int>>();
        inst.canonical_answer_ids = j.at("answer_ids").get<std::vector<int>>();
        out.push_back(std::move(inst));
    }
    return out;
}

}  // namespace trlv
