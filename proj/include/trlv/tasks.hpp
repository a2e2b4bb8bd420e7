#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace trlv {

// Shared 32-symbol vocabulary: digits, a lowercase window, brackets,
// operators, markers. One policy serves all task kinds.
namespace vocab {
inline constexpr int kDigit0 = 0;            // '0'..'9' -> 0..9
inline constexpr int kLetterA = 10;          // 'a'..'l' -> 10..21
inline constexpr int kNumLetters = 12;
inline constexpr int kOpenParen = 22;        // '('
inline constexpr int kCloseParen = 23;       // ')'
inline constexpr int kOpenSquare = 24;       // '['
inline constexpr int kCloseSquare = 25;      // ']'
inline constexpr int kPlus = 26;             // '+'
inline constexpr int kQuery = 27;            // '=' terminates every prompt
inline constexpr int kAnswer = 28;           // '#' opens the answer segment
inline constexpr int kEos = 29;
inline constexpr int kBos = 30;
inline constexpr int kSpare = 31;
inline constexpr int kSize = 32;

std::string token_name(int id);
std::string render(const std::vector<int>& ids);
}  // namespace vocab

enum class TaskKind { mod_add, reverse, brackets };

TaskKind task_kind_from_string(const std::string& s);
std::string to_string(TaskKind k);

struct TaskInstance {
    TaskKind kind = TaskKind::mod_add;
    std::vector<int> prompt_ids;            // ends with the query marker
    std::vector<int> canonical_answer_ids;  // nonempty
    int difficulty = 1;
};

struct VerifierResult {
    int reward = 0;  // binary
    std::optional<std::pair<int, int>> matched_span;  // [start, end) into response
};

/// Deterministic, deduplicated instance generation. Throws when `count`
/// exceeds the instance space for the requested difficulty.
std::vector<TaskInstance> generate_instances(TaskKind kind, int count, int difficulty,
                                             std::uint64_t seed);

/// Reward 1 iff the response contains the answer marker followed by exactly
/// the canonical answer, terminated by EOS or the end of the response.
/// Tokens before the (last) answer marker are free scratch space.
VerifierResult verify(const TaskInstance& instance, const std::vector<int>& response_ids);

/// The shortest reward-1 response: marker + answer + EOS.
std::vector<int> canonical_completion(const TaskInstance& instance);

// Instance dump: one JSON record per line.
void dump_instances(const std::vector<TaskInstance>& instances, const std::string& path);
std::vector<TaskInstance> load_instances(const std::string& path);

}  // namespace trlv
