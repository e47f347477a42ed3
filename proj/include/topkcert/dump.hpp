#pragma once

#include "topkcert/distribution.hpp"

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace topkcert {

enum class DumpMode { Probs, Logits };

/// One attention row, one JSON object per line:
/// {"layer": int, "head": int, "query": int, "mode": "probs"|"logits", "values": [float64...]}
struct AttentionDumpRecord {
    int layer = 0;
    int head = 0;
    int query = 0;
    DumpMode mode = DumpMode::Probs;
    std::vector<double> values;

    // Scores for the row; probabilities become log-probabilities, with exact
    // zeros mapped to log(denorm_min).
    ScoreVector to_scores() const;
};

inline constexpr double kProbSumTolerance = 1e-5;

// Throws InvalidInput on malformed lines.
AttentionDumpRecord parse_dump_record(std::string_view line);
std::string format_dump_record(const AttentionDumpRecord& record);

struct DumpReadResult {
    std::vector<AttentionDumpRecord> records;
    std::size_t skipped = 0;
    std::vector<std::string> errors;  // "line N: message", first few only
};

// Blank lines are ignored. In strict mode the first malformed line throws.
DumpReadResult read_dump(std::istream& in, bool strict);

}  // namespace topkcert
