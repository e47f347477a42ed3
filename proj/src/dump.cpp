#include "topkcert/dump.hpp"

#include <json.hpp>

#include <istream>
#include <numeric>

namespace topkcert {

ScoreVector AttentionDumpRecord::to_scores() const {
    Eigen::VectorXd s(static_cast<Index>(values.size()));
    const double floor = std::log(std::numeric_limits<double>::denorm_min());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double v = values[i];
        s[static_cast<Index>(i)] = mode == DumpMode::Logits ? v : (v > 0.0 ? std::log(v) : floor);
    }
    return ScoreVector(std::move(s));
}

AttentionDumpRecord parse_dump_record(std::string_view line) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw InvalidInput(std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw InvalidInput("record must be a JSON object");

    AttentionDumpRecord rec;
    try {
        for (const char* key : {"layer", "head", "query"})
            if (!j.contains(key) || !j[key].is_number_integer()) throw InvalidInput(std::string("missing integer field '") + key + "'");
        rec.layer = j["layer"].get<int>();
        rec.head = j["head"].get<int>();
        rec.query = j["query"].get<int>();

        if (!j.contains("mode") || !j["mode"].is_string()) throw InvalidInput("missing field 'mode'");
        const auto mode = j["mode"].get<std::string>();
        if (mode == "probs")
            rec.mode = DumpMode::Probs;
        else if (mode == "logits")
            rec.mode = DumpMode::Logits;
        else
            throw InvalidInput("mode must be 'probs' or 'logits'");

        if (!j.contains("values") || !j["values"].is_array()) throw InvalidInput("missing array 'values'");
        for (const auto& v : j["values"]) {
            if (!v.is_number()) throw InvalidInput("values must be numbers");
            rec.values.push_back(v.get<double>());
        }
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("bad field: ") + e.what());
    }

    if (rec.values.size() < 2) throw InvalidInput("rows need at least two keys");
    for (double v : rec.values)
        if (!std::isfinite(v)) throw InvalidInput("values must be finite");
    if (rec.mode == DumpMode::Probs) {
        for (double v : rec.values)
            if (v < 0.0) throw InvalidInput("probabilities must be >= 0");
        const double sum = std::accumulate(rec.values.begin(), rec.values.end(), 0.0);
        if (std::abs(sum - 1.0) > kProbSumTolerance) throw InvalidInput("probabilities must sum to 1");
    }
    return rec;
}

std::string format_dump_record(const AttentionDumpRecord& record) {
    nlohmann::json j{{"layer", record.layer},
                     {"head", record.head},
                     {"query", record.query},
                     {"mode", record.mode == DumpMode::Probs ? "probs" : "logits"},
                     {"values", record.values}};
    return j.dump();
}

DumpReadResult read_dump(std::istream& in, bool strict) {
    DumpReadResult out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.records.push_back(parse_dump_record(line));
        } catch (const InvalidInput& e) {
            const std::string msg = "line " + std::to_string(line_no) + ": " + e.what();
            if (strict) throw InvalidInput(msg);
            ++out.skipped;
            if (out.errors.size() < 10) out.errors.push_back(msg);
        }
    }
    return out;
}

}  // namespace topkcert
