#pragma once

#include "fswsim/sim_time.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace fswsim
{

/// Compact JSON with sorted keys and shortest round-trip floats.
std::string canonical_dump(const nlohmann::json& j);

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

/// Shortest round-trip decimal for a double.
std::string format_double(double v);

/// In-memory telemetry: JSON-lines records {t, source, kind, payload} plus
/// named CSV time series. Everything is kept in insertion order so the
/// serialized bytes are a pure function of the run.
class TelemetryLog
{
public:
    void record(SimTime t, std::string_view source, std::string_view kind, nlohmann::json payload);

    /// Appends a row to a CSV series; the header is fixed by the first row.
    void series_row(const std::string& series, const std::vector<std::string>& columns, const std::vector<double>& values);

    const std::vector<nlohmann::json>& records() const { return records_; }
    std::string jsonl() const;
    std::string csv(const std::string& series) const;
    std::vector<std::string> series_names() const;

    void set_enabled(bool on) { enabled_ = on; }

private:
    struct Series
    {
        std::vector<std::string> columns;
        std::string body;
    };

    bool enabled_{true};
    std::vector<nlohmann::json> records_;
    std::map<std::string, Series> series_;
};

/// Re-serializes every line of a JSONL document canonically.
std::string recanonicalize_jsonl(std::string_view jsonl);

} // namespace fswsim
