#pragma once

#include "matb/core.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

namespace matb {

inline constexpr std::string_view kLogSchema = "matb-log/1";

// One line of the JSON-lines trial log: {"t":..,"kind":..,"payload":..}.
struct LogEvent {
    Seconds t = 0.0;
    std::string kind;
    nlohmann::json payload = nlohmann::json::object();

    std::string to_line() const;
    static LogEvent from_line(const std::string& line);  // throws std::runtime_error

    friend bool operator==(const LogEvent& a, const LogEvent& b) {
        return a.t == b.t && a.kind == b.kind && a.payload == b.payload;
    }
};

/// Append-only event stream. The first line of the serialized form is a
/// `header` event carrying schema, seed, mode, config and config hash.
struct TrialLog {
    nlohmann::json header = nlohmann::json::object();
    std::vector<LogEvent> events;

    void append(LogEvent e) { events.push_back(std::move(e)); }

    std::string serialize() const;
    void write(std::ostream& out) const;
    void save(const std::filesystem::path& path) const;
    static TrialLog parse(std::istream& in);
    static TrialLog load(const std::filesystem::path& path);

    // Events of a given kind, in order.
    std::vector<const LogEvent*> of_kind(std::string_view kind) const;
};

}  // namespace matb
