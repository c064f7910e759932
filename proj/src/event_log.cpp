#include "matb/event_log.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace matb {

std::string LogEvent::to_line() const {
    std::string line = "{\"t\":";
    line += nlohmann::json(t).dump();
    line += ",\"kind\":";
    line += nlohmann::json(kind).dump();
    line += ",\"payload\":";
    line += payload.dump();
    line += '}';
    return line;
}

LogEvent LogEvent::from_line(const std::string& line) {
    LogEvent e;
    try {
        const auto j = nlohmann::json::parse(line);
        e.t = j.at("t").get<double>();
        e.kind = j.at("kind").get<std::string>();
        e.payload = j.at("payload");
    } catch (const nlohmann::json::exception& ex) {
        throw std::runtime_error(std::string("malformed log line: ") + ex.what());
    }
    return e;
}

std::string TrialLog::serialize() const {
    std::ostringstream out;
    write(out);
    return out.str();
}

void TrialLog::write(std::ostream& out) const {
    out << LogEvent{0.0, "header", header}.to_line() << '\n';
    for (const auto& e : events) out << e.to_line() << '\n';
}

void TrialLog::save(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write log '" + path.string() + "'");
    write(out);
}

TrialLog TrialLog::parse(std::istream& in) {
    TrialLog log;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto e = LogEvent::from_line(line);
        if (first) {
            if (e.kind != "header") throw std::runtime_error("log does not start with a header");
            log.header = std::move(e.payload);
            first = false;
            continue;
        }
        log.events.push_back(std::move(e));
    }
    if (first) throw std::runtime_error("empty log");
    if (log.header.value("schema", std::string()) != kLogSchema)
        throw std::runtime_error("unsupported log schema '" + log.header.value("schema", std::string()) + "'");
    return log;
}

TrialLog TrialLog::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open log '" + path.string() + "'");
    return parse(in);
}

std::vector<const LogEvent*> TrialLog::of_kind(std::string_view kind) const {
    std::vector<const LogEvent*> out;
    for (const auto& e : events)
        if (e.kind == kind) out.push_back(&e);
    return out;
}

}  // namespace matb
