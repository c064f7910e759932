#include "matb/scoring.hpp"

#include "matb/event_log.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace matb {

double tracking_score(double rmse, double r_max) {
    if (!(r_max > 0.0)) throw ConfigError("tracking r_max must be positive");
    return clamp01(1.0 - rmse / r_max);
}

double reaction_score(double rt, double window) { return clamp01(1.0 - rt / window); }

double success_rate(int resolved, int total) {
    if (resolved > total) throw std::logic_error("success_rate: resolved exceeds total");
    if (total == 0) return 1.0;
    return static_cast<double>(resolved) / static_cast<double>(total);
}

double fuel_score(double level, double low, double high, double decay) {
    if (level < low) return clamp01(1.0 - (low - level) / decay);
    if (level > high) return clamp01(1.0 - (level - high) / decay);
    return 1.0;
}

double overall_performance(const TaskScores& scores, TaskSet active) {
    if (active.empty()) throw std::invalid_argument("overall_performance: empty active set");
    double sum = 0.0;
    for (auto t : kAllTasks) {
        if (!active.contains(t)) continue;
        const auto& s = scores[index_of(t)];
        if (!s) throw std::invalid_argument("overall_performance: active task without a score");
        sum += *s;
    }
    return sum / static_cast<double>(active.size());
}

RawMetrics window_metrics(const ScoreStream& stream, Seconds start, Seconds end, const ScoringConfig& cfg) {
    (void)cfg;
    RawMetrics m;
    const auto by_t = [](const SecondSample& s, Seconds v) { return s.t <= v; };
    auto first = std::lower_bound(stream.seconds.begin(), stream.seconds.end(), start, by_t);
    double sq = 0.0, fuel = 0.0;
    int fuel_in = 0;
    for (auto it = first; it != stream.seconds.end() && it->t <= end; ++it) {
        sq += it->tracking_sq_sum;
        m.tracking_ticks += it->tracking_ticks;
        fuel += it->fuel_score_sum;
        fuel_in += it->fuel_in_range;
        m.ticks += it->ticks;
    }
    if (m.tracking_ticks > 0) m.tracking_rmse = std::sqrt(sq / m.tracking_ticks);
    if (m.ticks > 0) {
        m.fuel_score_mean = fuel / m.ticks;
        m.fuel_time_in_range = static_cast<double>(fuel_in) / (2.0 * m.ticks);
    }

    const auto by_concluded = [](const DemandOutcome& o, Seconds v) { return o.concluded <= v; };
    auto o = std::lower_bound(stream.outcomes.begin(), stream.outcomes.end(), start, by_concluded);
    for (; o != stream.outcomes.end() && o->concluded <= end; ++o) {
        if (o->task == Task::SystemMonitoring) {
            ++m.sysmon_total;
            if (o->resolved()) {
                ++m.sysmon_resolved;
                m.sysmon_reaction_times.push_back(o->reaction_time());
            }
        } else if (o->task == Task::Communications) {
            ++m.comms_total;
            if (o->resolved()) {
                ++m.comms_resolved;
                m.comms_reaction_times.push_back(o->reaction_time());
            }
        }
    }
    return m;
}

namespace {

// Expired instances contribute a reaction score of zero.
double demand_task_score(const std::vector<double>& rts, int resolved, int total, double window) {
    if (total == 0) return 1.0;
    double sum = 0.0;
    for (double rt : rts) sum += reaction_score(rt, window);
    const double mean_reaction = sum / total;
    return 0.5 * mean_reaction + 0.5 * success_rate(resolved, total);
}

}  // namespace

PerformanceSample windowed_performance(const ScoreStream& stream, Seconds start, Seconds end,
                                       const ScoringConfig& cfg) {
    PerformanceSample p;
    p.timestamp = end;
    p.raw = window_metrics(stream, start, end, cfg);
    const auto& m = p.raw;
    TaskSet active;
    if (m.tracking_rmse) {
        p.per_task[index_of(Task::Tracking)] = tracking_score(*m.tracking_rmse, cfg.tracking_r_max);
        active.insert(Task::Tracking);
    }
    p.per_task[index_of(Task::SystemMonitoring)] =
        demand_task_score(m.sysmon_reaction_times, m.sysmon_resolved, m.sysmon_total, cfg.sysmon_window);
    p.per_task[index_of(Task::ResourceManagement)] = m.fuel_score_mean;
    p.per_task[index_of(Task::Communications)] =
        demand_task_score(m.comms_reaction_times, m.comms_resolved, m.comms_total, cfg.comms_window);
    active.insert(Task::SystemMonitoring);
    active.insert(Task::ResourceManagement);
    active.insert(Task::Communications);
    p.overall = overall_performance(p.per_task, active);
    return p;
}

ScoreStream score_stream_from_log(const TrialLog& log) {
    ScoreStream s;
    for (const auto& e : log.events) {
        if (e.kind == "sample") {
            const auto& p = e.payload;
            SecondSample ss;
            ss.t = e.t;
            ss.tracking_sq_sum = p.at("trk_sq").get<double>();
            ss.tracking_ticks = p.at("trk_n").get<int>();
            ss.fuel_score_sum = p.at("fuel").get<double>();
            ss.fuel_in_range = p.at("fuel_in").get<int>();
            ss.ticks = p.at("ticks").get<int>();
            ss.level_a = p.at("A").get<double>();
            ss.level_b = p.at("B").get<double>();
            s.seconds.push_back(ss);
        } else if (e.kind == "outcome") {
            const auto& p = e.payload;
            DemandOutcome o;
            o.task = parse_task(p.at("task").get<std::string>()).value();
            o.id = p.at("id").get<int>();
            o.onset = p.at("onset").get<double>();
            o.concluded = e.t;
            const auto how = p.at("how").get<std::string>();
            o.how = how == "operator" ? Resolution::Operator
                    : how == "automation" ? Resolution::Automation
                                          : Resolution::Expired;
            s.outcomes.push_back(o);
        }
    }
    return s;
}

}  // namespace matb
