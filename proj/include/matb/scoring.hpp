#pragma once

#include "matb/config.hpp"
#include "matb/core.hpp"

#include <array>
#include <optional>
#include <vector>

namespace matb {

struct TrialLog;

enum class Resolution : std::uint8_t { Operator, Automation, Expired };

// One concluded discrete demand (sysmon out-of-range instance or own-callsign
// comms request).
struct DemandOutcome {
    Task task = Task::SystemMonitoring;
    int id = 0;
    Seconds onset = 0.0;
    Seconds concluded = 0.0;
    Resolution how = Resolution::Expired;

    bool resolved() const noexcept { return how != Resolution::Expired; }
    Seconds reaction_time() const noexcept { return concluded - onset; }
};

// Per-second aggregate of the continuously scored tasks; covers ticks in (t-1, t].
struct SecondSample {
    Seconds t = 0.0;
    double tracking_sq_sum = 0.0;  // px^2, manual-mode ticks only
    int tracking_ticks = 0;
    double fuel_score_sum = 0.0;   // per tick: mean of tank A and B scores
    int fuel_in_range = 0;         // tank-ticks inside the band (0..2 per tick)
    int ticks = 0;
    double level_a = 0.0;
    double level_b = 0.0;
};

// Raw scoring inputs in time order; what windowed_performance consumes.
struct ScoreStream {
    std::vector<SecondSample> seconds;
    std::vector<DemandOutcome> outcomes;  // sorted by `concluded`
};

struct RawMetrics {
    std::optional<double> tracking_rmse;  // absent when tracking was never manual
    int tracking_ticks = 0;
    std::vector<double> sysmon_reaction_times;  // resolved instances only
    int sysmon_resolved = 0;
    int sysmon_total = 0;
    std::vector<double> comms_reaction_times;
    int comms_resolved = 0;
    int comms_total = 0;
    double fuel_score_mean = 1.0;
    double fuel_time_in_range = 1.0;  // fraction of tank-ticks in band
    int ticks = 0;
};

using TaskScores = std::array<std::optional<double>, kTaskCount>;

struct PerformanceSample {
    Seconds timestamp = 0.0;
    TaskScores per_task{};
    double overall = 1.0;
    RawMetrics raw;
};

// clamp(1 - rmse / r_max, 0, 1). Throws ConfigError for r_max <= 0.
double tracking_score(double rmse, double r_max);

// clamp(1 - rt / window, 0, 1).
double reaction_score(double rt, double window);

// resolved / total, with 0/0 = 1. Throws std::logic_error when resolved > total.
double success_rate(int resolved, int total);

// 1 inside [low, high]; linear decay to 0 over `decay` units on either side.
double fuel_score(double level, double low = 2000.0, double high = 3000.0, double decay = 2000.0);

// Uniform mean over `active`. Throws std::invalid_argument for an empty set
// or an active task without a score.
double overall_performance(const TaskScores& scores, TaskSet active);

RawMetrics window_metrics(const ScoreStream& stream, Seconds start, Seconds end, const ScoringConfig& cfg);

// Scores the window (start, end]. Tracking is scored only if it had manual
// ticks; sysmon and comms combine mean reaction score and success rate
// equally; resource management is the mean per-tick fuel score.
PerformanceSample windowed_performance(const ScoreStream& stream, Seconds start, Seconds end,
                                       const ScoringConfig& cfg);

// Rebuilds the scoring stream from `sample` and outcome events of a log.
ScoreStream score_stream_from_log(const TrialLog& log);

}  // namespace matb
