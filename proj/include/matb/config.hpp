#pragma once

#include "matb/core.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace matb {

enum class TrackingPolicy : std::uint8_t { AlwaysAuto, AlwaysManual, Alternate };

/// Per-label task-parameter bundle (sysmon, pump-failure and comms rates,
/// tracking mode policy).
struct WorkloadCondition {
    LoadLabel label = LoadLabel::NL;
    int sysmon_events_per_min = 5;
    int pump_failures_min = 1;
    int pump_failures_max = 2;
    // Even minutes of the block have zero failures, odd minutes draw from [min, max].
    bool pump_failures_alternate = false;
    int comms_requests_min = 2;
    int comms_requests_max = 8;
    TrackingPolicy tracking = TrackingPolicy::Alternate;
    Seconds tracking_alternate_period = 150.0;

    friend bool operator==(const WorkloadCondition&, const WorkloadCondition&) = default;
};

struct Block {
    LoadLabel label = LoadLabel::OL;
    Seconds duration = 450.0;
};

struct TimingConfig {
    Seconds tick_seconds = 0.05;
    Seconds physio_period = 1.0;
    Seconds estimate_period = 5.0;
    Seconds epoch_length = 30.0;
};

struct StationLayout {
    // Meters, indexed by Task.
    std::array<Vec2, kTaskCount> positions{{{0.0, 0.0}, {1.0, 0.0}, {1.0, 2.5}, {0.0, 2.5}}};
    // For each station, the tasks visible/adjacent to it (ordered, nearest first).
    std::array<std::vector<Task>, kTaskCount> adjacency{{{Task::SystemMonitoring},
                                                         {Task::Tracking},
                                                         {Task::Communications},
                                                         {Task::ResourceManagement}}};
    double walk_speed = 1.0;  // m/s

    double distance(Task a, Task b) const noexcept { return (positions[index_of(a)] - positions[index_of(b)]).norm(); }
    TaskSet visible_from(Task station) const noexcept;
};

struct TrackingConfig {
    double screen_width = 1280.0;
    double screen_height = 720.0;
    double disturbance_sd = 6.0;     // px per tick, per axis, manual mode
    double joystick_gain = 240.0;    // px/s at full deflection
    double auto_rate = 2.0;          // 1/s proportional pull toward center
    double alarm_radius = 100.0;     // px; beyond this the task counts as out of range
};

struct SysmonConfig {
    Seconds failure_window = 15.0;
    double gauge_noise = 0.02;      // per tick
    double gauge_reversion = 0.5;   // 1/s
    double gauge_low = 0.2;         // in-range band
    double gauge_high = 0.8;
};

struct FuelConfig {
    std::array<double, 8> pump_rates{800, 800, 800, 800, 800, 800, 800, 800};  // units/min
    double consumption_a = 800.0;  // units/min
    double consumption_b = 800.0;
    std::array<double, 6> start_levels{2500, 2500, 1000, 1000, 0, 0};
    // Non-positive capacity means unbounded (E, F).
    std::array<double, 6> capacities{4000, 4000, 2000, 2000, 0, 0};
    double band_low = 2000.0;
    double band_high = 3000.0;
    Seconds pump_repair = 45.0;
};

struct CommsConfig {
    std::string own_callsign = "NASA 504";
    std::vector<std::string> foreign_callsigns{"NASA 631", "NASA 873", "DELTA 227", "AAL 139"};
    double distractor_ratio = 0.5;
    Seconds response_window = 30.0;
    Seconds announcement = 4.0;
};

struct ScoringConfig {
    double tracking_r_max = 240.0;
    Seconds sysmon_window = 15.0;
    Seconds comms_window = 30.0;
    Seconds performance_window = 30.0;
};

// Per-task nominal component loads, indexed [task][component].
using ContextTable = std::array<std::array<double, kComponentCount>, kTaskCount>;

ContextTable default_context_table();

struct PipelineConfig {
    double theta_low = 19.21;    // midpoint of UL/NL reference means
    double theta_high = 36.345;  // midpoint of NL/OL reference means
    double cutoff_loaded = 0.3;
    double cutoff_overloaded = 0.7;
    ContextTable context = default_context_table();
    std::string estimator_model;  // path; empty = no estimates
};

struct PredictorConfig {
    std::string model;  // path; empty = no predictions
    Seconds horizon = 60.0;
    Seconds target_window = 30.0;
    int hidden = 16;
    int layers = 3;
    int dense = 16;
    double dropout = 0.8;
    double learning_rate = 1e-3;
    int batch = 32;
    int epochs = 60;
};

struct PolicyConfig {
    double perf_low = 0.70;
    double perf_high = 0.85;
    int hysteresis_len = 3;
    Seconds postpone = 5.0;
    bool enable_autonomy = false;
    bool enable_interaction = false;
};

struct OperatorProfile {
    std::string preset = "nominal";
    // Base reaction time per task, seconds, indexed by Task.
    std::array<double, kTaskCount> reaction_time{0.4, 1.5, 1.6, 3.0};
    double speech_reaction = 1.5;
    double rt_inflation = 0.05;   // per additional known pending demand
    double rt_noise = 0.25;       // lognormal sigma
    double walk_speed = 1.0;
    Seconds perception_delay = 0.6;
    Seconds cued_perception_delay = 0.2;
    Seconds memory_horizon = 30.0;
    Seconds scan_interval = 20.0;
    Seconds joystick_period = 0.2;
    Seconds tracking_dwell = 2.0;  // minimum steering stint once at the stick
    double joystick_px = 60.0;    // error at which the stick is fully deflected
    Seconds readback = 3.0;
    std::array<double, kChannelCount> physio_baseline{68, 35, 13, 4, 38, 2.5, 55, 110};
    // Non-negative gains, indexed [channel][component].
    std::array<std::array<double, kComponentCount>, kChannelCount> physio_gain{{
        {20, 30, 0, 0, 0},   // heart rate
        {10, 0, 25, 0, 0},   // hrv
        {4, 8, 0, 0, 0},     // respiration
        {0, 35, 0, 0, 0},    // posture
        {0, 0, 0, 30, 0},    // noise level
        {2, 0, 0, 0, 1},     // speech rate
        {0, 0, 0, 5, 15},    // speech intensity
        {40, 0, 0, 0, 20},   // pitch
    }};
    double noise_fraction = 0.05;
    Seconds smoothing_tau = 4.0;
    std::uint64_t seed = 0;  // 0 = derive from trial seed
};

OperatorProfile operator_preset(const std::string& name);  // throws ConfigError

struct ConsoleConfig {
    int port = 8765;
    std::string on_disconnect = "pause";  // pause | abort
    Seconds heartbeat_timeout = 5.0;
    Seconds frame_period = 0.1;
    // Behaviour proxies standing in for physiological sensors in live sessions.
    Seconds proxy_window = 10.0;      // input-rate window
    double inputs_per_demand = 3.0;   // inputs in the window counted as one known demand
};

struct ScenarioConfig {
    std::uint64_t seed = 1;
    TimingConfig timing;
    std::vector<Block> script = default_script();
    std::array<WorkloadCondition, 3> conditions = default_conditions();
    StationLayout layout;
    TrackingConfig tracking;
    SysmonConfig sysmon;
    FuelConfig fuel;
    CommsConfig comms;
    Seconds automation_latency = 1.0;
    ScoringConfig scoring;
    PipelineConfig pipeline;
    PredictorConfig predictor;
    PolicyConfig policy;
    OperatorProfile operator_profile;
    ConsoleConfig console;
    std::string log_dir = "logs";

    static std::vector<Block> default_script();
    static std::array<WorkloadCondition, 3> default_conditions();

    const WorkloadCondition& condition(LoadLabel l) const { return conditions[static_cast<std::size_t>(l)]; }
    Seconds total_duration() const;
    int ticks_per_second() const;
};

nlohmann::json to_json(const ScenarioConfig& c);
ScenarioConfig config_from_json(const nlohmann::json& j);  // missing keys keep defaults
ScenarioConfig load_config(const std::filesystem::path& path);
void save_config(const ScenarioConfig& c, const std::filesystem::path& path);

// FNV-1a over the canonical serialization of every semantic field
// (console and log-directory settings are excluded).
std::uint64_t config_hash(const ScenarioConfig& c);

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ull) noexcept;
std::string hex64(std::uint64_t v);

}  // namespace matb
