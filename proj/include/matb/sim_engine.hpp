#pragma once

#include "matb/config.hpp"
#include "matb/core.hpp"
#include "matb/event_log.hpp"
#include "matb/random.hpp"
#include "matb/scoring.hpp"

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

namespace matb {

struct SimClock {
    std::int64_t tick_index = 0;
    Seconds tick_seconds = 0.05;
    int ticks_per_second = 20;

    // Integer division form keeps log timestamps short (0.15, not 0.15000000000000002).
    Seconds elapsed() const noexcept { return static_cast<double>(tick_index) / ticks_per_second; }
};

enum class TrackingMode : std::uint8_t { Manual, Automatic };

struct TrackingState {
    Vec2 target;
    Vec2 center;  // fixed crosshair position
    TrackingMode mode = TrackingMode::Automatic;
    Vec2 joystick;  // held deflection, |joystick| <= 1
    std::uint64_t disturbance_seed = 0;
};

// Pure tracking step. Manual: target += disturbance - joystick * gain * dt.
// Automatic: exponential pull toward the crosshair; joystick ignored.
// The result is clamped to the screen.
TrackingState tracking_dynamics(TrackingState s, Vec2 joystick, Seconds dt, Vec2 disturbance,
                                const TrackingConfig& cfg);

// sysmon targets: 0 green light, 1 red light, 2..5 gauges 1..4.
inline constexpr int kSysmonTargets = 6;
std::string sysmon_target_name(int target);
std::optional<int> parse_sysmon_target(std::string_view name);

struct Gauge {
    double indicator_pos = 0.5;
    bool out_of_range = false;
};

struct OutOfRangeEvent {
    int id = 0;
    int target = 0;
    Seconds onset = 0.0;
    Seconds deadline = 0.0;
};

struct SysMonState {
    bool green_on = true;
    bool red_on = false;
    std::array<Gauge, 4> gauges{};
    std::vector<OutOfRangeEvent> pending;
    int deferred = 0;  // scheduled onsets waiting for a free target

    bool target_busy(int target) const noexcept;
};

enum class PumpStatus : std::uint8_t { Off, On, Failed };

struct Tank {
    char id = 'A';
    double level = 0.0;
    double capacity = 0.0;  // <= 0: unbounded supply
    bool finite() const noexcept { return capacity > 0.0; }
};

struct Pump {
    int id = 1;
    PumpStatus status = PumpStatus::Off;
    double rate = 800.0;  // units/min
    int from = 0;         // tank index
    int to = 0;
    Seconds repair_at = 0.0;
};

struct ResourceState {
    std::array<Tank, 6> tanks{};
    std::array<Pump, 8> pumps{};
};

// Pump toggles (0-based indices) that move tanks A and B toward the middle
// of the band; shared by the operator model and resource automation.
std::vector<int> plan_pump_toggles(const ResourceState& r, const FuelConfig& cfg);

struct Radio {
    std::string id;
    int frequency_khz = 0;
};

struct CommsRequest {
    int id = 0;
    std::string callsign;
    int radio = 0;
    int frequency_khz = 0;
    Seconds issued_at = 0.0;
    Seconds deadline = 0.0;
    bool own = false;
};

struct CommsState {
    std::array<Radio, 4> radios{};
    std::string own_callsign;
    std::vector<CommsRequest> pending;
    bool speech_mode = false;
};

enum class InputKind : std::uint8_t { JoystickVector, MouseClick, KeyPress, SpeechUtterance, MoveToStation };

struct OperatorInput {
    InputKind kind = InputKind::MoveToStation;
    Seconds timestamp = 0.0;
    Vec2 joystick;          // JoystickVector
    std::string target;     // MouseClick: "green", "red", "gauge1".."gauge4", "pump1".."pump8"
    int radio = -1;         // KeyPress (tune)
    int frequency_khz = 0;  // KeyPress (tune)
    Task station = Task::Tracking;  // MoveToStation

    // Task owning the input source.
    Task source_task() const;

    friend bool operator==(const OperatorInput&, const OperatorInput&) = default;
};

nlohmann::json to_json(const OperatorInput& in);
OperatorInput input_from_json(const nlohmann::json& j);  // throws std::runtime_error

enum class IconColor : std::uint8_t { Green, Red, Grey };
std::string_view icon_name(IconColor c) noexcept;

struct WorldState {
    SimClock clock;
    TrackingState tracking;
    SysMonState sysmon;
    ResourceState resources;
    CommsState comms;
    std::array<bool, kTaskCount> automation{};
    std::array<IconColor, kTaskCount> icons{IconColor::Grey, IconColor::Grey, IconColor::Grey, IconColor::Grey};
    std::optional<OperatorInput> last_input;
    WorkloadCondition condition;
    int block_index = -1;
    Rng rng;
};

// Scheduled task events for one block.
enum class ScheduledKind : std::uint8_t { SysmonOnset, PumpFailure, CommsRequest, TrackingMode };

struct ScheduledEvent {
    Seconds t = 0.0;  // relative to block start
    ScheduledKind kind = ScheduledKind::SysmonOnset;
    bool own = false;          // comms
    int callsign = 0;          // comms: index into foreign_callsigns when !own
    int radio = 0;             // comms
    int frequency_khz = 0;     // comms
    TrackingMode mode = TrackingMode::Manual;  // tracking
};

WorkloadCondition build_condition(LoadLabel label, const ScenarioConfig& cfg = {});
WorkloadCondition build_condition(std::string_view label, const ScenarioConfig& cfg = {});  // throws ConfigError

// Count-exact per-minute scheduler: each full minute gets the condition's
// count (ranges drawn per minute), stratified-jittered within the minute;
// the final partial minute gets floor(rate * fraction). Sorted by time.
std::vector<ScheduledEvent> schedule_block_events(const WorkloadCondition& c, Seconds block_duration, Rng& rng,
                                                  const CommsConfig& comms = {});

// Task owning the input plus its nearest neighbour; all tasks before any input.
TaskSet infer_active_tasks(const std::optional<OperatorInput>& last_input, const StationLayout& layout);

// A moment where the system has something to tell the operator.
struct Interaction {
    Task task = Task::SystemMonitoring;
    std::string kind;  // "tracking_mode" | "sysmon" | "fuel"
    int ref = 0;
    Seconds t = 0.0;
};

/// Owns the world and advances it on a single logical timeline.
///
/// Every state change is reported as a LogEvent through take_events(); the
/// trial runner interleaves those with its own events to form the log.
class SimEngine {
public:
    SimEngine(const ScenarioConfig& cfg, std::uint64_t seed);

    const WorldState& world() const noexcept { return world_; }
    const ScenarioConfig& config() const noexcept { return cfg_; }
    Seconds now() const noexcept { return world_.clock.elapsed(); }

    // Starts block `index` of the script at the current clock.
    void begin_block(std::size_t index);

    void apply_operator_input(const OperatorInput& input);

    // dt must be 0 (no-op) or the configured tick length.
    void advance_tick(Seconds dt);
    void advance_tick() { advance_tick(world_.clock.tick_seconds); }

    void set_task_automation(Task task, bool on, std::string_view cause);
    void set_speech_mode(bool on);
    void set_icons(const std::array<IconColor, kTaskCount>& icons);

    std::vector<LogEvent> take_events();
    std::vector<Interaction> take_interactions();

    const ScoreStream& score_stream() const noexcept { return scores_; }

    // Digest of the task-visible state; logged with every input for replay checks.
    std::uint64_t state_digest() const;

private:
    void emit(std::string kind, nlohmann::json payload);
    void fire_scheduled(const ScheduledEvent& e);
    void start_sysmon_event();
    void resolve_sysmon(std::size_t index, Resolution how);
    void resolve_comms(std::size_t index, Resolution how);
    void apply_pump_toggles(const std::vector<int>& pumps, std::string_view by);
    void step_fuel(Seconds dt);
    void step_gauges(Seconds dt);
    void step_automation();
    void step_expiry();
    void check_fuel_band();
    void accumulate_scores();
    void set_tracking_mode(TrackingMode mode, std::string_view cause);

    ScenarioConfig cfg_;
    std::uint64_t seed_;
    WorldState world_;
    Rng tracking_rng_;
    std::deque<ScheduledEvent> schedule_;  // absolute times
    Seconds block_start_ = 0.0;
    std::array<Seconds, kTaskCount> automation_since_{};
    Seconds last_resman_automation_ = -1e9;
    int next_sysmon_id_ = 1;
    int next_comms_id_ = 1;
    std::array<bool, 2> fuel_out_{};  // tank A/B currently out of band

    SecondSample second_acc_;
    ScoreStream scores_;
    std::vector<LogEvent> events_;
    std::vector<Interaction> interactions_;
};

}  // namespace matb
