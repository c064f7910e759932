#pragma once

#include "matb/config.hpp"
#include "matb/policy.hpp"
#include "matb/random.hpp"
#include "matb/sim_engine.hpp"
#include "matb/workload.hpp"

#include <map>
#include <optional>
#include <vector>

namespace matb {

// Normalized [0, 1] demand per workload component.
using InducedLoad = ComponentVector;

struct OperatorActivity {
    bool walking = false;
    bool speaking = false;
    bool steering = false;       // at the tracking station with tracking manual
    double joystick = 0.0;       // held deflection magnitude
    int known_demands = 0;
    int visible_alarms = 0;
    int audible = 0;             // radio messages being announced plus auditory cues
};

InducedLoad induced_load(const OperatorActivity& a);

/// First-order physiological response to induced load with seeded noise.
class PhysioGenerator {
public:
    PhysioGenerator(const OperatorProfile& profile, std::uint64_t seed);

    // `load` is the mean induced load over the last `dt` seconds.
    PhysioSample step(const InducedLoad& load, bool speaking, Seconds t, Seconds dt);

private:
    OperatorProfile profile_;
    Rng rng_;
    std::array<double, kChannelCount> state_{};
};

struct PhysioReading {
    PhysioSample sample;
    std::optional<InducedLoad> load;  // ground truth; absent for live sessions
};

/// Source of operator inputs and physiological samples for one trial.
class OperatorAgent {
public:
    virtual ~OperatorAgent() = default;
    // Inputs to apply at `now` (the current engine clock).
    virtual std::vector<OperatorInput> step(const WorldState& w, Seconds now) = 0;
    virtual PhysioReading physio(const WorldState& w, Seconds now) = 0;
    virtual void notify(const Stimulus&) {}
};

/// Parameterized stand-in for a human operator.
///
/// Perceives only the stations visible from where it stands (plus radio
/// messages, which are audible everywhere), keeps a decaying memory of known
/// demands, and serves them earliest-deadline-first with sampled reaction
/// times and walking delays.
class SyntheticOperator final : public OperatorAgent {
public:
    SyntheticOperator(const ScenarioConfig& cfg, std::uint64_t trial_seed);

    std::vector<OperatorInput> step(const WorldState& w, Seconds now) override;
    PhysioReading physio(const WorldState& w, Seconds now) override;
    void notify(const Stimulus& s) override;

    Task station() const noexcept { return station_; }
    bool walking() const noexcept { return walking_; }
    bool speaking(Seconds now) const noexcept { return now < speaking_until_; }
    const OperatorActivity& activity() const noexcept { return activity_; }

private:
    enum class Kind : int { Sysmon, Comms, Fuel, Alarm, Scan, Tracking };
    struct Demand {
        Kind kind = Kind::Sysmon;
        int id = 0;
        Task task = Task::SystemMonitoring;
        Seconds noticed = 0.0;
        Seconds confirmed = 0.0;
        Seconds deadline = 0.0;
        bool known = false;
        int target = 0;
        int radio = 0;
        int frequency_khz = 0;
    };
    using Key = std::pair<int, int>;

    void perceive(const WorldState& w, Seconds now);
    std::optional<Demand> choose(const WorldState& w, Seconds now) const;
    double sample_rt(double base);
    OperatorInput make(InputKind kind, Seconds now) const;
    void update_activity(const WorldState& w, Seconds now);
    void voice(const WorldState& w, Seconds now, std::vector<OperatorInput>& out);

    ScenarioConfig cfg_;
    OperatorProfile profile_;
    Rng rng_;
    PhysioGenerator physio_;

    Task station_ = Task::Tracking;
    bool walking_ = false;
    Task walk_to_ = Task::Tracking;
    Seconds arrive_at_ = 0.0;
    std::optional<Demand> acting_;
    std::optional<Demand> intent_;  // what the current walk is for
    Seconds dwell_until_ = -1.0;
    Seconds ready_at_ = 0.0;
    std::optional<Seconds> voice_at_;  // a spoken reply is under way
    Seconds speaking_until_ = -1.0;
    Seconds next_steer_ = 0.0;
    Vec2 joystick_;
    std::map<Key, Demand> demands_;
    std::array<Seconds, kTaskCount> last_seen_{};
    std::array<Seconds, kTaskCount> cue_until_{-1.0, -1.0, -1.0, -1.0};
    Seconds audio_cue_until_ = -1.0;
    bool tracking_manual_ = false;

    OperatorActivity activity_;
    InducedLoad load_sum_{};
    int load_ticks_ = 0;
};

}  // namespace matb
