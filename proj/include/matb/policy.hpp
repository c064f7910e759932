#pragma once

#include "matb/config.hpp"
#include "matb/sim_engine.hpp"
#include "matb/workload.hpp"

#include <array>
#include <deque>
#include <optional>
#include <span>
#include <vector>

namespace matb {

enum class AdaptationAction : std::uint8_t { NoChange, AutomateInactive, DeautomateAll };
enum class Trigger : std::uint8_t { None, PerfLow, PerfHigh, OlStreak, UlStreak };

std::string_view action_name(AdaptationAction a) noexcept;
std::string_view trigger_name(Trigger t) noexcept;

struct AutonomyDecision {
    AdaptationAction action = AdaptationAction::NoChange;
    Trigger trigger = Trigger::None;

    friend bool operator==(const AutonomyDecision&, const AutonomyDecision&) = default;
};

// `history` is oldest first; only the last hysteresis_len entries are used.
// Streak triggers win over prediction triggers. A history shorter than
// hysteresis_len yields NoChange.
AutonomyDecision autonomy_decision(std::span<const LoadLabel> history, double predicted_perf, const PolicyConfig& cfg);

enum class StimulusKind : std::uint8_t { Visual, Auditory, VisualOnlyFallback };
std::string_view stimulus_name(StimulusKind k) noexcept;

struct Stimulus {
    StimulusKind kind = StimulusKind::Visual;
    Interaction interaction;
    Seconds t = 0.0;
};

struct InteractionPlan {
    Interaction interaction;
    bool visual = false;
    bool auditory = false;
    bool postponed = false;  // auditory decision deferred to deliver_at
    Seconds deliver_at = 0.0;
};

// Visual is included iff the visual channel is not overloaded; auditory iff
// speech and auditory are both unloaded, else it is postponed by cfg.postpone.
// Without channel loads (no estimate yet) the plan is visual-only.
InteractionPlan select_modality(const std::optional<ChannelLoads>& loads, const Interaction& interaction, Seconds now,
                                const PolicyConfig& cfg);

// Deadline re-check of a postponed plan: auditory if now clear, otherwise
// the visual-only fallback.
StimulusKind resolve_postponed(const std::optional<ChannelLoads>& loads);

// Stimuli a plan delivers immediately.
std::vector<Stimulus> immediate_stimuli(const InteractionPlan& plan, Seconds now);

struct IconState {
    std::array<IconColor, kTaskCount> left{IconColor::Grey, IconColor::Grey, IconColor::Grey, IconColor::Grey};
    bool speech_available = false;

    friend bool operator==(const IconState&, const IconState&) = default;
};

// Whether a task currently shows an out-of-range condition.
bool task_out_of_range(const WorldState& w, Task t, const ScenarioConfig& cfg);

// Stateless: green if automated; grey when the visual channel is overloaded;
// red if out of range; grey otherwise. Right icon mirrors speech mode.
IconState icon_states(const WorldState& w, bool visual_overloaded, const ScenarioConfig& cfg);

// Interaction adaptation on and the speech channel not overloaded. Before the
// first estimate the gate follows enable_interaction alone.
bool speech_modality_gate(const std::optional<ChannelLoads>& loads, bool enable_interaction);

struct PolicyOutput {
    AutonomyDecision decision;       // the decision value this tick
    AdaptationAction emitted = AdaptationAction::NoChange;  // after the no-repeat rule
};

/// Holds the state history and no-repeat latch; one instance per trial.
class PolicyEngine {
public:
    explicit PolicyEngine(const PolicyConfig& cfg) : cfg_(cfg) {}

    // Called once per estimate cadence. A missing estimate or prediction is
    // a cold start and yields NoChange.
    PolicyOutput on_estimate(const std::optional<WorkloadEstimate>& estimate, std::optional<double> predicted_perf);

    // Plans for new interactions (only when interaction adaptation is on).
    // Postponed auditory decisions are kept until due().
    std::vector<InteractionPlan> on_interactions(const std::vector<Interaction>& interactions,
                                                 const std::optional<ChannelLoads>& loads, Seconds now);
    std::vector<Stimulus> due(const std::optional<ChannelLoads>& loads, Seconds now);

    const std::deque<LoadLabel>& history() const noexcept { return history_; }
    const std::vector<InteractionPlan>& pending() const noexcept { return pending_; }

private:
    PolicyConfig cfg_;
    std::deque<LoadLabel> history_;
    AdaptationAction latch_ = AdaptationAction::NoChange;
    std::vector<InteractionPlan> pending_;
};

}  // namespace matb
