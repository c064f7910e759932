#include "matb/policy.hpp"

#include <algorithm>

namespace matb {

std::string_view action_name(AdaptationAction a) noexcept {
    switch (a) {
        case AdaptationAction::NoChange: return "no_change";
        case AdaptationAction::AutomateInactive: return "automate_inactive";
        case AdaptationAction::DeautomateAll: return "deautomate_all";
    }
    return "?";
}

std::string_view trigger_name(Trigger t) noexcept {
    switch (t) {
        case Trigger::None: return "none";
        case Trigger::PerfLow: return "perf_low";
        case Trigger::PerfHigh: return "perf_high";
        case Trigger::OlStreak: return "ol_streak";
        case Trigger::UlStreak: return "ul_streak";
    }
    return "?";
}

std::string_view stimulus_name(StimulusKind k) noexcept {
    switch (k) {
        case StimulusKind::Visual: return "visual";
        case StimulusKind::Auditory: return "auditory";
        case StimulusKind::VisualOnlyFallback: return "visual_only_fallback";
    }
    return "?";
}

AutonomyDecision autonomy_decision(std::span<const LoadLabel> history, double predicted_perf, const PolicyConfig& cfg) {
    const auto n = static_cast<std::size_t>(std::max(cfg.hysteresis_len, 1));
    if (history.size() < n) return {};
    const auto recent = history.last(n);
    const auto all_are = [&](LoadLabel l) { return std::all_of(recent.begin(), recent.end(), [&](LoadLabel x) { return x == l; }); };
    if (all_are(LoadLabel::OL)) return {AdaptationAction::AutomateInactive, Trigger::OlStreak};
    if (all_are(LoadLabel::UL)) return {AdaptationAction::DeautomateAll, Trigger::UlStreak};
    if (predicted_perf < cfg.perf_low) return {AdaptationAction::AutomateInactive, Trigger::PerfLow};
    if (predicted_perf > cfg.perf_high) return {AdaptationAction::DeautomateAll, Trigger::PerfHigh};
    return {};
}

namespace {

bool auditory_clear(const ChannelLoads& l) {
    return l[index_of(Component::Speech)] == ChannelLoad::Unloaded &&
           l[index_of(Component::Auditory)] == ChannelLoad::Unloaded;
}

}  // namespace

InteractionPlan select_modality(const std::optional<ChannelLoads>& loads, const Interaction& interaction, Seconds now,
                                const PolicyConfig& cfg) {
    InteractionPlan p;
    p.interaction = interaction;
    p.deliver_at = now;
    if (!loads) {
        p.visual = true;
        return p;
    }
    p.visual = (*loads)[index_of(Component::Visual)] != ChannelLoad::Overloaded;
    if (auditory_clear(*loads)) {
        p.auditory = true;
    } else {
        p.postponed = true;
        p.deliver_at = now + cfg.postpone;
    }
    return p;
}

StimulusKind resolve_postponed(const std::optional<ChannelLoads>& loads) {
    if (loads && auditory_clear(*loads)) return StimulusKind::Auditory;
    return StimulusKind::VisualOnlyFallback;
}

bool task_out_of_range(const WorldState& w, Task t, const ScenarioConfig& cfg) {
    switch (t) {
        case Task::Tracking:
            return w.tracking.mode == TrackingMode::Manual &&
                   (w.tracking.target - w.tracking.center).norm() > cfg.tracking.alarm_radius;
        case Task::SystemMonitoring: return !w.sysmon.pending.empty();
        case Task::ResourceManagement:
            for (int i = 0; i < 2; ++i) {
                const double l = w.resources.tanks[i].level;
                if (l < cfg.fuel.band_low || l > cfg.fuel.band_high) return true;
            }
            return false;
        case Task::Communications:
            return std::any_of(w.comms.pending.begin(), w.comms.pending.end(), [](const CommsRequest& r) { return r.own; });
    }
    return false;
}

IconState icon_states(const WorldState& w, bool visual_overloaded, const ScenarioConfig& cfg) {
    IconState s;
    for (auto t : kAllTasks) {
        auto& c = s.left[index_of(t)];
        if (w.automation[index_of(t)]) c = IconColor::Green;
        else if (visual_overloaded) c = IconColor::Grey;
        else if (task_out_of_range(w, t, cfg)) c = IconColor::Red;
        else c = IconColor::Grey;
    }
    s.speech_available = w.comms.speech_mode;
    return s;
}

bool speech_modality_gate(const std::optional<ChannelLoads>& loads, bool enable_interaction) {
    if (!enable_interaction) return false;
    if (!loads) return true;
    return (*loads)[index_of(Component::Speech)] != ChannelLoad::Overloaded;
}

PolicyOutput PolicyEngine::on_estimate(const std::optional<WorkloadEstimate>& estimate,
                                       std::optional<double> predicted_perf) {
    PolicyOutput out;
    if (estimate) {
        history_.push_back(estimate->state);
        while (history_.size() > static_cast<std::size_t>(std::max(cfg_.hysteresis_len, 1))) history_.pop_front();
    }
    if (!estimate || !predicted_perf) {
        latch_ = AdaptationAction::NoChange;
        return out;
    }
    const std::vector<LoadLabel> h(history_.begin(), history_.end());
    out.decision = autonomy_decision(h, *predicted_perf, cfg_);
    if (cfg_.enable_autonomy && out.decision.action != AdaptationAction::NoChange && out.decision.action != latch_)
        out.emitted = out.decision.action;
    latch_ = out.decision.action;
    return out;
}

std::vector<Stimulus> immediate_stimuli(const InteractionPlan& plan, Seconds now) {
    std::vector<Stimulus> out;
    if (plan.visual) out.push_back({StimulusKind::Visual, plan.interaction, now});
    if (plan.auditory) out.push_back({StimulusKind::Auditory, plan.interaction, now});
    return out;
}

std::vector<InteractionPlan> PolicyEngine::on_interactions(const std::vector<Interaction>& interactions,
                                                           const std::optional<ChannelLoads>& loads, Seconds now) {
    std::vector<InteractionPlan> out;
    if (!cfg_.enable_interaction) return out;
    for (const auto& i : interactions) {
        auto plan = select_modality(loads, i, now, cfg_);
        if (plan.postponed) pending_.push_back(plan);
        out.push_back(plan);
    }
    return out;
}

std::vector<Stimulus> PolicyEngine::due(const std::optional<ChannelLoads>& loads, Seconds now) {
    std::vector<Stimulus> out;
    for (auto it = pending_.begin(); it != pending_.end();) {
        if (now + 1e-9 < it->deliver_at) {
            ++it;
            continue;
        }
        out.push_back({resolve_postponed(loads), it->interaction, now});
        it = pending_.erase(it);
    }
    return out;
}

}  // namespace matb
