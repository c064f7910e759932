#include "matb/operator.hpp"

#include <algorithm>
#include <cmath>

namespace matb {

namespace {

constexpr double kEps = 1e-9;

double saturate(double x, double scale) { return 1.0 - std::exp(-x / scale); }

bool is_speech_channel(std::size_t c) {
    return c == static_cast<std::size_t>(Channel::SpeechRate) || c == static_cast<std::size_t>(Channel::SpeechIntensity) ||
           c == static_cast<std::size_t>(Channel::Pitch);
}

}  // namespace

InducedLoad induced_load(const OperatorActivity& a) {
    InducedLoad l{};
    const double steering = a.steering ? 1.0 : 0.0;
    l[index_of(Component::Cognitive)] = 0.10 + 0.25 * steering + 0.75 * saturate(a.known_demands, 2.0);
    l[index_of(Component::Physical)] = 0.08 + 0.50 * (a.walking ? 1.0 : 0.0) + 0.30 * std::min(1.0, a.joystick) +
                                       0.35 * saturate(a.known_demands, 3.0);
    l[index_of(Component::Visual)] = 0.10 + 0.25 * steering + 0.35 * saturate(a.visible_alarms, 1.0) +
                                     0.35 * saturate(a.known_demands, 3.0);
    l[index_of(Component::Auditory)] = 0.10 + 0.85 * saturate(a.audible, 0.6);
    l[index_of(Component::Speech)] = 0.08 + 0.90 * (a.speaking ? 1.0 : 0.0);
    for (auto& v : l) v = clamp01(v);
    return l;
}

PhysioGenerator::PhysioGenerator(const OperatorProfile& profile, std::uint64_t seed)
    : profile_(profile), rng_(seed), state_(profile.physio_baseline) {}

PhysioSample PhysioGenerator::step(const InducedLoad& load, bool speaking, Seconds t, Seconds dt) {
    PhysioSample s;
    s.t = t;
    const double alpha = profile_.smoothing_tau > 0.0 ? 1.0 - std::exp(-dt / profile_.smoothing_tau) : 1.0;
    for (std::size_t c = 0; c < kChannelCount; ++c) {
        double target = profile_.physio_baseline[c];
        double gain_sum = 0.0;
        for (std::size_t k = 0; k < kComponentCount; ++k) {
            target += profile_.physio_gain[c][k] * load[k];
            gain_sum += profile_.physio_gain[c][k];
        }
        state_[c] += alpha * (target - state_[c]);
        // Drawn for every channel so the stream does not depend on speech activity.
        const double noise = rng_.normal() * profile_.noise_fraction * gain_sum;
        if (is_speech_channel(c) && !speaking) s.channels[c] = 0.0;
        else s.channels[c] = std::max(0.0, state_[c] + noise);
    }
    return s;
}

SyntheticOperator::SyntheticOperator(const ScenarioConfig& cfg, std::uint64_t trial_seed)
    : cfg_(cfg),
      profile_(cfg.operator_profile),
      rng_(derive_seed(cfg.operator_profile.seed ? cfg.operator_profile.seed : trial_seed, Stream::Operator)),
      physio_(cfg.operator_profile,
              derive_seed(cfg.operator_profile.seed ? cfg.operator_profile.seed : trial_seed, Stream::Physio)) {}

void SyntheticOperator::notify(const Stimulus& s) {
    const Seconds t = s.t;
    if (s.kind == StimulusKind::Auditory) {
        audio_cue_until_ = t + 2.0;
        // An auditory alert tells the operator which station needs attention.
        Demand d;
        d.kind = Kind::Alarm;
        d.id = static_cast<int>(index_of(s.interaction.task));
        d.task = s.interaction.task;
        d.noticed = d.confirmed = t;
        d.deadline = t + 10.0;
        d.known = true;
        demands_.emplace(Key{static_cast<int>(Kind::Alarm), d.id}, d);
    } else {
        cue_until_[index_of(s.interaction.task)] = t + cfg_.policy.postpone;
    }
}

double SyntheticOperator::sample_rt(double base) {
    int known = 0;
    for (const auto& [k, d] : demands_) known += d.known ? 1 : 0;
    double rt = base * (1.0 + profile_.rt_inflation * std::max(0, known - 1));
    if (profile_.rt_noise > 0.0) {
        const double s = profile_.rt_noise;
        rt *= std::exp(s * rng_.normal() - 0.5 * s * s);
    }
    return rt;
}

OperatorInput SyntheticOperator::make(InputKind kind, Seconds now) const {
    OperatorInput in;
    in.kind = kind;
    in.timestamp = now;
    return in;
}

void SyntheticOperator::perceive(const WorldState& w, Seconds now) {
    const TaskSet visible = walking_ ? TaskSet{} : cfg_.layout.visible_from(station_);
    for (auto t : kAllTasks)
        if (visible.contains(t)) last_seen_[index_of(t)] = now;

    const auto delay = [&](Task t) {
        return now < cue_until_[index_of(t)] ? profile_.cued_perception_delay : profile_.perception_delay;
    };
    const auto observe = [&](Kind kind, int id, Task task, Seconds deadline) -> Demand& {
        auto [it, inserted] = demands_.try_emplace(Key{static_cast<int>(kind), id});
        Demand& d = it->second;
        if (inserted) {
            d.kind = kind;
            d.id = id;
            d.task = task;
            d.noticed = now;
        }
        d.confirmed = now;
        d.deadline = deadline;
        if (!d.known && now + kEps >= d.noticed + delay(task)) d.known = true;
        return d;
    };

    if (visible.contains(Task::SystemMonitoring)) {
        for (auto it = demands_.begin(); it != demands_.end();) {
            const bool gone = it->second.kind == Kind::Sysmon &&
                              std::none_of(w.sysmon.pending.begin(), w.sysmon.pending.end(),
                                           [&](const OutOfRangeEvent& e) { return e.id == it->second.id; });
            it = gone ? demands_.erase(it) : std::next(it);
        }
        for (const auto& e : w.sysmon.pending) observe(Kind::Sysmon, e.id, Task::SystemMonitoring, e.deadline).target = e.target;
    }

    // Radio messages are heard from anywhere once fully announced.
    for (const auto& r : w.comms.pending) {
        if (!r.own || now + kEps < r.issued_at + cfg_.comms.announcement) continue;
        auto& d = observe(Kind::Comms, r.id, Task::Communications, r.deadline);
        d.known = true;
        d.radio = r.radio;
        d.frequency_khz = r.frequency_khz;
    }

    if (visible.contains(Task::ResourceManagement)) {
        const bool needs = !plan_pump_toggles(w.resources, cfg_.fuel).empty();
        bool out = false;
        for (int i = 0; i < 2; ++i) {
            const double l = w.resources.tanks[i].level;
            out = out || l < cfg_.fuel.band_low || l > cfg_.fuel.band_high;
        }
        if (needs) observe(Kind::Fuel, 0, Task::ResourceManagement, out ? now + 5.0 : now + 20.0);
        else demands_.erase(Key{static_cast<int>(Kind::Fuel), 0});
    }

    if (visible.contains(Task::Tracking)) tracking_manual_ = w.tracking.mode == TrackingMode::Manual;

    for (auto t : kAllTasks)
        if (visible.contains(t)) demands_.erase(Key{static_cast<int>(Kind::Alarm), static_cast<int>(index_of(t))});

    // A red icon on the panel points at a station out of view; it only adds
    // something when nothing is already known about that task.
    if (!walking_ && (cfg_.policy.enable_autonomy || cfg_.policy.enable_interaction)) {
        for (auto t : kAllTasks) {
            if (visible.contains(t) || w.icons[index_of(t)] != IconColor::Red) continue;
            if (t == Task::Tracking && tracking_manual_) continue;
            const bool known_task = std::any_of(demands_.begin(), demands_.end(), [&](const auto& kv) {
                return kv.second.task == t && kv.second.kind != Kind::Alarm;
            });
            if (known_task) continue;
            auto [it, inserted] = demands_.try_emplace(Key{static_cast<int>(Kind::Alarm), static_cast<int>(index_of(t))});
            Demand& d = it->second;
            if (inserted) {
                d.kind = Kind::Alarm;
                d.id = static_cast<int>(index_of(t));
                d.task = t;
                d.noticed = now;
                d.deadline = now + profile_.perception_delay + 10.0;
            }
            d.confirmed = now;
            if (!d.known && now + kEps >= d.noticed + profile_.perception_delay) d.known = true;
        }
    }

    for (auto it = demands_.begin(); it != demands_.end();) {
        const Demand& d = it->second;
        bool drop = w.automation[index_of(d.task)];
        if (d.kind == Kind::Comms || d.kind == Kind::Sysmon || d.kind == Kind::Alarm) drop = drop || now > d.deadline;
        if (d.kind != Kind::Alarm) drop = drop || now - d.confirmed > profile_.memory_horizon;
        it = drop ? demands_.erase(it) : std::next(it);
    }
    if (w.automation[index_of(Task::Tracking)]) tracking_manual_ = false;
}

std::optional<SyntheticOperator::Demand> SyntheticOperator::choose(const WorldState& w, Seconds now) const {
    int known = 0;
    for (const auto& [k, d] : demands_) known += d.known ? 1 : 0;
    const double inflation = 1.0 + profile_.rt_inflation * std::max(0, known - 1);
    const auto travel = [&](const Demand& d) { return cfg_.layout.distance(station_, d.task) / profile_.walk_speed; };
    // Time left after getting there and responding at a typical pace.
    const auto slack = [&](const Demand& d) {
        double rt = 0.0;
        if (d.kind == Kind::Sysmon || d.kind == Kind::Comms || d.kind == Kind::Fuel)
            rt = profile_.reaction_time[index_of(d.task)] * inflation;
        return d.deadline - now - travel(d) - rt;
    };

    std::vector<Demand> candidates;
    for (const auto& [k, d] : demands_) {
        if (!d.known) continue;
        if (d.kind == Kind::Comms && w.comms.speech_mode) continue;  // handled by voice
        // Demands that would expire before a typical response are abandoned.
        if ((d.kind == Kind::Sysmon || d.kind == Kind::Comms) && slack(d) < 0.0) continue;
        candidates.push_back(d);
    }

    if (tracking_manual_) {
        Demand d;
        d.kind = Kind::Tracking;
        d.task = Task::Tracking;
        const bool here = !walking_ && cfg_.layout.visible_from(station_).contains(Task::Tracking);
        if (here) {
            const double err = (w.tracking.target - w.tracking.center).norm();
            d.deadline = now + (err > cfg_.tracking.alarm_radius ? 2.0 : 10.0);
        } else {
            d.deadline = last_seen_[index_of(Task::Tracking)] + 5.0;
        }
        candidates.push_back(d);
    }

    for (auto t : kAllTasks) {
        if (w.automation[index_of(t)] || t == Task::Tracking) continue;
        const Seconds seen = last_seen_[index_of(t)];
        if (now - seen <= profile_.scan_interval) continue;
        Demand d;
        d.kind = Kind::Scan;
        d.task = t;
        d.id = static_cast<int>(index_of(t));
        d.deadline = seen + profile_.scan_interval + 10.0;
        candidates.push_back(d);
    }
    if (candidates.empty()) return std::nullopt;

    return *std::min_element(candidates.begin(), candidates.end(), [&](const Demand& a, const Demand& b) {
        const double sa = slack(a), sb = slack(b);
        if (sa != sb) return sa < sb;
        return travel(a) < travel(b);
    });
}

void SyntheticOperator::update_activity(const WorldState& w, Seconds now) {
    OperatorActivity a;
    a.walking = walking_;
    a.speaking = speaking(now);
    a.steering = !walking_ && station_ == Task::Tracking && w.tracking.mode == TrackingMode::Manual;
    a.joystick = a.steering ? joystick_.norm() : 0.0;
    for (const auto& [k, d] : demands_)
        if (d.known && d.kind != Kind::Scan) ++a.known_demands;
    if (tracking_manual_) ++a.known_demands;
    if (!walking_) {
        const TaskSet visible = cfg_.layout.visible_from(station_);
        if (visible.contains(Task::SystemMonitoring)) a.visible_alarms += static_cast<int>(w.sysmon.pending.size());
        if (visible.contains(Task::ResourceManagement))
            for (int i = 0; i < 2; ++i) {
                const double l = w.resources.tanks[i].level;
                a.visible_alarms += (l < cfg_.fuel.band_low || l > cfg_.fuel.band_high) ? 1 : 0;
            }
        if (visible.contains(Task::Tracking) && task_out_of_range(w, Task::Tracking, cfg_)) ++a.visible_alarms;
    }
    for (const auto& r : w.comms.pending)
        if (now < r.issued_at + cfg_.comms.announcement + kEps) ++a.audible;
    if (now < audio_cue_until_) ++a.audible;
    activity_ = a;
    const auto l = induced_load(a);
    for (std::size_t k = 0; k < kComponentCount; ++k) load_sum_[k] += l[k];
    ++load_ticks_;
}

void SyntheticOperator::voice(const WorldState& w, Seconds now, std::vector<OperatorInput>& out) {
    if (!w.comms.speech_mode) {
        voice_at_.reset();
        return;
    }
    if (voice_at_) {
        if (now + kEps < *voice_at_) return;
        voice_at_.reset();
        out.push_back(make(InputKind::SpeechUtterance, now));
        speaking_until_ = now + profile_.readback;
        // The console resolves the oldest own request; forget that one.
        auto oldest = demands_.end();
        for (auto it = demands_.begin(); it != demands_.end(); ++it)
            if (it->second.kind == Kind::Comms && (oldest == demands_.end() || it->second.id < oldest->second.id))
                oldest = it;
        if (oldest != demands_.end()) demands_.erase(oldest);
        return;
    }
    if (speaking(now)) return;
    const bool pending = std::any_of(demands_.begin(), demands_.end(),
                                     [](const auto& kv) { return kv.second.kind == Kind::Comms && kv.second.known; });
    if (pending) voice_at_ = now + sample_rt(profile_.speech_reaction);
}

std::vector<OperatorInput> SyntheticOperator::step(const WorldState& w, Seconds now) {
    std::vector<OperatorInput> out;
    const auto finish = [&] {
        update_activity(w, now);
        return out;
    };

    if (walking_ && now + kEps >= arrive_at_) {
        walking_ = false;
        station_ = walk_to_;
        auto in = make(InputKind::MoveToStation, now);
        in.station = station_;
        out.push_back(in);
    }
    perceive(w, now);
    // Speech runs alongside whatever the hands and feet are doing.
    voice(w, now, out);
    if (walking_) return finish();

    if (acting_) {
        if (now + kEps < ready_at_) return finish();
        const Demand d = *acting_;
        acting_.reset();
        switch (d.kind) {
            case Kind::Sysmon: {
                const bool still = std::any_of(w.sysmon.pending.begin(), w.sysmon.pending.end(),
                                               [&](const OutOfRangeEvent& e) { return e.id == d.id; });
                if (still) {
                    auto in = make(InputKind::MouseClick, now);
                    in.target = sysmon_target_name(d.target);
                    out.push_back(in);
                }
                demands_.erase(Key{static_cast<int>(Kind::Sysmon), d.id});
                break;
            }
            case Kind::Fuel: {
                const auto plan = plan_pump_toggles(w.resources, cfg_.fuel);
                if (!plan.empty()) {
                    auto in = make(InputKind::MouseClick, now);
                    in.target = "pump" + std::to_string(plan.front() + 1);
                    out.push_back(in);
                }
                break;
            }
            case Kind::Comms: {
                auto in = make(InputKind::KeyPress, now);
                in.radio = d.radio;
                in.frequency_khz = d.frequency_khz;
                out.push_back(in);
                demands_.erase(Key{static_cast<int>(Kind::Comms), d.id});
                speaking_until_ = now + profile_.readback;
                break;
            }
            default: break;
        }
        return finish();
    }

    std::optional<Demand> choice;
    const bool at_tracking = station_ == Task::Tracking && tracking_manual_;
    if (intent_ && intent_->task == station_) {
        // Arrived: act on what the walk was for if it is still there.
        const Demand want = *intent_;
        intent_.reset();
        if (want.kind == Kind::Tracking) {
            if (at_tracking) choice = want;
        } else if (auto it = demands_.find(Key{static_cast<int>(want.kind), want.id}); it != demands_.end()) {
            choice = it->second;
        }
    } else if (at_tracking && now < dwell_until_) {
        choice = Demand{};
        choice->kind = Kind::Tracking;
        choice->task = Task::Tracking;
    }
    if (!choice) choice = choose(w, now);
    if (!choice) return finish();
    const Demand& d = *choice;

    const Task where = d.task;  // acting on a task means standing at its station
    if (where != station_) {
        if (station_ == Task::Tracking && joystick_ != Vec2{}) {
            joystick_ = {};
            auto in = make(InputKind::JoystickVector, now);
            out.push_back(in);
        }
        walking_ = true;
        walk_to_ = where;
        intent_ = d;
        arrive_at_ = now + cfg_.layout.distance(station_, where) / profile_.walk_speed;
        return finish();
    }

    switch (d.kind) {
        case Kind::Tracking:
            if (now >= dwell_until_) dwell_until_ = now + profile_.tracking_dwell;
            if (now + kEps >= next_steer_ && w.tracking.mode == TrackingMode::Manual) {
                Vec2 j = (w.tracking.target - w.tracking.center) * (1.0 / profile_.joystick_px);
                const double m = j.norm();
                if (m > 1.0) j = j * (1.0 / m);
                joystick_ = j;
                auto in = make(InputKind::JoystickVector, now);
                in.joystick = j;
                out.push_back(in);
                next_steer_ = now + profile_.joystick_period;
            }
            break;
        case Kind::Sysmon:
        case Kind::Fuel:
        case Kind::Comms:
            acting_ = d;
            ready_at_ = now + sample_rt(profile_.reaction_time[index_of(d.task)]);
            break;
        case Kind::Scan:
        case Kind::Alarm: break;
    }
    return finish();
}

PhysioReading SyntheticOperator::physio(const WorldState&, Seconds now) {
    InducedLoad mean{};
    if (load_ticks_ > 0)
        for (std::size_t k = 0; k < kComponentCount; ++k) mean[k] = load_sum_[k] / load_ticks_;
    load_sum_ = {};
    load_ticks_ = 0;
    PhysioReading r;
    r.sample = physio_.step(mean, speaking(now), now, cfg_.timing.physio_period);
    r.load = mean;
    return r;
}

}  // namespace matb
