#include "matb/sim_engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace matb {

namespace {

constexpr std::array<std::string_view, 4> kRadioNames = {"COM1", "COM2", "NAV1", "NAV2"};
constexpr std::array<char, 6> kTankIds = {'A', 'B', 'C', 'D', 'E', 'F'};
// Pump n (1-based) moves fuel from -> to (tank indices A=0 .. F=5).
constexpr std::array<std::pair<int, int>, 8> kPumpRoutes = {
    {{2, 0}, {4, 0}, {3, 1}, {5, 1}, {4, 2}, {5, 3}, {0, 1}, {1, 0}}};

constexpr double kTimeEps = 1e-9;

int radio_index(std::string_view name) {
    for (std::size_t i = 0; i < kRadioNames.size(); ++i)
        if (kRadioNames[i] == name) return static_cast<int>(i);
    return -1;
}

std::string_view resolution_name(Resolution r) {
    switch (r) {
        case Resolution::Operator: return "operator";
        case Resolution::Automation: return "automation";
        case Resolution::Expired: return "expired";
    }
    return "?";
}

int random_frequency(Rng& rng, int radio) {
    if (radio < 2) return 118000 + 25 * rng.uniform_int(0, 759);  // COM band, 25 kHz steps
    return 108000 + 50 * rng.uniform_int(0, 199);                 // NAV band, 50 kHz steps
}

class DigestBuilder {
public:
    template <class T>
    void add(const T& v) {
        char buf[sizeof(T)];
        std::memcpy(buf, &v, sizeof(T));
        h_ = fnv1a(std::string_view(buf, sizeof(T)), h_);
    }
    void add(std::string_view s) { h_ = fnv1a(s, h_); }
    std::uint64_t value() const { return h_; }

private:
    std::uint64_t h_ = 0xcbf29ce484222325ull;
};

}  // namespace

// ---------------------------------------------------------------------------
// free functions

TrackingState tracking_dynamics(TrackingState s, Vec2 joystick, Seconds dt, Vec2 disturbance,
                                const TrackingConfig& cfg) {
    if (s.mode == TrackingMode::Manual) {
        s.target = s.target + disturbance - joystick * (cfg.joystick_gain * dt);
    } else {
        const double pull = 1.0 - std::exp(-cfg.auto_rate * dt);
        s.target = s.target + (s.center - s.target) * pull;
    }
    s.target.x = std::clamp(s.target.x, 0.0, cfg.screen_width);
    s.target.y = std::clamp(s.target.y, 0.0, cfg.screen_height);
    return s;
}

std::string sysmon_target_name(int target) {
    if (target == 0) return "green";
    if (target == 1) return "red";
    return "gauge" + std::to_string(target - 1);
}

std::optional<int> parse_sysmon_target(std::string_view name) {
    for (int i = 0; i < kSysmonTargets; ++i)
        if (sysmon_target_name(i) == name) return i;
    return std::nullopt;
}

bool SysMonState::target_busy(int target) const noexcept {
    return std::any_of(pending.begin(), pending.end(), [&](const OutOfRangeEvent& e) { return e.target == target; });
}

std::vector<int> plan_pump_toggles(const ResourceState& r, const FuelConfig& cfg) {
    const double mid = 0.5 * (cfg.band_low + cfg.band_high);
    std::array<bool, 8> on{};
    for (std::size_t i = 0; i < 8; ++i) on[i] = r.pumps[i].status == PumpStatus::On;
    std::vector<int> toggles;
    auto toggle = [&](int p) {
        on[p] = !on[p];
        toggles.push_back(p);
    };
    const auto usable = [&](int p) { return r.pumps[p].status != PumpStatus::Failed; };

    for (int main = 0; main < 2; ++main) {
        const int other = 1 - main;
        const double level = r.tanks[main].level;
        const double other_level = r.tanks[other].level;

        // A transfer draining this tank while it is low works against us.
        for (int p = 0; p < 8; ++p)
            if (on[p] && r.pumps[p].from == main && r.pumps[p].to == other && level < mid) toggle(p);

        std::vector<int> feeders;
        for (int pass = 0; pass < 3; ++pass) {
            for (int p = 0; p < 8; ++p) {
                if (r.pumps[p].to != main || !usable(p)) continue;
                const auto& src = r.tanks[r.pumps[p].from];
                const bool unbounded = !src.finite();
                const bool is_transfer = r.pumps[p].from == other;
                if (pass == 0 && unbounded) feeders.push_back(p);
                if (pass == 1 && !unbounded && !is_transfer && src.level > 50.0) feeders.push_back(p);
                if (pass == 2 && is_transfer && other_level > mid + 100.0) feeders.push_back(p);
            }
        }
        int on_count = 0;
        for (int p : feeders) on_count += on[p] ? 1 : 0;

        int want;
        if (level < cfg.band_low + 150.0) want = 2;
        else if (level < mid - 100.0) want = std::max(1, std::min(on_count, 2));
        else if (level <= mid + 100.0) want = std::min(on_count, 1);
        else want = 0;

        for (int p : feeders) {
            if (on_count >= want) break;
            if (!on[p]) {
                toggle(p);
                ++on_count;
            }
        }
        for (auto it = feeders.rbegin(); it != feeders.rend() && on_count > want; ++it) {
            if (on[*it]) {
                toggle(*it);
                --on_count;
            }
        }
        // Feeders that are on but no longer preferred (e.g. source ran dry) are left alone.
        if (want == 0)
            for (int p = 0; p < 8; ++p)
                if (on[p] && r.pumps[p].to == main) toggle(p);
    }

    // Keep the finite reserves C and D topped up from E and F.
    for (int res : {2, 3}) {
        const int p = res == 2 ? 4 : 5;
        if (!usable(p)) continue;
        const double cap = r.tanks[res].capacity;
        if (!on[p] && r.tanks[res].level < 0.4 * cap) toggle(p);
        else if (on[p] && r.tanks[res].level > 0.8 * cap) toggle(p);
    }
    return toggles;
}

Task OperatorInput::source_task() const {
    switch (kind) {
        case InputKind::JoystickVector: return Task::Tracking;
        case InputKind::MouseClick:
            if (target.rfind("pump", 0) == 0) return Task::ResourceManagement;
            return Task::SystemMonitoring;
        case InputKind::KeyPress:
        case InputKind::SpeechUtterance: return Task::Communications;
        case InputKind::MoveToStation: return station;
    }
    return Task::Tracking;
}

nlohmann::json to_json(const OperatorInput& in) {
    nlohmann::json j;
    j["ts"] = in.timestamp;
    switch (in.kind) {
        case InputKind::JoystickVector:
            j["kind"] = "joystick_vector";
            j["x"] = in.joystick.x;
            j["y"] = in.joystick.y;
            break;
        case InputKind::MouseClick:
            j["kind"] = "mouse_click";
            j["target"] = in.target;
            break;
        case InputKind::KeyPress:
            j["kind"] = "key_press";
            j["radio"] = (in.radio >= 0 && in.radio < 4) ? std::string(kRadioNames[in.radio]) : std::string("?");
            j["frequency"] = in.frequency_khz;
            break;
        case InputKind::SpeechUtterance: j["kind"] = "speech_utterance"; break;
        case InputKind::MoveToStation:
            j["kind"] = "move_to_station";
            j["task"] = std::string(task_name(in.station));
            break;
    }
    return j;
}

OperatorInput input_from_json(const nlohmann::json& j) {
    OperatorInput in;
    try {
        in.timestamp = j.value("ts", 0.0);
        const auto kind = j.at("kind").get<std::string>();
        if (kind == "joystick_vector") {
            in.kind = InputKind::JoystickVector;
            in.joystick = {j.at("x").get<double>(), j.at("y").get<double>()};
        } else if (kind == "mouse_click") {
            in.kind = InputKind::MouseClick;
            in.target = j.at("target").get<std::string>();
        } else if (kind == "key_press") {
            in.kind = InputKind::KeyPress;
            in.radio = radio_index(j.at("radio").get<std::string>());
            if (in.radio < 0) throw std::runtime_error("unknown radio");
            in.frequency_khz = j.at("frequency").get<int>();
        } else if (kind == "speech_utterance") {
            in.kind = InputKind::SpeechUtterance;
        } else if (kind == "move_to_station") {
            in.kind = InputKind::MoveToStation;
            auto t = parse_task(j.at("task").get<std::string>());
            if (!t) throw std::runtime_error("unknown station");
            in.station = *t;
        } else {
            throw std::runtime_error("unknown input kind '" + kind + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("malformed operator input: ") + e.what());
    }
    return in;
}

std::string_view icon_name(IconColor c) noexcept {
    switch (c) {
        case IconColor::Green: return "green";
        case IconColor::Red: return "red";
        case IconColor::Grey: return "grey";
    }
    return "?";
}

WorkloadCondition build_condition(LoadLabel label, const ScenarioConfig& cfg) { return cfg.condition(label); }

WorkloadCondition build_condition(std::string_view label, const ScenarioConfig& cfg) {
    return build_condition(parse_label(label), cfg);
}

std::vector<ScheduledEvent> schedule_block_events(const WorkloadCondition& c, Seconds block_duration, Rng& rng,
                                                  const CommsConfig& comms) {
    std::vector<ScheduledEvent> out;
    if (!(block_duration > 0.0)) return out;

    const double minutes = block_duration / 60.0;
    const int full = static_cast<int>(std::floor(minutes + kTimeEps));
    const double frac = std::max(0.0, minutes - full);
    const int total_minutes = full + (frac > kTimeEps ? 1 : 0);

    auto stratified = [&](int n, double start, double span, auto make) {
        for (int j = 0; j < n; ++j) {
            ScheduledEvent e = make();
            e.t = start + (j + rng.uniform()) * span / n;
            out.push_back(e);
        }
    };

    for (int m = 0; m < total_minutes; ++m) {
        const bool partial = m == full;
        const double span = partial ? frac * 60.0 : 60.0;
        const double start = 60.0 * m;
        const auto count = [&](int rate) {
            return partial ? static_cast<int>(std::floor(rate * frac + kTimeEps)) : rate;
        };

        stratified(count(c.sysmon_events_per_min), start, span,
                   [] { return ScheduledEvent{0.0, ScheduledKind::SysmonOnset}; });

        int pump_rate = 0;
        if (!(c.pump_failures_alternate && m % 2 == 0))
            pump_rate = rng.uniform_int(c.pump_failures_min, c.pump_failures_max);
        stratified(count(pump_rate), start, span, [] { return ScheduledEvent{0.0, ScheduledKind::PumpFailure}; });

        const int comms_rate = rng.uniform_int(c.comms_requests_min, c.comms_requests_max);
        stratified(count(comms_rate), start, span, [&] {
            ScheduledEvent e{0.0, ScheduledKind::CommsRequest};
            e.own = !rng.bernoulli(comms.distractor_ratio);
            const int n_foreign = static_cast<int>(comms.foreign_callsigns.size());
            if (n_foreign == 0) e.own = true;
            e.callsign = e.own ? 0 : rng.uniform_int(0, n_foreign - 1);
            e.radio = rng.uniform_int(0, 3);
            e.frequency_khz = random_frequency(rng, e.radio);
            return e;
        });
    }

    switch (c.tracking) {
        case TrackingPolicy::AlwaysAuto:
            out.push_back({0.0, ScheduledKind::TrackingMode, false, 0, 0, 0, TrackingMode::Automatic});
            break;
        case TrackingPolicy::AlwaysManual:
            out.push_back({0.0, ScheduledKind::TrackingMode, false, 0, 0, 0, TrackingMode::Manual});
            break;
        case TrackingPolicy::Alternate: {
            TrackingMode mode = TrackingMode::Manual;
            for (double t = 0.0; t < block_duration - kTimeEps; t += c.tracking_alternate_period) {
                out.push_back({t, ScheduledKind::TrackingMode, false, 0, 0, 0, mode});
                mode = mode == TrackingMode::Manual ? TrackingMode::Automatic : TrackingMode::Manual;
            }
            break;
        }
    }

    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.t < b.t; });
    return out;
}

TaskSet infer_active_tasks(const std::optional<OperatorInput>& last_input, const StationLayout& layout) {
    if (!last_input) return TaskSet::all();
    return layout.visible_from(last_input->source_task());
}

// ---------------------------------------------------------------------------
// SimEngine

SimEngine::SimEngine(const ScenarioConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), seed_(seed), tracking_rng_(derive_seed(seed, Stream::Engine, 1)) {
    auto& w = world_;
    w.clock.tick_seconds = cfg.timing.tick_seconds;
    w.clock.ticks_per_second = cfg.ticks_per_second();
    w.tracking.center = {cfg.tracking.screen_width / 2.0, cfg.tracking.screen_height / 2.0};
    w.tracking.target = w.tracking.center;
    w.tracking.mode = TrackingMode::Automatic;
    w.tracking.disturbance_seed = derive_seed(seed, Stream::Engine, 1);

    for (std::size_t i = 0; i < 6; ++i)
        w.resources.tanks[i] = {kTankIds[i], cfg.fuel.start_levels[i], cfg.fuel.capacities[i]};
    for (std::size_t i = 0; i < 8; ++i)
        w.resources.pumps[i] = {static_cast<int>(i + 1), PumpStatus::Off, cfg.fuel.pump_rates[i],
                                kPumpRoutes[i].first, kPumpRoutes[i].second, 0.0};

    w.comms.radios = {{{"COM1", 126500}, {"COM2", 124350}, {"NAV1", 112500}, {"NAV2", 115700}}};
    w.comms.own_callsign = cfg.comms.own_callsign;
    w.automation = {true, false, false, false};  // tracking starts automatic until a block says otherwise
    w.condition = cfg.script.empty() ? cfg.conditions[1] : cfg.condition(cfg.script.front().label);
    w.rng = Rng(derive_seed(seed, Stream::Engine));
    for (int i = 0; i < 2; ++i) {
        const double l = w.resources.tanks[i].level;
        fuel_out_[i] = l < cfg.fuel.band_low || l > cfg.fuel.band_high;
    }
}

void SimEngine::emit(std::string kind, nlohmann::json payload) {
    events_.push_back(LogEvent{now(), std::move(kind), std::move(payload)});
}

std::vector<LogEvent> SimEngine::take_events() { return std::exchange(events_, {}); }
std::vector<Interaction> SimEngine::take_interactions() { return std::exchange(interactions_, {}); }

void SimEngine::begin_block(std::size_t index) {
    if (index >= cfg_.script.size()) throw std::out_of_range("block index beyond script");
    const auto& block = cfg_.script[index];
    block_start_ = now();
    world_.block_index = static_cast<int>(index);
    world_.condition = cfg_.condition(block.label);
    emit("block_start", {{"index", index}, {"label", std::string(label_name(block.label))}, {"duration", block.duration}});

    Rng srng(derive_seed(seed_, Stream::Schedule, index));
    schedule_.clear();
    for (auto e : schedule_block_events(world_.condition, block.duration, srng, cfg_.comms)) {
        e.t += block_start_;
        schedule_.push_back(e);
    }
    while (!schedule_.empty() && schedule_.front().t <= now() + kTimeEps) {
        fire_scheduled(schedule_.front());
        schedule_.pop_front();
    }
}

void SimEngine::fire_scheduled(const ScheduledEvent& e) {
    auto& w = world_;
    switch (e.kind) {
        case ScheduledKind::SysmonOnset: start_sysmon_event(); break;
        case ScheduledKind::PumpFailure: {
            std::vector<int> candidates;
            for (int p = 0; p < 8; ++p)
                if (w.resources.pumps[p].status != PumpStatus::Failed) candidates.push_back(p);
            if (candidates.empty()) {
                emit("pump_failure_skipped", nlohmann::json::object());
                break;
            }
            const int p = candidates[w.rng.uniform_int(0, static_cast<int>(candidates.size()) - 1)];
            w.resources.pumps[p].status = PumpStatus::Failed;
            w.resources.pumps[p].repair_at = now() + cfg_.fuel.pump_repair;
            emit("pump_failed", {{"pump", p + 1}});
            break;
        }
        case ScheduledKind::CommsRequest: {
            CommsRequest r;
            r.id = next_comms_id_++;
            r.own = e.own;
            r.callsign = e.own ? cfg_.comms.own_callsign : cfg_.comms.foreign_callsigns.at(e.callsign);
            r.radio = e.radio;
            r.frequency_khz = e.frequency_khz;
            r.issued_at = now();
            r.deadline = now() + cfg_.comms.response_window;
            w.comms.pending.push_back(r);
            emit("comms_request", {{"id", r.id},
                                   {"callsign", r.callsign},
                                   {"radio", std::string(kRadioNames[r.radio])},
                                   {"frequency", r.frequency_khz},
                                   {"own", r.own}});
            break;
        }
        case ScheduledKind::TrackingMode:
            set_task_automation(Task::Tracking, e.mode == TrackingMode::Automatic, "condition");
            break;
    }
}

void SimEngine::start_sysmon_event() {
    auto& s = world_.sysmon;
    std::vector<int> free;
    for (int t = 0; t < kSysmonTargets; ++t)
        if (!s.target_busy(t)) free.push_back(t);
    if (free.empty()) {
        ++s.deferred;
        return;
    }
    const int target = free[world_.rng.uniform_int(0, static_cast<int>(free.size()) - 1)];
    OutOfRangeEvent e{next_sysmon_id_++, target, now(), now() + cfg_.sysmon.failure_window};
    if (target == 0) s.green_on = false;
    else if (target == 1) s.red_on = true;
    else {
        auto& g = s.gauges[target - 2];
        g.out_of_range = true;
        g.indicator_pos = world_.rng.bernoulli(0.5) ? 0.92 : 0.08;
    }
    s.pending.push_back(e);
    emit("sysmon_onset", {{"id", e.id}, {"target", sysmon_target_name(target)}});
    interactions_.push_back({Task::SystemMonitoring, "sysmon", e.id, now()});
}

void SimEngine::resolve_sysmon(std::size_t index, Resolution how) {
    auto& s = world_.sysmon;
    const OutOfRangeEvent e = s.pending[index];
    s.pending.erase(s.pending.begin() + static_cast<std::ptrdiff_t>(index));
    if (e.target == 0) s.green_on = true;
    else if (e.target == 1) s.red_on = false;
    else {
        auto& g = s.gauges[e.target - 2];
        g.out_of_range = false;
        g.indicator_pos = 0.5;
    }
    scores_.outcomes.push_back({Task::SystemMonitoring, e.id, e.onset, now(), how});
    emit("outcome", {{"task", "sysmon"},
                     {"id", e.id},
                     {"onset", e.onset},
                     {"how", std::string(resolution_name(how))},
                     {"target", sysmon_target_name(e.target)}});
}

void SimEngine::resolve_comms(std::size_t index, Resolution how) {
    auto& c = world_.comms;
    const CommsRequest r = c.pending[index];
    c.pending.erase(c.pending.begin() + static_cast<std::ptrdiff_t>(index));
    if (how != Resolution::Expired) c.radios[r.radio].frequency_khz = r.frequency_khz;
    scores_.outcomes.push_back({Task::Communications, r.id, r.issued_at, now(), how});
    emit("outcome", {{"task", "comms"}, {"id", r.id}, {"onset", r.issued_at}, {"how", std::string(resolution_name(how))}});
}

void SimEngine::apply_pump_toggles(const std::vector<int>& pumps, std::string_view by) {
    for (int p : pumps) {
        auto& pump = world_.resources.pumps[p];
        if (pump.status == PumpStatus::Failed) continue;
        pump.status = pump.status == PumpStatus::On ? PumpStatus::Off : PumpStatus::On;
        emit("pump_toggled", {{"pump", p + 1}, {"on", pump.status == PumpStatus::On}, {"by", std::string(by)}});
    }
}

void SimEngine::set_tracking_mode(TrackingMode mode, std::string_view cause) {
    auto& tr = world_.tracking;
    if (tr.mode == mode) return;
    tr.mode = mode;
    tr.joystick = {};
    emit("tracking_mode", {{"mode", mode == TrackingMode::Manual ? "manual" : "automatic"}, {"cause", std::string(cause)}});
    interactions_.push_back({Task::Tracking, "tracking_mode", 0, now()});
}

void SimEngine::set_task_automation(Task task, bool on, std::string_view cause) {
    auto& flag = world_.automation[index_of(task)];
    if (task == Task::Tracking) {
        // The condition schedule and the policy share this switch.
        const auto mode = on ? TrackingMode::Automatic : TrackingMode::Manual;
        if (flag == on && world_.tracking.mode == mode) return;
        flag = on;
        automation_since_[index_of(task)] = now();
        emit("automation", {{"task", std::string(task_name(task))}, {"on", on}, {"cause", std::string(cause)}});
        set_tracking_mode(mode, cause);
        return;
    }
    if (flag == on) return;
    flag = on;
    automation_since_[index_of(task)] = now();
    emit("automation", {{"task", std::string(task_name(task))}, {"on", on}, {"cause", std::string(cause)}});
}

void SimEngine::set_speech_mode(bool on) {
    if (world_.comms.speech_mode == on) return;
    world_.comms.speech_mode = on;
    emit("speech_mode", {{"on", on}});
}

void SimEngine::set_icons(const std::array<IconColor, kTaskCount>& icons) {
    if (world_.icons == icons) return;
    world_.icons = icons;
    nlohmann::json j;
    for (auto t : kAllTasks) j[std::string(task_name(t))] = std::string(icon_name(icons[index_of(t)]));
    emit("icons", j);
}

void SimEngine::apply_operator_input(const OperatorInput& input) {
    if (std::abs(input.timestamp - now()) > kTimeEps)
        throw std::invalid_argument("operator input timestamp does not match the engine clock");
    auto& w = world_;
    w.last_input = input;
    std::string result = "applied";
    const auto automated = [&](Task t) { return w.automation[index_of(t)]; };

    switch (input.kind) {
        case InputKind::JoystickVector: {
            if (automated(Task::Tracking)) {
                result = "ignored:automated";
                break;
            }
            Vec2 v = input.joystick;
            const double mag = v.norm();
            if (mag > 1.0) v = v * (1.0 / mag);
            w.tracking.joystick = v;
            break;
        }
        case InputKind::MouseClick: {
            if (auto target = parse_sysmon_target(input.target)) {
                if (automated(Task::SystemMonitoring)) {
                    result = "ignored:automated";
                    break;
                }
                auto& pending = w.sysmon.pending;
                auto it = std::find_if(pending.begin(), pending.end(),
                                       [&](const OutOfRangeEvent& e) { return e.target == *target; });
                if (it == pending.end()) result = "false_alarm";
                else resolve_sysmon(static_cast<std::size_t>(it - pending.begin()), Resolution::Operator);
            } else if (input.target.rfind("pump", 0) == 0) {
                int p = -1;
                try {
                    p = std::stoi(input.target.substr(4)) - 1;
                } catch (...) {
                }
                if (p < 0 || p >= 8) {
                    result = "ignored:unknown_target";
                } else if (automated(Task::ResourceManagement)) {
                    result = "ignored:automated";
                } else if (w.resources.pumps[p].status == PumpStatus::Failed) {
                    result = "ignored:failed_pump";
                } else {
                    apply_pump_toggles({p}, "operator");
                }
            } else {
                result = "ignored:unknown_target";
            }
            break;
        }
        case InputKind::KeyPress: {
            if (input.radio < 0 || input.radio >= 4) {
                result = "ignored:unknown_radio";
                break;
            }
            if (automated(Task::Communications)) {
                result = "ignored:automated";
                break;
            }
            w.comms.radios[input.radio].frequency_khz = input.frequency_khz;
            auto& pending = w.comms.pending;
            const auto matches = [&](const CommsRequest& r) {
                return r.radio == input.radio && r.frequency_khz == input.frequency_khz;
            };
            auto own = std::find_if(pending.begin(), pending.end(),
                                    [&](const CommsRequest& r) { return r.own && matches(r); });
            if (own != pending.end()) resolve_comms(static_cast<std::size_t>(own - pending.begin()), Resolution::Operator);
            else if (std::any_of(pending.begin(), pending.end(), matches)) result = "foreign_callsign";
            else result = "no_request";
            break;
        }
        case InputKind::SpeechUtterance: {
            if (!w.comms.speech_mode) {
                result = "ignored:speech_off";
                break;
            }
            if (automated(Task::Communications)) {
                result = "ignored:automated";
                break;
            }
            auto& pending = w.comms.pending;
            auto own = std::find_if(pending.begin(), pending.end(), [](const CommsRequest& r) { return r.own; });
            if (own == pending.end()) result = "no_request";
            else resolve_comms(static_cast<std::size_t>(own - pending.begin()), Resolution::Operator);
            break;
        }
        case InputKind::MoveToStation: break;
    }
    emit("input", {{"input", to_json(input)}, {"result", result}, {"digest", hex64(state_digest())}});
}

void SimEngine::step_gauges(Seconds dt) {
    const auto& c = cfg_.sysmon;
    for (auto& g : world_.sysmon.gauges) {
        const double noise = world_.rng.normal() * c.gauge_noise;
        if (g.out_of_range) continue;
        g.indicator_pos += c.gauge_reversion * (0.5 - g.indicator_pos) * dt + noise;
        g.indicator_pos = std::clamp(g.indicator_pos, c.gauge_low + 0.01, c.gauge_high - 0.01);
    }
}

void SimEngine::step_fuel(Seconds dt) {
    auto& r = world_.resources;
    for (auto& pump : r.pumps) {
        if (pump.status != PumpStatus::On) continue;
        auto& src = r.tanks[pump.from];
        auto& dst = r.tanks[pump.to];
        double amount = pump.rate / 60.0 * dt;
        if (src.finite()) amount = std::min(amount, src.level);
        if (dst.finite()) amount = std::min(amount, std::max(0.0, dst.capacity - dst.level));
        if (src.finite()) src.level -= amount;
        if (dst.finite()) dst.level += amount;
    }
    auto& a = r.tanks[0];
    auto& b = r.tanks[1];
    a.level -= std::min(a.level, cfg_.fuel.consumption_a / 60.0 * dt);
    b.level -= std::min(b.level, cfg_.fuel.consumption_b / 60.0 * dt);
}

void SimEngine::step_automation() {
    const Seconds t = now();
    const Seconds latency = cfg_.automation_latency;
    if (world_.automation[index_of(Task::SystemMonitoring)]) {
        const Seconds since = automation_since_[index_of(Task::SystemMonitoring)];
        for (std::size_t i = 0; i < world_.sysmon.pending.size();) {
            const auto& e = world_.sysmon.pending[i];
            if (t + kTimeEps >= std::max(e.onset, since) + latency) resolve_sysmon(i, Resolution::Automation);
            else ++i;
        }
    }
    if (world_.automation[index_of(Task::Communications)]) {
        const Seconds since = automation_since_[index_of(Task::Communications)];
        for (std::size_t i = 0; i < world_.comms.pending.size();) {
            const auto& r = world_.comms.pending[i];
            if (r.own && t + kTimeEps >= std::max(r.issued_at, since) + latency) resolve_comms(i, Resolution::Automation);
            else ++i;
        }
    }
    if (world_.automation[index_of(Task::ResourceManagement)]) {
        const Seconds since = automation_since_[index_of(Task::ResourceManagement)];
        if (t + kTimeEps >= since + latency && t + kTimeEps >= last_resman_automation_ + latency) {
            apply_pump_toggles(plan_pump_toggles(world_.resources, cfg_.fuel), "automation");
            last_resman_automation_ = t;
        }
    }
}

void SimEngine::step_expiry() {
    const Seconds t = now();
    for (std::size_t i = 0; i < world_.sysmon.pending.size();) {
        if (t + kTimeEps >= world_.sysmon.pending[i].deadline) resolve_sysmon(i, Resolution::Expired);
        else ++i;
    }
    auto& pending = world_.comms.pending;
    for (std::size_t i = 0; i < pending.size();) {
        if (t + kTimeEps < pending[i].deadline) {
            ++i;
            continue;
        }
        if (pending[i].own) {
            resolve_comms(i, Resolution::Expired);
        } else {
            emit("comms_lapsed", {{"id", pending[i].id}});
            pending.erase(pending.begin() + static_cast<std::ptrdiff_t>(i));
        }
    }
}

void SimEngine::check_fuel_band() {
    for (int i = 0; i < 2; ++i) {
        const double l = world_.resources.tanks[i].level;
        const bool out = l < cfg_.fuel.band_low || l > cfg_.fuel.band_high;
        if (out == fuel_out_[i]) continue;
        fuel_out_[i] = out;
        const std::string tank(1, kTankIds[i]);
        if (out) {
            emit("fuel_out_of_range", {{"tank", tank}});
            interactions_.push_back({Task::ResourceManagement, "fuel", i, now()});
        } else {
            emit("fuel_in_range", {{"tank", tank}});
        }
    }
}

void SimEngine::accumulate_scores() {
    auto& acc = second_acc_;
    const auto& w = world_;
    if (w.tracking.mode == TrackingMode::Manual) {
        const Vec2 err = w.tracking.target - w.tracking.center;
        acc.tracking_sq_sum += err.x * err.x + err.y * err.y;
        ++acc.tracking_ticks;
    }
    const auto& f = cfg_.fuel;
    const double la = w.resources.tanks[0].level, lb = w.resources.tanks[1].level;
    acc.fuel_score_sum += 0.5 * (fuel_score(la, f.band_low, f.band_high) + fuel_score(lb, f.band_low, f.band_high));
    acc.fuel_in_range += (la >= f.band_low && la <= f.band_high) + (lb >= f.band_low && lb <= f.band_high);
    ++acc.ticks;
    if (w.clock.tick_index % w.clock.ticks_per_second != 0) return;
    acc.t = now();
    acc.level_a = la;
    acc.level_b = lb;
    scores_.seconds.push_back(acc);
    emit("sample", {{"trk_sq", acc.tracking_sq_sum},
                    {"trk_n", acc.tracking_ticks},
                    {"fuel", acc.fuel_score_sum},
                    {"fuel_in", acc.fuel_in_range},
                    {"ticks", acc.ticks},
                    {"A", la},
                    {"B", lb}});
    acc = SecondSample{};
}

void SimEngine::advance_tick(Seconds dt) {
    if (dt == 0.0) return;
    if (std::abs(dt - world_.clock.tick_seconds) > 1e-12)
        throw std::invalid_argument("advance_tick: dt must equal the configured tick length");
    auto& w = world_;
    ++w.clock.tick_index;
    const Seconds t = now();

    Vec2 disturbance;
    if (w.tracking.mode == TrackingMode::Manual) {
        disturbance.x = tracking_rng_.normal() * cfg_.tracking.disturbance_sd;
        disturbance.y = tracking_rng_.normal() * cfg_.tracking.disturbance_sd;
    }
    w.tracking = tracking_dynamics(w.tracking, w.tracking.joystick, dt, disturbance, cfg_.tracking);
    step_gauges(dt);
    step_fuel(dt);

    for (auto& pump : w.resources.pumps) {
        if (pump.status == PumpStatus::Failed && t + kTimeEps >= pump.repair_at) {
            pump.status = PumpStatus::Off;
            emit("pump_repaired", {{"pump", pump.id}});
        }
    }
    while (!schedule_.empty() && schedule_.front().t <= t + kTimeEps) {
        const auto e = schedule_.front();
        schedule_.pop_front();
        fire_scheduled(e);
    }
    while (w.sysmon.deferred > 0 && w.sysmon.pending.size() < static_cast<std::size_t>(kSysmonTargets)) {
        --w.sysmon.deferred;
        start_sysmon_event();
    }
    step_automation();
    step_expiry();
    check_fuel_band();
    accumulate_scores();
}

std::uint64_t SimEngine::state_digest() const {
    const auto& w = world_;
    DigestBuilder d;
    d.add(w.clock.tick_index);
    d.add(w.tracking.target.x);
    d.add(w.tracking.target.y);
    d.add(w.tracking.joystick.x);
    d.add(w.tracking.joystick.y);
    d.add(static_cast<int>(w.tracking.mode));
    d.add(w.sysmon.green_on);
    d.add(w.sysmon.red_on);
    for (const auto& g : w.sysmon.gauges) {
        d.add(g.indicator_pos);
        d.add(g.out_of_range);
    }
    for (const auto& e : w.sysmon.pending) d.add(e.id);
    for (const auto& t : w.resources.tanks) d.add(t.level);
    for (const auto& p : w.resources.pumps) d.add(static_cast<int>(p.status));
    for (const auto& r : w.comms.radios) d.add(r.frequency_khz);
    for (const auto& r : w.comms.pending) d.add(r.id);
    d.add(w.comms.speech_mode);
    for (bool a : w.automation) d.add(a);
    if (w.last_input) {
        d.add(static_cast<int>(w.last_input->kind));
        d.add(static_cast<int>(w.last_input->source_task()));
    }
    return d.value();
}

}  // namespace matb
