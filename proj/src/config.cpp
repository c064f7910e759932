#include "matb/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace matb {

namespace {

constexpr std::array<std::string_view, kTaskCount> kTaskNames = {"tracking", "sysmon", "resman", "comms"};
constexpr std::array<std::string_view, kComponentCount> kComponentNames = {"cognitive", "physical", "visual",
                                                                           "auditory", "speech"};
constexpr std::array<std::string_view, kChannelCount> kChannelNames = {
    "heart_rate", "hr_variability", "respiration_rate", "posture_magnitude",
    "noise_level", "speech_rate", "speech_intensity", "pitch"};

}  // namespace

std::string_view task_name(Task t) noexcept { return kTaskNames[index_of(t)]; }

std::optional<Task> parse_task(std::string_view name) noexcept {
    for (auto t : kAllTasks)
        if (task_name(t) == name) return t;
    return std::nullopt;
}

std::string_view component_name(Component c) noexcept { return kComponentNames[index_of(c)]; }
std::string_view channel_name(Channel c) noexcept { return kChannelNames[static_cast<std::size_t>(c)]; }

std::string_view label_name(LoadLabel l) noexcept {
    switch (l) {
        case LoadLabel::UL: return "UL";
        case LoadLabel::NL: return "NL";
        case LoadLabel::OL: return "OL";
    }
    return "?";
}

LoadLabel parse_label(std::string_view name) {
    if (name == "UL") return LoadLabel::UL;
    if (name == "NL") return LoadLabel::NL;
    if (name == "OL") return LoadLabel::OL;
    throw ConfigError("unknown workload label '" + std::string(name) + "'");
}

std::string_view mode_name(AdaptationMode m) noexcept {
    switch (m) {
        case AdaptationMode::None: return "none";
        case AdaptationMode::Autonomy: return "autonomy";
        case AdaptationMode::Interaction: return "interaction";
        case AdaptationMode::Both: return "both";
    }
    return "?";
}

AdaptationMode parse_mode(std::string_view name) {
    for (auto m : {AdaptationMode::None, AdaptationMode::Autonomy, AdaptationMode::Interaction, AdaptationMode::Both})
        if (mode_name(m) == name) return m;
    throw ConfigError("unknown adaptation mode '" + std::string(name) + "'");
}

TaskSet StationLayout::visible_from(Task station) const noexcept {
    TaskSet s;
    s.insert(station);
    const auto& adj = adjacency[index_of(station)];
    if (!adj.empty()) s.insert(adj.front());
    return s;
}

ContextTable default_context_table() {
    //        cognitive physical visual auditory speech
    return {{
        {4.0, 1.5, 5.0, 0.0, 0.0},  // tracking
        {3.0, 0.5, 4.0, 0.0, 0.0},  // sysmon
        {4.0, 0.5, 4.0, 0.0, 0.0},  // resman
        {3.0, 0.5, 2.0, 2.0, 2.0},  // comms
    }};
}

std::vector<Block> ScenarioConfig::default_script() {
    using enum LoadLabel;
    std::vector<Block> s;
    for (auto l : {OL, UL, OL, NL, UL, NL, OL}) s.push_back({l, 450.0});
    return s;
}

std::array<WorkloadCondition, 3> ScenarioConfig::default_conditions() {
    WorkloadCondition ul;
    ul.label = LoadLabel::UL;
    ul.sysmon_events_per_min = 1;
    ul.pump_failures_min = ul.pump_failures_max = 0;
    ul.comms_requests_min = 1;
    ul.comms_requests_max = 2;
    ul.tracking = TrackingPolicy::AlwaysAuto;

    WorkloadCondition nl;
    nl.label = LoadLabel::NL;
    nl.sysmon_events_per_min = 5;
    nl.pump_failures_min = 1;
    nl.pump_failures_max = 2;
    nl.pump_failures_alternate = true;
    nl.comms_requests_min = 2;
    nl.comms_requests_max = 8;
    nl.tracking = TrackingPolicy::Alternate;
    nl.tracking_alternate_period = 150.0;

    WorkloadCondition ol;
    ol.label = LoadLabel::OL;
    ol.sysmon_events_per_min = 20;
    ol.pump_failures_min = 2;
    ol.pump_failures_max = 3;
    ol.comms_requests_min = 8;
    ol.comms_requests_max = 10;
    ol.tracking = TrackingPolicy::AlwaysManual;
    return {ul, nl, ol};
}

Seconds ScenarioConfig::total_duration() const {
    Seconds total = 0.0;
    for (const auto& b : script) total += b.duration;
    return total;
}

int ScenarioConfig::ticks_per_second() const {
    const double tps = 1.0 / timing.tick_seconds;
    const long r = std::lround(tps);
    if (r <= 0 || std::abs(tps - static_cast<double>(r)) > 1e-9)
        throw ConfigError("tick_seconds must divide one second evenly");
    return static_cast<int>(r);
}

// ---------------------------------------------------------------------------
// JSON mapping

NLOHMANN_JSON_SERIALIZE_ENUM(LoadLabel, {{LoadLabel::UL, "UL"}, {LoadLabel::NL, "NL"}, {LoadLabel::OL, "OL"}})
NLOHMANN_JSON_SERIALIZE_ENUM(TrackingPolicy, {{TrackingPolicy::AlwaysAuto, "always_auto"},
                                              {TrackingPolicy::AlwaysManual, "always_manual"},
                                              {TrackingPolicy::Alternate, "alternate"}})
NLOHMANN_JSON_SERIALIZE_ENUM(Task, {{Task::Tracking, "tracking"},
                                    {Task::SystemMonitoring, "sysmon"},
                                    {Task::ResourceManagement, "resman"},
                                    {Task::Communications, "comms"}})

void to_json(nlohmann::json& j, const Vec2& v) { j = nlohmann::json::array({v.x, v.y}); }
void from_json(const nlohmann::json& j, Vec2& v) {
    v.x = j.at(0).get<double>();
    v.y = j.at(1).get<double>();
}

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(WorkloadCondition, label, sysmon_events_per_min, pump_failures_min,
                                                pump_failures_max, pump_failures_alternate, comms_requests_min,
                                                comms_requests_max, tracking, tracking_alternate_period)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(Block, label, duration)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TimingConfig, tick_seconds, physio_period, estimate_period,
                                                epoch_length)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(StationLayout, positions, adjacency, walk_speed)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrackingConfig, screen_width, screen_height, disturbance_sd,
                                                joystick_gain, auto_rate, alarm_radius)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SysmonConfig, failure_window, gauge_noise, gauge_reversion,
                                                gauge_low, gauge_high)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(FuelConfig, pump_rates, consumption_a, consumption_b, start_levels,
                                                capacities, band_low, band_high, pump_repair)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(CommsConfig, own_callsign, foreign_callsigns, distractor_ratio,
                                                response_window, announcement)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ScoringConfig, tracking_r_max, sysmon_window, comms_window,
                                                performance_window)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(PipelineConfig, theta_low, theta_high, cutoff_loaded,
                                                cutoff_overloaded, context, estimator_model)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(PredictorConfig, model, horizon, target_window, hidden, layers,
                                                dense, dropout, learning_rate, batch, epochs)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(PolicyConfig, perf_low, perf_high, hysteresis_len, postpone,
                                                enable_autonomy, enable_interaction)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(OperatorProfile, preset, reaction_time, speech_reaction,
                                                rt_inflation, rt_noise, walk_speed, perception_delay,
                                                cued_perception_delay, memory_horizon, scan_interval,
                                                joystick_period, tracking_dwell, joystick_px, readback, physio_baseline,
                                                physio_gain, noise_fraction, smoothing_tau, seed)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ConsoleConfig, port, on_disconnect, heartbeat_timeout, frame_period,
                                                proxy_window, inputs_per_demand)

OperatorProfile operator_preset(const std::string& name) {
    OperatorProfile p;
    p.preset = name;
    if (name == "nominal") return p;
    if (name == "slow") {
        for (auto& rt : p.reaction_time) rt *= 1.6;
        p.speech_reaction *= 1.6;
        p.walk_speed = 0.7;
        p.perception_delay = 1.0;
        return p;
    }
    if (name == "deterministic-zero-noise") {
        p.rt_noise = 0.0;
        p.noise_fraction = 0.0;
        return p;
    }
    throw ConfigError("unknown operator preset '" + name + "'");
}

nlohmann::json to_json(const ScenarioConfig& c) {
    nlohmann::json j;
    j["seed"] = c.seed;
    j["timing"] = c.timing;
    j["script"] = c.script;
    j["conditions"] = c.conditions;
    j["layout"] = c.layout;
    j["tracking"] = c.tracking;
    j["sysmon"] = c.sysmon;
    j["fuel"] = c.fuel;
    j["comms"] = c.comms;
    j["automation_latency"] = c.automation_latency;
    j["scoring"] = c.scoring;
    j["pipeline"] = c.pipeline;
    j["predictor"] = c.predictor;
    j["policy"] = c.policy;
    j["operator"] = c.operator_profile;
    j["console"] = c.console;
    j["log_dir"] = c.log_dir;
    return j;
}

ScenarioConfig config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("scenario config must be a JSON object");
    ScenarioConfig c;
    try {
        // Overlay the file onto the fully populated defaults, then parse every field.
        nlohmann::json merged = to_json(c);
        for (const auto& [key, value] : j.items()) {
            if (key == "conditions") {
                // Keyed by label so a file may tweak a single condition.
                for (const auto& cj : value) {
                    const auto label = cj.at("label").get<LoadLabel>();
                    merged["conditions"][static_cast<std::size_t>(label)].merge_patch(cj);
                }
            } else if (key == "operator") {
                nlohmann::json base = operator_preset(value.value("preset", std::string("nominal")));
                base.merge_patch(value);
                merged["operator"] = base;
            } else if (!merged.contains(key)) {
                throw ConfigError("unknown config key '" + key + "'");
            } else if (merged[key].is_object()) {
                merged[key].merge_patch(value);
            } else {
                merged[key] = value;
            }
        }
        c.seed = merged["seed"].get<std::uint64_t>();
        c.timing = merged["timing"].get<TimingConfig>();
        c.script = merged["script"].get<std::vector<Block>>();
        c.conditions = merged["conditions"].get<std::array<WorkloadCondition, 3>>();
        c.layout = merged["layout"].get<StationLayout>();
        c.tracking = merged["tracking"].get<TrackingConfig>();
        c.sysmon = merged["sysmon"].get<SysmonConfig>();
        c.fuel = merged["fuel"].get<FuelConfig>();
        c.comms = merged["comms"].get<CommsConfig>();
        c.automation_latency = merged["automation_latency"].get<double>();
        c.scoring = merged["scoring"].get<ScoringConfig>();
        c.pipeline = merged["pipeline"].get<PipelineConfig>();
        c.predictor = merged["predictor"].get<PredictorConfig>();
        c.policy = merged["policy"].get<PolicyConfig>();
        c.operator_profile = merged["operator"].get<OperatorProfile>();
        c.console = merged["console"].get<ConsoleConfig>();
        c.log_dir = merged["log_dir"].get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid scenario config: ") + e.what());
    }
    for (std::size_t i = 0; i < c.conditions.size(); ++i)
        if (static_cast<std::size_t>(c.conditions[i].label) != i) throw ConfigError("condition table out of order");
    if (c.timing.tick_seconds <= 0.0) throw ConfigError("tick_seconds must be positive");
    (void)c.ticks_per_second();
    if (c.scoring.tracking_r_max <= 0.0) throw ConfigError("tracking_r_max must be positive");
    if (!(c.policy.perf_low < c.policy.perf_high)) throw ConfigError("perf_low must be below perf_high");
    if (c.policy.hysteresis_len < 1) throw ConfigError("hysteresis_len must be at least 1");
    if (!(c.pipeline.theta_low < c.pipeline.theta_high)) throw ConfigError("theta_low must be below theta_high");
    if (!(0.0 < c.pipeline.cutoff_loaded && c.pipeline.cutoff_loaded < c.pipeline.cutoff_overloaded &&
          c.pipeline.cutoff_overloaded < 1.0))
        throw ConfigError("channel cutoffs must satisfy 0 < loaded < overloaded < 1");
    for (const auto& b : c.script)
        if (b.duration <= 0.0) throw ConfigError("block durations must be positive");
    return c;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config '" + path.string() + "': " + e.what());
    }
    return config_from_json(j);
}

void save_config(const ScenarioConfig& c, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write config '" + path.string() + "'");
    out << to_json(c).dump(2) << '\n';
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h) noexcept {
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::uint64_t config_hash(const ScenarioConfig& c) {
    auto j = to_json(c);
    j.erase("console");
    j.erase("log_dir");
    return fnv1a(j.dump());
}

}  // namespace matb
