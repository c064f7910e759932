#include "matb/protocol.hpp"

#include <cstdio>

namespace matb {

namespace {

using nlohmann::json;

constexpr std::array<std::string_view, 5> kClientKinds = {"join", "input", "station_focus", "push_to_talk",
                                                           "heartbeat"};

std::string_view pump_name(PumpStatus s) {
    switch (s) {
        case PumpStatus::Off: return "off";
        case PumpStatus::On: return "on";
        case PumpStatus::Failed: return "failed";
    }
    return "?";
}

IconColor parse_icon(const std::string& s) {
    for (auto c : {IconColor::Green, IconColor::Red, IconColor::Grey})
        if (icon_name(c) == s) return c;
    throw ProtocolError("unknown icon color '" + s + "'");
}

Task task_field(const json& j, const char* key) {
    const auto t = parse_task(j.at(key).get<std::string>());
    if (!t) throw ProtocolError(std::string("unknown task in '") + key + "'");
    return *t;
}

json vec(Vec2 v) { return json::array({v.x, v.y}); }
Vec2 vec_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

json per_task_bools(const std::array<bool, kTaskCount>& a) {
    json j = json::object();
    for (auto t : kAllTasks) j[std::string(task_name(t))] = a[index_of(t)];
    return j;
}

std::array<bool, kTaskCount> per_task_bools_from(const json& j) {
    std::array<bool, kTaskCount> a{};
    for (auto t : kAllTasks) a[index_of(t)] = j.at(std::string(task_name(t))).get<bool>();
    return a;
}

json envelope(std::string_view type) { return json{{"v", kProtocolVersion}, {"type", std::string(type)}}; }

json parse_versioned(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ProtocolError("message must be a JSON object");
    if (!j.contains("v") || !j["v"].is_number_integer()) throw ProtocolError("missing protocol version");
    if (j["v"].get<int>() != kProtocolVersion)
        throw ProtocolError("unsupported protocol version " + std::to_string(j["v"].get<int>()));
    if (!j.contains("type") || !j["type"].is_string()) throw ProtocolError("missing message type");
    return j;
}

}  // namespace

std::string_view client_kind_name(ClientKind k) noexcept { return kClientKinds[static_cast<std::size_t>(k)]; }

std::string encode(const ClientMessage& m) {
    json j = envelope(client_kind_name(m.kind));
    j["t"] = m.client_t;
    switch (m.kind) {
        case ClientKind::Join:
        case ClientKind::Heartbeat: break;
        case ClientKind::Input: j["input"] = to_json(m.input); break;
        case ClientKind::StationFocus: j["task"] = std::string(task_name(m.focus)); break;
        case ClientKind::PushToTalk: j["state"] = m.talking ? "start" : "end"; break;
    }
    return j.dump();
}

ClientMessage decode_client(std::string_view text) {
    const json j = parse_versioned(text);
    ClientMessage m;
    const auto type = j["type"].get<std::string>();
    std::size_t k = 0;
    while (k < kClientKinds.size() && kClientKinds[k] != type) ++k;
    if (k == kClientKinds.size()) throw ProtocolError("unknown message type '" + type + "'");
    m.kind = static_cast<ClientKind>(k);
    try {
        m.client_t = j.value("t", 0.0);
        switch (m.kind) {
            case ClientKind::Join:
            case ClientKind::Heartbeat: break;
            case ClientKind::Input:
                m.input = input_from_json(j.at("input"));
                if (m.input.kind == InputKind::MoveToStation)
                    throw ProtocolError("station changes use station_focus");
                if (m.input.kind == InputKind::SpeechUtterance) throw ProtocolError("speech uses push_to_talk");
                break;
            case ClientKind::StationFocus: m.focus = task_field(j, "task"); break;
            case ClientKind::PushToTalk: {
                const auto s = j.at("state").get<std::string>();
                if (s != "start" && s != "end") throw ProtocolError("push_to_talk state must be start or end");
                m.talking = s == "start";
                break;
            }
        }
    } catch (const ProtocolError&) {
        throw;
    } catch (const std::exception& e) {
        throw ProtocolError(std::string("malformed ") + type + ": " + e.what());
    }
    return m;
}

std::string radio_message_text(const CommsRequest& r, const WorldState& w) {
    char freq[32];
    std::snprintf(freq, sizeof freq, "%d.%03d", r.frequency_khz / 1000, r.frequency_khz % 1000);
    const std::string radio = r.radio >= 0 && r.radio < 4 ? w.comms.radios[r.radio].id : std::string("?");
    return r.callsign + ", " + r.callsign + ", tune your " + radio + " radio to frequency " + freq;
}

StateFrame serialize_frame(const WorldState& w, const IconState& icons, const std::vector<Stimulus>& stimuli,
                           Task focus, const ScenarioConfig& cfg) {
    StateFrame f;
    f.tick = w.clock.tick_index;
    f.t = w.clock.elapsed();
    f.focus = focus;
    const TaskSet visible = cfg.layout.visible_from(focus);
    for (auto t : kAllTasks) {
        f.visible[index_of(t)] = visible.contains(t);
        f.alarm[index_of(t)] = task_out_of_range(w, t, cfg);
        f.automated[index_of(t)] = w.automation[index_of(t)];
    }
    if (visible.contains(Task::Tracking))
        f.tracking = TrackingView{w.tracking.mode == TrackingMode::Manual, w.tracking.target, w.tracking.center};
    if (visible.contains(Task::SystemMonitoring)) {
        SysmonView v{w.sysmon.green_on, w.sysmon.red_on, {}};
        for (std::size_t i = 0; i < 4; ++i) v.gauges[i] = w.sysmon.gauges[i].indicator_pos;
        f.sysmon = v;
    }
    if (visible.contains(Task::ResourceManagement)) {
        ResourceView v;
        for (const auto& t : w.resources.tanks) v.tanks.push_back({std::string(1, t.id), t.level, t.capacity});
        for (const auto& p : w.resources.pumps) v.pumps.emplace_back(pump_name(p.status));
        f.resources = std::move(v);
    }
    if (visible.contains(Task::Communications)) {
        CommsView v;
        v.own_callsign = w.comms.own_callsign;
        for (const auto& r : w.comms.radios) v.radios.push_back({r.id, r.frequency_khz});
        f.comms = std::move(v);
    }
    for (const auto& r : w.comms.pending) f.radio_messages.push_back(radio_message_text(r, w));
    f.icons = icons.left;
    f.speech_mode = w.comms.speech_mode;
    for (const auto& s : stimuli)
        f.stimuli.push_back({std::string(stimulus_name(s.kind)), s.interaction.task, s.interaction.kind});
    return f;
}

json to_json(const StateFrame& f) {
    json j;
    j["tick"] = f.tick;
    j["t"] = f.t;
    j["focus"] = std::string(task_name(f.focus));
    j["visible"] = per_task_bools(f.visible);
    j["alarm"] = per_task_bools(f.alarm);
    j["automated"] = per_task_bools(f.automated);
    json st = json::object();
    if (f.tracking)
        st["tracking"] = {{"manual", f.tracking->manual},
                          {"target", vec(f.tracking->target)},
                          {"center", vec(f.tracking->center)}};
    if (f.sysmon)
        st["sysmon"] = {{"green", f.sysmon->green_on}, {"red", f.sysmon->red_on}, {"gauges", f.sysmon->gauges}};
    if (f.resources) {
        json tanks = json::array();
        for (const auto& t : f.resources->tanks)
            tanks.push_back({{"id", t.id}, {"level", t.level}, {"capacity", t.capacity}});
        st["resman"] = {{"tanks", tanks}, {"pumps", f.resources->pumps}};
    }
    if (f.comms) {
        json radios = json::array();
        for (const auto& r : f.comms->radios) radios.push_back({{"id", r.id}, {"frequency", r.frequency_khz}});
        st["comms"] = {{"own_callsign", f.comms->own_callsign}, {"radios", radios}};
    }
    j["stations"] = st;
    j["radio_messages"] = f.radio_messages;
    json icons = json::object();
    for (auto t : kAllTasks) icons[std::string(task_name(t))] = std::string(icon_name(f.icons[index_of(t)]));
    j["icons"] = icons;
    j["speech_mode"] = f.speech_mode;
    json stim = json::array();
    for (const auto& s : f.stimuli)
        stim.push_back({{"kind", s.kind}, {"task", std::string(task_name(s.task))}, {"interaction", s.interaction}});
    j["stimuli"] = stim;
    return j;
}

StateFrame frame_from_json(const json& j) {
    StateFrame f;
    try {
        f.tick = j.at("tick").get<std::int64_t>();
        f.t = j.at("t").get<double>();
        f.focus = task_field(j, "focus");
        f.visible = per_task_bools_from(j.at("visible"));
        f.alarm = per_task_bools_from(j.at("alarm"));
        f.automated = per_task_bools_from(j.at("automated"));
        const auto& st = j.at("stations");
        if (st.contains("tracking")) {
            const auto& s = st["tracking"];
            f.tracking = TrackingView{s.at("manual").get<bool>(), vec_from(s.at("target")), vec_from(s.at("center"))};
        }
        if (st.contains("sysmon")) {
            const auto& s = st["sysmon"];
            f.sysmon = SysmonView{s.at("green").get<bool>(), s.at("red").get<bool>(),
                                  s.at("gauges").get<std::array<double, 4>>()};
        }
        if (st.contains("resman")) {
            const auto& s = st["resman"];
            ResourceView v;
            for (const auto& t : s.at("tanks"))
                v.tanks.push_back(
                    {t.at("id").get<std::string>(), t.at("level").get<double>(), t.at("capacity").get<double>()});
            v.pumps = s.at("pumps").get<std::vector<std::string>>();
            f.resources = std::move(v);
        }
        if (st.contains("comms")) {
            const auto& s = st["comms"];
            CommsView v;
            v.own_callsign = s.at("own_callsign").get<std::string>();
            for (const auto& r : s.at("radios")) v.radios.push_back({r.at("id").get<std::string>(), r.at("frequency").get<int>()});
            f.comms = std::move(v);
        }
        f.radio_messages = j.at("radio_messages").get<std::vector<std::string>>();
        for (auto t : kAllTasks) f.icons[index_of(t)] = parse_icon(j.at("icons").at(std::string(task_name(t))).get<std::string>());
        f.speech_mode = j.at("speech_mode").get<bool>();
        for (const auto& s : j.at("stimuli"))
            f.stimuli.push_back({s.at("kind").get<std::string>(), task_field(s, "task"), s.at("interaction").get<std::string>()});
    } catch (const ProtocolError&) {
        throw;
    } catch (const std::exception& e) {
        throw ProtocolError(std::string("malformed frame: ") + e.what());
    }
    return f;
}

std::string encode_frame(const StateFrame& f, bool snapshot) {
    json j = envelope(snapshot ? "snapshot" : "frame");
    j["frame"] = to_json(f);
    return j.dump();
}

std::string encode_error(std::string_view message) {
    json j = envelope("error");
    j["message"] = std::string(message);
    return j.dump();
}

std::string encode_notice(std::string_view message) {
    json j = envelope("notice");
    j["message"] = std::string(message);
    return j.dump();
}

std::string encode_end(bool aborted) {
    json j = envelope("end");
    j["aborted"] = aborted;
    return j.dump();
}

ServerMessage decode_server(std::string_view text) {
    const json j = parse_versioned(text);
    ServerMessage m;
    m.type = j["type"].get<std::string>();
    if (m.type == "frame" || m.type == "snapshot") {
        if (!j.contains("frame")) throw ProtocolError("frame message without a frame");
        m.frame = frame_from_json(j["frame"]);
    } else if (m.type == "error" || m.type == "notice") {
        m.message = j.value("message", std::string());
    } else if (m.type == "end") {
        m.aborted = j.value("aborted", false);
    } else {
        throw ProtocolError("unknown server message type '" + m.type + "'");
    }
    return m;
}

}  // namespace matb
