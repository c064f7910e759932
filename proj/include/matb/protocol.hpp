#pragma once

#include "matb/config.hpp"
#include "matb/policy.hpp"
#include "matb/sim_engine.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace matb {

// Wire protocol version carried as "v" in every message.
inline constexpr int kProtocolVersion = 1;

class ProtocolError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ClientKind : std::uint8_t { Join, Input, StationFocus, PushToTalk, Heartbeat };
std::string_view client_kind_name(ClientKind k) noexcept;

struct ClientMessage {
    ClientKind kind = ClientKind::Heartbeat;
    Seconds client_t = 0.0;  // client clock; the engine assigns its own tick on receipt
    OperatorInput input;     // Input
    Task focus = Task::Tracking;  // StationFocus
    bool talking = false;    // PushToTalk: start = true

    friend bool operator==(const ClientMessage&, const ClientMessage&) = default;
};

std::string encode(const ClientMessage& m);
ClientMessage decode_client(std::string_view text);  // throws ProtocolError

struct TrackingView {
    bool manual = false;
    Vec2 target;
    Vec2 center;
    friend bool operator==(const TrackingView&, const TrackingView&) = default;
};

struct SysmonView {
    bool green_on = true;
    bool red_on = false;
    std::array<double, 4> gauges{};
    friend bool operator==(const SysmonView&, const SysmonView&) = default;
};

struct TankView {
    std::string id;
    double level = 0.0;
    double capacity = 0.0;
    friend bool operator==(const TankView&, const TankView&) = default;
};

struct ResourceView {
    std::vector<TankView> tanks;
    std::vector<std::string> pumps;  // "off" | "on" | "failed"
    friend bool operator==(const ResourceView&, const ResourceView&) = default;
};

struct RadioView {
    std::string id;
    int frequency_khz = 0;
    friend bool operator==(const RadioView&, const RadioView&) = default;
};

struct CommsView {
    std::string own_callsign;
    std::vector<RadioView> radios;
    friend bool operator==(const CommsView&, const CommsView&) = default;
};

struct StimulusView {
    std::string kind;  // visual | auditory | visual_only_fallback
    Task task = Task::Tracking;
    std::string interaction;
    friend bool operator==(const StimulusView&, const StimulusView&) = default;
};

/// Everything the console needs to draw one tick. Stations outside the
/// focus carry only an alarm summary; radio messages are audible everywhere.
struct StateFrame {
    std::int64_t tick = 0;
    Seconds t = 0.0;
    Task focus = Task::Tracking;
    std::array<bool, kTaskCount> visible{};
    std::array<bool, kTaskCount> alarm{};
    std::array<bool, kTaskCount> automated{};
    std::optional<TrackingView> tracking;
    std::optional<SysmonView> sysmon;
    std::optional<ResourceView> resources;
    std::optional<CommsView> comms;
    std::vector<std::string> radio_messages;
    std::array<IconColor, kTaskCount> icons{IconColor::Grey, IconColor::Grey, IconColor::Grey, IconColor::Grey};
    bool speech_mode = false;
    std::vector<StimulusView> stimuli;

    friend bool operator==(const StateFrame&, const StateFrame&) = default;
};

// Detail is limited to the focused station and its neighbour.
StateFrame serialize_frame(const WorldState& w, const IconState& icons, const std::vector<Stimulus>& stimuli,
                           Task focus, const ScenarioConfig& cfg);

nlohmann::json to_json(const StateFrame& f);
StateFrame frame_from_json(const nlohmann::json& j);  // throws ProtocolError

// Server messages. `snapshot` is the first frame a joining client receives.
std::string encode_frame(const StateFrame& f, bool snapshot = false);
std::string encode_error(std::string_view message);
std::string encode_notice(std::string_view message);
std::string encode_end(bool aborted);

struct ServerMessage {
    std::string type;  // frame | snapshot | error | notice | end
    std::optional<StateFrame> frame;
    std::string message;
    bool aborted = false;
};
ServerMessage decode_server(std::string_view text);  // throws ProtocolError

std::string radio_message_text(const CommsRequest& r, const WorldState& w);

}  // namespace matb
