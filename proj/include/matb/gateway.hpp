#pragma once

#include "matb/protocol.hpp"
#include "matb/runner.hpp"

#include <chrono>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <ostream>
#include <string>
#include <vector>

namespace matb {

/// Operator agent driven by a live client.
///
/// Client messages arrive on the network thread through handle() and reach
/// the engine only when the trial thread calls step(). Physiological samples
/// are a surrogate built from behaviour: input rate, joystick use, station
/// changes and push-to-talk feed the induced-load map and the same physio
/// generator the synthetic operator uses. No ground-truth load is reported.
class ConsoleAgent final : public OperatorAgent {
public:
    using Clock = std::chrono::steady_clock;

    ConsoleAgent(const ScenarioConfig& cfg, std::uint64_t trial_seed);

    // Network side. Returns the replies owed to the sender (errors, the join snapshot).
    std::vector<std::string> handle(std::string_view text);
    bool joined() const;
    Clock::time_point last_heard() const;

    // Trial side: stores the frame a joining client will receive.
    void publish(const WorldState& w, const IconState& icons, const std::vector<Stimulus>& stimuli);
    std::string latest_frame() const;
    std::vector<std::string> take_outbox();
    Task focus() const;

    std::vector<OperatorInput> step(const WorldState& w, Seconds now) override;
    PhysioReading physio(const WorldState& w, Seconds now) override;

private:
    ScenarioConfig cfg_;
    PhysioGenerator physio_;

    mutable std::mutex mu_;
    std::deque<ClientMessage> inbox_;
    std::vector<std::string> outbox_;
    bool joined_ = false;
    Clock::time_point last_heard_ = Clock::now();
    std::string latest_frame_;
    std::optional<StateFrame> latest_;

    // Trial thread only.
    Task focus_ = Task::Tracking;
    Seconds focus_changed_ = -1e9;
    Seconds walk_until_ = -1e9;
    bool talking_ = false;
    Seconds next_utterance_ = 0.0;
    Vec2 joystick_;
    std::deque<Seconds> input_times_;
};

/// Single-client websocket endpoint. Text messages in both directions; a new
/// connection replaces the previous one.
class ConsoleServer {
public:
    using Handler = std::function<std::vector<std::string>(std::string_view)>;

    ConsoleServer(unsigned short port, Handler handler);
    ~ConsoleServer();
    ConsoleServer(const ConsoleServer&) = delete;
    ConsoleServer& operator=(const ConsoleServer&) = delete;

    unsigned short port() const noexcept;
    bool connected() const;
    // Frames are droppable when the client falls behind; replies and notices are not.
    void send(std::string text, bool droppable = true);
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

struct ConsoleOptions {
    int port = 8765;  // 0 picks a free port
    AdaptationMode mode = AdaptationMode::None;
    std::uint64_t seed = 1;
    bool realtime = true;                      // pace ticks to the wall clock
    std::function<void(unsigned short)> on_listen;
};

// Serves one live session: waits for a client to join, runs the trial with
// the client as operator, streams frames, and applies the configured
// disconnect policy when heartbeats stop.
TrialResult run_console_trial(const ScenarioConfig& cfg, const Models& models, const ConsoleOptions& options,
                              std::ostream& status);

}  // namespace matb
