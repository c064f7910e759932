#include "matb/gateway.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include <atomic>
#include <thread>

namespace matb {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

// ---------------------------------------------------------------------------
// ConsoleAgent

ConsoleAgent::ConsoleAgent(const ScenarioConfig& cfg, std::uint64_t trial_seed)
    : cfg_(cfg),
      physio_(cfg.operator_profile,
              derive_seed(cfg.operator_profile.seed ? cfg.operator_profile.seed : trial_seed, Stream::Physio)) {}

std::vector<std::string> ConsoleAgent::handle(std::string_view text) {
    ClientMessage m;
    try {
        m = decode_client(text);
    } catch (const ProtocolError& e) {
        return {encode_error(e.what())};
    }
    std::lock_guard lock(mu_);
    last_heard_ = Clock::now();
    if (m.kind == ClientKind::Join) {
        joined_ = true;
        if (latest_) return {encode_frame(*latest_, true)};
        return {};
    }
    if (!joined_) return {encode_error("join before sending " + std::string(client_kind_name(m.kind)))};
    if (m.kind != ClientKind::Heartbeat) inbox_.push_back(m);
    return {};
}

bool ConsoleAgent::joined() const {
    std::lock_guard lock(mu_);
    return joined_;
}

ConsoleAgent::Clock::time_point ConsoleAgent::last_heard() const {
    std::lock_guard lock(mu_);
    return last_heard_;
}

void ConsoleAgent::publish(const WorldState& w, const IconState& icons, const std::vector<Stimulus>& stimuli) {
    auto frame = serialize_frame(w, icons, stimuli, focus_, cfg_);
    auto text = encode_frame(frame);
    std::lock_guard lock(mu_);
    latest_ = std::move(frame);
    latest_frame_ = std::move(text);
}

std::string ConsoleAgent::latest_frame() const {
    std::lock_guard lock(mu_);
    return latest_frame_;
}

std::vector<std::string> ConsoleAgent::take_outbox() {
    std::lock_guard lock(mu_);
    return std::exchange(outbox_, {});
}

Task ConsoleAgent::focus() const { return focus_; }

std::vector<OperatorInput> ConsoleAgent::step(const WorldState& w, Seconds now) {
    std::deque<ClientMessage> msgs;
    {
        std::lock_guard lock(mu_);
        msgs.swap(inbox_);
    }
    std::vector<OperatorInput> out;
    std::vector<std::string> notices;
    const auto utter = [&] {
        OperatorInput in;
        in.kind = InputKind::SpeechUtterance;
        in.timestamp = now;
        out.push_back(in);
        next_utterance_ = now + cfg_.operator_profile.readback;
    };
    for (const auto& m : msgs) {
        switch (m.kind) {
            case ClientKind::Input: {
                OperatorInput in = m.input;
                in.timestamp = now;
                if (w.automation[index_of(in.source_task())])
                    notices.push_back(std::string(task_name(in.source_task())) + " is automated; input ignored");
                if (in.kind == InputKind::JoystickVector) joystick_ = in.joystick;
                out.push_back(in);
                input_times_.push_back(now);
                break;
            }
            case ClientKind::StationFocus: {
                if (m.focus == focus_) break;
                OperatorInput in;
                in.kind = InputKind::MoveToStation;
                in.station = m.focus;
                in.timestamp = now;
                walk_until_ = now + cfg_.layout.distance(focus_, m.focus) / cfg_.layout.walk_speed;
                focus_ = m.focus;
                focus_changed_ = now;
                out.push_back(in);
                break;
            }
            case ClientKind::PushToTalk:
                talking_ = m.talking;
                if (talking_) {
                    if (w.comms.speech_mode) utter();
                    else notices.emplace_back("speech mode is off; use the radio keys");
                }
                break;
            case ClientKind::Join:
            case ClientKind::Heartbeat: break;
        }
    }
    if (talking_ && w.comms.speech_mode && now >= next_utterance_ && out.empty()) utter();

    if (!notices.empty()) {
        std::lock_guard lock(mu_);
        for (auto& n : notices) outbox_.push_back(encode_notice(n));
    }
    return out;
}

PhysioReading ConsoleAgent::physio(const WorldState& w, Seconds now) {
    const auto& cc = cfg_.console;
    while (!input_times_.empty() && input_times_.front() <= now - cc.proxy_window) input_times_.pop_front();

    OperatorActivity a;
    a.walking = now < walk_until_;
    a.speaking = talking_;
    a.steering = focus_ == Task::Tracking && w.tracking.mode == TrackingMode::Manual;
    a.joystick = a.steering ? joystick_.norm() : 0.0;
    a.known_demands = static_cast<int>(static_cast<double>(input_times_.size()) / cc.inputs_per_demand);
    const TaskSet visible = cfg_.layout.visible_from(focus_);
    for (auto t : kAllTasks)
        if (visible.contains(t) && task_out_of_range(w, t, cfg_)) ++a.visible_alarms;
    a.audible = static_cast<int>(w.comms.pending.size());

    PhysioReading r;
    r.sample = physio_.step(induced_load(a), talking_, now, cfg_.timing.physio_period);
    return r;
}

// ---------------------------------------------------------------------------
// ConsoleServer

namespace {

class Session : public std::enable_shared_from_this<Session> {
public:
    Session(tcp::socket socket, const ConsoleServer::Handler& handler, std::atomic<bool>& connected)
        : ws_(std::move(socket)), handler_(handler), connected_(connected) {}

    void start() {
        ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
            if (ec) return;
            self->open_ = true;
            self->connected_ = true;
            self->read();
        });
    }

    void send(std::string text, bool droppable) {
        if (!open_ || closing_) return;
        // A client that cannot keep up loses frames rather than stalling the trial.
        if (droppable && queue_.size() > 512) return;
        queue_.push_back(std::move(text));
        if (queue_.size() == 1) write();
    }

    // Sends a close frame once everything queued has been written.
    void finish() {
        if (!open_ || closing_) return;
        closing_ = true;
        if (queue_.empty()) close_handshake();
    }

    void close() {
        if (!open_) return;
        open_ = false;
        connected_ = false;
        beast::error_code ec;
        beast::get_lowest_layer(ws_).socket().close(ec);
    }

private:
    void read() {
        ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) {
                self->close();
                return;
            }
            const auto text = beast::buffers_to_string(self->buffer_.data());
            self->buffer_.consume(self->buffer_.size());
            for (auto& reply : self->handler_(text)) self->send(std::move(reply), false);
            self->read();
        });
    }

    void write() {
        ws_.text(true);
        ws_.async_write(asio::buffer(queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) {
                self->close();
                return;
            }
            self->queue_.pop_front();
            if (!self->queue_.empty()) self->write();
            else if (self->closing_) self->close_handshake();
        });
    }

    void close_handshake() {
        ws_.async_close(websocket::close_code::normal,
                        [self = shared_from_this()](beast::error_code) { self->close(); });
    }

    websocket::stream<beast::tcp_stream> ws_;
    beast::flat_buffer buffer_;
    std::deque<std::string> queue_;
    const ConsoleServer::Handler& handler_;
    std::atomic<bool>& connected_;
    bool open_ = false;
    bool closing_ = false;
};

}  // namespace

struct ConsoleServer::Impl {
    asio::io_context ioc;
    tcp::acceptor acceptor{ioc};
    Handler handler;
    std::shared_ptr<Session> session;
    std::atomic<bool> connected{false};
    std::thread thread;
    bool stopped = false;

    void accept() {
        acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
            if (ec) return;
            if (session) session->close();
            session = std::make_shared<Session>(std::move(socket), handler, connected);
            session->start();
            accept();
        });
    }
};

ConsoleServer::ConsoleServer(unsigned short port, Handler handler) : impl_(std::make_unique<Impl>()) {
    impl_->handler = std::move(handler);
    const tcp::endpoint ep(asio::ip::address_v4::loopback(), port);
    impl_->acceptor.open(ep.protocol());
    impl_->acceptor.set_option(asio::socket_base::reuse_address(true));
    impl_->acceptor.bind(ep);
    impl_->acceptor.listen();
    impl_->accept();
    impl_->thread = std::thread([this] { impl_->ioc.run(); });
}

ConsoleServer::~ConsoleServer() { stop(); }

unsigned short ConsoleServer::port() const noexcept { return impl_->acceptor.local_endpoint().port(); }

bool ConsoleServer::connected() const { return impl_->connected; }

void ConsoleServer::send(std::string text, bool droppable) {
    asio::post(impl_->ioc, [impl = impl_.get(), text = std::move(text), droppable]() mutable {
        if (impl->session) impl->session->send(std::move(text), droppable);
    });
}

void ConsoleServer::stop() {
    if (impl_->stopped) return;
    impl_->stopped = true;
    asio::post(impl_->ioc, [impl = impl_.get()] {
        beast::error_code ec;
        impl->acceptor.close(ec);
        if (impl->session) impl->session->finish();
        impl->session.reset();
    });
    // The loop runs out of work once the last write and the close handshake
    // are done; a client that stops reading gets two seconds.
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(2);
    while (!impl_->ioc.stopped() && std::chrono::steady_clock::now() < deadline)
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    impl_->ioc.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

// ---------------------------------------------------------------------------
// run_console_trial

TrialResult run_console_trial(const ScenarioConfig& base, const Models& models, const ConsoleOptions& options,
                              std::ostream& status) {
    const ScenarioConfig cfg = with_mode(base, options.mode);
    ConsoleAgent agent(cfg, options.seed);
    {
        SimEngine preview(cfg, options.seed);
        agent.publish(preview.world(), IconState{}, {});
    }
    ConsoleServer server(static_cast<unsigned short>(options.port),
                         [&agent](std::string_view text) { return agent.handle(text); });
    status << "console listening on ws://127.0.0.1:" << server.port() << "\n" << std::flush;
    if (options.on_listen) options.on_listen(server.port());
    while (!agent.joined()) std::this_thread::sleep_for(std::chrono::milliseconds(20));
    status << "client joined; trial starting\n" << std::flush;

    const auto& cc = cfg.console;
    const int tps = cfg.ticks_per_second();
    const long long frame_every = std::max<long long>(1, std::llround(cc.frame_period * tps));
    const auto heartbeat = std::chrono::duration<double>(cc.heartbeat_timeout);
    const auto t0 = ConsoleAgent::Clock::now();
    auto paused_for = ConsoleAgent::Clock::duration::zero();
    std::vector<Stimulus> pending_stimuli;

    TrialOptions opt;
    opt.mode = options.mode;
    opt.seed = options.seed;
    opt.operator_name = "console";
    opt.agent = &agent;
    opt.observer = [&](const SimEngine& engine, const IconState& icons, const std::vector<Stimulus>& stimuli) {
        pending_stimuli.insert(pending_stimuli.end(), stimuli.begin(), stimuli.end());
        for (auto& n : agent.take_outbox()) server.send(std::move(n), false);
        if (engine.world().clock.tick_index % frame_every == 0) {
            agent.publish(engine.world(), icons, pending_stimuli);
            pending_stimuli.clear();
            server.send(agent.latest_frame());
        }
        if (ConsoleAgent::Clock::now() - agent.last_heard() > heartbeat) {
            if (cc.on_disconnect == "abort") {
                status << "heartbeat lost at t=" << engine.now() << "; aborting\n";
                return false;
            }
            status << "heartbeat lost at t=" << engine.now() << "; paused\n" << std::flush;
            const auto pause_start = ConsoleAgent::Clock::now();
            while (ConsoleAgent::Clock::now() - agent.last_heard() > heartbeat)
                std::this_thread::sleep_for(std::chrono::milliseconds(20));
            paused_for += ConsoleAgent::Clock::now() - pause_start;
            status << "client back; resuming\n" << std::flush;
        }
        if (options.realtime) {
            const auto due = t0 + paused_for +
                             std::chrono::duration_cast<ConsoleAgent::Clock::duration>(
                                 std::chrono::duration<double>(engine.now()));
            std::this_thread::sleep_until(due);
        }
        return true;
    };
    auto result = run_trial(cfg, models, opt);
    server.send(encode_end(result.aborted), false);
    server.stop();
    return result;
}

}  // namespace matb
