#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "matb/operator.hpp"
#include "matb/runner.hpp"

#include <cmath>
#include <map>

using namespace matb;

namespace {

ScenarioConfig quiet_config() {
    ScenarioConfig cfg;
    cfg.operator_profile = operator_preset("deterministic-zero-noise");
    return cfg;
}

WorldState quiet_world() {
    WorldState w;
    w.tracking.mode = TrackingMode::Automatic;
    w.resources.tanks[0].level = 2500;
    w.resources.tanks[1].level = 2500;
    return w;
}

struct Step {
    Seconds t;
    OperatorInput in;
};

// Steps the operator every tick against a world the test edits in place.
template <class Edit>
std::vector<Step> drive(SyntheticOperator& op, WorldState& w, Seconds until, Edit&& edit) {
    std::vector<Step> out;
    for (int k = 1; k * 0.05 <= until + 1e-9; ++k) {
        const Seconds now = k * 0.05;
        edit(w, now);
        for (const auto& in : op.step(w, now)) out.push_back({now, in});
    }
    return out;
}

const Step* first_of(const std::vector<Step>& s, InputKind k) {
    for (const auto& x : s)
        if (x.in.kind == k) return &x;
    return nullptr;
}

int count_of(const std::vector<Step>& s, InputKind k) {
    int n = 0;
    for (const auto& x : s) n += x.in.kind == k;
    return n;
}

}  // namespace

TEST_CASE("idle operator produces no inputs") {
    const auto cfg = quiet_config();
    SyntheticOperator op(cfg, 1);
    auto w = quiet_world();
    const auto steps = drive(op, w, 15.0, [](WorldState&, Seconds) {});
    CHECK(steps.empty());
}

TEST_CASE("gauge is clicked after perception plus reaction time") {
    const auto cfg = quiet_config();
    SyntheticOperator op(cfg, 1);
    auto w = quiet_world();
    const auto& p = cfg.operator_profile;
    const double rt = p.reaction_time[index_of(Task::SystemMonitoring)];
    // The first gauge draws the operator from tracking over to the sysmon station.
    const Seconds first = 1.0, second = 10.0;
    std::vector<Step> steps;
    for (int k = 1; k <= 300; ++k) {
        const Seconds now = k * 0.05;
        if (std::abs(now - first) < 1e-9) w.sysmon.pending.push_back(OutOfRangeEvent{1, 2, first, first + 15.0});
        if (std::abs(now - second) < 1e-9) w.sysmon.pending.push_back(OutOfRangeEvent{2, 4, second, second + 15.0});
        for (const auto& in : op.step(w, now)) {
            steps.push_back({now, in});
            if (in.kind == InputKind::MouseClick) w.sysmon.pending.clear();
        }
    }
    std::vector<Step> clicks;
    for (const auto& s : steps)
        if (s.in.kind == InputKind::MouseClick) clicks.push_back(s);
    REQUIRE(clicks.size() == 2);
    const double walk = cfg.layout.distance(Task::Tracking, Task::SystemMonitoring) / p.walk_speed;
    CHECK(clicks[0].in.target == "gauge1");
    CHECK(std::abs(clicks[0].t - (first + p.perception_delay + walk + rt)) <= 0.05 + 1e-9);
    CHECK(clicks[1].in.target == "gauge3");
    CHECK(std::abs(clicks[1].t - (second + p.perception_delay + rt)) <= 0.05 + 1e-9);
    CHECK(count_of(steps, InputKind::MoveToStation) == 1);
}

TEST_CASE("a far station costs its walking time") {
    auto cfg = quiet_config();
    cfg.layout.positions[index_of(Task::Communications)] = {0.0, 3.0};
    SyntheticOperator op(cfg, 1);
    auto w = quiet_world();
    const Seconds issued = 0.5;
    const auto steps = drive(op, w, 20.0, [&](WorldState& world, Seconds now) {
        if (std::abs(now - issued) < 1e-9)
            world.comms.pending.push_back(CommsRequest{1, cfg.comms.own_callsign, 2, 126500, issued, issued + 30.0, true});
    });
    const auto* move = first_of(steps, InputKind::MoveToStation);
    const auto* key = first_of(steps, InputKind::KeyPress);
    REQUIRE(move != nullptr);
    REQUIRE(key != nullptr);
    CHECK(move->in.station == Task::Communications);
    const Seconds heard = issued + cfg.comms.announcement;
    CHECK(move->t >= heard + 3.0 - 1e-9);
    CHECK(key->t >= move->t + cfg.operator_profile.reaction_time[index_of(Task::Communications)] - 1e-9);
    CHECK(key->in.radio == 2);
    CHECK(key->in.frequency_khz == 126500);
}

TEST_CASE("foreign callsigns are ignored") {
    const auto cfg = quiet_config();
    SyntheticOperator op(cfg, 1);
    auto w = quiet_world();
    w.comms.pending.push_back(CommsRequest{1, "DELTA 227", 0, 120100, 0.0, 30.0, false});
    const auto steps = drive(op, w, 15.0, [](WorldState&, Seconds) {});
    CHECK(count_of(steps, InputKind::KeyPress) == 0);
    CHECK(count_of(steps, InputKind::MoveToStation) == 0);
}

TEST_CASE("speech mode answers by voice without walking") {
    const auto cfg = quiet_config();
    SyntheticOperator op(cfg, 1);
    auto w = quiet_world();
    w.comms.speech_mode = true;
    w.comms.pending.push_back(CommsRequest{1, cfg.comms.own_callsign, 1, 124000, 0.0, 30.0, true});
    const auto steps = drive(op, w, 10.0, [](WorldState&, Seconds) {});
    const auto* said = first_of(steps, InputKind::SpeechUtterance);
    REQUIRE(said != nullptr);
    CHECK(said->t >= cfg.comms.announcement + cfg.operator_profile.speech_reaction - 1e-9);
    CHECK(count_of(steps, InputKind::MoveToStation) == 0);
    CHECK(op.speaking(said->t + 0.1));
}

TEST_CASE("induced load map") {
    const auto idle = induced_load(OperatorActivity{});
    for (double v : idle) CHECK(v <= 0.1);

    OperatorActivity busy;
    busy.speaking = true;
    busy.visible_alarms = 2;
    busy.known_demands = 3;
    busy.audible = 1;
    const auto l = induced_load(busy);
    CHECK(l[index_of(Component::Speech)] > 0.5);
    CHECK(l[index_of(Component::Auditory)] > 0.5);

    OperatorActivity walking;
    walking.walking = true;
    CHECK(induced_load(walking)[index_of(Component::Physical)] > idle[index_of(Component::Physical)]);

    Rng rng(3);
    for (int i = 0; i < 2000; ++i) {
        OperatorActivity a;
        a.walking = rng.bernoulli(0.3);
        a.speaking = rng.bernoulli(0.3);
        a.steering = rng.bernoulli(0.5);
        a.joystick = rng.uniform(0.0, 1.5);
        a.known_demands = rng.uniform_int(0, 12);
        a.visible_alarms = rng.uniform_int(0, 6);
        a.audible = rng.uniform_int(0, 3);
        const auto base = induced_load(a);
        for (double v : base) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
        OperatorActivity more = a;
        ++more.known_demands;
        ++more.visible_alarms;
        ++more.audible;
        const auto up = induced_load(more);
        for (std::size_t k = 0; k < kComponentCount; ++k) CHECK(up[k] >= base[k]);
    }
}

TEST_CASE("physio at zero load and zero noise sits at baseline") {
    const auto profile = operator_preset("deterministic-zero-noise");
    PhysioGenerator g(profile, 1);
    for (int i = 1; i <= 20; ++i) {
        const auto s = g.step(InducedLoad{}, true, i, 1.0);
        for (std::size_t c = 0; c < kChannelCount; ++c) CHECK(s.channels[c] == doctest::Approx(profile.physio_baseline[c]));
    }
    const auto silent = g.step(InducedLoad{}, false, 21, 1.0);
    CHECK(silent.channels[static_cast<std::size_t>(Channel::SpeechRate)] == 0.0);
    CHECK(silent.channels[static_cast<std::size_t>(Channel::SpeechIntensity)] == 0.0);
    CHECK(silent.channels[static_cast<std::size_t>(Channel::Pitch)] == 0.0);
}

TEST_CASE("heart rate follows a first-order step response") {
    const auto profile = operator_preset("deterministic-zero-noise");
    PhysioGenerator g(profile, 1);
    InducedLoad step{};
    step[index_of(Component::Cognitive)] = 1.0;
    const auto hr = static_cast<std::size_t>(Channel::HeartRate);
    const double base = profile.physio_baseline[hr];
    const double gain = profile.physio_gain[hr][index_of(Component::Cognitive)];
    for (int n = 1; n <= 30; ++n) {
        const auto s = g.step(step, false, n, 1.0);
        const double expect = base + gain * (1.0 - std::exp(-n / profile.smoothing_tau));
        CHECK(s.channels[hr] == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("raising a load component never lowers a channel") {
    const auto profile = operator_preset("deterministic-zero-noise");
    Rng rng(5);
    for (int i = 0; i < 300; ++i) {
        InducedLoad lo{};
        for (auto& v : lo) v = rng.uniform();
        InducedLoad hi = lo;
        hi[static_cast<std::size_t>(rng.uniform_int(0, 4))] = std::min(1.0, lo[0] + rng.uniform());
        for (std::size_t k = 0; k < kComponentCount; ++k) hi[k] = std::max(hi[k], lo[k]);
        PhysioGenerator a(profile, 1), b(profile, 1);
        const auto sa = a.step(lo, true, 1, 1.0);
        const auto sb = b.step(hi, true, 1, 1.0);
        for (std::size_t c = 0; c < kChannelCount; ++c) CHECK(sb.channels[c] >= sa.channels[c]);
    }
}

TEST_CASE("physio noise is seeded") {
    const OperatorProfile profile;
    PhysioGenerator a(profile, 9), b(profile, 9), c(profile, 10);
    InducedLoad l{};
    l.fill(0.4);
    bool differs = false;
    for (int i = 1; i <= 50; ++i) {
        const auto sa = a.step(l, true, i, 1.0), sb = b.step(l, true, i, 1.0), sc = c.step(l, true, i, 1.0);
        CHECK(sa.channels == sb.channels);
        differs = differs || sa.channels != sc.channels;
        for (double v : sa.channels) {
            CHECK(std::isfinite(v));
            CHECK(v >= 0.0);
        }
    }
    CHECK(differs);
}

TEST_CASE("seeded operator repeats its input trace") {
    ScenarioConfig cfg;
    cfg.script = {Block{LoadLabel::OL, 120}};
    const auto trace = [&](std::uint64_t seed) {
        SimEngine engine(cfg, seed);
        SyntheticOperator op(cfg, seed);
        engine.begin_block(0);
        std::vector<nlohmann::json> inputs;
        for (int k = 0; k < 2400; ++k) {
            engine.advance_tick();
            for (const auto& in : op.step(engine.world(), engine.now())) {
                engine.apply_operator_input(in);
                inputs.push_back(to_json(in));
            }
        }
        return inputs;
    };
    const auto a = trace(4), b = trace(4), c = trace(5);
    CHECK(a.size() > 100);
    CHECK(a == b);
    CHECK(a != c);
}

TEST_CASE("induced cognitive load orders UL < NL < OL over a trial") {
    const auto r = run_trial(ScenarioConfig{}, Models{}, TrialOptions{});
    std::map<std::string, std::pair<double, int>> by_label;
    std::string label;
    for (const auto& e : r.log.events) {
        if (e.kind == "block_start") label = e.payload["label"].get<std::string>();
        if (e.kind == "physio" && e.payload.contains("load")) {
            auto& [sum, n] = by_label[label];
            sum += e.payload["load"][index_of(Component::Cognitive)].get<double>();
            ++n;
        }
    }
    const auto mean = [&](const char* l) { return by_label[l].first / by_label[l].second; };
    INFO("UL " << mean("UL") << " NL " << mean("NL") << " OL " << mean("OL"));
    CHECK(mean("UL") < mean("NL"));
    CHECK(mean("NL") < mean("OL"));
}
