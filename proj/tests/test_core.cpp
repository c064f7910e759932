#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "matb/config.hpp"
#include "matb/event_log.hpp"
#include "matb/random.hpp"

#include <sstream>

using namespace matb;

TEST_CASE("task set basics") {
    TaskSet s;
    CHECK(s.empty());
    s.insert(Task::Communications);
    s.insert(Task::Tracking);
    CHECK(s.size() == 2);
    CHECK(s.contains(Task::Tracking));
    CHECK_FALSE(s.contains(Task::SystemMonitoring));
    CHECK(s.complement().size() == 2);
    CHECK(TaskSet::all().complement().empty());
    s.erase(Task::Tracking);
    CHECK(s.size() == 1);
}

TEST_CASE("names parse back") {
    for (auto t : kAllTasks) CHECK(parse_task(task_name(t)) == t);
    CHECK_FALSE(parse_task("nope").has_value());
    for (auto m : {AdaptationMode::None, AdaptationMode::Autonomy, AdaptationMode::Interaction, AdaptationMode::Both})
        CHECK(parse_mode(mode_name(m)) == m);
    CHECK_THROWS_AS(parse_mode("sometimes"), ConfigError);
    CHECK(parse_label("OL") == LoadLabel::OL);
    CHECK_THROWS_AS(parse_label("XL"), ConfigError);
}

TEST_CASE("component maxima add up to the overall range") {
    double sum = 0.0;
    for (double m : kComponentMax) sum += m;
    CHECK(sum == kOverallMax);
}

TEST_CASE("default script") {
    const ScenarioConfig cfg;
    REQUIRE(cfg.script.size() == 7);
    const LoadLabel order[] = {LoadLabel::OL, LoadLabel::UL, LoadLabel::OL, LoadLabel::NL,
                               LoadLabel::UL, LoadLabel::NL, LoadLabel::OL};
    for (std::size_t i = 0; i < 7; ++i) {
        CHECK(cfg.script[i].label == order[i]);
        CHECK(cfg.script[i].duration == 450.0);
    }
    CHECK(cfg.total_duration() == 3150.0);
    CHECK(cfg.ticks_per_second() == 20);
}

TEST_CASE("config json round trip keeps the hash") {
    ScenarioConfig cfg;
    cfg.seed = 77;
    cfg.policy.perf_low = 0.65;
    cfg.operator_profile.rt_noise = 0.1;
    const auto back = config_from_json(to_json(cfg));
    CHECK(config_hash(back) == config_hash(cfg));
    CHECK(to_json(back) == to_json(cfg));

    ScenarioConfig other = cfg;
    other.policy.perf_low = 0.66;
    CHECK(config_hash(other) != config_hash(cfg));

    // Console settings are operational, not semantic.
    other = cfg;
    other.console.port = 9999;
    other.log_dir = "elsewhere";
    CHECK(config_hash(other) == config_hash(cfg));
}

TEST_CASE("partial config keeps defaults") {
    const auto cfg = config_from_json(nlohmann::json{{"seed", 5}, {"policy", {{"perf_high", 0.9}}}});
    CHECK(cfg.seed == 5);
    CHECK(cfg.policy.perf_high == 0.9);
    CHECK(cfg.policy.perf_low == 0.70);
    CHECK(cfg.script.size() == 7);
}

TEST_CASE("operator presets") {
    CHECK(operator_preset("nominal").preset == "nominal");
    const auto z = operator_preset("deterministic-zero-noise");
    CHECK(z.rt_noise == 0.0);
    CHECK(z.noise_fraction == 0.0);
    CHECK(operator_preset("slow").reaction_time[1] > operator_preset("nominal").reaction_time[1]);
    CHECK_THROWS_AS(operator_preset("heroic"), ConfigError);
}

TEST_CASE("rng streams are reproducible and independent") {
    Rng a(derive_seed(9, Stream::Engine)), b(derive_seed(9, Stream::Engine)), c(derive_seed(9, Stream::Operator));
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
        const auto x = a.next();
        CHECK(x == b.next());
        differs |= x != c.next();
    }
    CHECK(differs);
}

TEST_CASE("rng helpers stay in range") {
    Rng r(3);
    double sum = 0.0, sq = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double u = r.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        const int k = r.uniform_int(-2, 3);
        CHECK(k >= -2);
        CHECK(k <= 3);
        const double z = r.normal();
        sum += z;
        sq += z * z;
    }
    CHECK(std::abs(sum / n) < 0.03);
    CHECK(std::abs(sq / n - 1.0) < 0.05);
}

TEST_CASE("log lines round trip") {
    LogEvent e{12.35, "estimate", {{"overall", 31.5}, {"state", "NL"}}};
    const auto line = e.to_line();
    CHECK(LogEvent::from_line(line) == e);
    CHECK(LogEvent::from_line(line).to_line() == line);
    CHECK_THROWS(LogEvent::from_line("{not json"));

    TrialLog log;
    log.header = {{"schema", std::string(kLogSchema)}, {"seed", 4}};
    log.append(e);
    log.append(LogEvent{13.0, "physio", {{"channels", {1, 2}}}});
    std::istringstream in(log.serialize());
    const auto back = TrialLog::parse(in);
    CHECK(back.header == log.header);
    REQUIRE(back.events.size() == 2);
    CHECK(back.events[1] == log.events[1]);
    CHECK(back.serialize() == log.serialize());
    CHECK(back.of_kind("physio").size() == 1);
}

TEST_CASE("fnv1a known values") {
    CHECK(fnv1a("") == 0xcbf29ce484222325ull);
    CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cull);
    CHECK(hex64(0xabcull) == "0000000000000abc");
}
