#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "matb/runner.hpp"
#include "matb/scoring.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <cmath>

using namespace matb;

namespace {

ScoreStream random_stream(Rng& rng) {
    ScoreStream s;
    const int secs = rng.uniform_int(1, 120);
    for (int i = 1; i <= secs; ++i) {
        SecondSample x;
        x.t = i;
        x.ticks = 20;
        x.tracking_ticks = rng.bernoulli(0.3) ? 0 : rng.uniform_int(1, 20);
        for (int k = 0; k < x.tracking_ticks; ++k) x.tracking_sq_sum += std::pow(rng.uniform(0.0, 900.0), 2);
        for (int k = 0; k < 20; ++k) {
            const double a = rng.uniform(0.0, 6000.0), b = rng.uniform(0.0, 6000.0);
            x.fuel_score_sum += 0.5 * (fuel_score(a) + fuel_score(b));
            x.fuel_in_range += (a >= 2000 && a <= 3000) + (b >= 2000 && b <= 3000);
        }
        s.seconds.push_back(x);
    }
    const int n = rng.uniform_int(0, 60);
    for (int i = 0; i < n; ++i) {
        DemandOutcome o;
        o.task = rng.bernoulli(0.5) ? Task::SystemMonitoring : Task::Communications;
        o.id = i;
        o.onset = rng.uniform(0.0, secs);
        o.concluded = o.onset + rng.uniform(0.0, 45.0);
        o.how = static_cast<Resolution>(rng.uniform_int(0, 2));
        s.outcomes.push_back(o);
    }
    std::sort(s.outcomes.begin(), s.outcomes.end(),
              [](const auto& a, const auto& b) { return a.concluded < b.concluded; });
    return s;
}

ScenarioConfig short_trial() {
    ScenarioConfig cfg;
    cfg.script = {Block{LoadLabel::OL, 90}, Block{LoadLabel::UL, 60}, Block{LoadLabel::NL, 90}};
    return cfg;
}

}  // namespace

TEST_CASE("tracking score") {
    CHECK(tracking_score(0, 240) == 1.0);
    CHECK(tracking_score(240, 240) == 0.0);
    CHECK(tracking_score(120, 240) == 0.5);
    CHECK(tracking_score(1000, 240) == 0.0);
    CHECK_THROWS_AS(tracking_score(10, 0), ConfigError);
    CHECK_THROWS_AS(tracking_score(10, -1), ConfigError);
}

TEST_CASE("reaction score") {
    CHECK(reaction_score(0, 15) == 1.0);
    CHECK(reaction_score(15, 15) == 0.0);
    CHECK(reaction_score(20, 15) == 0.0);
    CHECK(reaction_score(7.5, 15) == 0.5);
}

TEST_CASE("success rate") {
    CHECK(success_rate(3, 4) == 0.75);
    CHECK(success_rate(0, 0) == 1.0);
    CHECK_THROWS_AS(success_rate(5, 4), std::logic_error);
}

TEST_CASE("fuel score band and continuity") {
    CHECK(fuel_score(2500) == 1.0);
    CHECK(fuel_score(2000) == 1.0);
    CHECK(fuel_score(3000) == 1.0);
    CHECK(fuel_score(1000) == 0.5);
    CHECK(fuel_score(0) == 0.0);
    CHECK(fuel_score(4000) == 0.5);
    CHECK(fuel_score(9000) == 0.0);
    for (double edge : {2000.0, 3000.0}) {
        for (double h : {1e-3, 1e-6, 1e-9}) {
            CHECK(std::abs(fuel_score(edge - h) - fuel_score(edge)) <= h / 2000.0 + 1e-15);
            CHECK(std::abs(fuel_score(edge + h) - fuel_score(edge)) <= h / 2000.0 + 1e-15);
        }
    }
    // Below the band the decay is level / 2000.
    for (double l = 0; l <= 2000; l += 125) CHECK(fuel_score(l) == doctest::Approx(l / 2000.0).epsilon(1e-12));
}

TEST_CASE("overall performance is the mean of the active set") {
    TaskScores s{};
    s[index_of(Task::ResourceManagement)] = 1.0;
    s[index_of(Task::SystemMonitoring)] = 0.5;
    TaskSet a;
    a.insert(Task::ResourceManagement);
    a.insert(Task::SystemMonitoring);
    CHECK(overall_performance(s, a) == 0.75);
    CHECK_THROWS_AS(overall_performance(s, TaskSet{}), std::invalid_argument);
    CHECK_THROWS_AS(overall_performance(s, TaskSet::all()), std::invalid_argument);
    TaskScores all{1.0, 1.0, 1.0, 1.0};
    CHECK(overall_performance(all, TaskSet::all()) == 1.0);
}

TEST_CASE("overall performance is permutation invariant and monotone") {
    Rng rng(21);
    for (int i = 0; i < 1000; ++i) {
        TaskScores s{};
        std::array<double, 4> v{};
        for (auto& x : v) x = rng.uniform();
        for (std::size_t k = 0; k < 4; ++k) s[k] = v[k];
        const double base = overall_performance(s, TaskSet::all());
        std::array<double, 4> p = v;
        std::reverse(p.begin(), p.end());
        TaskScores r{};
        for (std::size_t k = 0; k < 4; ++k) r[k] = p[k];
        CHECK(overall_performance(r, TaskSet::all()) == doctest::Approx(base).epsilon(1e-15));
        const auto k = static_cast<std::size_t>(rng.uniform_int(0, 3));
        s[k] = std::min(1.0, *s[k] + rng.uniform(0.0, 0.5));
        CHECK(overall_performance(s, TaskSet::all()) >= base);
    }
}

TEST_CASE("scores stay in [0, 1] on 1000 random streams") {
    Rng rng(99);
    const ScoringConfig cfg;
    for (int i = 0; i < 1000; ++i) {
        const auto s = random_stream(rng);
        const double end = s.seconds.back().t;
        const double start = rng.uniform(-10.0, end);
        const auto p = windowed_performance(s, start, end, cfg);
        int present = 0;
        double sum = 0.0;
        for (const auto& v : p.per_task) {
            if (!v) continue;
            CHECK(*v >= 0.0);
            CHECK(*v <= 1.0);
            ++present;
            sum += *v;
        }
        CHECK(p.overall >= 0.0);
        CHECK(p.overall <= 1.0);
        REQUIRE(present > 0);
        CHECK(p.overall == doctest::Approx(sum / present).epsilon(1e-12));
        CHECK(p.raw.fuel_time_in_range >= 0.0);
        CHECK(p.raw.fuel_time_in_range <= 1.0);
        CHECK(p.per_task[index_of(Task::Tracking)].has_value() == (p.raw.tracking_ticks > 0));
    }
}

TEST_CASE("an expired demand never raises the score") {
    Rng rng(5);
    const ScoringConfig cfg;
    for (int i = 0; i < 300; ++i) {
        auto s = random_stream(rng);
        const double end = s.seconds.back().t;
        const auto before = windowed_performance(s, 0.0, end, cfg);
        DemandOutcome o{Task::SystemMonitoring, 999, end - 15.0, end, Resolution::Expired};
        s.outcomes.push_back(o);
        const auto after = windowed_performance(s, 0.0, end, cfg);
        CHECK(*after.per_task[1] <= *before.per_task[1] + 1e-15);
        CHECK(success_rate(after.raw.sysmon_resolved, after.raw.sysmon_total) <=
              success_rate(before.raw.sysmon_resolved, before.raw.sysmon_total));
    }
}

TEST_CASE("quiet window scores 1") {
    ScoreStream s;
    for (int i = 1; i <= 30; ++i) {
        SecondSample x;
        x.t = i;
        x.ticks = 20;
        x.fuel_score_sum = 20.0;
        x.fuel_in_range = 40;
        s.seconds.push_back(x);
    }
    const auto p = windowed_performance(s, 0, 30, ScoringConfig{});
    CHECK(p.overall == 1.0);
    CHECK_FALSE(p.per_task[0].has_value());
    CHECK(p.raw.fuel_time_in_range == 1.0);
}

TEST_CASE("logged performance matches an independent recomputation") {
    const auto cfg = short_trial();
    for (auto mode : {AdaptationMode::None, AdaptationMode::Autonomy}) {
        for (std::uint64_t seed : {1, 2, 3}) {
            TrialOptions opt;
            opt.mode = mode;
            opt.seed = seed;
            const auto r = run_trial(cfg, Models{}, opt);
            int checked = 0;
            for (const auto* e : r.log.of_kind("performance")) {
                const auto o = oracle::windowed_score(r.log, e->t - cfg.scoring.performance_window, e->t, cfg.scoring);
                const double logged = e->payload["overall"].get<double>();
                CHECK(std::abs(logged - o.overall) <= 1e-9);
                CHECK(logged >= 0.0);
                CHECK(logged <= 1.0);
                for (const auto& [task, v] : o.per_task) {
                    REQUIRE_FALSE(e->payload[task].is_null());
                    INFO("t=" << e->t << " task=" << task << " seed=" << seed);
                    CHECK(std::abs(e->payload[task].get<double>() - v) <= 1e-9);
                }
                if (!o.per_task.count("tracking")) CHECK(e->payload["tracking"].is_null());
                ++checked;
            }
            CHECK(checked == 48);
        }
    }
}
