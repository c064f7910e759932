#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "matb/sim_engine.hpp"

#include <algorithm>
#include <cmath>

using namespace matb;

namespace {

int count_kind(const std::vector<ScheduledEvent>& ev, ScheduledKind k) {
    return static_cast<int>(std::count_if(ev.begin(), ev.end(), [&](const auto& e) { return e.kind == k; }));
}

int count_in(const std::vector<ScheduledEvent>& ev, ScheduledKind k, double lo, double hi) {
    return static_cast<int>(
        std::count_if(ev.begin(), ev.end(), [&](const auto& e) { return e.kind == k && e.t >= lo && e.t < hi; }));
}

}  // namespace

TEST_CASE("block event counts match the condition rates exactly") {
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        Rng rng(seed);
        const auto ol = schedule_block_events(build_condition(LoadLabel::OL), 450.0, rng);
        CHECK(count_kind(ol, ScheduledKind::SysmonOnset) == 150);
        const auto ul = schedule_block_events(build_condition(LoadLabel::UL), 450.0, rng);
        CHECK(count_kind(ul, ScheduledKind::SysmonOnset) == 7);
        CHECK(count_kind(ul, ScheduledKind::PumpFailure) == 0);
        const auto nl = schedule_block_events(build_condition(LoadLabel::NL), 450.0, rng);
        CHECK(count_kind(nl, ScheduledKind::SysmonOnset) == 5 * 7 + 2);
    }
}

TEST_CASE("per-minute counts stay within the ranges") {
    Rng rng(11);
    for (auto label : {LoadLabel::UL, LoadLabel::NL, LoadLabel::OL}) {
        const auto c = build_condition(label);
        const auto ev = schedule_block_events(c, 450.0, rng);
        for (int m = 0; m < 7; ++m) {
            const double lo = 60.0 * m, hi = lo + 60.0;
            CHECK(count_in(ev, ScheduledKind::SysmonOnset, lo, hi) == c.sysmon_events_per_min);
            const int comms = count_in(ev, ScheduledKind::CommsRequest, lo, hi);
            CHECK(comms >= c.comms_requests_min);
            CHECK(comms <= c.comms_requests_max);
            const int pumps = count_in(ev, ScheduledKind::PumpFailure, lo, hi);
            if (c.pump_failures_alternate && m % 2 == 0) {
                CHECK(pumps == 0);
            } else {
                CHECK(pumps >= c.pump_failures_min);
                CHECK(pumps <= c.pump_failures_max);
            }
        }
    }
}

TEST_CASE("final partial minute gets the floor of its share") {
    const auto c = build_condition(LoadLabel::OL);
    for (double dur : {30.0, 90.0, 125.0, 450.0}) {
        Rng rng(2);
        const auto ev = schedule_block_events(c, dur, rng);
        const int full = static_cast<int>(dur / 60.0);
        const double frac = dur / 60.0 - full;
        const int expect = 20 * full + static_cast<int>(std::floor(20 * frac + 1e-9));
        CHECK(count_kind(ev, ScheduledKind::SysmonOnset) == expect);
        for (const auto& e : ev) {
            CHECK(e.t >= 0.0);
            CHECK(e.t < dur);
        }
    }
    Rng rng(2);
    CHECK(schedule_block_events(c, 0.0, rng).empty());
}

TEST_CASE("schedule is sorted and seed-determined") {
    Rng a(5), b(5), c(6);
    const auto ea = schedule_block_events(build_condition(LoadLabel::NL), 450.0, a);
    const auto eb = schedule_block_events(build_condition(LoadLabel::NL), 450.0, b);
    const auto ec = schedule_block_events(build_condition(LoadLabel::NL), 450.0, c);
    CHECK(std::is_sorted(ea.begin(), ea.end(), [](const auto& x, const auto& y) { return x.t < y.t; }));
    REQUIRE(ea.size() == eb.size());
    for (std::size_t i = 0; i < ea.size(); ++i) {
        CHECK(ea[i].t == eb[i].t);
        CHECK(ea[i].kind == eb[i].kind);
    }
    bool differs = ea.size() != ec.size();
    for (std::size_t i = 0; !differs && i < ea.size(); ++i) differs = ea[i].t != ec[i].t;
    CHECK(differs);
}

TEST_CASE("tracking mode policy per condition") {
    Rng rng(1);
    const auto modes = [&](LoadLabel l) {
        std::vector<ScheduledEvent> out;
        for (const auto& e : schedule_block_events(build_condition(l), 450.0, rng))
            if (e.kind == ScheduledKind::TrackingMode) out.push_back(e);
        return out;
    };
    const auto ul = modes(LoadLabel::UL);
    REQUIRE(ul.size() == 1);
    CHECK(ul[0].mode == TrackingMode::Automatic);
    const auto ol = modes(LoadLabel::OL);
    REQUIRE(ol.size() == 1);
    CHECK(ol[0].mode == TrackingMode::Manual);
    const auto nl = modes(LoadLabel::NL);
    REQUIRE(nl.size() == 3);
    CHECK(nl[0].mode == TrackingMode::Manual);
    CHECK(nl[1].mode == TrackingMode::Automatic);
    CHECK(nl[1].t == doctest::Approx(150.0));
    CHECK(nl[2].mode == TrackingMode::Manual);
}

TEST_CASE("comms requests mix own and foreign callsigns") {
    Rng rng(8);
    int own = 0, total = 0;
    for (int i = 0; i < 20; ++i)
        for (const auto& e : schedule_block_events(build_condition(LoadLabel::OL), 450.0, rng))
            if (e.kind == ScheduledKind::CommsRequest) {
                ++total;
                own += e.own ? 1 : 0;
                CHECK(e.radio >= 0);
                CHECK(e.radio < 4);
            }
    const double share = static_cast<double>(own) / total;
    CHECK(share > 0.4);
    CHECK(share < 0.6);
}

TEST_CASE("unknown condition name") {
    CHECK_THROWS_AS(build_condition("HL"), ConfigError);
    CHECK(build_condition("UL").label == LoadLabel::UL);
}
