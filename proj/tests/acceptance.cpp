// Acceptance run: one PASS/FAIL line per headline criterion.
//
//   matb_acceptance --work DIR
//
// Model files, batch logs and the report land in DIR. Exit status is the
// number of failed criteria.

#include "matb/runner.hpp"
#include "oracles.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>

using namespace matb;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::size_t count_kind(const std::vector<ScheduledEvent>& ev, ScheduledKind k) {
    return static_cast<std::size_t>(std::count_if(ev.begin(), ev.end(), [&](const auto& e) { return e.kind == k; }));
}

// ---------------------------------------------------------------------------

Verdict condition_fidelity() {
    Verdict v;
    int blocks = 0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        Rng rng(seed);
        const auto ol = schedule_block_events(build_condition(LoadLabel::OL), 450.0, rng);
        const auto ul = schedule_block_events(build_condition(LoadLabel::UL), 450.0, rng);
        const auto nl = schedule_block_events(build_condition(LoadLabel::NL), 450.0, rng);
        v.require(count_kind(ol, ScheduledKind::SysmonOnset) == 150, "OL sysmon != 150 (seed " + std::to_string(seed) + ")");
        v.require(count_kind(ul, ScheduledKind::SysmonOnset) == 7, "UL sysmon != 7 (seed " + std::to_string(seed) + ")");
        v.require(count_kind(ul, ScheduledKind::PumpFailure) == 0, "UL pump failures != 0");
        for (auto label : {LoadLabel::UL, LoadLabel::NL, LoadLabel::OL}) {
            const auto c = build_condition(label);
            const auto& ev = label == LoadLabel::UL ? ul : label == LoadLabel::NL ? nl : ol;
            for (int m = 0; m < 7; ++m) {
                int comms = 0, pumps = 0, sysmon = 0;
                for (const auto& e : ev) {
                    if (e.t < 60.0 * m || e.t >= 60.0 * (m + 1)) continue;
                    comms += e.kind == ScheduledKind::CommsRequest;
                    pumps += e.kind == ScheduledKind::PumpFailure;
                    sysmon += e.kind == ScheduledKind::SysmonOnset;
                }
                v.require(sysmon == c.sysmon_events_per_min, "per-minute sysmon rate");
                v.require(comms >= c.comms_requests_min && comms <= c.comms_requests_max, "per-minute comms range");
                const bool quiet = c.pump_failures_alternate && m % 2 == 0;
                v.require(quiet ? pumps == 0 : (pumps >= c.pump_failures_min && pumps <= c.pump_failures_max),
                          "per-minute pump range");
            }
        }
        blocks += 3;
    }
    // The engine realizes the schedule: every OL onset starts or waits for a free gauge.
    ScenarioConfig cfg;
    cfg.script = {Block{LoadLabel::OL, 450}};
    SimEngine engine(cfg, 7);
    engine.begin_block(0);
    int onsets = 0;
    for (int k = 0; k < 450 * cfg.ticks_per_second(); ++k) {
        engine.advance_tick();
        for (const auto& e : engine.take_events()) onsets += e.kind == "sysmon_onset";
    }
    v.require(onsets + engine.world().sysmon.deferred == 150, "engine OL onsets + deferred != 150");
    v.detail << blocks << " scheduled blocks over 50 seeds; OL 150 / UL 7 sysmon, UL 0 pump failures; engine OL onsets "
             << onsets << " + deferred " << engine.world().sysmon.deferred;
    return v;
}

Verdict trial_structure() {
    Verdict v;
    const ScenarioConfig cfg;
    const std::vector<LoadLabel> order{LoadLabel::OL, LoadLabel::UL, LoadLabel::OL, LoadLabel::NL,
                                       LoadLabel::UL, LoadLabel::NL, LoadLabel::OL};
    v.require(cfg.script.size() == 7, "7 blocks");
    for (std::size_t i = 0; i < std::min<std::size_t>(7, cfg.script.size()); ++i) {
        v.require(cfg.script[i].label == order[i], "block order");
        v.require(cfg.script[i].duration == 450.0, "block length 450 s");
    }
    v.require(cfg.total_duration() == 3150.0, "total 3150 s");
    const auto log = run_trial(cfg, Models{}, TrialOptions{}).log;
    std::string seen;
    std::size_t i = 0;
    for (const auto* e : log.of_kind("block_start")) {
        seen += e->payload["label"].get<std::string>() + " ";
        v.require(std::abs(e->t - 450.0 * static_cast<double>(i)) < 1e-9, "block start times");
        ++i;
    }
    v.require(i == 7, "7 block starts logged");
    v.require(log.header["duration"].get<double>() == 3150.0, "logged duration");
    v.require(log.events.back().t <= 3150.0 + 1e-9, "last event within the trial");
    v.detail << "script " << seen << "total " << cfg.total_duration() << " s";
    return v;
}

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
    std::sort(s.outcomes.begin(), s.outcomes.end(), [](const auto& a, const auto& b) { return a.concluded < b.concluded; });
    return s;
}

Verdict scoring_properties(const std::vector<TrialLog>& logs) {
    Verdict v;
    v.require(fuel_score(2500) == 1.0, "fuel_score(2500) == 1");
    for (double edge : {2000.0, 3000.0})
        for (double h : {1e-3, 1e-6, 1e-9}) {
            v.require(std::abs(fuel_score(edge - h) - fuel_score(edge)) <= h / 2000.0 + 1e-15, "continuity below edge");
            v.require(std::abs(fuel_score(edge + h) - fuel_score(edge)) <= h / 2000.0 + 1e-15, "continuity above edge");
        }
    Rng rng(99);
    const ScoringConfig sc;
    for (int i = 0; i < 1000; ++i) {
        const auto s = random_stream(rng);
        const double end = s.seconds.back().t;
        const auto p = windowed_performance(s, rng.uniform(-10.0, end), end, sc);
        double sum = 0.0;
        int present = 0;
        for (const auto& x : p.per_task) {
            if (!x) continue;
            v.require(*x >= 0.0 && *x <= 1.0, "task score in [0,1]");
            sum += *x;
            ++present;
        }
        v.require(p.overall >= 0.0 && p.overall <= 1.0, "overall in [0,1]");
        v.require(present > 0 && std::abs(p.overall - sum / present) <= 1e-12, "overall is the uniform mean");
    }
    double worst = 0.0;
    std::size_t checked = 0;
    for (const auto& log : logs) {
        const auto cfg = config_from_json(log.header["config"]);
        for (const auto* e : log.of_kind("performance")) {
            const auto o = oracle::windowed_score(log, e->t - cfg.scoring.performance_window, e->t, cfg.scoring);
            worst = std::max(worst, std::abs(e->payload["overall"].get<double>() - o.overall));
            for (const auto& [task, val] : o.per_task)
                worst = std::max(worst, std::abs(e->payload[task].get<double>() - val));
            ++checked;
        }
    }
    v.require(worst <= 1e-9, "oracle recomputation within 1e-9");
    v.detail << "1000 random streams in [0,1]; fuel edges continuous; oracle max |diff| " << worst << " over "
             << checked << " logged windows";
    return v;
}

Verdict pipeline_cadence(const ScenarioConfig& trained, const TrialLog& full) {
    Verdict v;
    const auto check_cadence = [&](const TrialLog& log, std::size_t expect, const char* what) {
        const auto est = log.of_kind("estimate");
        v.require(est.size() == expect, std::string(what) + " estimate count");
        if (est.empty()) return;
        v.require(est.front()->t == 30.0, std::string(what) + " first estimate at 30 s");
        for (std::size_t i = 1; i < est.size(); ++i)
            if (std::abs(est[i]->t - est[i - 1]->t - 5.0) > 1e-9) {
                v.require(false, std::string(what) + " 5 s spacing");
                break;
            }
        for (const auto* e : est) {
            double sum = 0.0;
            for (auto c : kAllComponents) {
                const double x = e->payload[std::string(component_name(c))].get<double>();
                v.require(x >= 0.0 && x <= kComponentMax[index_of(c)], "component within its range");
                sum += x;
            }
            const double overall = e->payload["overall"].get<double>();
            v.require(overall >= 0.0 && overall <= kOverallMax, "overall within 0..62");
            v.require(std::abs(overall - sum) <= 1e-9, "overall is the component sum");
        }
    };
    ScenarioConfig one = trained;
    one.script = {Block{LoadLabel::OL, 450}};
    TrialOptions opt;
    opt.seed = 3;
    const auto block = run_trial(one, load_models(one), opt).log;
    check_cadence(block, 85, "single block");
    check_cadence(full, 625, "full trial");

    // Logged physio windows against the brute-force statistics.
    double worst = 0.0;
    std::size_t windows = 0;
    const auto rows = estimator_rows(full);
    std::vector<std::pair<double, std::array<double, kChannelCount>>> physio;
    for (const auto* e : full.of_kind("physio")) {
        std::array<double, kChannelCount> ch{};
        for (std::size_t c = 0; c < kChannelCount; ++c) ch[c] = e->payload["channels"][c].get<double>();
        physio.emplace_back(e->t, ch);
    }
    v.require(rows.has_value(), "estimator rows available");
    if (rows) {
        for (const auto& r : *rows) {
            for (std::size_t c = 0; c < kChannelCount; ++c) {
                std::vector<double> t, x;
                for (const auto& [pt, ch] : physio)
                    if (pt > r.t - 30.0 + 1e-9 && pt <= r.t + 1e-9) t.push_back(pt), x.push_back(ch[c]);
                const auto o = oracle::channel_stats(t, x);
                const double ref[4] = {o.mean, o.variance, o.avg_gradient, o.slope};
                for (int s = 0; s < 4; ++s) {
                    const double got = r.features[4 * c + static_cast<std::size_t>(s)];
                    const double scale = std::max({std::abs(got), std::abs(ref[s]), 1e-12});
                    worst = std::max(worst, std::abs(got - ref[s]) / scale);
                }
            }
            ++windows;
        }
    }
    v.require(worst <= 1e-9, "feature statistics within 1e-9 relative");
    v.detail << "85 estimates in a 450 s block, 625 over the trial, first at 30 s, every 5 s; feature oracle max rel "
             << worst << " over " << windows << " windows";
    return v;
}

std::vector<TrainingSample> linear_set(std::size_t n, Rng& rng) {
    std::vector<TrainingSample> out;
    for (std::size_t i = 0; i < n; ++i) {
        TrainingSample s;
        for (auto& row : s.input) {
            double sum = 0.0;
            for (std::size_t k = 1; k < kPredictorInputs; ++k) sum += row[k] = rng.uniform(0.0, kPredictorInputScale[k]);
            row[0] = std::min(sum, kOverallMax);
        }
        s.target = s.input[2][0] / 62.0;
        out.push_back(s);
    }
    return out;
}

Verdict predictor_numerics() {
    Verdict v;
    const auto t0 = Clock::now();
    double worst_grad = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Rng rng(seed);
        const auto m = PredictorModel::random(LstmShape{6, 2, 3, 2}, 0.8, rng);
        TrainingSample s;
        s.input = linear_set(1, rng)[0].input;
        s.target = rng.uniform();
        worst_grad = std::max(worst_grad, gradient_check(m, s).max_relative_error);
    }
    v.require(worst_grad < 1e-5, "gradient check < 1e-5");

    Rng rng(12);
    const auto train = linear_set(600, rng);
    const auto held = linear_set(200, rng);
    PredictorTrainSpec spec;
    spec.epochs = 60;
    spec.seed = 5;
    const LstmShape shape{};  // 16 units per layer
    const auto a = train_predictor(train, shape, 0.8, spec);
    const double mse = mean_squared_error(a.model, held);
    v.require(mse < 0.01, "held-out MSE < 0.01");
    const auto b = train_predictor(train, shape, 0.8, spec);
    v.require(a.loss_curve == b.loss_curve && a.model == b.model, "seeded training bitwise reproducible");
    spec.exec = Exec::Serial;
    const auto c = train_predictor(train, shape, 0.8, spec);
    v.require(c.model == a.model, "serial and parallel training identical");
    const double secs = seconds_since(t0);
    v.require(secs < 300.0, "runtime under 5 min");
    v.detail << "gradient check max rel " << worst_grad << "; linear mapping held-out MSE " << mse
             << " at 16 units; reproducible; " << secs << " s";
    return v;
}

Verdict policy_correctness() {
    Verdict v;
    PolicyConfig cfg;
    cfg.enable_autonomy = cfg.enable_interaction = true;
    int cases = 0;
    for (const auto& row : oracle::kAutonomyTruth)
        for (int i = 0; i < 3; ++i) {
            const auto got = autonomy_decision(oracle::history_of(row.history), oracle::kTruthPredictions[i], cfg);
            v.require(got.action == oracle::action_of(row.expect[i]), std::string("truth table ") + row.history);
            ++cases;
        }

    PolicyEngine thrash(cfg);
    int toggles = 0;
    for (int i = 0; i < 1000; ++i) {
        WorkloadEstimate e;
        e.t = 30.0 + 5.0 * i;
        e.state = i % 2 == 0 ? LoadLabel::OL : LoadLabel::NL;
        toggles += thrash.on_estimate(e, 0.75).emitted != AdaptationAction::NoChange;
    }
    v.require(toggles == 0, "alternating OL/NL stream toggles automation");

    Rng rng(31);
    PolicyEngine p(cfg);
    int auditory = 0, fallbacks = 0, late = 0;
    std::map<int, double> postponed_at;
    for (int i = 0; i < 20000; ++i) {
        const double now = 0.05 * (i + 1);
        ChannelLoads l{};
        for (auto& x : l) x = static_cast<ChannelLoad>(rng.uniform_int(0, 2));
        const bool clear = l[index_of(Component::Speech)] == ChannelLoad::Unloaded &&
                           l[index_of(Component::Auditory)] == ChannelLoad::Unloaded;
        std::vector<Stimulus> out = p.due(l, now);
        for (const auto& s : out) {
            const double waited = now - postponed_at[s.interaction.ref];
            late += std::abs(waited - cfg.postpone) > 1e-6;
            fallbacks += s.kind == StimulusKind::VisualOnlyFallback;
        }
        if (rng.bernoulli(0.05))
            for (const auto& plan : p.on_interactions({Interaction{Task::ResourceManagement, "fuel", i, now}}, l, now)) {
                if (plan.postponed) postponed_at[i] = now;
                for (const auto& s : immediate_stimuli(plan, now)) out.push_back(s);
            }
        for (const auto& s : out)
            if (s.kind == StimulusKind::Auditory) {
                ++auditory;
                v.require(clear, "auditory stimulus while speech or auditory is loaded");
            }
    }
    v.require(late == 0, "postponed decisions resolved exactly 5 s later");
    v.require(fallbacks > 0, "fallback path exercised");
    v.detail << cases << " truth-table cases; " << toggles << " toggles over 1000 alternating estimates; "
             << auditory << " auditory stimuli all on clear channels; " << fallbacks
             << " visual-only fallbacks, all at +5 s";
    return v;
}

Verdict determinism(const ScenarioConfig& trained) {
    Verdict v;
    const auto models = load_models(trained);
    std::size_t events = 0;
    for (auto mode : {AdaptationMode::None, AdaptationMode::Both}) {
        TrialOptions opt;
        opt.mode = mode;
        opt.seed = 17;
        const auto a = run_trial(trained, models, opt).log;
        const auto b = run_trial(trained, models, opt).log;
        v.require(a.serialize() == b.serialize(), "byte-identical logs");
        try {
            const auto r = replay(a);
            v.require(r.events_checked == a.events.size(), "replay covers every event");
            events += r.events_checked;
        } catch (const ReplayError& e) {
            v.require(false, std::string("replay: ") + e.what());
        }
    }
    v.detail << "two full trials (none, both) byte-identical across runs; replay reproduced " << events << " events";
    return v;
}

struct ClosedLoop {
    std::map<AdaptationMode, std::vector<double>> ol_mean;  // per seed
    std::vector<TrialLog> none_logs;
};

ClosedLoop run_closed_loop(const ScenarioConfig& trained, const fs::path& dir) {
    const std::vector<AdaptationMode> modes{AdaptationMode::None, AdaptationMode::Autonomy,
                                            AdaptationMode::Interaction, AdaptationMode::Both};
    std::vector<std::uint64_t> seeds(10);
    std::iota(seeds.begin(), seeds.end(), 1);
    const auto items = run_batch(trained, load_models(trained), modes, seeds, dir, Exec::Parallel);
    ClosedLoop out;
    for (const auto& it : items) {
        double sum = 0.0;
        int n = 0;
        for (const auto& b : it.blocks)
            if (b.label == LoadLabel::OL) sum += b.overall, ++n;
        out.ol_mean[it.mode].push_back(sum / n);
        if (it.mode == AdaptationMode::None) out.none_logs.push_back(TrialLog::load(it.log_path));
    }
    return out;
}

Verdict closed_loop(const ClosedLoop& r) {
    Verdict v;
    const auto& none = r.ol_mean.at(AdaptationMode::None);
    const auto mean = [](const std::vector<double>& x) { return std::accumulate(x.begin(), x.end(), 0.0) / x.size(); };
    char buf[64];
    std::snprintf(buf, sizeof buf, "None %.3f", mean(none));
    v.detail << "OL overall: " << buf;
    for (auto mode : {AdaptationMode::Autonomy, AdaptationMode::Interaction, AdaptationMode::Both}) {
        const auto& m = r.ol_mean.at(mode);
        int wins = 0;
        for (std::size_t i = 0; i < m.size(); ++i) wins += m[i] > none[i];
        std::snprintf(buf, sizeof buf, ", %s %.3f (%d/10)", std::string(mode_name(mode)).c_str(), mean(m), wins);
        v.detail << buf;
        v.require(wins >= 8, std::string(mode_name(mode)) + " beats None in fewer than 8 of 10 seeds");
    }
    return v;
}

Verdict estimator_trainability(const ScenarioConfig& trained, const ClosedLoop& loop) {
    Verdict v;
    const auto models = load_models(trained);
    // The bootstrap trained on seeds 101..104; these trials were never seen.
    std::vector<EstimatorRow> held;
    for (std::uint64_t seed : {201, 202}) {
        TrialOptions opt;
        opt.seed = seed;
        const auto r = estimator_rows(run_trial(trained, Models{}, opt).log);
        held.insert(held.end(), r->begin(), r->end());
    }
    ComponentVector mae{};
    for (const auto& row : held) {
        const auto est = models.estimators->estimate(row.features);
        for (std::size_t k = 0; k < kComponentCount; ++k) mae[k] += std::abs(est[k] - row.labels[k]);
    }
    v.detail << "held-out MAE (% of range)";
    for (std::size_t k = 0; k < kComponentCount; ++k) {
        mae[k] /= static_cast<double>(held.size());
        const double pct = 100.0 * mae[k] / kComponentMax[k];
        char buf[48];
        std::snprintf(buf, sizeof buf, " %s %.1f", std::string(component_name(kAllComponents[k])).c_str(), pct);
        v.detail << buf;
        v.require(pct < 10.0, std::string(component_name(kAllComponents[k])) + " MAE >= 10% of range");
    }

    std::array<int, 3> hit{}, total{};
    for (const auto& log : loop.none_logs) {
        for (const auto& b : block_metrics(log)) {
            for (const auto* e : log.of_kind("estimate")) {
                if (e->t <= b.start || e->t > b.end) continue;
                const auto l = static_cast<std::size_t>(b.label);
                ++total[l];
                hit[l] += parse_label(e->payload["state"].get<std::string>()) == b.label;
            }
        }
    }
    const auto share = [&](LoadLabel l) {
        const auto i = static_cast<std::size_t>(l);
        return total[i] ? static_cast<double>(hit[i]) / total[i] : 0.0;
    };
    char buf[96];
    std::snprintf(buf, sizeof buf, "; classified OL in OL blocks %.1f%%, UL in UL blocks %.1f%%", 100 * share(LoadLabel::OL),
                  100 * share(LoadLabel::UL));
    v.detail << buf;
    v.require(share(LoadLabel::OL) >= 0.7, "OL blocks classified OL < 70%");
    v.require(share(LoadLabel::UL) >= 0.7, "UL blocks classified UL < 70%");
    return v;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    std::string work = "acceptance";
    app.add_option("--work", work, "Directory for models, logs and the report");
    CLI11_PARSE(app, argc, argv);
    const fs::path dir(work);
    fs::create_directories(dir);

    int failed = 0;
    const auto report = [&](const char* name, const std::function<Verdict()>& fn) {
        const auto t0 = Clock::now();
        Verdict v;
        try {
            v = fn();
        } catch (const std::exception& e) {
            v.pass = false;
            v.detail << "exception: " << e.what();
        }
        failed += v.pass ? 0 : 1;
        std::printf("%s  %-26s %s (%.1f s)\n", v.pass ? "PASS" : "FAIL", name, v.detail.str().c_str(), seconds_since(t0));
        std::fflush(stdout);
    };

    std::printf("bootstrapping models into %s\n", (dir / "models").string().c_str());
    std::fflush(stdout);
    const auto boot = bootstrap_models(ScenarioConfig{}, BootstrapSpec{}, dir / "models");
    const ScenarioConfig& trained = boot.config;
    save_config(trained, dir / "config.json");

    report("condition fidelity", condition_fidelity);
    report("trial structure", trial_structure);

    std::vector<TrialLog> scored;
    TrialLog full;
    {
        const auto models = load_models(trained);
        for (auto mode : {AdaptationMode::None, AdaptationMode::Both}) {
            TrialOptions opt;
            opt.mode = mode;
            opt.seed = 42;
            scored.push_back(run_trial(trained, models, opt).log);
        }
        full = scored.front();
    }
    report("scoring properties", [&] { return scoring_properties(scored); });
    report("pipeline cadence", [&] { return pipeline_cadence(trained, full); });
    report("predictor numerics", predictor_numerics);
    report("policy correctness", policy_correctness);
    report("determinism and replay", [&] { return determinism(trained); });

    ClosedLoop loop;
    report("closed-loop ordering", [&] {
        loop = run_closed_loop(trained, dir / "batch");
        return closed_loop(loop);
    });
    report("estimator trainability", [&] { return estimator_trainability(trained, loop); });

    std::printf("%d criteria failed\n", failed);
    return failed;
}
