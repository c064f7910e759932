#include "matb/runner.hpp"

#include "matb/text_format.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace matb {

namespace {

constexpr double kEps = 1e-9;

nlohmann::json task_list(TaskSet s) {
    auto j = nlohmann::json::array();
    for (auto t : kAllTasks)
        if (s.contains(t)) j.push_back(std::string(task_name(t)));
    return j;
}

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_cell(const std::string& s) {
    try {
        return std::stod(s);
    } catch (const std::logic_error&) {
        throw std::runtime_error("bad CSV number '" + s + "'");
    }
}

}  // namespace

std::string file_hash(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ModelError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return hex64(fnv1a(ss.str()));
}

Models load_models(const ScenarioConfig& cfg) {
    Models m;
    if (!cfg.pipeline.estimator_model.empty()) {
        m.estimators = std::make_shared<const EstimatorSet>(EstimatorSet::load(cfg.pipeline.estimator_model));
        m.estimator_hash = file_hash(cfg.pipeline.estimator_model);
    }
    if (!cfg.predictor.model.empty()) {
        m.predictor = std::make_shared<const PredictorModel>(PredictorModel::load(cfg.predictor.model));
        m.predictor_hash = file_hash(cfg.predictor.model);
    }
    return m;
}

ScenarioConfig with_mode(ScenarioConfig cfg, AdaptationMode mode) {
    cfg.policy.enable_autonomy = autonomy_enabled(mode);
    cfg.policy.enable_interaction = interaction_enabled(mode);
    return cfg;
}

std::filesystem::path log_directory(const ScenarioConfig& cfg) {
    if (const char* env = std::getenv("MATB_LOG_DIR"); env && *env) return env;
    return cfg.log_dir;
}

// ---------------------------------------------------------------------------
// trial loop

TrialResult run_trial(const ScenarioConfig& base_cfg, const Models& models, const TrialOptions& options) {
    const ScenarioConfig cfg = with_mode(base_cfg, options.mode);
    const int tps = cfg.ticks_per_second();
    const auto ticks_of = [&](Seconds s) { return static_cast<long long>(std::llround(s * tps)); };
    const long long physio_every = ticks_of(cfg.timing.physio_period);
    const long long estimate_every = ticks_of(cfg.timing.estimate_period);
    if (physio_every <= 0 || estimate_every <= 0) throw ConfigError("physio and estimate periods must cover whole ticks");

    std::vector<long long> block_starts;
    long long total_ticks = 0;
    for (const auto& b : cfg.script) {
        block_starts.push_back(total_ticks);
        total_ticks += ticks_of(b.duration);
    }

    TrialResult result;
    auto& log = result.log;
    log.header = {{"schema", std::string(kLogSchema)},
                  {"version", std::string(kVersion)},
                  {"seed", options.seed},
                  {"mode", std::string(mode_name(options.mode))},
                  {"operator", options.operator_name},
                  {"duration", static_cast<double>(total_ticks) / tps},
                  {"config_hash", hex64(config_hash(cfg))},
                  {"models", {{"estimators", models.estimator_hash}, {"predictor", models.predictor_hash}}},
                  {"config", to_json(cfg)}};

    SimEngine engine(cfg, options.seed);
    WorkloadPipeline pipeline(cfg.pipeline, cfg.timing, models.estimators.get());
    PolicyEngine policy(cfg.policy);
    std::unique_ptr<SyntheticOperator> own_agent;
    OperatorAgent* agent = options.agent;
    if (!agent) {
        own_agent = std::make_unique<SyntheticOperator>(cfg, options.seed);
        agent = own_agent.get();
    }

    const auto flush = [&] {
        for (auto& e : engine.take_events()) log.append(std::move(e));
    };
    const auto emit = [&](std::string kind, nlohmann::json payload) {
        flush();
        log.append(LogEvent{engine.now(), std::move(kind), std::move(payload)});
    };

    std::optional<ChannelLoads> loads;
    IconState icons;
    std::size_t next_block = 0;

    for (long long k = 0; k < total_ticks; ++k) {
        if (next_block < block_starts.size() && k == block_starts[next_block]) engine.begin_block(next_block++);
        engine.advance_tick();
        const long long tick = k + 1;
        const Seconds now = engine.now();
        const WorldState& w = engine.world();
        // Inputs land before this tick's scoring, so every outcome falls inside some window.
        for (const auto& in : agent->step(w, now)) engine.apply_operator_input(in);
        flush();

        std::vector<Stimulus> stimuli;
        for (const auto& plan : policy.on_interactions(engine.take_interactions(), loads, now)) {
            emit("interaction_plan", {{"task", std::string(task_name(plan.interaction.task))},
                                      {"interaction", plan.interaction.kind},
                                      {"ref", plan.interaction.ref},
                                      {"visual", plan.visual},
                                      {"auditory", plan.auditory},
                                      {"postponed", plan.postponed},
                                      {"deliver_at", plan.deliver_at}});
            for (auto& s : immediate_stimuli(plan, now)) stimuli.push_back(s);
        }

        if (tick % physio_every == 0) {
            const auto reading = agent->physio(w, now);
            pipeline.push(reading.sample);
            nlohmann::json p = {{"channels", reading.sample.channels}};
            if (reading.load) p["load"] = *reading.load;
            emit("physio", std::move(p));
        }

        if (tick % estimate_every == 0) {
            const TaskSet active = infer_active_tasks(w.last_input, cfg.layout);
            emit("epoch", {{"active", task_list(active)}});
            const auto estimate = pipeline.estimate_tick(now, active);
            std::optional<double> prediction;
            if (estimate) {
                loads = channel_loads(*estimate, cfg.pipeline);
                nlohmann::json p = {{"overall", estimate->overall}, {"state", std::string(label_name(estimate->state))}};
                for (auto c : kAllComponents) p[std::string(component_name(c))] = (*estimate)[c];
                emit("estimate", std::move(p));
                const auto& h = pipeline.history();
                if (models.predictor && h.size() >= kPredictorSteps) {
                    PredictorInput in;
                    for (std::size_t i = 0; i < kPredictorSteps; ++i)
                        in[i] = predictor_row(h[h.size() - kPredictorSteps + i]);
                    prediction = models.predictor->predict(in);
                    emit("prediction", {{"value", *prediction}});
                }
            }
            const auto decision = policy.on_estimate(estimate, prediction);
            if (decision.emitted != AdaptationAction::NoChange) {
                TaskSet changed;
                flush();
                if (decision.emitted == AdaptationAction::AutomateInactive) {
                    for (auto t : kAllTasks)
                        if (!active.contains(t)) {
                            engine.set_task_automation(t, true, "policy");
                            changed.insert(t);
                        }
                } else {
                    for (auto t : kAllTasks) {
                        engine.set_task_automation(t, false, "policy");
                        changed.insert(t);
                    }
                }
                emit("policy", {{"trigger", std::string(trigger_name(decision.decision.trigger))},
                                {"action", std::string(action_name(decision.emitted))},
                                {"plan", task_list(changed)}});
            }
            const auto perf = windowed_performance(engine.score_stream(), now - cfg.scoring.performance_window, now,
                                                   cfg.scoring);
            nlohmann::json p = {{"overall", perf.overall}};
            for (auto t : kAllTasks) p[std::string(task_name(t))] = optional_json(perf.per_task[index_of(t)]);
            emit("performance", std::move(p));
        }

        for (auto& s : policy.due(loads, now)) stimuli.push_back(s);
        for (const auto& s : stimuli) {
            emit("stimulus", {{"kind", std::string(stimulus_name(s.kind))},
                              {"task", std::string(task_name(s.interaction.task))},
                              {"interaction", s.interaction.kind},
                              {"ref", s.interaction.ref}});
            agent->notify(s);
        }

        engine.set_speech_mode(speech_modality_gate(loads, cfg.policy.enable_interaction));
        const bool visual_overloaded = cfg.policy.enable_interaction && loads &&
                                       (*loads)[index_of(Component::Visual)] == ChannelLoad::Overloaded;
        // The icon panel belongs to the adaptive interface; without adaptation it stays blank.
        if (cfg.policy.enable_autonomy || cfg.policy.enable_interaction) {
            icons = icon_states(w, visual_overloaded, cfg);
            engine.set_icons(icons.left);
        }
        flush();

        if (options.observer && !options.observer(engine, icons, stimuli)) {
            emit("aborted", nlohmann::json::object());
            result.aborted = true;
            break;
        }
    }
    flush();
    result.final_world = engine.world();
    return result;
}

// ---------------------------------------------------------------------------
// replay

ReplayAgent::ReplayAgent(const TrialLog& log) {
    for (const auto& e : log.events) {
        if (e.kind == "input") {
            inputs_.emplace_back(e.t, input_from_json(e.payload.at("input")));
        } else if (e.kind == "physio") {
            PhysioReading r;
            r.sample.t = e.t;
            const auto& ch = e.payload.at("channels");
            if (ch.size() != kChannelCount) throw ReplayError("physio event with wrong channel count");
            for (std::size_t c = 0; c < kChannelCount; ++c) r.sample.channels[c] = ch[c].get<double>();
            if (e.payload.contains("load")) {
                InducedLoad l{};
                for (std::size_t k = 0; k < kComponentCount; ++k) l[k] = e.payload["load"].at(k).get<double>();
                r.load = l;
            }
            physio_.push_back(r);
        }
    }
}

std::vector<OperatorInput> ReplayAgent::step(const WorldState&, Seconds now) {
    std::vector<OperatorInput> out;
    while (next_input_ < inputs_.size() && inputs_[next_input_].first <= now + kEps) {
        auto in = inputs_[next_input_++].second;
        in.timestamp = now;
        out.push_back(in);
    }
    return out;
}

PhysioReading ReplayAgent::physio(const WorldState&, Seconds now) {
    if (next_physio_ >= physio_.size()) throw ReplayError("log has no physio sample for t=" + std::to_string(now));
    const auto& r = physio_[next_physio_++];
    if (std::abs(r.sample.t - now) > kEps) throw ReplayError("physio sample time mismatch at t=" + std::to_string(now));
    return r;
}

ReplayReport replay(const TrialLog& log) {
    const auto& h = log.header;
    ScenarioConfig cfg;
    AdaptationMode mode;
    std::uint64_t seed;
    try {
        cfg = config_from_json(h.at("config"));
        mode = parse_mode(h.at("mode").get<std::string>());
        seed = h.at("seed").get<std::uint64_t>();
    } catch (const std::exception& e) {
        throw ReplayError(std::string("log header is incomplete: ") + e.what());
    }
    const Models models = load_models(cfg);
    const auto& mh = h.value("models", nlohmann::json::object());
    if (mh.value("estimators", std::string()) != models.estimator_hash ||
        mh.value("predictor", std::string()) != models.predictor_hash)
        throw ReplayError("model files differ from the ones used to record the log");

    ReplayAgent agent(log);
    TrialOptions opt;
    opt.mode = mode;
    opt.seed = seed;
    opt.operator_name = h.value("operator", std::string("synthetic"));
    opt.agent = &agent;
    auto result = run_trial(cfg, models, opt);

    const auto& a = log.events;
    const auto& b = result.log.events;
    const std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) {
        const auto expected = a[i].to_line();
        const auto got = b[i].to_line();
        if (expected != got)
            throw ReplayError("replay diverged at event " + std::to_string(i) + " (t=" + text::format_double(a[i].t) +
                              ", kind=" + a[i].kind + ")\n  logged:   " + expected + "\n  replayed: " + got);
    }
    if (a.size() != b.size())
        throw ReplayError("replay produced " + std::to_string(b.size()) + " events, log has " + std::to_string(a.size()));

    ReplayReport report;
    report.events_checked = n;
    report.final_world = result.final_world;
    const auto stream = score_stream_from_log(log);
    for (const auto* e : log.of_kind("performance")) {
        const auto p = windowed_performance(stream, e->t - cfg.scoring.performance_window, e->t, cfg.scoring);
        report.max_performance_diff =
            std::max(report.max_performance_diff, std::abs(p.overall - e->payload.at("overall").get<double>()));
    }
    return report;
}

// ---------------------------------------------------------------------------
// export

std::vector<std::string> feature_names() {
    std::vector<std::string> names;
    for (std::size_t c = 0; c < kChannelCount; ++c) {
        const std::string ch(channel_name(static_cast<Channel>(c)));
        for (const char* stat : {"mean", "var", "grad", "slope"}) names.push_back(ch + "_" + stat);
    }
    for (auto c : kAllComponents) names.push_back("ctx_" + std::string(component_name(c)));
    return names;
}

std::optional<std::vector<EstimatorRow>> estimator_rows(const TrialLog& log) {
    const ScenarioConfig cfg = config_from_json(log.header.at("config"));
    std::vector<std::pair<PhysioSample, InducedLoad>> physio;
    for (const auto* e : log.of_kind("physio")) {
        if (!e->payload.contains("load")) return std::nullopt;
        PhysioSample s;
        s.t = e->t;
        for (std::size_t c = 0; c < kChannelCount; ++c) s.channels[c] = e->payload.at("channels").at(c).get<double>();
        InducedLoad l{};
        for (std::size_t k = 0; k < kComponentCount; ++k) l[k] = e->payload.at("load").at(k).get<double>();
        physio.emplace_back(s, l);
    }
    if (physio.empty()) throw std::runtime_error("log has no physio stream");

    std::vector<EstimatorRow> rows;
    std::size_t lo = 0;
    for (const auto* e : log.of_kind("epoch")) {
        if (e->t + kEps < cfg.timing.epoch_length) continue;
        while (lo < physio.size() && physio[lo].first.t <= e->t - cfg.timing.epoch_length + kEps) ++lo;
        std::vector<PhysioSample> window;
        ComponentVector mean{};
        for (std::size_t i = lo; i < physio.size() && physio[i].first.t <= e->t + kEps; ++i) {
            window.push_back(physio[i].first);
            for (std::size_t k = 0; k < kComponentCount; ++k) mean[k] += physio[i].second[k];
        }
        if (window.size() < 2) continue;
        TaskSet active;
        for (const auto& name : e->payload.at("active")) {
            const auto t = parse_task(name.get<std::string>());
            if (!t) throw std::runtime_error("unknown task in epoch event");
            active.insert(*t);
        }
        FeatureVector f;
        f.channels = extract_features(window);
        f.context = contextual_features(active, cfg.pipeline.context);
        EstimatorRow row;
        row.t = e->t;
        row.features = f.flat();
        for (std::size_t k = 0; k < kComponentCount; ++k)
            row.labels[k] = std::clamp(mean[k] / static_cast<double>(window.size()), 0.0, 1.0) * kComponentMax[k];
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_estimator_csv(const std::vector<EstimatorRow>& rows, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << "t";
    for (const auto& n : feature_names()) out << ',' << n;
    for (auto c : kAllComponents) out << ",label_" << component_name(c);
    out << '\n';
    for (const auto& r : rows) {
        out << text::format_double(r.t);
        for (double v : r.features) out << ',' << text::format_double(v);
        for (double v : r.labels) out << ',' << text::format_double(v);
        out << '\n';
    }
}

std::vector<EstimatorRow> read_estimator_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
    std::string line;
    std::getline(in, line);
    const std::size_t width = 1 + kFeatureCount + kComponentCount;
    if (split_csv(line).size() != width) throw std::runtime_error("unexpected estimator CSV header");
    std::vector<EstimatorRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = split_csv(line);
        if (cells.size() != width) throw std::runtime_error("ragged estimator CSV row");
        EstimatorRow r;
        r.t = parse_cell(cells[0]);
        for (std::size_t i = 0; i < kFeatureCount; ++i) r.features.push_back(parse_cell(cells[1 + i]));
        for (std::size_t k = 0; k < kComponentCount; ++k) r.labels[k] = parse_cell(cells[1 + kFeatureCount + k]);
        rows.push_back(std::move(r));
    }
    return rows;
}

void write_predictor_csv(const std::vector<TrainingSample>& rows, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    static constexpr std::array<const char*, kPredictorInputs> cols = {"overall", "cognitive", "physical",
                                                                        "visual",  "auditory",  "speech"};
    out << "t";
    for (int lag : {10, 5, 0})
        for (const char* c : cols) out << ',' << c << "_m" << lag;
    out << ",target\n";
    for (const auto& s : rows) {
        out << text::format_double(s.t);
        for (const auto& row : s.input)
            for (double v : row) out << ',' << text::format_double(v);
        out << ',' << text::format_double(s.target) << '\n';
    }
}

std::vector<TrainingSample> read_predictor_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
    std::string line;
    std::getline(in, line);
    const std::size_t width = 2 + kPredictorSteps * kPredictorInputs;
    if (split_csv(line).size() != width) throw std::runtime_error("unexpected predictor CSV header");
    std::vector<TrainingSample> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = split_csv(line);
        if (cells.size() != width) throw std::runtime_error("ragged predictor CSV row");
        TrainingSample s;
        s.t = parse_cell(cells[0]);
        for (std::size_t i = 0; i < kPredictorSteps; ++i)
            for (std::size_t k = 0; k < kPredictorInputs; ++k)
                s.input[i][k] = parse_cell(cells[1 + i * kPredictorInputs + k]);
        s.target = parse_cell(cells.back());
        rows.push_back(s);
    }
    return rows;
}

EstimatorSet train_estimator_set(const std::vector<EstimatorRow>& rows, const EstimatorTrainSpec& spec) {
    std::vector<std::vector<double>> x;
    x.reserve(rows.size());
    for (const auto& r : rows) x.push_back(r.features);
    EstimatorSet set;
    for (auto c : kAllComponents) {
        std::vector<double> y;
        y.reserve(rows.size());
        for (const auto& r : rows) y.push_back(r.labels[index_of(c)]);
        EstimatorTrainSpec s = spec;
        s.seed = derive_seed(spec.seed, Stream::Training, index_of(c));
        set.estimators[index_of(c)] = train_component_estimator(c, x, y, s).model;
    }
    return set;
}

namespace {

std::vector<TrialLog> run_logs(const ScenarioConfig& cfg, const Models& models, const std::vector<std::uint64_t>& seeds,
                               Exec exec) {
    std::vector<TrialLog> logs(seeds.size());
    std::vector<std::string> errors(seeds.size());
    const auto n = static_cast<long>(seeds.size());
    const auto one = [&](long i) {
        try {
            TrialOptions opt;
            opt.seed = seeds[static_cast<std::size_t>(i)];
            logs[static_cast<std::size_t>(i)] = run_trial(cfg, models, opt).log;
        } catch (const std::exception& e) {
            errors[static_cast<std::size_t>(i)] = e.what();
        }
    };
    if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic, 1)
        for (long i = 0; i < n; ++i) one(i);
    } else {
        for (long i = 0; i < n; ++i) one(i);
    }
    for (const auto& e : errors)
        if (!e.empty()) throw std::runtime_error("bootstrap trial failed: " + e);
    return logs;
}

}  // namespace

BootstrapResult bootstrap_models(const ScenarioConfig& cfg, const BootstrapSpec& spec,
                                 const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    BootstrapResult out;
    ScenarioConfig c = cfg;
    c.pipeline.estimator_model.clear();
    c.predictor.model.clear();

    std::vector<EstimatorRow> rows;
    for (const auto& log : run_logs(c, Models{}, spec.seeds, spec.exec)) {
        auto r = estimator_rows(log);
        if (!r) throw std::runtime_error("bootstrap logs carry no induced-load labels");
        rows.insert(rows.end(), r->begin(), r->end());
    }
    out.estimator_rows = rows.size();
    const auto est_path = out_dir / "estimators.txt";
    train_estimator_set(rows, spec.estimator).save(est_path);
    c.pipeline.estimator_model = est_path.string();

    std::vector<TrainingSample> samples;
    for (const auto& log : run_logs(c, load_models(c), spec.seeds, spec.exec)) {
        auto s = build_training_set(log, c.predictor.horizon, c.predictor.target_window);
        samples.insert(samples.end(), s.begin(), s.end());
    }
    out.predictor_rows = samples.size();
    const LstmShape shape{static_cast<int>(kPredictorInputs), c.predictor.hidden, c.predictor.layers, c.predictor.dense};
    const auto pred_path = out_dir / "predictor.txt";
    train_predictor(samples, shape, c.predictor.dropout, spec.predictor).model.save(pred_path);
    c.predictor.model = pred_path.string();
    out.config = c;
    return out;
}

// ---------------------------------------------------------------------------
// summary

std::vector<BlockMetrics> block_metrics(const TrialLog& log) {
    const ScenarioConfig cfg = config_from_json(log.header.at("config"));
    const auto stream = score_stream_from_log(log);
    std::vector<BlockMetrics> out;
    Seconds start = 0.0;
    for (std::size_t i = 0; i < cfg.script.size(); ++i) {
        const auto& b = cfg.script[i];
        BlockMetrics m;
        m.index = i;
        m.label = b.label;
        m.start = start;
        m.end = start + b.duration;
        const auto p = windowed_performance(stream, m.start, m.end, cfg.scoring);
        const auto& r = p.raw;
        m.tracking_rmse = r.tracking_rmse;
        m.fuel_time_in_range = r.fuel_time_in_range;
        const auto mean = [](const std::vector<double>& v) -> std::optional<double> {
            if (v.empty()) return std::nullopt;
            return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        };
        m.sysmon_rt_mean = mean(r.sysmon_reaction_times);
        m.sysmon_success = success_rate(r.sysmon_resolved, r.sysmon_total);
        m.comms_rt_mean = mean(r.comms_reaction_times);
        m.comms_success = success_rate(r.comms_resolved, r.comms_total);
        m.overall = p.overall;
        out.push_back(m);
        start = m.end;
    }
    return out;
}

std::vector<ReportRow> summarize(const std::vector<TrialLog>& logs) {
    using Getter = std::function<std::optional<double>(const BlockMetrics&)>;
    const std::vector<std::pair<std::string, Getter>> metrics = {
        {"tracking_rmse_px", [](const BlockMetrics& m) { return m.tracking_rmse; }},
        {"fuel_time_in_range_pct", [](const BlockMetrics& m) { return std::optional(100.0 * m.fuel_time_in_range); }},
        {"sysmon_reaction_s", [](const BlockMetrics& m) { return m.sysmon_rt_mean; }},
        {"sysmon_success_pct", [](const BlockMetrics& m) { return std::optional(100.0 * m.sysmon_success); }},
        {"comms_reaction_s", [](const BlockMetrics& m) { return m.comms_rt_mean; }},
        {"comms_success_pct", [](const BlockMetrics& m) { return std::optional(100.0 * m.comms_success); }},
        {"overall_performance", [](const BlockMetrics& m) { return std::optional(m.overall); }},
    };
    std::map<std::string, std::vector<BlockMetrics>> by_mode;
    std::vector<std::string> mode_order;
    for (const auto& log : logs) {
        const auto mode = log.header.value("mode", std::string("none"));
        if (!by_mode.contains(mode)) mode_order.push_back(mode);
        auto blocks = block_metrics(log);
        auto& dst = by_mode[mode];
        dst.insert(dst.end(), blocks.begin(), blocks.end());
    }
    std::vector<ReportRow> rows;
    for (const auto& [name, get] : metrics) {
        for (const auto& mode : mode_order) {
            ReportRow row;
            row.metric = name;
            row.mode = mode;
            for (std::size_t l = 0; l < 3; ++l) {
                std::vector<double> v;
                for (const auto& b : by_mode[mode])
                    if (static_cast<std::size_t>(b.label) == l)
                        if (auto x = get(b)) v.push_back(*x);
                if (v.empty()) continue;
                const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
                double ss = 0.0;
                for (double x : v) ss += (x - mean) * (x - mean);
                row.mean[l] = mean;
                row.sd[l] = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
            }
            rows.push_back(row);
        }
    }
    return rows;
}

void write_report_csv(const std::vector<ReportRow>& rows, std::ostream& out) {
    out << "metric,mode,UL_mean,UL_sd,NL_mean,NL_sd,OL_mean,OL_sd\n";
    const auto cell = [](const std::optional<double>& v) {
        if (!v) return std::string();
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6g", *v);
        return std::string(buf);
    };
    for (const auto& r : rows) {
        out << r.metric << ',' << r.mode;
        for (std::size_t l = 0; l < 3; ++l) out << ',' << cell(r.mean[l]) << ',' << cell(r.sd[l]);
        out << '\n';
    }
}

std::vector<BatchItem> run_batch(const ScenarioConfig& cfg, const Models& models,
                                 const std::vector<AdaptationMode>& modes, const std::vector<std::uint64_t>& seeds,
                                 const std::filesystem::path& out_dir, Exec exec) {
    std::vector<BatchItem> items;
    for (auto m : modes)
        for (auto s : seeds) items.push_back({m, s, {}, {}});
    if (!out_dir.empty()) std::filesystem::create_directories(out_dir);

    std::vector<std::string> errors(items.size());
    const auto run_one = [&](std::size_t i) {
        try {
            auto& item = items[i];
            TrialOptions opt;
            opt.mode = item.mode;
            opt.seed = item.seed;
            const auto result = run_trial(cfg, models, opt);
            if (!out_dir.empty()) {
                item.log_path = out_dir / (std::string(mode_name(item.mode)) + "_seed" + std::to_string(item.seed) + ".jsonl");
                result.log.save(item.log_path);
            }
            item.blocks = block_metrics(result.log);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    };
    const auto n = static_cast<long>(items.size());
    if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic, 1)
        for (long i = 0; i < n; ++i) run_one(static_cast<std::size_t>(i));
    } else {
        for (long i = 0; i < n; ++i) run_one(static_cast<std::size_t>(i));
    }
    for (const auto& e : errors)
        if (!e.empty()) throw std::runtime_error("batch trial failed: " + e);
    return items;
}

}  // namespace matb
