#include "matb/runner.hpp"

#ifdef MATB_WITH_GATEWAY
#include "matb/gateway.hpp"
#endif

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>
#include <regex>

namespace {

using namespace matb;

ScenarioConfig base_config(const std::string& path, const std::string& preset) {
    ScenarioConfig cfg = path.empty() ? ScenarioConfig{} : load_config(path);
    if (!preset.empty()) {
        auto p = operator_preset(preset);
        p.seed = cfg.operator_profile.seed;
        cfg.operator_profile = p;
    }
    return cfg;
}

std::vector<std::filesystem::path> expand_glob(const std::string& pattern) {
    const std::filesystem::path p(pattern);
    const auto dir = p.has_parent_path() ? p.parent_path() : std::filesystem::path(".");
    std::string rx;
    for (char c : p.filename().string()) {
        if (c == '*') rx += ".*";
        else if (c == '?') rx += '.';
        else if (std::string_view(".+()[]{}^$|\\").find(c) != std::string_view::npos) (rx += '\\') += c;
        else rx += c;
    }
    const std::regex re(rx);
    std::vector<std::filesystem::path> out;
    if (std::filesystem::is_directory(dir))
        for (const auto& e : std::filesystem::directory_iterator(dir))
            if (e.is_regular_file() && std::regex_match(e.path().filename().string(), re)) out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<AdaptationMode> parse_modes(const std::vector<std::string>& names) {
    std::vector<AdaptationMode> out;
    for (const auto& n : names) out.push_back(parse_mode(n));
    return out;
}

void print_blocks(const TrialLog& log) {
    for (const auto& b : block_metrics(log)) {
        std::printf("  block %zu %s  overall %.3f  sysmon %.0f%%  comms %.0f%%  fuel %.0f%%\n", b.index,
                    std::string(label_name(b.label)).c_str(), b.overall, 100 * b.sysmon_success,
                    100 * b.comms_success, 100 * b.fuel_time_in_range);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adaptive multi-task battery simulator"};
    app.require_subcommand(1);

    std::string config_path, preset, mode_str = "none", operator_kind = "synthetic", out;
    std::uint64_t seed = 1;
    bool console = false;
    int port = 0;
    auto* run = app.add_subcommand("run", "Run one trial and write its log");
    run->add_option("--config", config_path, "Scenario config (JSON)");
    run->add_option("--mode", mode_str, "none | autonomy | interaction | both");
    run->add_option("--seed", seed, "Trial seed");
    run->add_option("--operator", preset, "Synthetic operator preset (nominal, slow, deterministic-zero-noise)");
    run->add_flag("--console", console, "Serve a live console session instead of the synthetic operator");
    run->add_option("--port", port, "Console listening port (default from config)");
    run->add_option("--out", out, "Log path (default: <log dir>/<mode>_seed<seed>.jsonl)");

    std::string log_path;
    auto* rep = app.add_subcommand("replay", "Re-simulate a log and check it event by event");
    rep->add_option("--log", log_path, "Trial log")->required();

    std::string out_dir;
    auto* exp = app.add_subcommand("export", "Export estimator and predictor datasets from a log");
    exp->add_option("--log", log_path, "Trial log")->required();
    exp->add_option("--out", out_dir, "Output directory")->required();

    std::string glob_pattern;
    auto* sum = app.add_subcommand("summarize", "Per mode and condition report over a set of logs");
    sum->add_option("--glob", glob_pattern, "Log file pattern, e.g. logs/*.jsonl")->required();
    sum->add_option("--out", out, "Report CSV (default: stdout)");

    std::vector<std::string> data;
    int epochs = 0;
    std::uint64_t train_seed = 1;
    auto* te = app.add_subcommand("train-estimators", "Train the component estimators from estimator CSVs");
    te->add_option("--data", data, "Estimator CSV files")->required();
    te->add_option("--out", out, "Model file")->required();
    te->add_option("--epochs", epochs, "Training epochs");
    te->add_option("--seed", train_seed, "Training seed");

    auto* tp = app.add_subcommand("train-predictor", "Train the performance predictor from predictor CSVs");
    tp->add_option("--data", data, "Predictor CSV files")->required();
    tp->add_option("--out", out, "Model file")->required();
    tp->add_option("--config", config_path, "Scenario config for the network shape");
    tp->add_option("--epochs", epochs, "Training epochs");
    tp->add_option("--seed", train_seed, "Training seed");

    std::vector<std::uint64_t> seeds;
    auto* boot = app.add_subcommand("bootstrap", "Train estimators and predictor from synthetic no-adaptation trials");
    boot->add_option("--config", config_path, "Scenario config (JSON)");
    boot->add_option("--seeds", seeds, "Trial seeds");
    boot->add_option("--out", out_dir, "Model directory")->required();

    std::vector<std::string> modes{"none", "autonomy", "interaction", "both"};
    auto* batch = app.add_subcommand("batch", "Run a mode x seed matrix and write logs plus a report");
    batch->add_option("--config", config_path, "Scenario config (JSON)");
    batch->add_option("--modes", modes, "Adaptation modes");
    batch->add_option("--seeds", seeds, "Trial seeds")->required();
    batch->add_option("--out", out_dir, "Output directory (default: log dir)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            ScenarioConfig cfg = base_config(config_path, preset);
            const auto mode = parse_mode(mode_str);
            const Models models = load_models(cfg);
            TrialResult result;
            if (console) {
#ifdef MATB_WITH_GATEWAY
                ConsoleOptions opt;
                opt.port = port > 0 ? port : cfg.console.port;
                opt.mode = mode;
                opt.seed = seed;
                result = run_console_trial(cfg, models, opt, std::cerr);
#else
                throw std::runtime_error("built without the console gateway");
#endif
            } else {
                TrialOptions opt;
                opt.mode = mode;
                opt.seed = seed;
                opt.operator_name = operator_kind + ":" + cfg.operator_profile.preset;
                result = run_trial(cfg, models, opt);
            }
            const std::filesystem::path path =
                out.empty() ? log_directory(cfg) / (mode_str + "_seed" + std::to_string(seed) + ".jsonl")
                            : std::filesystem::path(out);
            result.log.save(path);
            std::printf("wrote %s (%zu events%s)\n", path.string().c_str(), result.log.events.size(),
                        result.aborted ? ", aborted" : "");
            print_blocks(result.log);
        } else if (*rep) {
            const auto report = replay(TrialLog::load(log_path));
            std::printf("replay ok: %zu events match, performance recomputation max diff %.3g\n",
                        report.events_checked, report.max_performance_diff);
        } else if (*exp) {
            const auto log = TrialLog::load(log_path);
            std::filesystem::create_directories(out_dir);
            const std::filesystem::path dir(out_dir);
            if (auto rows = estimator_rows(log)) {
                write_estimator_csv(*rows, dir / "estimator.csv");
                std::printf("estimator rows: %zu\n", rows->size());
            } else {
                std::printf("notice: log has no induced-load ground truth; estimator export skipped\n");
            }
            const ScenarioConfig cfg = config_from_json(log.header.at("config"));
            const auto samples = build_training_set(log, cfg.predictor.horizon, cfg.predictor.target_window);
            write_predictor_csv(samples, dir / "predictor.csv");
            std::printf("predictor rows: %zu\n", samples.size());
        } else if (*sum) {
            std::vector<TrialLog> logs;
            for (const auto& p : expand_glob(glob_pattern)) logs.push_back(TrialLog::load(p));
            if (logs.empty()) throw std::runtime_error("no logs match '" + glob_pattern + "'");
            const auto rows = summarize(logs);
            if (out.empty()) {
                write_report_csv(rows, std::cout);
            } else {
                std::ofstream f(out);
                write_report_csv(rows, f);
                std::printf("wrote %s from %zu logs\n", out.c_str(), logs.size());
            }
        } else if (*te) {
            std::vector<EstimatorRow> rows;
            for (const auto& d : data) {
                auto r = read_estimator_csv(d);
                rows.insert(rows.end(), r.begin(), r.end());
            }
            EstimatorTrainSpec spec;
            if (epochs > 0) spec.epochs = epochs;
            spec.seed = train_seed;
            train_estimator_set(rows, spec).save(out);
            std::printf("trained estimators on %zu rows -> %s\n", rows.size(), out.c_str());
        } else if (*tp) {
            const ScenarioConfig cfg = base_config(config_path, "");
            std::vector<TrainingSample> samples;
            for (const auto& d : data) {
                auto s = read_predictor_csv(d);
                samples.insert(samples.end(), s.begin(), s.end());
            }
            PredictorTrainSpec spec;
            spec.epochs = epochs > 0 ? epochs : cfg.predictor.epochs;
            spec.batch = cfg.predictor.batch;
            spec.learning_rate = cfg.predictor.learning_rate;
            spec.seed = train_seed;
            const LstmShape shape{static_cast<int>(kPredictorInputs), cfg.predictor.hidden, cfg.predictor.layers,
                                  cfg.predictor.dense};
            const auto r = train_predictor(samples, shape, cfg.predictor.dropout, spec);
            r.model.save(out);
            std::printf("trained predictor on %zu rows, final loss %.5f -> %s\n", samples.size(),
                        r.loss_curve.empty() ? 0.0 : r.loss_curve.back(), out.c_str());
        } else if (*boot) {
            BootstrapSpec spec;
            if (!seeds.empty()) spec.seeds = seeds;
            const auto t0 = std::chrono::steady_clock::now();
            const auto r = bootstrap_models(base_config(config_path, ""), spec, out_dir);
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            const auto cfg_path = std::filesystem::path(out_dir) / "config.json";
            save_config(r.config, cfg_path);
            std::printf("estimators: %zu rows -> %s\npredictor: %zu rows -> %s\nconfig -> %s\n(%.1f s)\n",
                        r.estimator_rows, r.config.pipeline.estimator_model.c_str(), r.predictor_rows,
                        r.config.predictor.model.c_str(), cfg_path.string().c_str(), secs);
        } else if (*batch) {
            const ScenarioConfig cfg = base_config(config_path, "");
            const auto dir = out_dir.empty() ? log_directory(cfg) : std::filesystem::path(out_dir);
            const auto items = run_batch(cfg, load_models(cfg), parse_modes(modes), seeds, dir, Exec::Parallel);
            std::vector<TrialLog> logs;
            for (const auto& it : items) logs.push_back(TrialLog::load(it.log_path));
            std::ofstream f(dir / "report.csv");
            write_report_csv(summarize(logs), f);
            for (const auto& it : items) {
                double ol = 0.0;
                int n = 0;
                for (const auto& b : it.blocks)
                    if (b.label == LoadLabel::OL) ol += b.overall, ++n;
                std::printf("%-12s seed %-6llu OL overall %.3f\n", std::string(mode_name(it.mode)).c_str(),
                            static_cast<unsigned long long>(it.seed), n ? ol / n : 0.0);
            }
            std::printf("wrote %zu logs and report.csv to %s\n", items.size(), dir.string().c_str());
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
