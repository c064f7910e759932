#pragma once

#include "matb/config.hpp"
#include "matb/event_log.hpp"
#include "matb/operator.hpp"
#include "matb/parallel.hpp"
#include "matb/policy.hpp"
#include "matb/predictor.hpp"
#include "matb/sim_engine.hpp"
#include "matb/workload.hpp"

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace matb {

inline constexpr std::string_view kVersion = "0.1.0";

struct Models {
    std::shared_ptr<const EstimatorSet> estimators;
    std::shared_ptr<const PredictorModel> predictor;
    std::string estimator_hash;  // FNV-1a of the model file, empty when absent
    std::string predictor_hash;
};

// Loads the model files named by the config; empty paths leave slots empty.
Models load_models(const ScenarioConfig& cfg);
std::string file_hash(const std::filesystem::path& path);

ScenarioConfig with_mode(ScenarioConfig cfg, AdaptationMode mode);

// Per-tick observer for live sessions: called after every tick with the
// engine, the current icons and the stimuli delivered on that tick. Returning
// false aborts the trial.
using TickObserver = std::function<bool(const SimEngine&, const IconState&, const std::vector<Stimulus>&)>;

struct TrialOptions {
    AdaptationMode mode = AdaptationMode::None;
    std::uint64_t seed = 1;
    std::string operator_name = "synthetic";
    OperatorAgent* agent = nullptr;  // null: synthetic operator
    TickObserver observer;
};

struct TrialResult {
    TrialLog log;
    WorldState final_world;
    bool aborted = false;
};

TrialResult run_trial(const ScenarioConfig& cfg, const Models& models, const TrialOptions& options);

class ReplayError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ReplayReport {
    std::size_t events_checked = 0;
    WorldState final_world;
    double max_performance_diff = 0.0;  // recomputed vs logged performance samples
};

// Re-simulates from the header and the logged inputs and physio samples;
// throws ReplayError naming the first event that differs.
ReplayReport replay(const TrialLog& log);

// Feeds logged inputs and physio samples back into a trial.
class ReplayAgent final : public OperatorAgent {
public:
    explicit ReplayAgent(const TrialLog& log);
    std::vector<OperatorInput> step(const WorldState& w, Seconds now) override;
    PhysioReading physio(const WorldState& w, Seconds now) override;

private:
    std::vector<std::pair<Seconds, OperatorInput>> inputs_;
    std::vector<PhysioReading> physio_;
    std::size_t next_input_ = 0;
    std::size_t next_physio_ = 0;
};

struct EstimatorRow {
    Seconds t = 0.0;
    std::vector<double> features;  // kFeatureCount entries
    ComponentVector labels{};      // in component units
};

// Rows at every epoch event from t >= epoch length. Returns nullopt when the
// log carries no induced-load ground truth (live sessions).
std::optional<std::vector<EstimatorRow>> estimator_rows(const TrialLog& log);

std::vector<std::string> feature_names();
void write_estimator_csv(const std::vector<EstimatorRow>& rows, const std::filesystem::path& path);
std::vector<EstimatorRow> read_estimator_csv(const std::filesystem::path& path);
void write_predictor_csv(const std::vector<TrainingSample>& rows, const std::filesystem::path& path);
std::vector<TrainingSample> read_predictor_csv(const std::filesystem::path& path);

// One estimator per component, trained on the pooled rows.
EstimatorSet train_estimator_set(const std::vector<EstimatorRow>& rows, const EstimatorTrainSpec& spec);

struct BootstrapSpec {
    std::vector<std::uint64_t> seeds{101, 102, 103, 104};
    EstimatorTrainSpec estimator;
    PredictorTrainSpec predictor;
    Exec exec = Exec::Parallel;
};

struct BootstrapResult {
    ScenarioConfig config;  // cfg with both model paths filled in
    std::size_t estimator_rows = 0;
    std::size_t predictor_rows = 0;
};

// Two passes of no-adaptation trials: the first exports estimator rows and
// trains the estimators; the second, run with those estimators, yields the
// predictor set. Model files are written to out_dir.
BootstrapResult bootstrap_models(const ScenarioConfig& cfg, const BootstrapSpec& spec,
                                 const std::filesystem::path& out_dir);

struct BlockMetrics {
    std::size_t index = 0;
    LoadLabel label = LoadLabel::NL;
    Seconds start = 0.0;
    Seconds end = 0.0;
    std::optional<double> tracking_rmse;
    double fuel_time_in_range = 1.0;
    std::optional<double> sysmon_rt_mean;
    double sysmon_success = 1.0;
    std::optional<double> comms_rt_mean;
    double comms_success = 1.0;
    double overall = 1.0;
};

std::vector<BlockMetrics> block_metrics(const TrialLog& log);

struct ReportRow {
    std::string metric;
    std::string mode;
    std::array<std::optional<double>, 3> mean{};  // UL, NL, OL
    std::array<std::optional<double>, 3> sd{};
};

// One row per (metric, mode); statistics are over blocks of each condition.
std::vector<ReportRow> summarize(const std::vector<TrialLog>& logs);
void write_report_csv(const std::vector<ReportRow>& rows, std::ostream& out);

struct BatchItem {
    AdaptationMode mode = AdaptationMode::None;
    std::uint64_t seed = 1;
    std::filesystem::path log_path;
    std::vector<BlockMetrics> blocks;
};

// Runs every (mode, seed) pair; trials run concurrently when exec is Parallel.
// Logs are written to out_dir when it is non-empty.
std::vector<BatchItem> run_batch(const ScenarioConfig& cfg, const Models& models,
                                 const std::vector<AdaptationMode>& modes, const std::vector<std::uint64_t>& seeds,
                                 const std::filesystem::path& out_dir, Exec exec);

// The log directory: MATB_LOG_DIR when set, otherwise the configured one.
std::filesystem::path log_directory(const ScenarioConfig& cfg);

}  // namespace matb
