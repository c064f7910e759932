#pragma once

#include "matb/config.hpp"
#include "matb/parallel.hpp"
#include "matb/random.hpp"
#include "matb/workload.hpp"

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace matb {

struct TrialLog;

inline constexpr std::size_t kPredictorSteps = 3;
inline constexpr std::size_t kPredictorInputs = 6;

// overall, cognitive, physical, visual, auditory, speech (raw workload units).
using PredictorRow = std::array<double, kPredictorInputs>;
using PredictorInput = std::array<PredictorRow, kPredictorSteps>;  // oldest first

// Maxima used to scale each input column before the first layer.
inline constexpr PredictorRow kPredictorInputScale = {kOverallMax, 22.0, 12.0, 20.0, 4.0, 4.0};

PredictorRow predictor_row(const WorkloadEstimate& e);

struct TrainingSample {
    Seconds t = 0.0;
    PredictorInput input{};
    double target = 0.0;
};

struct LstmShape {
    int inputs = static_cast<int>(kPredictorInputs);
    int hidden = 16;
    int layers = 3;
    int dense = 16;

    friend bool operator==(const LstmShape&, const LstmShape&) = default;
};

// Per-sample recurrent dropout masks: one vector of `hidden` entries per layer,
// each 0 or 1 / (1 - p), applied to h(t-1) and held fixed across time steps.
using DropoutMasks = std::vector<std::vector<double>>;

struct ParamBlock {
    std::string name;
    std::size_t offset = 0;
    std::size_t size = 0;

    friend bool operator==(const ParamBlock&, const ParamBlock&) = default;
};

/// Stacked LSTM (gate order i, f, g, o) -> dense ReLU -> scalar output.
class PredictorModel {
public:
    PredictorModel() : PredictorModel(LstmShape{}, 0.8) {}
    // All parameters zero.
    PredictorModel(LstmShape shape, double dropout);
    static PredictorModel random(LstmShape shape, double dropout, Rng& rng);

    const LstmShape& shape() const noexcept { return shape_; }
    double dropout() const noexcept { return dropout_; }
    std::vector<double>& params() noexcept { return params_; }
    const std::vector<double>& params() const noexcept { return params_; }
    const std::vector<ParamBlock>& blocks() const noexcept { return blocks_; }

    DropoutMasks sample_masks(Rng& rng) const;

    // Inference when `masks` is null (no dropout); training mode otherwise.
    double forward(const PredictorInput& input, const DropoutMasks* masks = nullptr) const;

    // Consumer-facing prediction, clamped to [0, 1].
    double predict(const PredictorInput& input) const;

    // Adds d(y - target)^2 / dparams into `grad` (sized like params()).
    // Returns (y - target)^2.
    double backward(const PredictorInput& input, double target, std::vector<double>& grad,
                    const DropoutMasks* masks = nullptr) const;

    void save(const std::filesystem::path& path) const;
    static PredictorModel load(const std::filesystem::path& path);  // throws ModelError

    friend bool operator==(const PredictorModel&, const PredictorModel&) = default;

private:
    double run(const PredictorInput& input, const DropoutMasks* masks, std::vector<double>* grad, double target) const;

    LstmShape shape_;
    double dropout_ = 0.8;
    std::vector<double> params_;
    std::vector<ParamBlock> blocks_;
};

struct PredictorTrainSpec {
    int epochs = 60;
    int batch = 32;
    double learning_rate = 1e-3;
    std::uint64_t seed = 1;
    Exec exec = Exec::Parallel;
};

struct PredictorTrainResult {
    PredictorModel model;
    std::vector<double> loss_curve;  // mean training loss per epoch (dropout active)
};

// Adam on mean squared error with recurrent dropout. Throws TrainingError for
// an empty set, a non-positive learning rate, or a non-finite loss.
PredictorTrainResult train_predictor(const std::vector<TrainingSample>& samples, LstmShape shape, double dropout,
                                     const PredictorTrainSpec& spec);

double mean_squared_error(const PredictorModel& model, const std::vector<TrainingSample>& samples);

struct GradientCheckResult {
    double max_relative_error = 0.0;
    std::vector<std::pair<std::string, double>> per_block;  // relative error per parameter block
};

// Central differences on every parameter, dropout off. Per-block error is
// ||analytic - numeric|| / (||analytic|| + ||numeric||), 0 when both vanish.
GradientCheckResult gradient_check(const PredictorModel& model, const TrainingSample& sample, double eps = 1e-5);

// For each estimate time t with estimates at t-10, t-5, t and t + horizon +
// window/2 inside the trial: input = those three estimates, target =
// windowed performance over (t + horizon - window/2, t + horizon + window/2].
std::vector<TrainingSample> build_training_set(const TrialLog& log, Seconds horizon = 60.0,
                                               Seconds target_window = 30.0);

}  // namespace matb
