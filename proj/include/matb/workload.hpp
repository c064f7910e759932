#pragma once

#include "matb/config.hpp"
#include "matb/core.hpp"
#include "matb/mlp.hpp"
#include "matb/parallel.hpp"

#include <array>
#include <deque>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace matb {

struct PhysioSample {
    Seconds t = 0.0;
    std::array<double, kChannelCount> channels{};

    double operator[](Channel c) const noexcept { return channels[static_cast<std::size_t>(c)]; }
};

class InsufficientDataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ChannelFeatures {
    double mean = 0.0;
    double variance = 0.0;      // population
    double avg_gradient = 0.0;  // mean of successive (dx / dt)
    double slope = 0.0;         // least-squares fit against time
};

inline constexpr std::size_t kPhysioFeatureCount = kChannelCount * 4;
inline constexpr std::size_t kFeatureCount = kPhysioFeatureCount + kComponentCount;

using ComponentVector = std::array<double, kComponentCount>;

struct FeatureVector {
    std::array<ChannelFeatures, kChannelCount> channels{};
    ComponentVector context{};

    // Channel-major (mean, variance, gradient, slope) then the context sums.
    std::vector<double> flat() const;
};

// Throws InsufficientDataError for fewer than two samples.
ChannelFeatures channel_statistics(std::span<const double> t, std::span<const double> x);
std::array<ChannelFeatures, kChannelCount> extract_features(std::span<const PhysioSample> window);

// Element-wise sum of the table rows of the active tasks. Throws ConfigError
// for an empty set.
ComponentVector contextual_features(TaskSet active, const ContextTable& table);

struct WorkloadEstimate {
    Seconds t = 0.0;
    ComponentVector components{};
    double overall = 0.0;
    LoadLabel state = LoadLabel::NL;

    double operator[](Component c) const noexcept { return components[index_of(c)]; }
};

// Sum of the five components, clamped to [0, 62].
double aggregate_overall(const ComponentVector& components);
LoadLabel classify_state(double overall, double theta_low, double theta_high);

enum class ChannelLoad : std::uint8_t { Unloaded, Loaded, Overloaded };
std::string_view channel_load_name(ChannelLoad l) noexcept;

// Half-open bands: [0, c_loaded) unloaded, [c_loaded, c_over) loaded, the
// rest overloaded (cutoffs are fractions of `range`).
ChannelLoad channel_load_level(double value, double range, double c_loaded, double c_over);

using ChannelLoads = std::array<ChannelLoad, kComponentCount>;
ChannelLoads channel_loads(const WorkloadEstimate& e, const PipelineConfig& cfg);

/// One network per workload component; inputs are standardized with the
/// training-set statistics and the output is scaled by the component range.
struct ComponentEstimator {
    Component component = Component::Cognitive;
    std::vector<double> input_mean;
    std::vector<double> input_scale;
    Mlp net;

    double range() const noexcept { return kComponentMax[index_of(component)]; }
    // Clamped to [0, range]. Throws ModelError on a dimension mismatch.
    double estimate(std::span<const double> features) const;
};

struct EstimatorSet {
    std::array<ComponentEstimator, kComponentCount> estimators;

    ComponentVector estimate(std::span<const double> features) const;
    void save(const std::filesystem::path& path) const;
    static EstimatorSet load(const std::filesystem::path& path);  // throws ModelError
};

struct EstimatorTrainSpec {
    std::vector<int> hidden{32, 32};
    int epochs = 40;
    int batch = 64;
    double learning_rate = 1e-3;
    std::uint64_t seed = 1;
    Exec exec = Exec::Parallel;
};

struct EstimatorTrainResult {
    ComponentEstimator model;
    std::vector<double> loss_curve;  // mean squared error on range-normalized labels, per epoch
};

// Throws TrainingError for an empty dataset, ragged rows, or labels outside
// the component range.
EstimatorTrainResult train_component_estimator(Component component, const std::vector<std::vector<double>>& features,
                                               const std::vector<double>& labels, const EstimatorTrainSpec& spec);

/// Rolling physio buffer plus estimate history (the Perceive stage).
class WorkloadPipeline {
public:
    WorkloadPipeline(const PipelineConfig& cfg, const TimingConfig& timing, const EstimatorSet* models);

    void push(const PhysioSample& s);

    // Samples with t in (now - epoch, now].
    std::vector<PhysioSample> window(Seconds now) const;

    FeatureVector features(Seconds now, TaskSet active) const;

    // Emits an estimate when `now` is past the first full epoch and models are
    // present; otherwise nothing.
    std::optional<WorkloadEstimate> estimate_tick(Seconds now, TaskSet active);

    const std::vector<WorkloadEstimate>& history() const noexcept { return history_; }

private:
    PipelineConfig cfg_;
    TimingConfig timing_;
    const EstimatorSet* models_;
    std::deque<PhysioSample> buffer_;
    std::vector<WorkloadEstimate> history_;
};

}  // namespace matb
