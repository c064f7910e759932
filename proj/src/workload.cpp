#include "matb/workload.hpp"

#include "matb/text_format.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace matb {

std::vector<double> FeatureVector::flat() const {
    std::vector<double> v;
    v.reserve(kFeatureCount);
    for (const auto& c : channels) {
        v.push_back(c.mean);
        v.push_back(c.variance);
        v.push_back(c.avg_gradient);
        v.push_back(c.slope);
    }
    v.insert(v.end(), context.begin(), context.end());
    return v;
}

ChannelFeatures channel_statistics(std::span<const double> t, std::span<const double> x) {
    if (t.size() != x.size()) throw std::invalid_argument("channel_statistics: time and value lengths differ");
    const std::size_t n = x.size();
    if (n < 2) throw InsufficientDataError("feature extraction needs at least two samples");
    ChannelFeatures f;
    const double nd = static_cast<double>(n);
    f.mean = std::accumulate(x.begin(), x.end(), 0.0) / nd;
    const double t_mean = std::accumulate(t.begin(), t.end(), 0.0) / nd;
    double sxx = 0.0, stt = 0.0, stx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - f.mean, dt = t[i] - t_mean;
        sxx += dx * dx;
        stt += dt * dt;
        stx += dt * dx;
    }
    f.variance = sxx / nd;
    f.slope = stt > 0.0 ? stx / stt : 0.0;
    double g = 0.0;
    for (std::size_t i = 1; i < n; ++i) {
        const double dt = t[i] - t[i - 1];
        if (!(dt > 0.0)) throw std::invalid_argument("channel_statistics: timestamps must increase");
        g += (x[i] - x[i - 1]) / dt;
    }
    f.avg_gradient = g / static_cast<double>(n - 1);
    return f;
}

std::array<ChannelFeatures, kChannelCount> extract_features(std::span<const PhysioSample> window) {
    if (window.size() < 2) throw InsufficientDataError("feature extraction needs at least two samples");
    std::vector<double> t(window.size()), x(window.size());
    for (std::size_t i = 0; i < window.size(); ++i) t[i] = window[i].t;
    std::array<ChannelFeatures, kChannelCount> out;
    for (std::size_t c = 0; c < kChannelCount; ++c) {
        for (std::size_t i = 0; i < window.size(); ++i) x[i] = window[i].channels[c];
        out[c] = channel_statistics(t, x);
    }
    return out;
}

ComponentVector contextual_features(TaskSet active, const ContextTable& table) {
    if (active.empty()) throw ConfigError("contextual features need a non-empty active task set");
    ComponentVector v{};
    for (auto t : kAllTasks)
        if (active.contains(t))
            for (std::size_t k = 0; k < kComponentCount; ++k) v[k] += table[index_of(t)][k];
    return v;
}

double aggregate_overall(const ComponentVector& components) {
    double s = 0.0;
    for (double c : components) {
        if (!std::isfinite(c)) throw std::invalid_argument("aggregate_overall: non-finite component");
        s += c;
    }
    return std::clamp(s, 0.0, kOverallMax);
}

LoadLabel classify_state(double overall, double theta_low, double theta_high) {
    if (!(theta_low < theta_high)) throw ConfigError("classify_state: theta_low must be below theta_high");
    if (overall < theta_low) return LoadLabel::UL;
    if (overall > theta_high) return LoadLabel::OL;
    return LoadLabel::NL;
}

std::string_view channel_load_name(ChannelLoad l) noexcept {
    switch (l) {
        case ChannelLoad::Unloaded: return "unloaded";
        case ChannelLoad::Loaded: return "loaded";
        case ChannelLoad::Overloaded: return "overloaded";
    }
    return "?";
}

ChannelLoad channel_load_level(double value, double range, double c_loaded, double c_over) {
    if (!(0.0 < c_loaded && c_loaded < c_over && c_over < 1.0))
        throw ConfigError("channel cutoffs must satisfy 0 < loaded < overloaded < 1");
    if (value < c_loaded * range) return ChannelLoad::Unloaded;
    if (value >= c_over * range) return ChannelLoad::Overloaded;
    return ChannelLoad::Loaded;
}

ChannelLoads channel_loads(const WorkloadEstimate& e, const PipelineConfig& cfg) {
    ChannelLoads out{};
    for (std::size_t k = 0; k < kComponentCount; ++k)
        out[k] = channel_load_level(e.components[k], kComponentMax[k], cfg.cutoff_loaded, cfg.cutoff_overloaded);
    return out;
}

// ---------------------------------------------------------------------------
// estimators

double ComponentEstimator::estimate(std::span<const double> features) const {
    if (features.size() != input_mean.size() || static_cast<int>(features.size()) != net.inputs())
        throw ModelError("estimator expects " + std::to_string(net.inputs()) + " features, got " +
                         std::to_string(features.size()));
    std::vector<double> z(features.size());
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = (features[i] - input_mean[i]) / input_scale[i];
    return std::clamp(net.forward(z) * range(), 0.0, range());
}

ComponentVector EstimatorSet::estimate(std::span<const double> features) const {
    ComponentVector v{};
    for (std::size_t k = 0; k < kComponentCount; ++k) v[k] = estimators[k].estimate(features);
    return v;
}

void EstimatorSet::save(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw ModelError("cannot write '" + path.string() + "'");
    out << "matb-estimators 1\n";
    for (const auto& e : estimators) {
        out << "component " << component_name(e.component) << '\n';
        out << "inputs " << e.input_mean.size() << '\n';
        text::write_row(out, "mean", e.input_mean);
        text::write_row(out, "scale", e.input_scale);
        e.net.write(out);
    }
}

EstimatorSet EstimatorSet::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ModelError("cannot open estimator model '" + path.string() + "'");
    text::expect(in, "matb-estimators");
    if (text::read_int(in) != 1) throw ModelError("unsupported estimator model version");
    EstimatorSet set;
    for (std::size_t k = 0; k < kComponentCount; ++k) {
        auto& e = set.estimators[k];
        text::expect(in, "component");
        const auto name = text::read_word(in);
        if (name != component_name(kAllComponents[k])) throw ModelError("estimator components out of order");
        e.component = kAllComponents[k];
        text::expect(in, "inputs");
        const int n = text::read_int(in);
        if (n <= 0 || n > 4096) throw ModelError("implausible estimator input count");
        e.input_mean = text::read_row(in, "mean", static_cast<std::size_t>(n));
        e.input_scale = text::read_row(in, "scale", static_cast<std::size_t>(n));
        e.net = Mlp::read(in);
        if (e.net.inputs() != n) throw ModelError("estimator network does not match its input count");
        for (double s : e.input_scale)
            if (!(s > 0.0)) throw ModelError("estimator input scale must be positive");
    }
    return set;
}

EstimatorTrainResult train_component_estimator(Component component, const std::vector<std::vector<double>>& features,
                                               const std::vector<double>& labels, const EstimatorTrainSpec& spec) {
    if (features.empty()) throw TrainingError("estimator training needs a non-empty dataset");
    if (features.size() != labels.size()) throw TrainingError("feature and label counts differ");
    const std::size_t dim = features.front().size();
    const double range = kComponentMax[index_of(component)];
    for (std::size_t i = 0; i < features.size(); ++i) {
        if (features[i].size() != dim) throw TrainingError("ragged feature rows");
        if (!(labels[i] >= 0.0 && labels[i] <= range)) throw TrainingError("label outside the component range");
    }
    if (spec.epochs < 0 || spec.batch <= 0 || !(spec.learning_rate > 0.0))
        throw TrainingError("invalid estimator training spec");

    const std::size_t n = features.size();
    EstimatorTrainResult result;
    auto& model = result.model;
    model.component = component;
    model.input_mean.assign(dim, 0.0);
    model.input_scale.assign(dim, 0.0);
    for (const auto& row : features)
        for (std::size_t j = 0; j < dim; ++j) model.input_mean[j] += row[j];
    for (auto& m : model.input_mean) m /= static_cast<double>(n);
    for (const auto& row : features)
        for (std::size_t j = 0; j < dim; ++j) {
            const double d = row[j] - model.input_mean[j];
            model.input_scale[j] += d * d;
        }
    for (auto& s : model.input_scale) {
        s = std::sqrt(s / static_cast<double>(n));
        if (!(s > 1e-12)) s = 1.0;
    }

    std::vector<std::vector<double>> z(n, std::vector<double>(dim));
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < dim; ++j) z[i][j] = (features[i][j] - model.input_mean[j]) / model.input_scale[j];
        y[i] = labels[i] / range;
    }

    Rng rng(spec.seed);
    std::vector<int> sizes{static_cast<int>(dim)};
    sizes.insert(sizes.end(), spec.hidden.begin(), spec.hidden.end());
    sizes.push_back(1);
    model.net = Mlp::random(sizes, rng);

    Adam adam;
    adam.lr = spec.learning_rate;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> grad;
    auto& params = model.net.params();
    for (int epoch = 0; epoch < spec.epochs; ++epoch) {
        for (std::size_t i = n; i > 1; --i)
            std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(spec.batch)) {
            const std::size_t end = std::min(n, start + static_cast<std::size_t>(spec.batch));
            const std::size_t m = end - start;
            const double loss = accumulate_gradient(m, params.size(), spec.exec, grad, [&](std::size_t i, auto& g) {
                const std::size_t s = order[start + i];
                return model.net.backward(z[s], y[s], g);
            });
            for (auto& g : grad) g /= static_cast<double>(m);
            adam.step(params, grad);
            epoch_loss += loss;
        }
        epoch_loss /= static_cast<double>(n);
        if (!std::isfinite(epoch_loss))
            throw TrainingError("estimator training diverged at epoch " + std::to_string(epoch));
        result.loss_curve.push_back(epoch_loss);
    }
    return result;
}

// ---------------------------------------------------------------------------
// pipeline

WorkloadPipeline::WorkloadPipeline(const PipelineConfig& cfg, const TimingConfig& timing, const EstimatorSet* models)
    : cfg_(cfg), timing_(timing), models_(models) {}

void WorkloadPipeline::push(const PhysioSample& s) {
    for (double v : s.channels)
        if (!std::isfinite(v)) throw std::invalid_argument("physio sample has a non-finite channel");
    if (!buffer_.empty() && s.t <= buffer_.back().t) throw std::invalid_argument("physio samples must be time-ordered");
    buffer_.push_back(s);
    while (buffer_.size() > 2 && buffer_.front().t < s.t - 2.0 * timing_.epoch_length) buffer_.pop_front();
}

std::vector<PhysioSample> WorkloadPipeline::window(Seconds now) const {
    std::vector<PhysioSample> out;
    const double lo = now - timing_.epoch_length + 1e-9;
    for (const auto& s : buffer_)
        if (s.t > lo && s.t <= now + 1e-9) out.push_back(s);
    return out;
}

FeatureVector WorkloadPipeline::features(Seconds now, TaskSet active) const {
    const auto w = window(now);
    FeatureVector f;
    f.channels = extract_features(w);
    f.context = contextual_features(active, cfg_.context);
    return f;
}

std::optional<WorkloadEstimate> WorkloadPipeline::estimate_tick(Seconds now, TaskSet active) {
    if (!models_ || now + 1e-9 < timing_.epoch_length) return std::nullopt;
    const auto w = window(now);
    if (w.size() < 2) return std::nullopt;
    FeatureVector f;
    f.channels = extract_features(w);
    f.context = contextual_features(active, cfg_.context);
    WorkloadEstimate e;
    e.t = now;
    e.components = models_->estimate(f.flat());
    e.overall = aggregate_overall(e.components);
    e.state = classify_state(e.overall, cfg_.theta_low, cfg_.theta_high);
    history_.push_back(e);
    return e;
}

}  // namespace matb
