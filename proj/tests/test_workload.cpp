#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "matb/workload.hpp"
#include "oracles.hpp"

#include <cmath>
#include <filesystem>

using namespace matb;

namespace {

EstimatorSet random_estimators(std::uint64_t seed) {
    Rng rng(seed);
    EstimatorSet s;
    for (std::size_t k = 0; k < kComponentCount; ++k) {
        auto& e = s.estimators[k];
        e.component = kAllComponents[k];
        e.input_mean.assign(kFeatureCount, 0.0);
        e.input_scale.assign(kFeatureCount, 50.0);
        e.net = Mlp::random({static_cast<int>(kFeatureCount), 8, 1}, rng);
    }
    return s;
}

PhysioSample sample_at(double t, Rng& rng) {
    PhysioSample s;
    s.t = t;
    for (auto& c : s.channels) c = 50.0 + 30.0 * std::sin(0.1 * t + rng.uniform()) + rng.normal();
    return s;
}

}  // namespace

TEST_CASE("channel statistics match a brute-force oracle") {
    Rng rng(17);
    for (int trial = 0; trial < 500; ++trial) {
        const int n = rng.uniform_int(2, 60);
        std::vector<double> t(n), x(n);
        double now = rng.uniform(0.0, 3000.0);
        for (int i = 0; i < n; ++i) {
            now += rng.uniform(0.2, 2.0);
            t[i] = now;
            x[i] = rng.normal(rng.uniform(-50.0, 150.0), rng.uniform(0.1, 40.0));
        }
        const auto f = channel_statistics(t, x);
        const auto o = oracle::channel_stats(t, x);
        CHECK(oracle::rel_close(f.mean, o.mean));
        CHECK(oracle::rel_close(f.variance, o.variance));
        CHECK(oracle::rel_close(f.avg_gradient, o.avg_gradient));
        CHECK(oracle::rel_close(f.slope, o.slope));
    }
}

TEST_CASE("channel statistics on known series") {
    const std::vector<double> t{0, 1, 2, 3}, x{1, 3, 5, 7};
    const auto f = channel_statistics(t, x);
    CHECK(f.mean == 4.0);
    CHECK(f.variance == 5.0);
    CHECK(f.avg_gradient == 2.0);
    CHECK(f.slope == 2.0);
    const std::vector<double> flat{2, 2, 2, 2};
    const auto g = channel_statistics(t, flat);
    CHECK(g.variance == 0.0);
    CHECK(g.slope == 0.0);
    CHECK_THROWS_AS(channel_statistics(std::vector<double>{1}, std::vector<double>{1}), InsufficientDataError);
    CHECK_THROWS_AS(channel_statistics(std::vector<double>{1, 1}, std::vector<double>{1, 2}), std::invalid_argument);
}

TEST_CASE("feature vector layout") {
    Rng rng(3);
    std::vector<PhysioSample> w;
    for (int i = 1; i <= 30; ++i) w.push_back(sample_at(i, rng));
    FeatureVector f;
    f.channels = extract_features(w);
    f.context = contextual_features(TaskSet::all(), default_context_table());
    const auto flat = f.flat();
    REQUIRE(flat.size() == 37);
    for (std::size_t c = 0; c < kChannelCount; ++c) {
        std::vector<double> t, x;
        for (const auto& s : w) t.push_back(s.t), x.push_back(s.channels[c]);
        const auto o = oracle::channel_stats(t, x);
        CHECK(oracle::rel_close(flat[4 * c + 0], o.mean));
        CHECK(oracle::rel_close(flat[4 * c + 1], o.variance));
        CHECK(oracle::rel_close(flat[4 * c + 2], o.avg_gradient));
        CHECK(oracle::rel_close(flat[4 * c + 3], o.slope));
    }
    CHECK_THROWS_AS(extract_features(std::span<const PhysioSample>(w.data(), 1)), InsufficientDataError);
}

TEST_CASE("context features sum the active rows") {
    const auto table = default_context_table();
    TaskSet s;
    s.insert(Task::Tracking);
    s.insert(Task::Communications);
    const auto v = contextual_features(s, table);
    for (std::size_t k = 0; k < kComponentCount; ++k) CHECK(v[k] == table[0][k] + table[3][k]);
    CHECK_THROWS_AS(contextual_features(TaskSet{}, table), ConfigError);
}

TEST_CASE("aggregation and classification") {
    CHECK(aggregate_overall({1, 2, 3, 4, 5}) == 15.0);
    CHECK(aggregate_overall({22, 12, 20, 4, 4}) == 62.0);
    CHECK(aggregate_overall({30, 30, 30, 4, 4}) == 62.0);
    CHECK_THROWS(aggregate_overall({NAN, 0, 0, 0, 0}));
    CHECK(classify_state(10, 19.21, 36.345) == LoadLabel::UL);
    CHECK(classify_state(19.21, 19.21, 36.345) == LoadLabel::NL);
    CHECK(classify_state(36.345, 19.21, 36.345) == LoadLabel::NL);
    CHECK(classify_state(36.4, 19.21, 36.345) == LoadLabel::OL);
    CHECK_THROWS_AS(classify_state(10, 30, 20), ConfigError);
}

TEST_CASE("channel load bands are half-open") {
    CHECK(channel_load_level(0.0, 20, 0.3, 0.7) == ChannelLoad::Unloaded);
    CHECK(channel_load_level(5.99, 20, 0.3, 0.7) == ChannelLoad::Unloaded);
    CHECK(channel_load_level(6.0, 20, 0.3, 0.7) == ChannelLoad::Loaded);
    CHECK(channel_load_level(13.99, 20, 0.3, 0.7) == ChannelLoad::Loaded);
    CHECK(channel_load_level(14.0, 20, 0.3, 0.7) == ChannelLoad::Overloaded);
    CHECK_THROWS_AS(channel_load_level(1, 20, 0.7, 0.3), ConfigError);
}

TEST_CASE("pipeline cadence: one 450 s block yields 85 estimates from t = 30") {
    const auto models = random_estimators(4);
    WorkloadPipeline p(PipelineConfig{}, TimingConfig{}, &models);
    Rng rng(5);
    std::vector<double> times;
    for (int t = 1; t <= 450; ++t) {
        p.push(sample_at(t, rng));
        if (t % 5 == 0)
            if (auto e = p.estimate_tick(t, TaskSet::all())) times.push_back(e->t);
    }
    REQUIRE(times.size() == 85);
    CHECK(times.front() == 30.0);
    CHECK(times.back() == 450.0);
    for (std::size_t i = 1; i < times.size(); ++i) CHECK(times[i] - times[i - 1] == 5.0);
    for (const auto& e : p.history()) {
        for (std::size_t k = 0; k < kComponentCount; ++k) {
            CHECK(e.components[k] >= 0.0);
            CHECK(e.components[k] <= kComponentMax[k]);
        }
        CHECK(e.overall >= 0.0);
        CHECK(e.overall <= 62.0);
    }
}

TEST_CASE("pipeline without models stays silent") {
    WorkloadPipeline p(PipelineConfig{}, TimingConfig{}, nullptr);
    Rng rng(5);
    for (int t = 1; t <= 60; ++t) p.push(sample_at(t, rng));
    CHECK_FALSE(p.estimate_tick(60, TaskSet::all()).has_value());
    CHECK(p.window(60).size() == 30);
    CHECK(p.window(60).front().t == 31.0);
}

TEST_CASE("pipeline rejects bad samples") {
    WorkloadPipeline p(PipelineConfig{}, TimingConfig{}, nullptr);
    PhysioSample s;
    s.t = 1;
    p.push(s);
    CHECK_THROWS(p.push(s));
    s.t = 2;
    s.channels[3] = INFINITY;
    CHECK_THROWS(p.push(s));
}

TEST_CASE("estimator learns a smooth function and round trips") {
    Rng rng(8);
    std::vector<std::vector<double>> x;
    std::vector<double> y;
    for (int i = 0; i < 1500; ++i) {
        // Features share one latent driver plus noise, like physio channels under load.
        const double latent = rng.uniform(-1.0, 1.0);
        std::vector<double> row(kFeatureCount);
        for (std::size_t j = 0; j < row.size(); ++j) row[j] = 10.0 + (1.0 + 0.1 * j) * latent + rng.normal(0.0, 0.3);
        const double target = 11.0 + 8.0 * std::tanh(1.5 * latent);
        x.push_back(row);
        y.push_back(std::clamp(target, 0.0, 22.0));
    }
    EstimatorTrainSpec spec;
    spec.epochs = 60;
    spec.seed = 3;
    const std::size_t split = 1200;
    const std::vector<std::vector<double>> xtr(x.begin(), x.begin() + split);
    const std::vector<double> ytr(y.begin(), y.begin() + split);
    const auto r = train_component_estimator(Component::Cognitive, xtr, ytr, spec);
    CHECK(r.loss_curve.back() < r.loss_curve.front());
    double mae = 0.0;
    for (std::size_t i = split; i < x.size(); ++i) mae += std::abs(r.model.estimate(x[i]) - y[i]);
    mae /= static_cast<double>(x.size() - split);
    CHECK(mae < 0.05 * 22.0);

    spec.exec = Exec::Serial;
    const auto serial = train_component_estimator(Component::Cognitive, xtr, ytr, spec);
    CHECK(serial.model.net == r.model.net);

    EstimatorSet set;
    for (std::size_t k = 0; k < kComponentCount; ++k) {
        set.estimators[k] = r.model;
        set.estimators[k].component = kAllComponents[k];
    }
    const auto path = std::filesystem::temp_directory_path() / "matb_test_estimators.txt";
    set.save(path);
    const auto back = EstimatorSet::load(path);
    for (std::size_t i = split; i < split + 20; ++i) CHECK(back.estimate(x[i]) == set.estimate(x[i]));
    std::filesystem::remove(path);
    CHECK_THROWS_AS(r.model.estimate(std::vector<double>(3, 0.0)), ModelError);
}

TEST_CASE("estimator training rejects bad data") {
    EstimatorTrainSpec spec;
    CHECK_THROWS_AS(train_component_estimator(Component::Speech, {}, {}, spec), TrainingError);
    CHECK_THROWS_AS(train_component_estimator(Component::Speech, {{1, 2}, {1}}, {1, 1}, spec), TrainingError);
    CHECK_THROWS_AS(train_component_estimator(Component::Speech, {{1, 2}}, {5.0}, spec), TrainingError);
}

TEST_CASE("corrupt estimator files are rejected") {
    const auto path = std::filesystem::temp_directory_path() / "matb_test_bad_estimators.txt";
    {
        std::ofstream(path) << "matb-estimators 1\ncomponent physical\n";
    }
    CHECK_THROWS_AS(EstimatorSet::load(path), ModelError);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(EstimatorSet::load("/nonexistent/estimators.txt"), ModelError);
}
