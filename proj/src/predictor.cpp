#include "matb/predictor.hpp"

#include "matb/event_log.hpp"
#include "matb/scoring.hpp"
#include "matb/text_format.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

namespace matb {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

struct StepCache {
    std::vector<double> x, hprev, i, f, g, o, cprev, c, tc, h;
};

}  // namespace

PredictorRow predictor_row(const WorkloadEstimate& e) {
    return {e.overall, e.components[0], e.components[1], e.components[2], e.components[3], e.components[4]};
}

PredictorModel::PredictorModel(LstmShape shape, double dropout) : shape_(shape), dropout_(dropout) {
    if (shape.inputs <= 0 || shape.hidden <= 0 || shape.layers <= 0 || shape.dense <= 0)
        throw ModelError("predictor shape must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ModelError("dropout must be in [0, 1)");
    const auto H = static_cast<std::size_t>(shape.hidden);
    std::size_t off = 0;
    auto add = [&](std::string name, std::size_t size) {
        blocks_.push_back({std::move(name), off, size});
        off += size;
    };
    for (int l = 0; l < shape.layers; ++l) {
        const auto in = static_cast<std::size_t>(l == 0 ? shape.inputs : shape.hidden);
        const auto tag = "lstm" + std::to_string(l);
        add(tag + ".W", 4 * H * in);
        add(tag + ".U", 4 * H * H);
        add(tag + ".b", 4 * H);
    }
    const auto D = static_cast<std::size_t>(shape.dense);
    add("dense.W", D * H);
    add("dense.b", D);
    add("out.w", D);
    add("out.b", 1);
    params_.assign(off, 0.0);
}

PredictorModel PredictorModel::random(LstmShape shape, double dropout, Rng& rng) {
    PredictorModel m(shape, dropout);
    const double H = shape.hidden;
    for (const auto& b : m.blocks_) {
        double* p = m.params_.data() + b.offset;
        const bool bias = b.name.ends_with(".b");
        if (b.name.starts_with("lstm")) {
            if (bias) {
                // forget-gate bias starts at 1
                for (int k = 0; k < shape.hidden; ++k) p[shape.hidden + k] = 1.0;
                continue;
            }
            const double limit = 1.0 / std::sqrt(H);
            for (std::size_t k = 0; k < b.size; ++k) p[k] = rng.uniform(-limit, limit);
        } else if (b.name == "dense.W") {
            const double limit = std::sqrt(6.0 / H);
            for (std::size_t k = 0; k < b.size; ++k) p[k] = rng.uniform(-limit, limit);
        } else if (b.name == "out.w") {
            const double limit = std::sqrt(3.0 / shape.dense);
            for (std::size_t k = 0; k < b.size; ++k) p[k] = rng.uniform(-limit, limit);
        }
    }
    return m;
}

DropoutMasks PredictorModel::sample_masks(Rng& rng) const {
    DropoutMasks masks(static_cast<std::size_t>(shape_.layers), std::vector<double>(shape_.hidden, 1.0));
    if (dropout_ <= 0.0) return masks;
    const double keep = 1.0 - dropout_;
    for (auto& m : masks)
        for (auto& v : m) v = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
    return masks;
}

double PredictorModel::run(const PredictorInput& input, const DropoutMasks* masks, std::vector<double>* grad,
                           double target) const {
    const auto H = static_cast<std::size_t>(shape_.hidden);
    const auto D = static_cast<std::size_t>(shape_.dense);
    const auto L = static_cast<std::size_t>(shape_.layers);
    const std::size_t T = kPredictorSteps;
    if (static_cast<std::size_t>(shape_.inputs) != kPredictorInputs) throw ModelError("predictor expects 6 inputs");
    if (masks && (masks->size() != L || std::any_of(masks->begin(), masks->end(),
                                                    [&](const auto& m) { return m.size() != H; })))
        throw ModelError("dropout mask shape mismatch");
    const double* P = params_.data();

    std::vector<std::vector<StepCache>> cache(L, std::vector<StepCache>(T));
    std::vector<std::vector<double>> layer_in(T);
    for (std::size_t t = 0; t < T; ++t) {
        layer_in[t].resize(kPredictorInputs);
        for (std::size_t k = 0; k < kPredictorInputs; ++k) layer_in[t][k] = input[t][k] / kPredictorInputScale[k];
    }

    for (std::size_t l = 0; l < L; ++l) {
        const std::size_t in = layer_in[0].size();
        const double* W = P + blocks_[3 * l].offset;
        const double* U = P + blocks_[3 * l + 1].offset;
        const double* b = P + blocks_[3 * l + 2].offset;
        std::vector<double> h(H, 0.0), c(H, 0.0), z(4 * H);
        for (std::size_t t = 0; t < T; ++t) {
            auto& s = cache[l][t];
            s.x = layer_in[t];
            s.hprev = h;
            if (masks)
                for (std::size_t j = 0; j < H; ++j) s.hprev[j] *= (*masks)[l][j];
            for (std::size_t r = 0; r < 4 * H; ++r) {
                double acc = b[r];
                const double* wr = W + r * in;
                for (std::size_t k = 0; k < in; ++k) acc += wr[k] * s.x[k];
                const double* ur = U + r * H;
                for (std::size_t k = 0; k < H; ++k) acc += ur[k] * s.hprev[k];
                z[r] = acc;
            }
            s.i.resize(H), s.f.resize(H), s.g.resize(H), s.o.resize(H), s.tc.resize(H);
            s.cprev = c;
            for (std::size_t j = 0; j < H; ++j) {
                s.i[j] = sigmoid(z[j]);
                s.f[j] = sigmoid(z[H + j]);
                s.g[j] = std::tanh(z[2 * H + j]);
                s.o[j] = sigmoid(z[3 * H + j]);
                c[j] = s.f[j] * c[j] + s.i[j] * s.g[j];
                s.tc[j] = std::tanh(c[j]);
                h[j] = s.o[j] * s.tc[j];
            }
            s.c = c;
            s.h = h;
            layer_in[t] = h;
        }
    }

    const auto& top = cache[L - 1][T - 1].h;
    const std::size_t nb = blocks_.size();
    const double* Wd = P + blocks_[nb - 4].offset;
    const double* bd = P + blocks_[nb - 3].offset;
    const double* wo = P + blocks_[nb - 2].offset;
    const double bo = P[blocks_[nb - 1].offset];
    std::vector<double> pre(D), a(D);
    double y = bo;
    for (std::size_t d = 0; d < D; ++d) {
        double acc = bd[d];
        for (std::size_t k = 0; k < H; ++k) acc += Wd[d * H + k] * top[k];
        pre[d] = acc;
        a[d] = std::max(0.0, acc);
        y += wo[d] * a[d];
    }
    if (!grad) return y;

    auto& G = *grad;
    if (G.size() != params_.size()) throw ModelError("gradient buffer size mismatch");
    const double err = y - target;
    const double dy = 2.0 * err;
    double* gWd = G.data() + blocks_[nb - 4].offset;
    double* gbd = G.data() + blocks_[nb - 3].offset;
    double* gwo = G.data() + blocks_[nb - 2].offset;
    G[blocks_[nb - 1].offset] += dy;
    std::vector<double> dtop(H, 0.0);
    for (std::size_t d = 0; d < D; ++d) {
        gwo[d] += dy * a[d];
        const double dp = pre[d] > 0.0 ? dy * wo[d] : 0.0;
        if (dp == 0.0) continue;
        gbd[d] += dp;
        for (std::size_t k = 0; k < H; ++k) {
            gWd[d * H + k] += dp * top[k];
            dtop[k] += dp * Wd[d * H + k];
        }
    }

    // dh_out[t]: gradient arriving at layer l's output h_t from above.
    std::vector<std::vector<double>> dh_out(T, std::vector<double>(H, 0.0));
    dh_out[T - 1] = dtop;
    std::vector<double> dz(4 * H);
    for (std::size_t l = L; l-- > 0;) {
        const std::size_t in = cache[l][0].x.size();
        const double* W = P + blocks_[3 * l].offset;
        const double* U = P + blocks_[3 * l + 1].offset;
        double* gW = G.data() + blocks_[3 * l].offset;
        double* gU = G.data() + blocks_[3 * l + 1].offset;
        double* gb = G.data() + blocks_[3 * l + 2].offset;
        std::vector<std::vector<double>> dx(T, std::vector<double>(in, 0.0));
        std::vector<double> dh_next(H, 0.0), dc_next(H, 0.0);
        for (std::size_t t = T; t-- > 0;) {
            const auto& s = cache[l][t];
            for (std::size_t j = 0; j < H; ++j) {
                const double dh = dh_out[t][j] + dh_next[j];
                const double dc = dc_next[j] + dh * s.o[j] * (1.0 - s.tc[j] * s.tc[j]);
                const double d_o = dh * s.tc[j];
                const double di = dc * s.g[j];
                const double dg = dc * s.i[j];
                const double df = dc * s.cprev[j];
                dc_next[j] = dc * s.f[j];
                dz[j] = di * s.i[j] * (1.0 - s.i[j]);
                dz[H + j] = df * s.f[j] * (1.0 - s.f[j]);
                dz[2 * H + j] = dg * (1.0 - s.g[j] * s.g[j]);
                dz[3 * H + j] = d_o * s.o[j] * (1.0 - s.o[j]);
            }
            std::fill(dh_next.begin(), dh_next.end(), 0.0);
            for (std::size_t r = 0; r < 4 * H; ++r) {
                const double d = dz[r];
                gb[r] += d;
                for (std::size_t k = 0; k < in; ++k) {
                    gW[r * in + k] += d * s.x[k];
                    dx[t][k] += d * W[r * in + k];
                }
                for (std::size_t k = 0; k < H; ++k) {
                    gU[r * H + k] += d * s.hprev[k];
                    dh_next[k] += d * U[r * H + k];
                }
            }
            if (masks)
                for (std::size_t k = 0; k < H; ++k) dh_next[k] *= (*masks)[l][k];
        }
        if (l > 0) dh_out = std::move(dx);
    }
    return err * err;
}

double PredictorModel::forward(const PredictorInput& input, const DropoutMasks* masks) const {
    return run(input, masks, nullptr, 0.0);
}

double PredictorModel::predict(const PredictorInput& input) const { return clamp01(forward(input)); }

double PredictorModel::backward(const PredictorInput& input, double target, std::vector<double>& grad,
                                const DropoutMasks* masks) const {
    return run(input, masks, &grad, target);
}

void PredictorModel::save(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw ModelError("cannot write '" + path.string() + "'");
    out << "matb-lstm 1\n";
    out << "shape " << shape_.inputs << ' ' << shape_.hidden << ' ' << shape_.layers << ' ' << shape_.dense << '\n';
    out << "dropout " << text::format_double(dropout_) << '\n';
    for (const auto& b : blocks_)
        text::write_row(out, b.name, std::span<const double>(params_.data() + b.offset, b.size));
}

PredictorModel PredictorModel::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ModelError("cannot open predictor model '" + path.string() + "'");
    text::expect(in, "matb-lstm");
    if (text::read_int(in) != 1) throw ModelError("unsupported predictor model version");
    text::expect(in, "shape");
    LstmShape s;
    s.inputs = text::read_int(in);
    s.hidden = text::read_int(in);
    s.layers = text::read_int(in);
    s.dense = text::read_int(in);
    if (s.hidden > 4096 || s.layers > 64 || s.dense > 4096) throw ModelError("implausible predictor shape");
    text::expect(in, "dropout");
    PredictorModel m(s, text::read_double(in));
    for (const auto& b : m.blocks_) {
        const auto v = text::read_row(in, b.name, b.size);
        std::copy(v.begin(), v.end(), m.params_.begin() + static_cast<std::ptrdiff_t>(b.offset));
    }
    return m;
}

PredictorTrainResult train_predictor(const std::vector<TrainingSample>& samples, LstmShape shape, double dropout,
                                     const PredictorTrainSpec& spec) {
    if (samples.empty()) throw TrainingError("predictor training needs at least one sample");
    if (!(spec.learning_rate > 0.0)) throw TrainingError("learning rate must be positive");
    if (spec.batch <= 0 || spec.epochs < 0) throw TrainingError("invalid batch size or epoch count");

    Rng init_rng(derive_seed(spec.seed, Stream::Training));
    Rng shuffle_rng(derive_seed(spec.seed, Stream::Training, 1));
    Rng dropout_rng(derive_seed(spec.seed, Stream::Dropout));
    PredictorTrainResult result{PredictorModel::random(shape, dropout, init_rng), {}};
    auto& model = result.model;
    auto& params = model.params();

    Adam adam;
    adam.lr = spec.learning_rate;
    const std::size_t n = samples.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> grad;
    std::vector<DropoutMasks> masks;
    for (int epoch = 0; epoch < spec.epochs; ++epoch) {
        for (std::size_t i = n; i > 1; --i)
            std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle_rng.uniform_int(0, static_cast<int>(i) - 1))]);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(spec.batch)) {
            const std::size_t m = std::min(n, start + static_cast<std::size_t>(spec.batch)) - start;
            masks.clear();
            for (std::size_t i = 0; i < m; ++i) masks.push_back(model.sample_masks(dropout_rng));
            const double loss = accumulate_gradient(m, params.size(), spec.exec, grad, [&](std::size_t i, auto& g) {
                const auto& s = samples[order[start + i]];
                return model.backward(s.input, s.target, g, &masks[i]);
            });
            if (!std::isfinite(loss))
                throw TrainingError("predictor loss became non-finite at epoch " + std::to_string(epoch) +
                                    ", batch starting at " + std::to_string(start));
            for (auto& g : grad) g /= static_cast<double>(m);
            adam.step(params, grad);
            epoch_loss += loss;
        }
        result.loss_curve.push_back(epoch_loss / static_cast<double>(n));
    }
    return result;
}

double mean_squared_error(const PredictorModel& model, const std::vector<TrainingSample>& samples) {
    if (samples.empty()) return 0.0;
    double s = 0.0;
    for (const auto& x : samples) {
        const double e = model.forward(x.input) - x.target;
        s += e * e;
    }
    return s / static_cast<double>(samples.size());
}

GradientCheckResult gradient_check(const PredictorModel& model, const TrainingSample& sample, double eps) {
    std::vector<double> analytic(model.params().size(), 0.0);
    model.backward(sample.input, sample.target, analytic);
    PredictorModel probe = model;
    auto& p = probe.params();
    GradientCheckResult r;
    for (const auto& b : model.blocks()) {
        double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
        for (std::size_t k = b.offset; k < b.offset + b.size; ++k) {
            const double orig = p[k];
            p[k] = orig + eps;
            const double up = probe.forward(sample.input) - sample.target;
            p[k] = orig - eps;
            const double down = probe.forward(sample.input) - sample.target;
            p[k] = orig;
            const double numeric = (up * up - down * down) / (2.0 * eps);
            diff2 += (analytic[k] - numeric) * (analytic[k] - numeric);
            a2 += analytic[k] * analytic[k];
            n2 += numeric * numeric;
        }
        const double denom = std::sqrt(a2) + std::sqrt(n2);
        const double rel = denom > 0.0 ? std::sqrt(diff2) / denom : 0.0;
        r.per_block.emplace_back(b.name, rel);
        r.max_relative_error = std::max(r.max_relative_error, rel);
    }
    return r;
}

std::vector<TrainingSample> build_training_set(const TrialLog& log, Seconds horizon, Seconds target_window) {
    std::vector<TrainingSample> out;
    const ScenarioConfig cfg = log.header.contains("config") ? config_from_json(log.header.at("config")) : ScenarioConfig{};
    const Seconds total = log.header.value("duration", cfg.total_duration());
    const auto key = [](Seconds t) { return static_cast<long long>(std::llround(t * 1000.0)); };

    std::map<long long, WorkloadEstimate> estimates;
    for (const auto* e : log.of_kind("estimate")) {
        WorkloadEstimate w;
        w.t = e->t;
        w.overall = e->payload.at("overall").get<double>();
        for (std::size_t k = 0; k < kComponentCount; ++k)
            w.components[k] = e->payload.at(std::string(component_name(kAllComponents[k]))).get<double>();
        estimates[key(e->t)] = w;
    }
    if (estimates.empty()) return out;
    const ScoreStream stream = score_stream_from_log(log);
    const double half = target_window / 2.0;
    for (const auto& [k, w] : estimates) {
        const Seconds t = w.t;
        if (t + horizon + half > total + 1e-9) continue;
        auto a = estimates.find(key(t - 10.0));
        auto b = estimates.find(key(t - 5.0));
        if (a == estimates.end() || b == estimates.end()) continue;
        TrainingSample s;
        s.t = t;
        s.input = {predictor_row(a->second), predictor_row(b->second), predictor_row(w)};
        s.target = windowed_performance(stream, t + horizon - half, t + horizon + half, cfg.scoring).overall;
        out.push_back(s);
    }
    return out;
}

}  // namespace matb
