#include "matb/mlp.hpp"

#include "matb/core.hpp"
#include "matb/text_format.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

namespace matb {

Mlp::Mlp(std::vector<int> sizes) : sizes_(std::move(sizes)) {
    if (sizes_.size() < 2 || sizes_.back() != 1) throw ModelError("mlp needs at least one layer and a scalar output");
    for (int s : sizes_)
        if (s <= 0) throw ModelError("mlp layer sizes must be positive");
    layout();
}

void Mlp::layout() {
    offsets_.clear();
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
        offsets_.push_back(n);
        n += static_cast<std::size_t>(sizes_[l + 1]) * (sizes_[l] + 1);
    }
    params_.assign(n, 0.0);
}

Mlp Mlp::random(std::vector<int> sizes, Rng& rng) {
    Mlp m(std::move(sizes));
    for (std::size_t l = 0; l + 1 < m.sizes_.size(); ++l) {
        const int in = m.sizes_[l], out = m.sizes_[l + 1];
        const double limit = std::sqrt(6.0 / in);
        double* w = m.params_.data() + m.offsets_[l];
        for (int k = 0; k < in * out; ++k) w[k] = rng.uniform(-limit, limit);
    }
    return m;
}

double Mlp::forward(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != inputs()) throw ModelError("mlp input dimension mismatch");
    std::vector<double> a(x.begin(), x.end()), next;
    const std::size_t layers = sizes_.size() - 1;
    for (std::size_t l = 0; l < layers; ++l) {
        const int in = sizes_[l], out = sizes_[l + 1];
        const double* w = params_.data() + offsets_[l];
        const double* b = w + static_cast<std::size_t>(in) * out;
        next.assign(out, 0.0);
        for (int j = 0; j < out; ++j) {
            double s = b[j];
            const double* row = w + static_cast<std::size_t>(j) * in;
            for (int i = 0; i < in; ++i) s += row[i] * a[i];
            next[j] = (l + 1 < layers) ? std::max(0.0, s) : s;
        }
        a.swap(next);
    }
    return a[0];
}

double Mlp::backward(std::span<const double> x, double target, std::vector<double>& grad) const {
    if (static_cast<int>(x.size()) != inputs()) throw ModelError("mlp input dimension mismatch");
    const std::size_t layers = sizes_.size() - 1;
    std::vector<std::vector<double>> acts(layers + 1);
    acts[0].assign(x.begin(), x.end());
    for (std::size_t l = 0; l < layers; ++l) {
        const int in = sizes_[l], out = sizes_[l + 1];
        const double* w = params_.data() + offsets_[l];
        const double* b = w + static_cast<std::size_t>(in) * out;
        auto& a = acts[l + 1];
        a.assign(out, 0.0);
        for (int j = 0; j < out; ++j) {
            double s = b[j];
            const double* row = w + static_cast<std::size_t>(j) * in;
            for (int i = 0; i < in; ++i) s += row[i] * acts[l][i];
            a[j] = (l + 1 < layers) ? std::max(0.0, s) : s;
        }
    }
    const double err = acts[layers][0] - target;
    std::vector<double> delta{2.0 * err}, prev;
    for (std::size_t l = layers; l-- > 0;) {
        const int in = sizes_[l], out = sizes_[l + 1];
        const double* w = params_.data() + offsets_[l];
        double* gw = grad.data() + offsets_[l];
        double* gb = gw + static_cast<std::size_t>(in) * out;
        prev.assign(in, 0.0);
        for (int j = 0; j < out; ++j) {
            const double d = delta[j];
            if (d == 0.0) continue;
            gb[j] += d;
            const double* row = w + static_cast<std::size_t>(j) * in;
            double* grow = gw + static_cast<std::size_t>(j) * in;
            for (int i = 0; i < in; ++i) {
                grow[i] += d * acts[l][i];
                prev[i] += d * row[i];
            }
        }
        if (l > 0)
            for (int i = 0; i < in; ++i)
                if (acts[l][i] <= 0.0) prev[i] = 0.0;
        delta.swap(prev);
    }
    return err * err;
}

void Mlp::write(std::ostream& out) const {
    out << "mlp " << sizes_.size() - 1 << '\n';
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
        const int in = sizes_[l], outn = sizes_[l + 1];
        out << "dense " << in << ' ' << outn << ' ' << (l + 2 < sizes_.size() ? "relu" : "linear") << '\n';
        const double* w = params_.data() + offsets_[l];
        text::write_row(out, "w", std::span<const double>(w, static_cast<std::size_t>(in) * outn));
        text::write_row(out, "b", std::span<const double>(w + static_cast<std::size_t>(in) * outn, outn));
    }
}

Mlp Mlp::read(std::istream& in) {
    text::expect(in, "mlp");
    const int layers = text::read_int(in);
    if (layers < 1 || layers > 64) throw ModelError("implausible mlp layer count");
    std::vector<int> sizes;
    std::vector<std::vector<double>> blocks;
    for (int l = 0; l < layers; ++l) {
        text::expect(in, "dense");
        const int n_in = text::read_int(in), n_out = text::read_int(in);
        const std::string act = text::read_word(in);
        if (act != (l + 1 < layers ? "relu" : "linear")) throw ModelError("unexpected activation '" + act + "'");
        if (l == 0) sizes.push_back(n_in);
        else if (sizes.back() != n_in) throw ModelError("mlp layer sizes do not chain");
        sizes.push_back(n_out);
        blocks.push_back(text::read_row(in, "w", static_cast<std::size_t>(n_in) * n_out));
        blocks.push_back(text::read_row(in, "b", static_cast<std::size_t>(n_out)));
    }
    Mlp m(sizes);
    std::size_t k = 0;
    for (const auto& b : blocks)
        for (double v : b) m.params_[k++] = v;
    return m;
}

}  // namespace matb
