#pragma once

#include "matb/random.hpp"

#include <iosfwd>
#include <span>
#include <vector>

namespace matb {

/// Fully connected network with ReLU hidden layers and a single linear output.
///
/// Parameters live in one flat vector: for each layer the weight matrix
/// (row-major, out x in) followed by the bias vector.
class Mlp {
public:
    Mlp() = default;
    // sizes = {inputs, hidden..., 1}; all parameters zero.
    explicit Mlp(std::vector<int> sizes);

    // He-uniform weights, zero biases.
    static Mlp random(std::vector<int> sizes, Rng& rng);

    const std::vector<int>& sizes() const noexcept { return sizes_; }
    int inputs() const noexcept { return sizes_.empty() ? 0 : sizes_.front(); }
    std::vector<double>& params() noexcept { return params_; }
    const std::vector<double>& params() const noexcept { return params_; }

    double forward(std::span<const double> x) const;

    // Adds d(y - target)^2 / dparams into `grad`; returns (y - target)^2.
    double backward(std::span<const double> x, double target, std::vector<double>& grad) const;

    void write(std::ostream& out) const;
    static Mlp read(std::istream& in);  // throws ModelError

    friend bool operator==(const Mlp&, const Mlp&) = default;

private:
    std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
    void layout();

    std::vector<int> sizes_;
    std::vector<std::size_t> offsets_;
    std::vector<double> params_;
};

}  // namespace matb
