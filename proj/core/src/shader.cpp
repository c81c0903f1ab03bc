#include "blockrf/shader.hpp"

#include <cmath>
#include <random>

#include "blockrf/error.hpp"

namespace blockrf {

namespace {

DenseLayer make_layer(int in, int out) {
    DenseLayer l;
    l.in = in;
    l.out = out;
    l.weights.assign(std::size_t(in) * out, 0.0f);
    l.bias.assign(std::size_t(out), 0.0f);
    return l;
}

}  // namespace

DeferredShaderWeights DeferredShaderWeights::zeros(int bands) {
    DeferredShaderWeights w;
    w.frequency_bands = bands;
    w.layers.push_back(make_layer(input_width(bands), kHidden));
    w.layers.push_back(make_layer(kHidden, kHidden));
    w.layers.push_back(make_layer(kHidden, 3));
    return w;
}

DeferredShaderWeights DeferredShaderWeights::random(std::uint64_t seed, double scale, int bands) {
    DeferredShaderWeights w = zeros(bands);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-scale, scale);
    for (auto& l : w.layers) {
        for (auto& v : l.weights) v = static_cast<float>(dist(rng));
        for (auto& v : l.bias) v = static_cast<float>(dist(rng));
    }
    return w;
}

void DeferredShaderWeights::validate() const {
    if (frequency_bands < 0) throw InvalidArgument("shader: negative frequency band count");
    if (layers.empty()) throw InvalidArgument("shader: no layers");
    int width = input_width(frequency_bands);
    for (const auto& l : layers) {
        if (l.in != width) throw InvalidArgument("shader: layer input width mismatch");
        if (l.weights.size() != std::size_t(l.in) * l.out || l.bias.size() != std::size_t(l.out))
            throw InvalidArgument("shader: layer storage does not match its shape");
        for (float v : l.weights)
            if (!std::isfinite(v)) throw InvalidArgument("shader: non-finite weight");
        for (float v : l.bias)
            if (!std::isfinite(v)) throw InvalidArgument("shader: non-finite bias");
        width = l.out;
    }
    if (width != 3) throw InvalidArgument("shader: output width must be 3");
}

bool DeferredShaderWeights::is_zero() const {
    for (const auto& l : layers) {
        for (float v : l.weights)
            if (v != 0.0f) return false;
        for (float v : l.bias)
            if (v != 0.0f) return false;
    }
    return true;
}

std::vector<double> positional_encoding(const Vec3& d, int bands) {
    std::vector<double> enc;
    enc.reserve(std::size_t(6 * bands));
    for (int b = 0; b < bands; ++b) {
        const double s = std::ldexp(1.0, b);
        for (int c = 0; c < 3; ++c) enc.push_back(std::sin(s * d[c]));
        for (int c = 0; c < 3; ++c) enc.push_back(std::cos(s * d[c]));
    }
    return enc;
}

Vec3 shader_residual(const DeferredShaderWeights& w, const Vec3& diffuse,
                     const std::array<double, 4>& feature, const Vec3& view_dir) {
    std::vector<double> x;
    x.reserve(std::size_t(DeferredShaderWeights::input_width(w.frequency_bands)));
    for (int c = 0; c < 3; ++c) x.push_back(diffuse[c]);
    for (double f : feature) x.push_back(f);
    for (double e : positional_encoding(view_dir, w.frequency_bands)) x.push_back(e);

    std::vector<double> y;
    for (std::size_t li = 0; li < w.layers.size(); ++li) {
        const DenseLayer& l = w.layers[li];
        y.assign(std::size_t(l.out), 0.0);
        for (int o = 0; o < l.out; ++o) {
            double s = l.bias[o];
            const float* row = l.weights.data() + std::size_t(o) * l.in;
            for (int i = 0; i < l.in; ++i) s += double(row[i]) * x[i];
            y[o] = (li + 1 < w.layers.size()) ? std::max(s, 0.0) : s;
        }
        x.swap(y);
    }
    return {x[0], x[1], x[2]};
}

}  // namespace blockrf
