#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "blockrf/math.hpp"

namespace blockrf {

/// One dense affine layer; `weights` is row-major (out x in).
struct DenseLayer {
    int in = 0;
    int out = 0;
    std::vector<float> weights;
    std::vector<float> bias;

    bool operator==(const DenseLayer&) const = default;
};

/// Tiny view-dependent shading network: diffuse (3) + feature (4) + encoded view
/// direction in, residual color (3) out. Hidden layers use ReLU; the output is linear.
struct DeferredShaderWeights {
    static constexpr int kHidden = 16;
    static constexpr int kDefaultBands = 4;

    int frequency_bands = kDefaultBands;
    std::vector<DenseLayer> layers;

    static int input_width(int bands) { return 3 + 4 + 6 * bands; }

    /// Three layers of the canonical shape, all weights and biases zero.
    static DeferredShaderWeights zeros(int bands = kDefaultBands);
    /// Deterministic uniform(-scale, scale) weights.
    static DeferredShaderWeights random(std::uint64_t seed, double scale,
                                        int bands = kDefaultBands);

    /// Throws InvalidArgument on inconsistent shapes or non-finite values.
    void validate() const;
    bool is_zero() const;

    bool operator==(const DeferredShaderWeights&) const = default;
};

/// sin/cos of each direction component scaled by 2^0 .. 2^(bands-1).
std::vector<double> positional_encoding(const Vec3& d, int bands);

/// Network output for one ray.
Vec3 shader_residual(const DeferredShaderWeights& w, const Vec3& diffuse,
                     const std::array<double, 4>& feature, const Vec3& view_dir);

}  // namespace blockrf
