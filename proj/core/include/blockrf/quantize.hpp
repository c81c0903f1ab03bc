#pragma once

#include <array>
#include <cstdint>

namespace blockrf {

inline constexpr int kChannels = 8;
inline constexpr int kDensityChannel = 0;
inline constexpr int kDiffuseChannel = 1;  // channels 1..3
inline constexpr int kFeatureChannel = 4;  // channels 4..7

/// Pre-activation value bounds of one stored channel.
struct ChannelRange {
    double lo = 0.0;
    double hi = 1.0;

    double step() const { return (hi - lo) / 255.0; }
    bool operator==(const ChannelRange&) const = default;
};

/// Per-channel 8-bit codec for the stored attribute channels.
struct QuantizationSpec {
    std::array<ChannelRange, kChannels> ranges;

    /// Density (-10, 10); diffuse and feature channels (-7, 7).
    static QuantizationSpec defaults();
    void validate() const;
    bool operator==(const QuantizationSpec&) const = default;
};

std::uint8_t quantize(double x, const ChannelRange& range);
double dequantize(std::uint8_t code, const ChannelRange& range);

}  // namespace blockrf
