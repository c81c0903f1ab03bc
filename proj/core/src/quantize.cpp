#include "blockrf/quantize.hpp"

#include <algorithm>
#include <cmath>

#include "blockrf/error.hpp"

namespace blockrf {

QuantizationSpec QuantizationSpec::defaults() {
    QuantizationSpec s;
    s.ranges[kDensityChannel] = {-10.0, 10.0};
    for (int c = 1; c < kChannels; ++c) s.ranges[c] = {-7.0, 7.0};
    return s;
}

void QuantizationSpec::validate() const {
    for (const auto& r : ranges)
        if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || !(r.hi > r.lo))
            throw InvalidArgument("quantization range must satisfy lo < hi");
}

std::uint8_t quantize(double x, const ChannelRange& range) {
    if (std::isnan(x)) x = range.lo;
    const double c = std::clamp(x, range.lo, range.hi);
    const double code = std::floor(255.0 * (c - range.lo) / (range.hi - range.lo) + 0.5);
    return static_cast<std::uint8_t>(std::clamp(code, 0.0, 255.0));
}

double dequantize(std::uint8_t code, const ChannelRange& range) {
    return range.lo + (range.hi - range.lo) * (double(code) / 255.0);
}

}  // namespace blockrf
