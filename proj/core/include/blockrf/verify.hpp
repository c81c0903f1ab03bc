#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "blockrf/bake.hpp"
#include "blockrf/scene_spec.hpp"

namespace blockrf {

struct SuiteResult {
    std::string name;
    bool passed = false;
    bool ran = false;
    double max_error = 0.0;
    double tolerance = 0.0;
    std::string detail;
};

struct VerifyReport {
    std::vector<SuiteResult> suites;

    bool passed() const;
    std::string to_json() const;
};

struct VerifyOptions {
    int trials = 1000;        // random rays for the equivalence and opacity suites
    std::uint64_t seed = 1;
    int skip_poses = 4;       // orbit poses rendered by the skip-soundness suite
    int workers = 0;
};

/// Tolerances shared with the acceptance checks.
inline constexpr double kEquivalenceTolerance = 1e-5;
inline constexpr double kOpacityTolerance = 1e-6;
inline constexpr double kSkipMeanTolerance = 2.0 / 255.0;
inline constexpr double kSkipMaxTolerance = 8.0 / 255.0;

/// Equivalence of blockwise compositing with one volume integral over the
/// concatenated samples, on the LOD 1 blocks along random capture rays.
SuiteResult equivalence_suite(const BakedScene& scene, const SceneSpec& spec,
                              const VerifyOptions& opts);
/// 1 - alpha_k = prod(1 - alpha_i) per block segment along random capture rays.
SuiteResult opacity_suite(const BakedScene& scene, const SceneSpec& spec, const VerifyOptions& opts);
/// Orbit renders with the occupancy pyramid against exhaustive marching.
SuiteResult skip_suite(const BakedScene& scene, const SceneSpec& spec, const VerifyOptions& opts);

/// Runs every suite against an exported asset root. The round-trip suite re-imports
/// every block (size and hash checked) and re-encodes it byte for byte; when it fails
/// the other suites are not run. Throws InvalidArgument when trials < 1 or the assets
/// were baked from a different layout, and IoError for a missing manifest.
VerifyReport verify_assets(const std::filesystem::path& root, const SceneSpec& spec,
                           const VerifyOptions& opts);

}  // namespace blockrf
