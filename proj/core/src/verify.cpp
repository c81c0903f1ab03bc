#include "blockrf/verify.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <json.hpp>

#include "blockrf/asset_io.hpp"
#include "blockrf/error.hpp"
#include "blockrf/image_io.hpp"
#include "blockrf/render.hpp"

namespace blockrf {

bool VerifyReport::passed() const {
    return !suites.empty() &&
           std::all_of(suites.begin(), suites.end(), [](const SuiteResult& s) { return s.passed; });
}

std::string VerifyReport::to_json() const {
    nlohmann::json j;
    j["passed"] = passed();
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& s : suites)
        arr.push_back({{"name", s.name},
                       {"ran", s.ran},
                       {"passed", s.passed},
                       {"max_error", s.max_error},
                       {"tolerance", s.tolerance},
                       {"detail", s.detail}});
    j["suites"] = arr;
    return j.dump(2) + "\n";
}

namespace {

std::vector<Ray> random_capture_rays(const SceneSpec& spec, int count, std::uint64_t seed) {
    const auto cams = orbit_path(spec.camera_path);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::vector<Ray> rays;
    rays.reserve(std::size_t(count));
    for (int i = 0; i < count; ++i) {
        const auto& cam = cams[std::size_t(rng() % cams.size())];
        rays.push_back(cam.pixel_ray(u01(rng) * cam.width, u01(rng) * cam.height));
    }
    return rays;
}

struct Lod1Blocks {
    std::vector<std::unique_ptr<RenderBlock>> owned;
    std::vector<const RenderBlock*> views;
};

Lod1Blocks lod1_blocks(const BakedScene& scene) {
    Lod1Blocks b;
    const auto ids = scene.manifest.layout.blocks(1);
    b.owned = scene.render_blocks(ids);
    for (const auto& r : b.owned) b.views.push_back(r.get());
    return b;
}

SuiteResult not_run(const std::string& name, double tol, const std::string& why) {
    SuiteResult r;
    r.name = name;
    r.tolerance = tol;
    r.detail = why;
    return r;
}

}  // namespace

SuiteResult equivalence_suite(const BakedScene& scene, const SceneSpec& spec,
                              const VerifyOptions& opts) {
    SuiteResult r;
    r.name = "equivalence";
    r.ran = true;
    r.tolerance = kEquivalenceTolerance;
    const Lod1Blocks blocks = lod1_blocks(scene);
    RenderOptions ro;
    ro.occupancy_skip = false;
    ro.termination = 0.0;
    ro.background = {0.0, 0.0, 0.0};
    for (const Ray& ray : random_capture_rays(spec, opts.trials, opts.seed)) {
        const RayColor blockwise = render_ray(ray, blocks.views, ro);
        std::vector<SamplePoint> merged;
        for (const BlockHit& h : order_block_hits(ray, blocks.views)) {
            auto s = h.block->samples(ray, h.t0, h.t1, false);
            merged.insert(merged.end(), s.begin(), s.end());
        }
        std::stable_sort(merged.begin(), merged.end(),
                         [](const SamplePoint& a, const SamplePoint& b) { return a.t < b.t; });
        const RaySegmentResult mono = render_monolithic(merged);
        for (int c = 0; c < 3; ++c)
            r.max_error = std::max(r.max_error, std::abs(blockwise.foreground[c] - mono.diffuse[c]));
        r.max_error = std::max(r.max_error, std::abs(blockwise.alpha - mono.alpha));
    }
    r.passed = r.max_error <= r.tolerance;
    return r;
}

SuiteResult opacity_suite(const BakedScene& scene, const SceneSpec& spec,
                          const VerifyOptions& opts) {
    SuiteResult r;
    r.name = "opacity_identity";
    r.ran = true;
    r.tolerance = kOpacityTolerance;
    const Lod1Blocks blocks = lod1_blocks(scene);
    for (const Ray& ray : random_capture_rays(spec, opts.trials, opts.seed + 1)) {
        for (const BlockHit& h : order_block_hits(ray, blocks.views)) {
            const auto samples = h.block->samples(ray, h.t0, h.t1, false);
            const RaySegmentResult seg = accumulate_samples(samples, 0.0);
            double prod = 1.0;
            for (const auto& s : samples) prod *= 1.0 - s.alpha;
            r.max_error = std::max(r.max_error, std::abs((1.0 - seg.alpha) - prod));
        }
    }
    r.passed = r.max_error <= r.tolerance;
    return r;
}

SuiteResult skip_suite(const BakedScene& scene, const SceneSpec& spec, const VerifyOptions& opts) {
    SuiteResult r;
    r.name = "skip_soundness";
    r.ran = true;
    r.tolerance = kSkipMaxTolerance;
    const Lod1Blocks blocks = lod1_blocks(scene);
    const auto cams = orbit_path(spec.camera_path);
    const int poses = std::clamp(opts.skip_poses, 1, int(cams.size()));
    double mean_worst = 0.0;
    RenderOptions ro;
    ro.workers = opts.workers;
    ro.background = scene.manifest.background;
    for (int i = 0; i < poses; ++i) {
        const auto& cam = cams[std::size_t(i) * cams.size() / std::size_t(poses)];
        ro.occupancy_skip = true;
        const Framebuffer skipped = render_frame(cam, blocks.views, ro);
        ro.occupancy_skip = false;
        const Framebuffer full = render_frame(cam, blocks.views, ro);
        const ImageDiff d = image_diff(skipped, full);
        r.max_error = std::max(r.max_error, d.max_abs);
        mean_worst = std::max(mean_worst, d.mean_abs);
    }
    r.passed = r.max_error <= kSkipMaxTolerance && mean_worst <= kSkipMeanTolerance;
    r.detail = "worst mean abs diff " + std::to_string(mean_worst) + " (tolerance " +
               std::to_string(kSkipMeanTolerance) + ")";
    return r;
}

VerifyReport verify_assets(const std::filesystem::path& root, const SceneSpec& spec,
                           const VerifyOptions& opts) {
    if (opts.trials < 1) throw InvalidArgument("verify: trials must be at least 1");
    const SceneManifest manifest = SceneManifest::load(root / "manifest.json");
    const BlockLayout& a = manifest.layout;
    const BlockLayout& b = spec.layout;
    if (a.nx != b.nx || a.ny != b.ny || a.block_size != b.block_size || a.origin.x != b.origin.x ||
        a.origin.y != b.origin.y || a.z_min != b.z_min || a.z_max != b.z_max)
        throw InvalidArgument("verify: the assets were baked from a different layout");

    VerifyReport report;
    SuiteResult rt;
    rt.name = "round_trip";
    rt.ran = true;
    BakedScene scene;
    scene.manifest = manifest;
    std::size_t mismatched = 0;
    for (const auto& entry : manifest.blocks) {
        try {
            auto assets = import_block(root, manifest, entry.id);
            for (const auto& f : encode_block(*assets)) {
                const auto disk = read_file(root / entry.directory() / f.name);
                if (disk != f.bytes) {
                    ++mismatched;
                    if (rt.detail.empty())
                        rt.detail = entry.directory() + "/" + f.name + " does not re-encode identically";
                }
            }
            scene.assets[entry.id] = std::move(assets);
        } catch (const FormatError& e) {
            ++mismatched;
            if (rt.detail.empty()) rt.detail = e.what();
        }
    }
    rt.max_error = double(mismatched);
    rt.passed = mismatched == 0;
    report.suites.push_back(rt);

    if (!rt.passed) {
        const std::string why = "not run: assets failed the round trip";
        report.suites.push_back(not_run("equivalence", kEquivalenceTolerance, why));
        report.suites.push_back(not_run("opacity_identity", kOpacityTolerance, why));
        report.suites.push_back(not_run("skip_soundness", kSkipMaxTolerance, why));
        return report;
    }
    report.suites.push_back(equivalence_suite(scene, spec, opts));
    report.suites.push_back(opacity_suite(scene, spec, opts));
    report.suites.push_back(skip_suite(scene, spec, opts));
    return report;
}

}  // namespace blockrf
