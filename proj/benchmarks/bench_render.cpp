#include <benchmark/benchmark.h>

#include <random>

#include "blockrf/render.hpp"
#include "test_support.hpp"

using namespace blockrf;

namespace {

struct Scene {
    SceneSpec spec = blockrf::testing::load_fixture_scene("sparse");
    BakedScene baked = blockrf::testing::bake_spec(spec);
    std::vector<std::unique_ptr<RenderBlock>> owned;
    std::vector<const RenderBlock*> blocks;
    std::vector<PinholeCamera> cams = orbit_path(spec.camera_path);

    Scene() {
        const auto ids = baked.manifest.layout.blocks(1);
        owned = baked.render_blocks(ids);
        for (const auto& b : owned) blocks.push_back(b.get());
    }
};

const Scene& scene() {
    static const Scene s;
    return s;
}

void BM_RenderFrame(benchmark::State& state) {
    const Scene& s = scene();
    RenderOptions opts;
    opts.occupancy_skip = state.range(0) != 0;
    opts.workers = 1;
    const PinholeCamera cam = s.cams.front().resized(64, 64);
    for (auto _ : state) benchmark::DoNotOptimize(render_frame(cam, s.blocks, opts));
    state.SetItemsProcessed(state.iterations() * 64 * 64);
}
BENCHMARK(BM_RenderFrame)->Arg(0)->Arg(1)->ArgName("skip")->Unit(benchmark::kMillisecond);

void BM_MarchBlock(benchmark::State& state) {
    const Scene& s = scene();
    MarchOptions opts;
    opts.occupancy_skip = state.range(0) != 0;
    const PinholeCamera& cam = s.cams.front();
    std::vector<std::vector<BlockHit>> hits;
    std::vector<Ray> rays;
    for (int y = 0; y < cam.height; y += 4)
        for (int x = 0; x < cam.width; x += 4) {
            rays.push_back(cam.pixel_ray(x + 0.5, y + 0.5));
            hits.push_back(order_block_hits(rays.back(), s.blocks));
        }
    for (auto _ : state)
        for (std::size_t i = 0; i < rays.size(); ++i)
            for (const BlockHit& h : hits[i])
                benchmark::DoNotOptimize(h.block->march(rays[i], h.t0, h.t1, opts));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rays.size()));
}
BENCHMARK(BM_MarchBlock)->Arg(0)->Arg(1)->ArgName("skip");

void BM_CompositeBlocks(benchmark::State& state) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<RaySegmentResult> segs(static_cast<std::size_t>(state.range(0)));
    for (auto& s : segs) {
        s.alpha = u(rng);
        s.color = s.diffuse = {u(rng), u(rng), u(rng)};
    }
    for (auto _ : state) benchmark::DoNotOptimize(composite_blocks(segs));
}
BENCHMARK(BM_CompositeBlocks)->Arg(2)->Arg(8)->Arg(32);

std::vector<Vec3> block_points(const BlockAssets& a, std::size_t n) {
    const Box3 box = a.geometry.box;
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Vec3> pts(n);
    for (auto& p : pts)
        for (int k = 0; k < 3; ++k) p[k] = box.lo[k] + u(rng) * (box.hi[k] - box.lo[k]);
    return pts;
}

void BM_QueryAttributes(benchmark::State& state) {
    const BlockAssets& a = *scene().baked.assets.begin()->second;
    const auto pts = block_points(a, 256);
    for (auto _ : state)
        for (const Vec3& p : pts) benchmark::DoNotOptimize(query_attributes(p, a));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(pts.size()));
}
BENCHMARK(BM_QueryAttributes);

void BM_SamplerLookup(benchmark::State& state) {
    const BlockAssets& a = *scene().baked.assets.begin()->second;
    const AttributeSampler sampler(a);
    const auto pts = block_points(a, 4096);
    for (auto _ : state)
        for (const Vec3& p : pts) benchmark::DoNotOptimize(sampler.sample(p));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(pts.size()));
}
BENCHMARK(BM_SamplerLookup);

}  // namespace

BENCHMARK_MAIN();
