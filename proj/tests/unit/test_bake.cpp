#include <doctest.h>

#include <random>

#include "blockrf/bake.hpp"
#include "blockrf/camera_path.hpp"
#include "blockrf/error.hpp"
#include "test_support.hpp"

using namespace blockrf;
using blockrf::testing::ConstantField;
using blockrf::testing::make_field;
using blockrf::testing::small_config;
using blockrf::testing::small_layout;

namespace {

// Rays from an orbit around a 2x2 layout of 1 m blocks with z in [0, 1].
std::vector<Ray> orbit_rays(int count = 8, int px = 24) {
    OrbitPath o;
    o.center = {1.0, 1.0};
    o.radius = 3.0;
    o.height = 2.0;
    o.count = count;
    o.target = {1.0, 1.0, 0.3};
    o.fov_y_deg = 60;
    o.width = o.height_px = px;
    const auto cams = orbit_path(o);
    return capture_rays(cams);
}

// Largest |reconstructed - field| pre-activation over voxel centers, in codec steps.
double vertex_error_steps(const FieldSource& f, const BlockLayout& l, const BlockId& id,
                          const BakeConfig& cfg) {
    const BlockGeometry g = BlockGeometry::make(l, id, cfg.voxel_res, cfg.triplane_res);
    OccupancyGrid full(g.voxel_dims);
    std::fill(full.cells.begin(), full.cells.end(), 1);
    const BlockAssets a = bake_block(f, l, id, cfg, full);
    const AttributeSampler s(a);
    double worst = 0.0;
    for (int k = 0; k < g.voxel_dims.z; ++k)
        for (int j = 0; j < g.voxel_dims.y; ++j)
            for (int i = 0; i < g.voxel_dims.x; ++i) {
                const Vec3 p = g.texel_center(i, j, k);
                std::array<double, kChannels> got;
                REQUIRE(s.pre_activations(p, got));
                const auto want = field_pre_activations(f.eval(p), cfg.quant);
                for (int c = 0; c < kChannels; ++c)
                    worst = std::max(worst, std::abs(got[c] - want[c]) / cfg.quant.ranges[c].step());
            }
    return worst;
}

}  // namespace

TEST_CASE("bake config validation") {
    BakeConfig c;
    c.validate();
    auto bad = [](auto mutate) {
        BakeConfig b;
        mutate(b);
        CHECK_THROWS_AS(b.validate(), InvalidArgument);
    };
    bad([](BakeConfig& b) { b.tau_w = 0.0; });
    bad([](BakeConfig& b) { b.tau_alpha = 1.0; });
    bad([](BakeConfig& b) { b.voxel_res = 48; });
    bad([](BakeConfig& b) { b.voxel_res = 4; });
    bad([](BakeConfig& b) { b.triplane_res = 100; });
    bad([](BakeConfig& b) { b.ray_budget = 0; });
    bad([](BakeConfig& b) { b.pyramid_levels = 0; });
    bad([](BakeConfig& b) {
        b.voxel_res = 8;
        b.pyramid_levels = 5;
    });
    bad([](BakeConfig& b) { b.plane_share = 1.5; });
}

TEST_CASE("constant field gives constant grids") {
    FieldSample s;
    s.sigma = 3.0;
    s.diffuse_pre = {0.5, -1.0, 2.0};
    s.feature_pre = {1, 2, 3, -4};
    const ConstantField f(s);
    const auto l = small_layout(2);
    for (double share : {0.0, 0.6}) {
        auto cfg = small_config(16, 8);
        cfg.plane_share = share;
        const auto g = sample_field_to_grids(f, l, {1, 1, 0}, cfg);
        for (std::size_t n = kChannels; n < g.voxel.size(); ++n) CHECK(g.voxel[n] == g.voxel[n % kChannels]);
        for (const auto& plane : g.planes)
            for (std::size_t n = kChannels; n < plane.size(); ++n) CHECK(plane[n] == plane[n % kChannels]);
        if (share == 0.0) CHECK(g.planes[0][1] == 0.0f);
        if (share > 0.0) CHECK(g.planes[1][1] == doctest::Approx(0.5 * share / 3).epsilon(1e-6));
    }
}

TEST_CASE("non-finite field values are reported with the point") {
    const auto f = make_field([](const Vec3& p) {
        FieldSample s;
        s.sigma = p.x > 0.5 ? std::numeric_limits<double>::quiet_NaN() : 1.0;
        return s;
    });
    try {
        sample_field_to_grids(f, small_layout(1), {1, 0, 0}, small_config(8, 8));
        FAIL("expected a throw");
    } catch (const InvalidArgument& e) {
        CHECK(std::string(e.what()).find("non-finite") != std::string::npos);
        CHECK(std::string(e.what()).find("(0.5") != std::string::npos);
    }
}

TEST_CASE("plane share 0 reproduces the field at every vertex within codec tolerance") {
    const auto f = make_field([](const Vec3& p) {
        FieldSample s;
        s.sigma = 0.5 + 20 * p.z * p.x;
        s.diffuse_pre = {std::sin(5 * p.x), 3 * p.y - 1.5, p.z};
        s.feature_pre = {p.x * p.y, -p.z, 0.1, std::cos(3 * p.y)};
        return s;
    });
    CHECK(vertex_error_steps(f, small_layout(2), {1, 0, 1}, small_config(16, 16)) <= 0.5 + 1e-6);
}

TEST_CASE("plane share 0.5 splits a ramp between voxels and planes") {
    const auto f = make_field([](const Vec3& p) {
        FieldSample s;
        s.sigma = 1.0;
        s.diffuse_pre = {4 * p.x - 2, 0, 0};
        return s;
    });
    const auto l = small_layout(1);
    auto cfg = small_config(16, 16);
    cfg.plane_share = 0.5;
    CHECK(vertex_error_steps(f, l, {1, 0, 0}, cfg) <= 0.5 + 1e-6);

    const auto g = sample_field_to_grids(f, l, {1, 0, 0}, cfg);
    const int ch = kDiffuseChannel;
    // The xy and xz planes carry one sixth of the ramp each; yz sees no x variation.
    const float xy_lo = g.planes[0][ch], xy_hi = g.planes[0][15 * kChannels + ch];
    CHECK(xy_hi - xy_lo == doctest::Approx(4.0 * 15.0 / 16.0 / 6.0).epsilon(1e-5));
    const float xz_hi = g.planes[1][15 * kChannels + ch];
    CHECK(xz_hi == doctest::Approx(xy_hi).epsilon(1e-6));
    CHECK(g.planes[2][ch] == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("occupancy of a zero-density field is empty") {
    const ConstantField f(FieldSample{});
    const auto occ = bake_occupancy(f, small_layout(2), 1, small_config(), orbit_rays());
    for (const auto& [id, g] : occ) CHECK(g.occupied_count() == 0);
    CHECK_THROWS_AS(bake_occupancy(f, small_layout(2), 1, small_config(), {}), InvalidArgument);
}

TEST_CASE("opaque slab occupancy stays within one voxel of the thresholded field") {
    const auto slab = make_field([](const Vec3& p) {
        FieldSample s;
        s.sigma = (p.z > 0.4 && p.z < 0.55) ? 2000.0 : 0.0;
        return s;
    });
    const auto l = small_layout(2);
    const auto cfg = small_config(16, 16);
    const auto occ = bake_occupancy(slab, l, 1, cfg, orbit_rays());
    std::size_t total = 0;
    for (const auto& [id, g] : occ) {
        const auto geom = BlockGeometry::make(l, id, cfg.voxel_res, cfg.triplane_res);
        const auto& d = g.dims;
        // Dense oracle: voxel centers whose alpha clears the threshold.
        OccupancyGrid dense(d);
        for (int k = 0; k < d.z; ++k)
            for (int j = 0; j < d.y; ++j)
                for (int i = 0; i < d.x; ++i)
                    if (sample_alpha(slab.eval(geom.texel_center(i, j, k)).sigma, geom.voxel_width) >
                        cfg.tau_alpha)
                        dense.set(i, j, k);
        for (int k = 0; k < d.z; ++k)
            for (int j = 0; j < d.y; ++j)
                for (int i = 0; i < d.x; ++i) {
                    if (!g.at(i, j, k)) continue;
                    ++total;
                    bool near = false;
                    for (int dk = -1; dk <= 1 && !near; ++dk) {
                        const int kk = k + dk;
                        if (kk >= 0 && kk < d.z) near = dense.at(i, j, kk);
                    }
                    CHECK(near);
                }
        // The slab is opaque, so nothing below its first layer plus the skirt.
        for (int k = 0; k < 5; ++k)
            for (int j = 0; j < d.y; ++j)
                for (int i = 0; i < d.x; ++i) CHECK_FALSE(g.at(i, j, k));
    }
    CHECK(total > 0);
}

TEST_CASE("occupancy is a superset of every nonzero-density sample at tiny thresholds") {
    const auto fog = make_field([](const Vec3& p) {
        FieldSample s;
        const double r = norm(p - Vec3{1.0, 1.0, 0.5});
        s.sigma = r < 0.45 ? 0.3 : 0.0;
        return s;
    });
    const auto l = small_layout(2);
    auto cfg = small_config(16, 16);
    cfg.tau_w = cfg.tau_alpha = 1e-9;
    const auto rays = orbit_rays(12, 32);
    const auto occ = bake_occupancy(fog, l, 1, cfg, rays);
    std::vector<std::unique_ptr<FieldBlock>> blocks;
    std::vector<const RenderBlock*> views;
    for (const auto& id : l.blocks(1)) {
        blocks.push_back(std::make_unique<FieldBlock>(fog, id, BlockGeometry::make(l, id, 16, 16)));
        views.push_back(blocks.back().get());
    }
    int checked = 0, missing = 0;
    for (const Ray& r : rays)
        for (const auto& h : order_block_hits(r, views)) {
            const auto& g = h.block->geometry();
            const auto& grid = occ.at(h.block->id());
            for (const auto& s : h.block->samples(r, h.t0, h.t1, false)) {
                if (s.sigma <= 0.0) continue;
                const Vec3 p = r.at(s.t);
                const int i = std::clamp(int((p.x - g.box.lo.x) / g.voxel_width), 0, 15);
                const int j = std::clamp(int((p.y - g.box.lo.y) / g.voxel_width), 0, 15);
                const int k = std::clamp(int((p.z - g.box.lo.z) / g.voxel_width), 0, 15);
                ++checked;
                missing += !grid.at(i, j, k);
            }
        }
    CHECK(checked > 1000);
    CHECK(missing == 0);
}

TEST_CASE("ray budget subsamples evenly") {
    const auto sphere = make_field([](const Vec3& p) {
        FieldSample s;
        s.sigma = norm(p - Vec3{1, 1, 0.5}) < 0.4 ? 50.0 : 0.0;
        return s;
    });
    const auto l = small_layout(2);
    auto cfg = small_config(16, 16);
    const auto rays = orbit_rays();
    const auto full = bake_occupancy(sphere, l, 1, cfg, rays);
    cfg.ray_budget = 50;
    const auto sparse = bake_occupancy(sphere, l, 1, cfg, rays);
    std::size_t nf = 0, ns = 0;
    for (const auto& [id, g] : full) {
        nf += g.occupied_count();
        ns += sparse.at(id).occupied_count();
        for (std::size_t n = 0; n < g.cells.size(); ++n)
            if (sparse.at(id).cells[n]) CHECK(g.cells[n]);
    }
    CHECK(ns < nf);
    CHECK(ns > 0);
}

TEST_CASE("occupancy bake is independent of the worker count") {
    const auto sphere = make_field([](const Vec3& p) {
        FieldSample s;
        s.sigma = norm(p - Vec3{0.7, 1.2, 0.5}) < 0.35 ? 80.0 : 0.0;
        return s;
    });
    auto cfg = small_config(16, 16);
    const auto rays = orbit_rays();
    cfg.workers = 1;
    const auto a = bake_occupancy(sphere, small_layout(2), 1, cfg, rays);
    cfg.workers = 3;
    const auto b = bake_occupancy(sphere, small_layout(2), 1, cfg, rays);
    CHECK(a == b);
}

TEST_CASE("generate_lod preconditions") {
    FieldSample fs;
    fs.sigma = 5.0;
    const ConstantField f(fs);
    const auto one = small_layout(2, 1);
    const auto cfg = small_config(8, 8);
    std::vector<BlockAssets> kids;
    for (const auto& id : one.blocks(1)) {
        OccupancyGrid occ(BlockGeometry::make(one, id, 8, 8).voxel_dims);
        kids.push_back(bake_block(f, one, id, cfg, occ));
    }
    std::vector<const BlockAssets*> ptrs;
    for (const auto& k : kids) ptrs.push_back(&k);
    CHECK_THROWS(generate_lod(ptrs, f, one, cfg));  // no coarser level

    const auto two = small_layout(2, 2);
    CHECK_THROWS_AS(generate_lod(std::span(ptrs).first(3), f, two, cfg), InvalidArgument);
    std::vector<const BlockAssets*> dup{ptrs[0], ptrs[0], ptrs[1], ptrs[2]};
    CHECK_THROWS_AS(generate_lod(dup, f, two, cfg), InvalidArgument);
}

TEST_CASE("merging a constant field keeps it constant at half resolution") {
    FieldSample fs;
    fs.sigma = 5.0;
    fs.diffuse_pre = {0.3, -0.6, 1.2};
    const ConstantField f(fs);
    const auto l = small_layout(2, 2, 1.0, 2.0);
    const auto cfg = small_config(8, 8);
    std::vector<BlockAssets> kids;
    for (const auto& id : l.blocks(1)) {
        OccupancyGrid occ(BlockGeometry::make(l, id, 8, 8).voxel_dims);
        if (id.ix == 1 && id.iy == 0) occ.set(7, 3, 2);
        kids.push_back(bake_block(f, l, id, cfg, occ));
    }
    std::vector<const BlockAssets*> ptrs;
    for (const auto& k : kids) ptrs.push_back(&k);
    const BlockAssets p = generate_lod(ptrs, f, l, cfg);
    p.validate();
    CHECK(p.block == BlockId{2, 0, 0});
    CHECK(p.geometry.voxel_width == doctest::Approx(2 * kids[0].geometry.voxel_width));
    CHECK(p.occupancy.base().occupied_count() == 1);
    CHECK(p.occupancy.base().at(4 + 3, 1, 1));
    const Attributes a = query_attributes(p.geometry.texel_center(7, 1, 1), p);
    const Attributes b = query_attributes(kids[1].geometry.texel_center(7, 3, 2), kids[1]);
    CHECK(a.sigma == doctest::Approx(b.sigma).epsilon(1e-9));
    CHECK(a.diffuse.y == doctest::Approx(b.diffuse.y).epsilon(1e-9));
}

TEST_CASE("bake_scene on a 4x4 layout yields 16/4/1 blocks") {
    const auto sphere = make_field([](const Vec3& p) {
        FieldSample s;
        s.sigma = norm(p - Vec3{2, 2, 0.5}) < 0.5 ? 40.0 : 0.0;
        s.diffuse_pre = {1, 0, -1};
        return s;
    });
    BlockLayout l = small_layout(4, 3, 1.0, 2.0);
    auto cfg = small_config(16, 16);
    OrbitPath o;
    o.center = {2, 2};
    o.radius = 5;
    o.height = 2;
    o.count = 6;
    o.target = {2, 2, 0.5};
    o.width = o.height_px = 16;
    const auto cams = orbit_path(o);
    const auto rays = capture_rays(cams);
    const BakedScene s = bake_scene(sphere, l, cfg, rays);
    for (int lod = 1; lod <= 3; ++lod) {
        int n = 0;
        for (const auto& b : s.manifest.blocks) n += b.id.lod == lod;
        CHECK(n == 16 >> (2 * (lod - 1)));
    }
    CHECK(s.assets.size() == 21);
    CHECK(s.manifest.shader_groups.size() == 1);
    CHECK(s.manifest.policy.lod_thresholds.size() == 2);
    for (const auto& [id, a] : s.assets) {
        a->validate();
        const auto& mb = s.manifest.block(id);
        CHECK(mb.z_top >= l.z_min);
        CHECK(mb.z_top <= l.z_max);
        CHECK(mb.atlas_macroblocks == a->voxels.macroblock_count());
        if (a->occupancy.base().occupied_count() == 0) CHECK(mb.z_top == l.z_min);
    }
    // Coarse occupancy covers everything the children marked.
    for (const auto& id : l.blocks(2)) {
        const auto& parent = s.assets.at(id)->occupancy.base();
        for (const auto& c : l.children(id)) {
            const auto pooled = maxpool_occupancy(s.assets.at(c)->occupancy.base());
            const int ox = (c.ix - 2 * id.ix) * pooled.dims.x;
            const int oy = (c.iy - 2 * id.iy) * pooled.dims.y;
            for (int k = 0; k < pooled.dims.z; ++k)
                for (int j = 0; j < pooled.dims.y; ++j)
                    for (int i = 0; i < pooled.dims.x; ++i)
                        if (pooled.at(i, j, k)) CHECK(parent.at(ox + i, oy + j, k));
        }
    }

    const BakedScene g = bake_scene(sphere, l, cfg, rays, [](const BlockId& id) {
        return DeferredShaderWeights::random(std::uint64_t(id.lod * 100 + id.iy * 10 + id.ix), 0.05);
    });
    CHECK(g.manifest.shader_groups.size() == 21);
    CHECK(g.manifest.block({2, 1, 0}).shader_group == "lod2_1_0");
    CHECK(g.assets.at({2, 1, 0})->shader_group == "lod2_1_0");
}

TEST_CASE("occupancy soundness along capture rays") {
    const auto f = make_field([](const Vec3& p) {
        FieldSample s;
        s.sigma = 30.0 * std::max(0.0, 0.4 - norm(p - Vec3{1.2, 0.8, 0.45})) + (p.z < 0.15 ? 100.0 : 0.0);
        return s;
    });
    const auto l = small_layout(2);
    const auto cfg = small_config(16, 16);
    const auto rays = orbit_rays();
    const auto occ = bake_occupancy(f, l, 1, cfg, rays);
    std::vector<std::unique_ptr<FieldBlock>> blocks;
    std::vector<const RenderBlock*> views;
    for (const auto& id : l.blocks(1)) {
        blocks.push_back(std::make_unique<FieldBlock>(f, id, BlockGeometry::make(l, id, 16, 16)));
        views.push_back(blocks.back().get());
    }
    int retained = 0, missing = 0;
    for (std::size_t n = 0; n < rays.size(); n += 3) {
        const Ray& r = rays[n];
        double trans = 1.0;
        for (const auto& h : order_block_hits(r, views)) {
            const auto& g = h.block->geometry();
            for (const auto& s : h.block->samples(r, h.t0, h.t1, false)) {
                const double w = trans * s.alpha;
                if (w > cfg.tau_w && s.alpha > cfg.tau_alpha) {
                    const Vec3 p = r.at(s.t);
                    const int i = std::clamp(int(std::floor((p.x - g.box.lo.x) / g.voxel_width)), 0, 15);
                    const int j = std::clamp(int(std::floor((p.y - g.box.lo.y) / g.voxel_width)), 0, 15);
                    const int k = std::clamp(int(std::floor((p.z - g.box.lo.z) / g.voxel_width)), 0, 15);
                    ++retained;
                    missing += !occ.at(h.block->id()).at(i, j, k);
                }
                trans *= 1.0 - s.alpha;
            }
        }
    }
    CHECK(retained > 100);
    CHECK(missing == 0);
}
