#include <doctest.h>

#include <random>

#include "blockrf/error.hpp"
#include "blockrf/field.hpp"
#include "blockrf/render.hpp"
#include "test_support.hpp"

using namespace blockrf;
using blockrf::testing::make_field;
using blockrf::testing::small_layout;

namespace {

SamplePoint sample(double t, Vec3 c, double alpha) {
    SamplePoint s;
    s.t = t;
    s.color = c;
    s.alpha = alpha;
    return s;
}

// Plain front-to-back loop over (alpha, color) pairs.
std::pair<Vec3, double> hand_composite(const std::vector<SamplePoint>& s) {
    Vec3 c;
    double a = 0.0, trans = 1.0;
    for (const auto& p : s) {
        c += p.color * (trans * p.alpha);
        a += trans * p.alpha;
        trans *= 1.0 - p.alpha;
    }
    return {c, a};
}

struct FieldScene {
    BlockLayout layout;
    std::vector<std::unique_ptr<FieldBlock>> blocks;
    std::vector<const RenderBlock*> views;
};

template <class F>
FieldScene field_scene(const F& field, const BlockLayout& layout, int res) {
    FieldScene s;
    s.layout = layout;
    for (const auto& id : layout.blocks(1)) {
        s.blocks.push_back(std::make_unique<FieldBlock>(
            field, id, BlockGeometry::make(layout, id, res, res)));
        s.views.push_back(s.blocks.back().get());
    }
    return s;
}

FieldSample blob(const Vec3& p) {
    FieldSample s;
    const double r2 = (p.x - 1.1) * (p.x - 1.1) + (p.y - 0.9) * (p.y - 0.9) + (p.z - 0.5) * (p.z - 0.5);
    s.sigma = 12.0 * std::exp(-4.0 * r2) + 2.0 * (p.z < 0.2);
    s.diffuse_pre = {3 * p.x - 2, 1 - 2 * p.y, p.z};
    s.feature_pre = {p.x, p.y, -p.z, 0.5};
    return s;
}

}  // namespace

TEST_CASE("empty samples give the zero segment") {
    const auto r = accumulate_samples({});
    CHECK(r.alpha == 0.0);
    CHECK(r.diffuse == Vec3{});
}

TEST_CASE("single opaque sample") {
    const std::vector<SamplePoint> s{sample(0.5, {1, 0.5, 0}, 1.0)};
    const auto r = accumulate_samples(s);
    CHECK(r.diffuse == Vec3{1, 0.5, 0});
    CHECK(r.alpha == 1.0);
}

TEST_CASE("two half-transparent samples by hand") {
    const std::vector<SamplePoint> s{sample(0.5, {1, 0, 0}, 0.5), sample(1.5, {0, 1, 0}, 0.5)};
    const auto r = accumulate_samples(s);
    CHECK(r.diffuse.x == doctest::Approx(0.5));
    CHECK(r.diffuse.y == doctest::Approx(0.25));
    CHECK(r.diffuse.z == 0.0);
    CHECK(r.alpha == doctest::Approx(0.75));
}

TEST_CASE("sample alpha") {
    CHECK(sample_alpha(0.0, 0.1) == 0.0);
    CHECK(sample_alpha(2.0, 0.5) == doctest::Approx(1.0 - std::exp(-1.0)));
}

TEST_CASE("segmented integration equals the monolithic integral") {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> kdist(1, 8), ndist(0, 32);
    double worst = 0.0;
    for (int trial = 0; trial < 10000; ++trial) {
        std::vector<SamplePoint> all;
        std::vector<RaySegmentResult> segs;
        double t = 0.0;
        const int k = kdist(rng);
        for (int b = 0; b < k; ++b) {
            std::vector<SamplePoint> run;
            const int n = ndist(rng);
            for (int i = 0; i < n; ++i) {
                t += 0.01 + u(rng);
                run.push_back(sample(t, {u(rng), u(rng), u(rng)}, u(rng) * 0.999));
            }
            segs.push_back(accumulate_samples(run));
            all.insert(all.end(), run.begin(), run.end());
        }
        const auto comp = composite_blocks(segs);
        const auto mono = render_monolithic(all);
        const auto [hc, ha] = hand_composite(all);
        for (int c = 0; c < 3; ++c) {
            worst = std::max(worst, std::abs(comp.color[c] - mono.diffuse[c]));
            worst = std::max(worst, std::abs(hc[c] - mono.diffuse[c]));
        }
        worst = std::max({worst, std::abs(comp.alpha - mono.alpha), std::abs(ha - mono.alpha)});
    }
    CHECK(worst <= 1e-5);
}

TEST_CASE("segment opacity equals one minus the transmittance product") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 10000; ++trial) {
        std::vector<SamplePoint> s;
        double prod = 1.0;
        const int n = 1 + int(u(rng) * 32);
        for (int i = 0; i < n; ++i) {
            const double a = u(rng);
            s.push_back(sample(i, {u(rng), u(rng), u(rng)}, a));
            prod *= 1.0 - a;
        }
        CHECK(std::abs((1.0 - accumulate_samples(s).alpha) - prod) <= 1e-6);
    }
}

TEST_CASE("swapping two segments changes the result") {
    const std::vector<SamplePoint> a{sample(0, {0.9, 0.1, 0.1}, 0.6)};
    const std::vector<SamplePoint> b{sample(1, {0.1, 0.1, 0.9}, 0.7)};
    const std::vector<RaySegmentResult> ab{accumulate_samples(a), accumulate_samples(b)};
    const std::vector<RaySegmentResult> ba{ab[1], ab[0]};
    const auto x = composite_blocks(ab), y = composite_blocks(ba);
    CHECK(std::abs(x.color.x - y.color.x) > 0.05);
    CHECK(x.alpha == doctest::Approx(y.alpha));
}

TEST_CASE("early termination changes each channel by at most the cutoff") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 2000; ++trial) {
        std::vector<SamplePoint> s;
        for (int i = 0; i < 64; ++i) s.push_back(sample(i, {u(rng), u(rng), u(rng)}, u(rng) * 0.5));
        const auto full = accumulate_samples(s, 0.0);
        const auto cut = accumulate_samples(s, kDefaultTermination);
        for (int c = 0; c < 3; ++c) CHECK(std::abs(full.diffuse[c] - cut.diffuse[c]) <= kDefaultTermination);
        CHECK(std::abs(full.alpha - cut.alpha) <= kDefaultTermination);
    }
}

TEST_CASE("energy bound: colors never exceed opacity") {
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 2000; ++trial) {
        std::vector<SamplePoint> s;
        for (int i = 0; i < 20; ++i) s.push_back(sample(i, {u(rng), u(rng), u(rng)}, u(rng)));
        const auto r = render_monolithic(s);
        CHECK(r.alpha >= 0.0);
        CHECK(r.alpha <= 1.0 + 1e-12);
        for (int c = 0; c < 3; ++c) CHECK(r.diffuse[c] <= r.alpha + 1e-6);
    }
}

TEST_CASE("monolithic oracle rejects unsorted samples") {
    const std::vector<SamplePoint> s{sample(1.0, {}, 0.1), sample(0.5, {}, 0.1)};
    CHECK_THROWS_AS(render_monolithic(s), InvalidArgument);
    const std::vector<SamplePoint> one{sample(0.0, {0.2, 0.3, 0.4}, 1.0)};
    CHECK(render_monolithic(one).diffuse == Vec3{0.2, 0.3, 0.4});
}

TEST_CASE("intersect_box") {
    const Box3 b{{0, 0, 0}, {1, 1, 1}};
    Ray r;
    r.origin = {-1, 0.5, 0.5};
    r.dir = {1, 0, 0};
    const auto h = intersect_box(r, b);
    REQUIRE(h);
    CHECK(h->first == doctest::Approx(1.0));
    CHECK(h->second == doctest::Approx(2.0));
    r.origin = {-1, 1.5, 0.5};
    CHECK_FALSE(intersect_box(r, b));
}

TEST_CASE("marching a zero-density block or missing it gives the zero segment") {
    const auto zero = make_field([](const Vec3&) { return FieldSample{}; });
    const auto l = small_layout(1);
    const FieldBlock fb(zero, {1, 0, 0}, BlockGeometry::make(l, {1, 0, 0}, 16, 16));
    Ray r;
    r.origin = {-1, 0.5, 0.5};
    r.dir = {1, 0, 0};
    const auto seg = fb.march(r, 1.0, 2.0, {});
    CHECK(seg.alpha == 0.0);
    CHECK(seg.diffuse == Vec3{});

    const std::vector<const RenderBlock*> views{&fb};
    r.origin = {-1, 3, 0.5};
    CHECK(order_block_hits(r, views).empty());
    RenderOptions ro;
    ro.background = {0.1, 0.2, 0.3};
    CHECK(render_ray(r, views, ro).color == Vec3{0.1, 0.2, 0.3});
}

TEST_CASE("lattice sits at half steps from the entry point") {
    const auto l = small_layout(1);
    const auto f = make_field([](const Vec3&) {
        FieldSample s;
        s.sigma = 1.0;
        return s;
    });
    const FieldBlock fb(f, {1, 0, 0}, BlockGeometry::make(l, {1, 0, 0}, 8, 8));
    Ray r;
    r.origin = {-1, 0.5, 0.5};
    r.dir = {1, 0, 0};
    const auto s = fb.samples(r, 1.0, 2.0, false);
    REQUIRE(s.size() == 8);
    for (int i = 0; i < 8; ++i) CHECK(s[i].t == doctest::Approx(1.0 + (i + 0.5) / 8));
}

TEST_CASE("block order uses xy center distance with (lod, iy, ix) ties") {
    const auto l = small_layout(2);
    const auto zero = make_field([](const Vec3&) { return FieldSample{}; });
    auto scene = field_scene(zero, l, 8);
    Ray r;
    r.origin = {1.0, -1.0, 0.5};
    r.dir = normalize(Vec3{0, 1, 0});
    auto hits = order_block_hits(r, scene.views);
    REQUIRE(hits.size() == 4);  // the ray runs along the shared x = 1 boundary
    CHECK(hits[0].block->id() == BlockId{1, 0, 0});
    CHECK(hits[1].block->id() == BlockId{1, 1, 0});
    CHECK(hits[2].block->id() == BlockId{1, 0, 1});
    CHECK(hits[3].block->id() == BlockId{1, 1, 1});

    // Near-vertical rays order by entry t.
    r.origin = {0.5, 0.5, 5.0};
    r.dir = {0, 0, -1};
    hits = order_block_hits(r, scene.views);
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].block->id() == BlockId{1, 0, 0});
}

TEST_CASE("Lambertian render matches the monolithic integral over the same samples") {
    const auto l = small_layout(2);
    const auto f = make_field(blob);
    auto scene = field_scene(f, l, 16);
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    RenderOptions ro;
    ro.termination = 0.0;
    for (int n = 0; n < 300; ++n) {
        Ray r;
        const double ang = 2 * 3.14159265358979 * u(rng);
        r.origin = {1 + 3 * std::cos(ang), 1 + 3 * std::sin(ang), 0.2 + 0.6 * u(rng)};
        const Vec3 target{0.2 + 1.6 * u(rng), 0.2 + 1.6 * u(rng), u(rng)};
        r.dir = normalize(target - r.origin);
        std::vector<SamplePoint> merged;
        for (const auto& h : order_block_hits(r, scene.views)) {
            const auto s = h.block->samples(r, h.t0, h.t1, false);
            merged.insert(merged.end(), s.begin(), s.end());
        }
        std::stable_sort(merged.begin(), merged.end(),
                         [](const SamplePoint& a, const SamplePoint& b) { return a.t < b.t; });
        const auto mono = render_monolithic(merged);
        const RayColor got = render_ray(r, scene.views, ro);
        for (int c = 0; c < 3; ++c) CHECK(std::abs(got.foreground[c] - mono.diffuse[c]) <= 1e-5);
        CHECK(std::abs(got.alpha - mono.alpha) <= 1e-5);
    }
}

TEST_CASE("an occluding near block makes the far block irrelevant") {
    const auto l = small_layout(2);
    // Opaque wall filling block (0, 0); block (1, 0) holds colored fog.
    const auto f = make_field([](const Vec3& p) {
        FieldSample s;
        s.sigma = p.x < 1.0 ? 5000.0 : 3.0;
        s.diffuse_pre = {p.x < 1.0 ? 2.0 : -2.0, 0.0, 1.0};
        return s;
    });
    auto scene = field_scene(f, l, 16);
    const std::vector<const RenderBlock*> near_only{scene.views[0]};
    const std::vector<const RenderBlock*> both{scene.views[0], scene.views[1]};
    for (double y : {0.1, 0.4, 0.77}) {
        Ray r;
        r.origin = {-0.5, y, 0.5};
        r.dir = normalize(Vec3{1, 0.1, 0.05});
        CHECK(render_ray(r, near_only).color == render_ray(r, both).color);
    }
}

TEST_CASE("post-composite shading applies the network once") {
    const auto l = small_layout(2);
    const auto f = make_field(blob);
    auto scene = field_scene(f, l, 8);
    auto w = DeferredShaderWeights::zeros();
    w.layers[2].bias = {0.1f, -0.05f, 0.2f};
    RenderOptions ro;
    ro.mode = ShadingMode::PostComposite;
    ro.post_weights = &w;
    ro.termination = 0.0;
    Ray r;
    r.origin = {-1, 0.3, 0.5};
    r.dir = normalize(Vec3{1, 0.4, 0});
    RenderOptions plain = ro;
    plain.post_weights = nullptr;
    const auto a = render_ray(r, scene.views, ro);
    const auto b = render_ray(r, scene.views, plain);
    for (int c = 0; c < 3; ++c)
        CHECK(a.foreground[c] == doctest::Approx(std::clamp(b.foreground[c] + w.layers[2].bias[c], 0.0, 1.0)));
}

TEST_CASE("1x1 frame missing the scene is background") {
    const auto zero = make_field([](const Vec3&) { return FieldSample{}; });
    auto scene = field_scene(zero, small_layout(1), 8);
    const auto cam = PinholeCamera::look_at({5, 5, 5}, {10, 10, 10}, {0, 0, 1}, 40, 1, 1);
    RenderOptions ro;
    ro.background = {0.25, 0.5, 0.75};
    const auto fb = render_frame(cam, scene.views, ro);
    CHECK(fb.at(0, 0).x == doctest::Approx(0.25));
    CHECK(fb.at(0, 0).z == doctest::Approx(0.75));
    CHECK(fb.alpha[0] == 0.0f);
    PinholeCamera bad = cam;
    bad.width = 0;
    CHECK_THROWS_AS(render_frame(bad, scene.views, ro), InvalidArgument);
}

TEST_CASE("solid cube projects to its color") {
    const Box3 cube{{0.75, 0.75, 0.25}, {1.25, 1.25, 0.75}};
    const double albedo = 0.8;
    const auto f = make_field([&](const Vec3& p) {
        FieldSample s;
        if (cube.contains(p)) s.sigma = 1e4;
        s.diffuse_pre = {logit(albedo), logit(0.3), logit(0.1)};
        return s;
    });
    auto scene = field_scene(f, small_layout(2), 32);
    const auto cam = PinholeCamera::look_at({3.5, 2.5, 1.5}, {1, 1, 0.5}, {0, 0, 1}, 40, 48, 36);
    RenderOptions ro;
    ro.background = {0, 0, 1};
    ro.workers = 2;
    const auto fb = render_frame(cam, scene.views, ro);
    const double shrink = 0.08;  // keep away from the silhouette
    const Box3 inner{cube.lo + Vec3{shrink, shrink, shrink}, cube.hi - Vec3{shrink, shrink, shrink}};
    const Box3 outer{cube.lo - Vec3{shrink, shrink, shrink}, cube.hi + Vec3{shrink, shrink, shrink}};
    int covered = 0;
    for (int y = 0; y < fb.height; ++y)
        for (int x = 0; x < fb.width; ++x) {
            const Ray r = cam.pixel_ray(x + 0.5, y + 0.5);
            const Vec3 c = fb.at(x, y);
            if (intersect_box(r, inner)) {
                ++covered;
                CHECK(c.x == doctest::Approx(albedo).epsilon(1e-3));
                CHECK(c.y == doctest::Approx(0.3).epsilon(1e-3));
            } else if (!intersect_box(r, outer)) {
                CHECK(c == Vec3{0, 0, 1});
            }
        }
    CHECK(covered > 20);

    ro.workers = 1;
    const auto again = render_frame(cam, scene.views, ro);
    CHECK(again == fb);
}

TEST_CASE("psnr examples") {
    Framebuffer a(4, 3), b(4, 3);
    CHECK(psnr(a, b) == kPsnrCap);
    std::fill(b.rgb.begin(), b.rgb.end(), 1.0f);
    CHECK(psnr(a, b) == doctest::Approx(0.0));
    std::fill(b.rgb.begin(), b.rgb.end(), 0.1f);
    CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-5));
    CHECK_THROWS_AS(psnr(a, Framebuffer(3, 4)), InvalidArgument);
    const auto d = image_diff(a, b);
    CHECK(d.mean_abs == doctest::Approx(0.1));
}

TEST_CASE("camera frames and serialization") {
    const auto cam = PinholeCamera::look_at({2, -3, 4}, {0.5, 0.5, 0}, {0, 0, 1}, 50, 64, 48);
    const Mat3 rtr = cam.rotation.transposed() * cam.rotation;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) CHECK(std::abs(rtr.m[i][j] - (i == j)) <= 1e-9);
    const Ray center = cam.pixel_ray(32, 24);
    CHECK(norm(center.dir - normalize(Vec3{0.5, 0.5, 0} - Vec3{2, -3, 4})) <= 1e-9);
    CHECK(cam.to_camera({0.5, 0.5, 0}).z < 0.0);

    const auto back = camera_from_json(camera_to_json(cam));
    CHECK(back.position == cam.position);
    CHECK(back.fx == cam.fx);
    CHECK(back.width == 64);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) CHECK(back.rotation.m[i][j] == doctest::Approx(cam.rotation.m[i][j]));
    CHECK_THROWS_AS(camera_from_json("{\"position\": 3}"), FormatError);

    const auto half = cam.resized(32, 24);
    CHECK(norm(half.pixel_ray(16, 12).dir - center.dir) <= 1e-12);
}

TEST_CASE("image files round trip") {
    blockrf::testing::TempDir dir("img");
    Framebuffer fb(5, 3);
    for (std::size_t i = 0; i < fb.rgb.size(); ++i) fb.rgb[i] = float(i) / float(fb.rgb.size());
    std::fill(fb.alpha.begin(), fb.alpha.end(), 1.0f);
    write_image(fb, dir.path() / "a.pfm");
    CHECK(read_image(dir.path() / "a.pfm").rgb == fb.rgb);
    write_image(fb, dir.path() / "a.png");
    const auto png = read_image(dir.path() / "a.png");
    CHECK(png.width == 5);
    CHECK(image_diff(png, fb).max_abs <= 0.5 / 255 + 1e-6);
    CHECK_THROWS(read_image(dir.path() / "missing.png"));
}

TEST_CASE("clipping to the occupied region leaves skip marching unchanged") {
    const SceneSpec spec = blockrf::testing::small_scene_spec();
    const BakedScene scene = blockrf::testing::bake_spec(spec);
    const auto cams = orbit_path(spec.camera_path);
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int marched = 0;
    for (const auto& [id, assets] : scene.assets) {
        const BakedBlock block(assets, nullptr);
        const AttributeSampler sampler(*assets);
        const auto region = assets->occupied_region();
        for (int n = 0; n < 400; ++n) {
            // from a capture pose towards a random point of the block
            const Box3& box = assets->geometry.box;
            const Vec3 target{box.lo.x + u(rng) * (box.hi.x - box.lo.x),
                              box.lo.y + u(rng) * (box.hi.y - box.lo.y),
                              box.lo.z + u(rng) * (box.hi.z - box.lo.z)};
            Ray ray;
            ray.origin = cams[n % cams.size()].position;
            ray.dir = normalize(target - ray.origin);
            const auto hit = intersect_box(ray, assets->geometry.box);
            if (!hit) continue;
            const RaySegmentResult plain = march_lattice(ray, hit->first, hit->second, assets->geometry,
                                                         sampler, &assets->occupancy, kDefaultTermination);
            const RaySegmentResult clipped = block.march(ray, hit->first, hit->second, {});
            CHECK(clipped.alpha == plain.alpha);
            CHECK(clipped.diffuse == plain.diffuse);
            CHECK(clipped.entry_t == plain.entry_t);
            const auto a = collect_lattice(ray, hit->first, hit->second, assets->geometry, sampler,
                                           &assets->occupancy);
            const auto b = block.samples(ray, hit->first, hit->second, true);
            REQUIRE(a.size() == b.size());
            for (std::size_t i = 0; i < a.size(); ++i) {
                CHECK(a[i].t == b[i].t);
                if (region) CHECK(region->contains(ray.at(a[i].t)));
            }
            ++marched;
        }
    }
    CHECK(marched == 400 * int(scene.assets.size()));
}

TEST_CASE("occupied region") {
    BlockAssets a;
    a.geometry = BlockGeometry::make(small_layout(1, 1), {1, 0, 0}, 16, 16);
    a.occupancy = OccupancyPyramid::build(OccupancyGrid(a.geometry.voxel_dims), 3);
    CHECK_FALSE(a.occupied_region().has_value());
    OccupancyGrid g(a.geometry.voxel_dims);
    g.set(2, 3, 4);
    g.set(5, 3, 1);
    a.occupancy = OccupancyPyramid::build(g, 3);
    const auto r = a.occupied_region();
    REQUIRE(r);
    const double w = 1.0 / 16;
    CHECK(r->lo.x == doctest::Approx(1.5 * w));
    CHECK(r->hi.x == doctest::Approx(6.5 * w));
    CHECK(r->lo.y == doctest::Approx(2.5 * w));
    CHECK(r->hi.y == doctest::Approx(4.5 * w));
    CHECK(r->lo.z == doctest::Approx(0.5 * w));
    CHECK(r->hi.z == doctest::Approx(5.5 * w));

    // a ray through empty space inside the block marches nothing
    const BakedBlock block(std::make_shared<BlockAssets>(a), nullptr);
    Ray ray;
    ray.origin = {-1.0, 0.9, 0.9};
    ray.dir = {1.0, 0.0, 0.0};
    const RaySegmentResult seg = block.march(ray, 1.0, 2.0, {});
    CHECK(seg.alpha == 0.0);
    CHECK(seg.entry_t == 1.0);
    CHECK(seg.block == BlockId{1, 0, 0});
}
