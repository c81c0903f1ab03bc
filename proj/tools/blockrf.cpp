// blockrf: synth -> bake -> lod -> render/verify -> serve/plan
#include <pthread.h>
#include <signal.h>

#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "blockrf/asset_io.hpp"
#include "blockrf/bake.hpp"
#include "blockrf/error.hpp"
#include "blockrf/framebuffer.hpp"
#include "blockrf/image_io.hpp"
#include "blockrf/lod_policy.hpp"
#include "blockrf/render.hpp"
#include "blockrf/residency.hpp"
#include "blockrf/scene_spec.hpp"
#include "blockrf/server.hpp"
#include "blockrf/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace blockrf;

namespace {

enum ExitCode { kOk = 0, kVerifyFailed = 1, kUsage = 2, kIo = 3 };

bool g_json = false;

void emit(const json& j, const std::string& human) {
    if (g_json) std::cout << j.dump(2) << "\n";
    else std::cout << human;
}

json block_json(const BlockId& id) { return {{"lod", id.lod}, {"ix", id.ix}, {"iy", id.iy}}; }

json ids_json(const std::vector<BlockId>& ids) {
    json a = json::array();
    for (const auto& id : ids) a.push_back(block_json(id));
    return a;
}

std::vector<const RenderBlock*> views(const std::vector<std::unique_ptr<RenderBlock>>& owned) {
    std::vector<const RenderBlock*> v;
    for (const auto& b : owned) v.push_back(b.get());
    return v;
}

std::pair<std::string, int> parse_addr(const std::string& addr) {
    const auto colon = addr.rfind(':');
    if (colon == std::string::npos) throw InvalidArgument("--addr must be host:port");
    try {
        return {addr.substr(0, colon), std::stoi(addr.substr(colon + 1))};
    } catch (const std::exception&) {
        throw InvalidArgument("--addr must be host:port");
    }
}

// ---- synth -------------------------------------------------------------------------

struct SynthArgs {
    std::string spec;
    std::string preview;
    std::string cameras;
    int pose = 0;
};

int run_synth(const SynthArgs& a) {
    const SceneSpec spec = SceneSpec::load(a.spec);
    const auto field = build_field(spec);
    const auto poses = orbit_path(spec.camera_path);
    json out = {{"primitives", spec.primitives.size()},
                {"blocks", spec.layout.block_count(1)},
                {"lod_count", spec.layout.lod_count},
                {"poses", poses.size()}};
    std::string human = "scene: " + std::to_string(spec.primitives.size()) + " primitives, " +
                        std::to_string(poses.size()) + " capture poses\n";
    if (!a.preview.empty()) {
        if (a.pose < 0 || a.pose >= int(poses.size()))
            throw InvalidArgument("--pose must index the capture path");
        std::vector<std::unique_ptr<RenderBlock>> owned;
        for (const auto& id : spec.layout.blocks(1))
            owned.push_back(std::make_unique<FieldBlock>(
                *field, id,
                BlockGeometry::make(spec.layout, id, spec.bake.voxel_res, spec.bake.triplane_res)));
        RenderOptions ro;
        ro.background = spec.background;
        ro.workers = spec.bake.workers;
        write_image(render_frame(poses[std::size_t(a.pose)], views(owned), ro), a.preview);
        out["preview"] = a.preview;
        human += "preview written to " + a.preview + "\n";
    }
    if (!a.cameras.empty()) {
        fs::create_directories(a.cameras);
        json files = json::array();
        for (std::size_t i = 0; i < poses.size(); ++i) {
            char name[32];
            std::snprintf(name, sizeof name, "pose_%03zu.json", i);
            save_camera(poses[i], fs::path(a.cameras) / name);
            files.push_back((fs::path(a.cameras) / name).string());
        }
        out["cameras"] = files;
        human += std::to_string(poses.size()) + " camera files written to " + a.cameras + "\n";
    }
    emit(out, human);
    return kOk;
}

// ---- bake / lod --------------------------------------------------------------------

struct BakeArgs {
    std::string scene;
    std::string out;
    std::optional<int> voxel_res, triplane_res, lods, ray_budget, workers;
    std::optional<double> tau_w, tau_a, plane_share;
};

json bake_summary(const SceneManifest& m) {
    json lods = json::array();
    for (int l = 1; l <= m.layout.lod_count; ++l) {
        std::uint64_t bytes = 0;
        int macro = 0;
        for (const auto& id : m.layout.blocks(l)) {
            bytes += m.block(id).total_bytes();
            macro += m.block(id).atlas_macroblocks;
        }
        lods.push_back({{"lod", l},
                        {"blocks", m.layout.block_count(l)},
                        {"bytes", bytes},
                        {"macroblocks", macro}});
    }
    return lods;
}

std::string summary_text(const json& lods) {
    std::string s;
    for (const auto& l : lods)
        s += "lod " + std::to_string(l["lod"].get<int>()) + ": " +
             std::to_string(l["blocks"].get<int>()) + " blocks, " +
             std::to_string(l["bytes"].get<std::uint64_t>()) + " bytes, " +
             std::to_string(l["macroblocks"].get<int>()) + " macroblocks\n";
    return s;
}

int run_bake(const BakeArgs& a) {
    SceneSpec spec = SceneSpec::load(a.scene);
    BakeConfig& cfg = spec.bake;
    if (a.voxel_res) cfg.voxel_res = *a.voxel_res;
    if (a.triplane_res) cfg.triplane_res = *a.triplane_res;
    if (a.tau_w) cfg.tau_w = *a.tau_w;
    if (a.tau_a) cfg.tau_alpha = *a.tau_a;
    if (a.plane_share) cfg.plane_share = *a.plane_share;
    if (a.ray_budget) cfg.ray_budget = *a.ray_budget;
    if (a.workers) cfg.workers = *a.workers;
    if (a.lods) spec.layout.lod_count = *a.lods;
    spec.validate();

    const auto field = build_field(spec);
    const auto poses = orbit_path(spec.camera_path);
    const auto rays = capture_rays(poses);
    BakedScene scene = bake_scene(*field, spec.layout, cfg, rays);
    scene.manifest.background = spec.background;
    const SceneManifest m = export_assets(scene, a.out);
    const json lods = bake_summary(m);
    emit({{"root", a.out}, {"rays", rays.size()}, {"lods", lods}},
         "baked " + std::to_string(m.blocks.size()) + " blocks into " + a.out + "\n" +
             summary_text(lods));
    return kOk;
}

struct LodArgs {
    std::string root;
    std::string scene;
    std::optional<int> lods;
};

int run_lod(const LodArgs& a) {
    const SceneSpec spec = SceneSpec::load(a.scene);
    const SceneManifest old = SceneManifest::load(fs::path(a.root) / "manifest.json");
    BakedScene scene;
    scene.manifest.layout = old.layout;
    scene.manifest.bake = old.bake;
    scene.manifest.background = old.background;
    scene.manifest.policy.memory_budget = old.policy.memory_budget;
    if (a.lods) scene.manifest.layout.lod_count = *a.lods;
    scene.manifest.layout.validate();
    scene.manifest.policy.lod_thresholds = default_lod_thresholds(scene.manifest.layout);
    for (const auto& id : old.layout.blocks(1)) {
        scene.assets[id] = import_block(a.root, old, id);
        const auto& group = old.block(id).shader_group;
        scene.manifest.shader_groups[group] = old.shader_groups.at(group);
        auto& e = scene.manifest.upsert(id);
        e = old.block(id);
    }
    // Coarser blocks keep their stored groups when the old manifest had them.
    for (int l = 2; l <= scene.manifest.layout.lod_count; ++l)
        for (const auto& id : scene.manifest.layout.blocks(l))
            if (const auto* b = old.find(id)) {
                scene.manifest.shader_groups[b->shader_group] = old.shader_groups.at(b->shader_group);
                scene.manifest.upsert(id).shader_group = b->shader_group;
            }
    const auto field = build_field(spec);
    const auto rays = capture_rays(orbit_path(spec.camera_path));
    rebuild_lods(scene, *field, rays);
    // Directories of LODs that no longer exist would linger; remove them.
    for (int l = scene.manifest.layout.lod_count + 1; l <= old.layout.lod_count; ++l)
        fs::remove_all(fs::path(a.root) / ("lod" + std::to_string(l)));
    const SceneManifest m = export_assets(scene, a.root);
    const json lods = bake_summary(m);
    emit({{"root", a.root}, {"lods", lods}}, summary_text(lods));
    return kOk;
}

// ---- render ------------------------------------------------------------------------

struct RenderArgs {
    std::string root;
    std::string camera;
    std::string out;
    int lod = 1;
    bool plan = false;
    bool no_skip = false;
    std::string mode = "per-block";
    int width = 0, height = 0, workers = 0;
    std::vector<double> background;
};

int run_render(const RenderArgs& a) {
    PinholeCamera cam = load_camera(a.camera);
    if (a.width > 0 || a.height > 0) {
        if (a.width <= 0 || a.height <= 0) throw InvalidArgument("--width and --height go together");
        cam = cam.resized(a.width, a.height);
    }
    const SceneManifest manifest = SceneManifest::load(fs::path(a.root) / "manifest.json");
    std::vector<BlockId> ids;
    if (a.plan) {
        ids = select_lod(cam, manifest).ids();
    } else {
        if (a.lod < 1 || a.lod > manifest.layout.lod_count)
            throw InvalidArgument("--lod outside 1.." + std::to_string(manifest.layout.lod_count));
        ids = manifest.layout.blocks(a.lod);
    }
    BakedScene scene;
    scene.manifest = manifest;
    for (const auto& id : ids) scene.assets[id] = import_block(a.root, manifest, id);
    const auto owned = scene.render_blocks(ids);

    RenderOptions ro;
    ro.occupancy_skip = !a.no_skip;
    ro.background = manifest.background;
    if (!a.background.empty()) ro.background = {a.background[0], a.background[1], a.background[2]};
    ro.workers = a.workers;
    std::optional<DeferredShaderWeights> post;
    if (a.mode == "post") {
        ro.mode = ShadingMode::PostComposite;
        // one shared network: the coarsest block's group stands for the scene
        post = manifest.shader(manifest.layout.blocks(manifest.layout.lod_count).front());
        ro.post_weights = &*post;
    } else if (a.mode != "per-block") {
        throw InvalidArgument("--mode must be per-block or post");
    }
    const Framebuffer fb = render_frame(cam, views(owned), ro);
    write_image(fb, a.out);
    emit({{"out", a.out}, {"blocks", ids_json(ids)}, {"width", fb.width}, {"height", fb.height}},
         "rendered " + std::to_string(ids.size()) + " blocks to " + a.out + "\n");
    return kOk;
}

// ---- verify ------------------------------------------------------------------------

struct VerifyArgs {
    std::string root;
    std::string scene;
    int trials = 1000;
    std::uint64_t seed = 1;
    int poses = 4;
    int workers = 0;
};

int run_verify(const VerifyArgs& a) {
    const SceneSpec spec = SceneSpec::load(a.scene);
    VerifyOptions vo;
    vo.trials = a.trials;
    vo.seed = a.seed;
    vo.skip_poses = a.poses;
    vo.workers = a.workers;
    const VerifyReport r = verify_assets(a.root, spec, vo);
    if (g_json) {
        std::cout << r.to_json();
    } else {
        for (const auto& s : r.suites)
            std::cout << (s.passed ? "PASS " : "FAIL ") << s.name << " max_error=" << s.max_error
                      << " tolerance=" << s.tolerance
                      << (s.detail.empty() ? "" : " (" + s.detail + ")") << "\n";
    }
    return r.passed() ? kOk : kVerifyFailed;
}

// ---- serve / plan ------------------------------------------------------------------

int run_serve(const std::string& root, const std::string& addr) {
    const auto [host, port] = parse_addr(addr);
    AssetServer server(root);
    // Block the stop signals before the server thread starts so only sigwait sees them.
    sigset_t stop_signals;
    sigemptyset(&stop_signals);
    sigaddset(&stop_signals, SIGINT);
    sigaddset(&stop_signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);
    const int bound = server.start(host, port);
    emit({{"root", root}, {"host", host}, {"port", bound}},
         "serving " + root + " on " + host + ":" + std::to_string(bound) + "\n");
    std::cout.flush();
    int sig = 0;
    sigwait(&stop_signals, &sig);
    server.stop();
    return kOk;
}

struct PlanArgs {
    std::string root;
    std::string camera;
    std::optional<std::uint64_t> budget;
};

json plan_json(const RenderPlan& p, const SceneManifest& m) {
    json blocks = json::array();
    for (const auto& b : p.blocks) {
        json j = block_json(b.id);
        j["xy_distance"] = b.xy_distance;
        j["distance"] = b.distance;
        j["bytes"] = m.block(b.id).total_bytes();
        j["path"] = m.block(b.id).directory();
        blocks.push_back(j);
    }
    return {{"blocks", blocks},
            {"load", ids_json(p.load)},
            {"evict", ids_json(p.evict)},
            {"degraded", ids_json(p.degraded)},
            {"dropped", ids_json(p.dropped)}};
}

int run_plan(const PlanArgs& a) {
    const SceneManifest manifest = SceneManifest::load(fs::path(a.root) / "manifest.json");
    const auto bytes = read_file(a.camera);
    json cj;
    try {
        cj = json::parse(bytes.begin(), bytes.end());
    } catch (const json::exception& e) {
        throw FormatError(a.camera + ": " + e.what());
    }
    std::vector<PinholeCamera> cams;
    const bool sequence = cj.is_array();
    if (sequence)
        for (const auto& c : cj) cams.push_back(camera_from_json(c.dump()));
    else
        cams.push_back(camera_from_json(cj.dump()));

    LoadingPlanner planner(manifest, a.budget.value_or(manifest.policy.memory_budget));
    json steps = json::array();
    for (const auto& cam : cams) {
        const RenderPlan p = planner.step(cam);
        json j = plan_json(p, manifest);
        j["resident_bytes"] = planner.resident().total_bytes();
        steps.push_back(j);
    }
    json out = sequence ? json{{"budget", planner.resident().budget}, {"steps", steps}}
                        : steps[0];
    if (!sequence) out["budget"] = planner.resident().budget;
    // plan output is for harnesses, so it is JSON regardless of --json
    std::cout << out.dump(2) << "\n";
    return kOk;
}

// ---- metrics -----------------------------------------------------------------------

struct MetricsArgs {
    std::string image;
    std::string reference;
    std::string root;
};

int run_metrics(const MetricsArgs& a) {
    json out;
    std::string human;
    if (!a.image.empty() || !a.reference.empty()) {
        if (a.image.empty() || a.reference.empty())
            throw InvalidArgument("--image and --reference go together");
        const Framebuffer x = read_image(a.image), y = read_image(a.reference);
        if (x.width != y.width || x.height != y.height)
            throw InvalidArgument("images differ in size");
        const ImageDiff d = image_diff(x, y);
        const double p = psnr(x, y);
        out["psnr"] = p;
        out["mean_abs"] = d.mean_abs;
        out["max_abs"] = d.max_abs;
        human += "psnr " + std::to_string(p) + " dB, mean abs " + std::to_string(d.mean_abs) +
                 ", max abs " + std::to_string(d.max_abs) + "\n";
    }
    if (!a.root.empty()) {
        const SceneManifest m = SceneManifest::load(fs::path(a.root) / "manifest.json");
        out["lods"] = bake_summary(m);
        human += summary_text(out["lods"]);
    }
    if (out.is_null()) throw InvalidArgument("metrics needs --image/--reference or --root");
    emit(out, human);
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"blockrf: block-partitioned radiance field baking, rendering and streaming"};
    app.require_subcommand(1);
    app.fallthrough();
    app.add_flag("--json", g_json, "Print machine-readable JSON");

    SynthArgs synth;
    auto* c_synth = app.add_subcommand("synth", "Inspect a scene spec and render previews");
    c_synth->add_option("--spec", synth.spec, "Scene spec JSON")->required()->check(CLI::ExistingFile);
    c_synth->add_option("--preview", synth.preview, "Write an analytic preview (.png or .pfm)");
    c_synth->add_option("--pose", synth.pose, "Capture pose used for the preview");
    c_synth->add_option("--cameras", synth.cameras, "Write every capture pose as a camera file");

    BakeArgs bake;
    auto* c_bake = app.add_subcommand("bake", "Bake a scene spec into streamable assets");
    c_bake->add_option("--scene", bake.scene, "Scene spec JSON")->required()->check(CLI::ExistingFile);
    c_bake->add_option("--out", bake.out, "Asset root")->required();
    c_bake->add_option("--voxel-res", bake.voxel_res, "Voxels per block along x and y");
    c_bake->add_option("--triplane-res", bake.triplane_res, "Plane texels per block along x and y");
    c_bake->add_option("--lods", bake.lods, "Number of LODs");
    c_bake->add_option("--tau-w", bake.tau_w, "Occupancy weight threshold");
    c_bake->add_option("--tau-a", bake.tau_a, "Occupancy alpha threshold");
    c_bake->add_option("--plane-share", bake.plane_share, "Share of the signal stored in planes");
    c_bake->add_option("--ray-budget", bake.ray_budget, "Occupancy rays");
    c_bake->add_option("--workers", bake.workers, "Worker threads (0 = all cores)");

    LodArgs lod;
    auto* c_lod = app.add_subcommand("lod", "Regenerate the coarser LODs of an asset root");
    c_lod->add_option("--root", lod.root, "Asset root")->required()->check(CLI::ExistingDirectory);
    c_lod->add_option("--scene", lod.scene, "Scene spec JSON")->required()->check(CLI::ExistingFile);
    c_lod->add_option("--lods", lod.lods, "Number of LODs");

    RenderArgs render;
    auto* c_render = app.add_subcommand("render", "Render baked assets from a camera file");
    c_render->add_option("--root", render.root, "Asset root")->required()->check(CLI::ExistingDirectory);
    c_render->add_option("--camera", render.camera, "Camera JSON")->required()->check(CLI::ExistingFile);
    c_render->add_option("--out", render.out, "Output image (.png or .pfm)")->required();
    c_render->add_option("--lod", render.lod, "Render every block of this LOD");
    c_render->add_flag("--plan", render.plan, "Render the blocks chosen by the streaming policy");
    c_render->add_flag("--no-occupancy-skip", render.no_skip, "March every lattice sample");
    c_render->add_option("--background", render.background, "Background color r g b")->expected(3);
    c_render->add_option("--mode", render.mode, "per-block or post");
    c_render->add_option("--width", render.width, "Override image width");
    c_render->add_option("--height", render.height, "Override image height");
    c_render->add_option("--workers", render.workers, "Worker threads (0 = all cores)");

    VerifyArgs verify;
    auto* c_verify = app.add_subcommand("verify", "Run the verification suites on an asset root");
    c_verify->add_option("--root", verify.root, "Asset root")->required();
    c_verify->add_option("--scene", verify.scene, "Scene spec JSON")->required()->check(CLI::ExistingFile);
    c_verify->add_option("--trials", verify.trials, "Random rays per suite");
    c_verify->add_option("--seed", verify.seed, "Random seed");
    c_verify->add_option("--poses", verify.poses, "Orbit poses for the skip suite");
    c_verify->add_option("--workers", verify.workers, "Worker threads (0 = all cores)");

    std::string serve_root, serve_addr = "127.0.0.1:8080";
    auto* c_serve = app.add_subcommand("serve", "Serve an asset root over HTTP");
    c_serve->add_option("--root", serve_root, "Asset root")->required()->check(CLI::ExistingDirectory);
    c_serve->add_option("--addr", serve_addr, "host:port (port 0 picks a free port)");

    PlanArgs plan;
    auto* c_plan = app.add_subcommand("plan", "Print the streaming plan for one or more poses");
    c_plan->add_option("--root", plan.root, "Asset root")->required()->check(CLI::ExistingDirectory);
    c_plan->add_option("--camera", plan.camera, "Camera JSON, or an array of cameras")
        ->required()
        ->check(CLI::ExistingFile);
    c_plan->add_option("--budget", plan.budget, "Memory budget in bytes");

    MetricsArgs metrics;
    auto* c_metrics = app.add_subcommand("metrics", "Image error metrics and asset sizes");
    c_metrics->add_option("--image", metrics.image, "Image to score")->check(CLI::ExistingFile);
    c_metrics->add_option("--reference", metrics.reference, "Reference image")->check(CLI::ExistingFile);
    c_metrics->add_option("--root", metrics.root, "Asset root")->check(CLI::ExistingDirectory);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        if (*c_synth) return run_synth(synth);
        if (*c_bake) return run_bake(bake);
        if (*c_lod) return run_lod(lod);
        if (*c_render) return run_render(render);
        if (*c_verify) return run_verify(verify);
        if (*c_serve) return run_serve(serve_root, serve_addr);
        if (*c_plan) return run_plan(plan);
        if (*c_metrics) return run_metrics(metrics);
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIo;
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIo;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIo;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    }
    return kUsage;
}
