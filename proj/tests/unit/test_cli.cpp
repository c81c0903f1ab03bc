#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "blockrf/camera.hpp"
#include "blockrf/framebuffer.hpp"
#include "blockrf/image_io.hpp"
#include "blockrf/manifest.hpp"
#include "test_support.hpp"

using namespace blockrf;
namespace fs = std::filesystem;
using nlohmann::json;
using blockrf::testing::TempDir;

namespace {

struct Run {
    int code = -1;
    std::string out;
};

// Runs the CLI with `args` (already shell-quoted where needed); stderr is discarded.
Run cli(const std::string& args) {
    const std::string cmd = std::string(BLOCKRF_CLI) + " " + args + " 2>/dev/null";
    Run r;
    FILE* p = ::popen(cmd.c_str(), "r");
    REQUIRE(p != nullptr);
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
    const int status = ::pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

// One bake shared by the cases below.
struct Workspace {
    TempDir dir{"cli"};
    fs::path spec = dir.path() / "scene.json";
    fs::path root = dir.path() / "assets";
    fs::path cams = dir.path() / "cams";
    Run bake;
    Workspace() {
        write_file(spec, blockrf::testing::small_scene_spec().to_json());
        bake = cli("--json bake --scene " + q(spec) + " --out " + q(root) + " --workers 1");
    }
};

Workspace& workspace() {
    static Workspace w;
    return w;
}

}  // namespace

TEST_CASE("cli bake") {
    Workspace& w = workspace();
    REQUIRE(w.bake.code == 0);
    const json j = json::parse(w.bake.out);
    REQUIRE(j["lods"].size() == 2);
    CHECK(j["lods"][0]["blocks"] == 4);
    CHECK(j["lods"][1]["blocks"] == 1);
    CHECK(j["rays"] == 8 * 32 * 32);
    CHECK(fs::exists(w.root / "manifest.json"));
    CHECK(fs::exists(w.root / "lod2" / "block_0_0" / "occupancy.bin"));
}

TEST_CASE("cli synth") {
    Workspace& w = workspace();
    const fs::path preview = w.dir.path() / "preview.png";
    const Run r = cli("--json synth --spec " + q(w.spec) + " --preview " + q(preview) +
                      " --pose 1 --cameras " + q(w.cams));
    REQUIRE(r.code == 0);
    const json j = json::parse(r.out);
    CHECK(j["primitives"] == 2);
    CHECK(j["poses"] == 8);
    CHECK(j["cameras"].size() == 8);
    const Framebuffer fb = read_image(preview);
    CHECK(fb.width == 32);
    CHECK(fb.height == 32);
    CHECK(fs::exists(w.cams / "pose_007.json"));

    CHECK(cli("synth --spec " + q(w.spec) + " --preview " + q(preview) + " --pose 8").code == 2);
}

TEST_CASE("cli render") {
    Workspace& w = workspace();
    REQUIRE(cli("synth --spec " + q(w.spec) + " --cameras " + q(w.cams)).code == 0);
    const fs::path cam = w.cams / "pose_000.json";
    const fs::path a = w.dir.path() / "a.png", b = w.dir.path() / "b.png";

    const Run r = cli("--json render --root " + q(w.root) + " --camera " + q(cam) + " --out " +
                      q(a) + " --workers 1");
    REQUIRE(r.code == 0);
    CHECK(json::parse(r.out)["blocks"].size() == 4);
    REQUIRE(cli("render --root " + q(w.root) + " --camera " + q(cam) + " --out " + q(b) +
                " --workers 2")
                .code == 0);
    CHECK(read_file(a) == read_file(b));

    // The camera looks away from the scene: every pixel is the background.
    const PinholeCamera base = load_camera(cam);
    PinholeCamera away = PinholeCamera::look_at(base.position, base.position * 2.0, {0, 0, 1},
                                                40.0, 8, 8);
    const fs::path away_cam = w.dir.path() / "away.json";
    save_camera(away, away_cam);
    const fs::path bg = w.dir.path() / "bg.pfm";
    REQUIRE(cli("render --root " + q(w.root) + " --camera " + q(away_cam) + " --out " + q(bg) +
                " --background 0.25 0.5 0.75")
                .code == 0);
    const Framebuffer fb = read_image(bg);
    REQUIRE(fb.width == 8);
    for (int y = 0; y < fb.height; ++y)
        for (int x = 0; x < fb.width; ++x) {
            CHECK(fb.at(x, y).x == doctest::Approx(0.25));
            CHECK(fb.at(x, y).y == doctest::Approx(0.5));
            CHECK(fb.at(x, y).z == doctest::Approx(0.75));
        }

    const fs::path small = w.dir.path() / "small.png";
    const Run coarse = cli("--json render --root " + q(w.root) + " --camera " + q(cam) +
                           " --out " + q(small) + " --lod 2 --width 16 --height 12");
    REQUIRE(coarse.code == 0);
    CHECK(json::parse(coarse.out)["width"] == 16);
    CHECK(json::parse(coarse.out)["blocks"].size() == 1);
    CHECK(cli("--json render --root " + q(w.root) + " --camera " + q(cam) + " --out " + q(small) +
              " --plan")
              .code == 0);

    CHECK(cli("render --root " + q(w.root) + " --camera " + q(cam) + " --out " + q(small) +
              " --lod 3")
              .code == 2);
    CHECK(cli("render --root " + q(w.root) + " --camera " + q(cam) + " --out " + q(small) +
              " --mode fancy")
              .code == 2);
}

TEST_CASE("cli verify") {
    Workspace& w = workspace();
    const Run ok = cli("--json verify --root " + q(w.root) + " --scene " + q(w.spec) +
                       " --trials 200 --poses 1 --workers 1");
    CHECK(ok.code == 0);
    const json j = json::parse(ok.out);
    CHECK(j["passed"] == true);
    CHECK(j["suites"].size() == 4);

    CHECK(cli("verify --root " + q(w.root) + " --scene " + q(w.spec) + " --trials 0").code == 2);
    CHECK(cli("verify --root " + q(w.dir.path() / "nowhere") + " --scene " + q(w.spec)).code == 3);

    // Corrupt a copy so the shared workspace stays intact.
    const fs::path copy = w.dir.path() / "corrupt";
    fs::remove_all(copy);
    fs::copy(w.root, copy, fs::copy_options::recursive);
    const SceneManifest m = SceneManifest::load(copy / "manifest.json");
    const fs::path victim = copy / m.blocks.front().directory() / "occupancy.bin";
    auto bytes = read_file(victim);
    bytes.back() ^= 0x01;
    write_file(victim, bytes);
    const Run bad = cli("verify --root " + q(copy) + " --scene " + q(w.spec) + " --trials 10");
    CHECK(bad.code == 1);
    CHECK(bad.out.find("FAIL round_trip") != std::string::npos);
}

TEST_CASE("cli plan") {
    Workspace& w = workspace();
    REQUIRE(cli("synth --spec " + q(w.spec) + " --cameras " + q(w.cams)).code == 0);
    const Run one = cli("plan --root " + q(w.root) + " --camera " + q(w.cams / "pose_002.json"));
    REQUIRE(one.code == 0);
    const json p = json::parse(one.out);
    CHECK(p["blocks"].size() >= 1);
    CHECK(p["load"].size() == p["blocks"].size());
    CHECK(p["evict"].empty());
    CHECK(p.contains("budget"));
    for (std::size_t i = 1; i < p["blocks"].size(); ++i)
        CHECK(p["blocks"][i]["xy_distance"].get<double>() >=
              p["blocks"][i - 1]["xy_distance"].get<double>());

    json seq = json::array();
    for (int i = 0; i < 8; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "pose_%03d.json", i);
        std::ifstream in(w.cams / name);
        seq.push_back(json::parse(in));
    }
    const fs::path seq_path = w.dir.path() / "sequence.json";
    write_file(seq_path, seq.dump());
    const Run many = cli("plan --root " + q(w.root) + " --camera " + q(seq_path) + " --budget 100000000");
    REQUIRE(many.code == 0);
    const json s = json::parse(many.out);
    CHECK(s["budget"] == 100000000);
    REQUIRE(s["steps"].size() == 8);
    for (const auto& step : s["steps"]) CHECK(step["resident_bytes"].get<std::uint64_t>() <= 100000000u);

    // Room for the largest single block only: plans degrade or drop, residency stays bounded.
    const SceneManifest m = SceneManifest::load(w.root / "manifest.json");
    std::uint64_t largest = 0;
    for (const auto& b : m.blocks) largest = std::max(largest, b.total_bytes());
    const Run tight = cli("plan --root " + q(w.root) + " --camera " + q(seq_path) + " --budget " +
                          std::to_string(largest));
    REQUIRE(tight.code == 0);
    for (const auto& step : json::parse(tight.out)["steps"]) {
        CHECK(step["resident_bytes"].get<std::uint64_t>() <= largest);
        CHECK(step["blocks"].size() + step["degraded"].size() + step["dropped"].size() >= 1);
    }

    // A budget below one block is a usage error.
    CHECK(cli("plan --root " + q(w.root) + " --camera " + q(seq_path) + " --budget 1").code == 2);

    const fs::path junk = w.dir.path() / "junk.json";
    write_file(junk, std::string("[{"));
    CHECK(cli("plan --root " + q(w.root) + " --camera " + q(junk)).code == 3);
}

TEST_CASE("cli metrics and usage errors") {
    Workspace& w = workspace();
    const Run m = cli("--json metrics --root " + q(w.root));
    REQUIRE(m.code == 0);
    CHECK(json::parse(m.out)["lods"].size() == 2);

    CHECK(cli("").code == 2);
    CHECK(cli("frobnicate").code == 2);
    CHECK(cli("bake --scene " + q(w.spec) + " --out " + q(w.dir.path() / "x") + " --bogus").code == 2);
    CHECK(cli("bake --scene " + q(w.dir.path() / "missing.json") + " --out x").code == 2);
    CHECK(cli("bake --scene " + q(w.spec) + " --out " + q(w.dir.path() / "y") + " --voxel-res 12")
              .code == 2);
    CHECK(cli("metrics").code == 2);
    CHECK(cli("--help").code == 0);
}
