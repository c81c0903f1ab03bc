#include "blockrf/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "blockrf/error.hpp"
#include "blockrf/image_io.hpp"

namespace blockrf {

using nlohmann::json;

std::uint64_t ManifestBlock::total_bytes() const {
    std::uint64_t n = 0;
    for (const auto& f : files) n += f.bytes;
    return n;
}

std::string ManifestBlock::block_directory(const BlockId& id) {
    return "lod" + std::to_string(id.lod) + "/block_" + std::to_string(id.ix) + "_" +
           std::to_string(id.iy);
}

const ManifestBlock* SceneManifest::find(const BlockId& id) const {
    auto it = std::lower_bound(blocks.begin(), blocks.end(), id,
                               [](const ManifestBlock& b, const BlockId& k) { return b.id < k; });
    if (it == blocks.end() || it->id != id) return nullptr;
    return &*it;
}

const ManifestBlock& SceneManifest::block(const BlockId& id) const {
    if (const auto* b = find(id)) return *b;
    throw DomainError("manifest has no entry for " + id.to_string());
}

ManifestBlock& SceneManifest::upsert(const BlockId& id) {
    auto it = std::lower_bound(blocks.begin(), blocks.end(), id,
                               [](const ManifestBlock& b, const BlockId& k) { return b.id < k; });
    if (it != blocks.end() && it->id == id) return *it;
    ManifestBlock b;
    b.id = id;
    return *blocks.insert(it, b);
}

const DeferredShaderWeights& SceneManifest::shader(const BlockId& id) const {
    const auto& b = block(id);
    auto it = shader_groups.find(b.shader_group);
    if (it == shader_groups.end())
        throw FormatError("manifest: unknown shader group '" + b.shader_group + "'");
    return it->second;
}

void SceneManifest::validate() const {
    if (format_version != kManifestFormatVersion)
        throw FormatError("manifest: unsupported format_version " + std::to_string(format_version));
    layout.validate();
    std::set<BlockId> seen;
    for (const auto& b : blocks) {
        if (!layout.contains(b.id)) throw FormatError("manifest: block outside layout " + b.id.to_string());
        if (!seen.insert(b.id).second) throw FormatError("manifest: duplicate block " + b.id.to_string());
        if (!shader_groups.count(b.shader_group))
            throw FormatError("manifest: block " + b.id.to_string() + " references unknown shader group");
        if (b.z_top < layout.z_min || b.z_top > layout.z_max)
            throw FormatError("manifest: z_top of " + b.id.to_string() + " outside z range");
    }
    for (int l = 1; l <= layout.lod_count; ++l)
        for (const auto& id : layout.blocks(l))
            if (!seen.count(id)) throw FormatError("manifest: missing block " + id.to_string());
    if (policy.lod_thresholds.size() != std::size_t(layout.lod_count - 1))
        throw FormatError("manifest: expected lod_count - 1 distance thresholds");
    for (std::size_t i = 0; i < policy.lod_thresholds.size(); ++i) {
        if (!(policy.lod_thresholds[i] > 0.0))
            throw FormatError("manifest: distance thresholds must be positive");
        if (i > 0 && !(policy.lod_thresholds[i] > policy.lod_thresholds[i - 1]))
            throw FormatError("manifest: distance thresholds must increase towards coarser LODs");
    }
    for (const auto& [name, w] : shader_groups) w.validate();
}

namespace {

json weights_to_json(const DeferredShaderWeights& w) {
    json layers = json::array();
    for (const auto& l : w.layers) {
        std::vector<double> weights(l.weights.begin(), l.weights.end());
        std::vector<double> bias(l.bias.begin(), l.bias.end());
        layers.push_back({{"in", l.in}, {"out", l.out}, {"weights", weights}, {"bias", bias}});
    }
    return {{"frequency_bands", w.frequency_bands}, {"layers", layers}};
}

DeferredShaderWeights weights_from_json(const json& j) {
    DeferredShaderWeights w;
    w.frequency_bands = j.at("frequency_bands").get<int>();
    for (const auto& lj : j.at("layers")) {
        DenseLayer l;
        l.in = lj.at("in").get<int>();
        l.out = lj.at("out").get<int>();
        for (double v : lj.at("weights")) l.weights.push_back(static_cast<float>(v));
        for (double v : lj.at("bias")) l.bias.push_back(static_cast<float>(v));
        w.layers.push_back(std::move(l));
    }
    return w;
}

}  // namespace

std::string SceneManifest::to_json() const {
    json j;
    j["format_version"] = format_version;
    j["layout"] = {{"origin", {layout.origin.x, layout.origin.y}},
                   {"block_size", layout.block_size},
                   {"grid_dims", {layout.nx, layout.ny}},
                   {"z_range", {layout.z_min, layout.z_max}},
                   {"lod_count", layout.lod_count}};
    json quant = json::array();
    for (const auto& r : bake.quant.ranges) quant.push_back({r.lo, r.hi});
    j["bake"] = {{"voxel_res", bake.voxel_res},       {"triplane_res", bake.triplane_res},
                 {"tau_w", bake.tau_w},               {"tau_alpha", bake.tau_alpha},
                 {"ray_budget", bake.ray_budget},     {"pyramid_levels", bake.pyramid_levels},
                 {"plane_share", bake.plane_share},   {"quantization", quant}};
    j["background"] = {background.x, background.y, background.z};
    j["policy"] = {{"lod_thresholds", policy.lod_thresholds},
                   {"memory_budget", policy.memory_budget}};
    json groups = json::object();
    for (const auto& [name, w] : shader_groups) groups[name] = weights_to_json(w);
    j["shader_groups"] = groups;
    json bl = json::array();
    for (const auto& b : blocks) {
        json files = json::array();
        for (const auto& f : b.files)
            files.push_back({{"name", f.name}, {"bytes", f.bytes}, {"sha256", f.sha256}});
        bl.push_back({{"lod", b.id.lod},
                      {"ix", b.id.ix},
                      {"iy", b.id.iy},
                      {"z_top", b.z_top},
                      {"shader_group", b.shader_group},
                      {"atlas_macroblocks", b.atlas_macroblocks},
                      {"bytes", b.total_bytes()},
                      {"files", files}});
    }
    j["blocks"] = bl;
    return j.dump(1) + "\n";
}

SceneManifest SceneManifest::from_json(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw FormatError(std::string("manifest: ") + e.what());
    }
    SceneManifest m;
    try {
        m.format_version = j.at("format_version").get<int>();
        if (m.format_version != kManifestFormatVersion)
            throw FormatError("manifest: unsupported format_version " +
                              std::to_string(m.format_version));
        const json& lj = j.at("layout");
        m.layout.origin = {lj.at("origin")[0].get<double>(), lj.at("origin")[1].get<double>()};
        m.layout.block_size = lj.at("block_size").get<double>();
        m.layout.nx = lj.at("grid_dims")[0].get<int>();
        m.layout.ny = lj.at("grid_dims")[1].get<int>();
        m.layout.z_min = lj.at("z_range")[0].get<double>();
        m.layout.z_max = lj.at("z_range")[1].get<double>();
        m.layout.lod_count = lj.at("lod_count").get<int>();

        const json& bj = j.at("bake");
        m.bake.voxel_res = bj.at("voxel_res").get<int>();
        m.bake.triplane_res = bj.at("triplane_res").get<int>();
        m.bake.tau_w = bj.at("tau_w").get<double>();
        m.bake.tau_alpha = bj.at("tau_alpha").get<double>();
        m.bake.ray_budget = bj.value("ray_budget", m.bake.ray_budget);
        m.bake.pyramid_levels = bj.at("pyramid_levels").get<int>();
        m.bake.plane_share = bj.value("plane_share", 0.0);
        const json& qj = bj.at("quantization");
        if (!qj.is_array() || qj.size() != kChannels)
            throw FormatError("manifest: quantization must list 8 channel ranges");
        for (int c = 0; c < kChannels; ++c)
            m.bake.quant.ranges[c] = {qj[c][0].get<double>(), qj[c][1].get<double>()};

        const json& bg = j.at("background");
        m.background = {bg[0].get<double>(), bg[1].get<double>(), bg[2].get<double>()};
        const json& pj = j.at("policy");
        m.policy.lod_thresholds = pj.at("lod_thresholds").get<std::vector<double>>();
        m.policy.memory_budget = pj.at("memory_budget").get<std::uint64_t>();

        for (const auto& [name, wj] : j.at("shader_groups").items())
            m.shader_groups[name] = weights_from_json(wj);
        for (const auto& bj2 : j.at("blocks")) {
            ManifestBlock b;
            b.id = {bj2.at("lod").get<int>(), bj2.at("ix").get<int>(), bj2.at("iy").get<int>()};
            b.z_top = bj2.at("z_top").get<double>();
            b.shader_group = bj2.at("shader_group").get<std::string>();
            b.atlas_macroblocks = bj2.at("atlas_macroblocks").get<int>();
            for (const auto& fj : bj2.at("files"))
                b.files.push_back({fj.at("name").get<std::string>(),
                                   fj.at("bytes").get<std::uint64_t>(),
                                   fj.at("sha256").get<std::string>()});
            m.blocks.push_back(std::move(b));
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("manifest: ") + e.what());
    }
    std::sort(m.blocks.begin(), m.blocks.end(),
              [](const ManifestBlock& a, const ManifestBlock& b) { return a.id < b.id; });
    m.validate();
    return m;
}

SceneManifest SceneManifest::load(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    return from_json(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

void SceneManifest::save(const std::filesystem::path& path) const { write_file(path, to_json()); }

std::vector<double> default_lod_thresholds(const BlockLayout& layout) {
    std::vector<double> t;
    for (int l = 1; l < layout.lod_count; ++l)
        t.push_back(2.0 * std::sqrt(2.0) * layout.block_extent(l));
    return t;
}

}  // namespace blockrf
