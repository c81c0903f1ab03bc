#include "blockrf/asset_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "blockrf/error.hpp"
#include "blockrf/image_io.hpp"

namespace blockrf {

namespace fs = std::filesystem;

namespace {

constexpr const char* kPlaneNames[3] = {"xy", "xz", "yz"};

std::string atlas_name(int z, char half) {
    return "atlas_" + std::to_string(z) + "_" + half + ".png";
}
std::string plane_name(int plane, char half) {
    return std::string("plane_") + kPlaneNames[plane] + "_" + half + ".png";
}

std::pair<int, int> atlas_tiles(int m) {
    const int ax = static_cast<int>(std::ceil(std::sqrt(double(m))));
    return {ax, (m + ax - 1) / ax};
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
           std::uint32_t(p[3]) << 24;
}

const std::vector<std::uint8_t>& need(
    const std::map<std::string, std::vector<std::uint8_t>>& files, const std::string& name) {
    auto it = files.find(name);
    if (it == files.end()) throw FormatError("missing asset file " + name);
    return it->second;
}

Image8 decode_named(const std::map<std::string, std::vector<std::uint8_t>>& files,
                    const std::string& name, int width, int height) {
    Image8 img;
    try {
        img = decode_png(need(files, name));
    } catch (const FormatError& e) {
        throw FormatError(name + ": " + e.what());
    }
    if (img.width != width || img.height != height || img.channels != 4)
        throw FormatError(name + ": expected " + std::to_string(width) + "x" +
                          std::to_string(height) + " RGBA");
    return img;
}

}  // namespace

std::vector<std::uint8_t> encode_occupancy(const OccupancyGrid& grid) {
    std::vector<std::uint8_t> out(kOccupancyMagic, kOccupancyMagic + 8);
    put_u32(out, std::uint32_t(grid.dims.x));
    put_u32(out, std::uint32_t(grid.dims.y));
    put_u32(out, std::uint32_t(grid.dims.z));
    const std::size_t header = out.size();
    out.resize(header + (grid.cells.size() + 7) / 8, 0);
    for (std::size_t n = 0; n < grid.cells.size(); ++n)
        if (grid.cells[n]) out[header + n / 8] |= std::uint8_t(1u << (n % 8));
    return out;
}

OccupancyGrid decode_occupancy(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 20 || std::memcmp(bytes.data(), kOccupancyMagic, 8) != 0)
        throw FormatError("occupancy.bin: bad header");
    const GridDims d{int(get_u32(&bytes[8])), int(get_u32(&bytes[12])), int(get_u32(&bytes[16]))};
    if (d.x <= 0 || d.y <= 0 || d.z <= 0 || d.x > 4096 || d.y > 4096 || d.z > 4096)
        throw FormatError("occupancy.bin: implausible dimensions");
    OccupancyGrid g(d);
    if (bytes.size() != 20 + (g.cells.size() + 7) / 8)
        throw FormatError("occupancy.bin: size does not match dimensions");
    for (std::size_t n = 0; n < g.cells.size(); ++n)
        g.cells[n] = (bytes[20 + n / 8] >> (n % 8)) & 1u;
    return g;
}

std::vector<EncodedFile> encode_block(const BlockAssets& a) {
    std::vector<EncodedFile> files;
    const int m = a.voxels.macroblock_count();
    if (m > 0) {
        const auto [ax, ay] = atlas_tiles(m);
        for (int z = 0; z < kMacroblock; ++z) {
            Image8 half[2];
            for (auto& img : half) {
                img.width = kMacroblock * ax;
                img.height = kMacroblock * ay;
                img.channels = 4;
                img.pixels.assign(std::size_t(img.width) * img.height * 4, 0);
            }
            for (int s = 0; s < m; ++s) {
                const std::uint8_t* mb = a.voxels.macroblocks.data() +
                                         std::size_t(s) * SparseVoxelAtlas::kMacroblockBytes;
                const int px = kMacroblock * (s % ax), py = kMacroblock * (s / ax);
                for (int j = 0; j < kMacroblock; ++j)
                    for (int i = 0; i < kMacroblock; ++i) {
                        const std::uint8_t* t =
                            mb + ((std::size_t(z) * kMacroblock + j) * kMacroblock + i) * kChannels;
                        const std::size_t o =
                            (std::size_t(py + j) * half[0].width + (px + i)) * 4;
                        std::copy(t, t + 4, half[0].pixels.data() + o);
                        std::copy(t + 4, t + 8, half[1].pixels.data() + o);
                    }
            }
            files.push_back({atlas_name(z, 'a'), encode_png(half[0])});
            files.push_back({atlas_name(z, 'b'), encode_png(half[1])});
        }
    }
    for (int pl = 0; pl < 3; ++pl) {
        const TexelPlane& p = a.planes[pl];
        Image8 half[2];
        for (int h = 0; h < 2; ++h) {
            half[h].width = p.width;
            half[h].height = p.height;
            half[h].channels = 4;
            half[h].pixels.resize(std::size_t(p.width) * p.height * 4);
        }
        for (std::size_t n = 0; n < std::size_t(p.width) * p.height; ++n) {
            std::copy(&p.data[n * 8], &p.data[n * 8] + 4, &half[0].pixels[n * 4]);
            std::copy(&p.data[n * 8] + 4, &p.data[n * 8] + 8, &half[1].pixels[n * 4]);
        }
        files.push_back({plane_name(pl, 'a'), encode_png(half[0])});
        files.push_back({plane_name(pl, 'b'), encode_png(half[1])});
    }
    files.push_back({"occupancy.bin", encode_occupancy(a.occupancy.base())});
    std::sort(files.begin(), files.end(),
              [](const EncodedFile& x, const EncodedFile& y) { return x.name < y.name; });
    return files;
}

BlockAssets decode_block(const std::map<std::string, std::vector<std::uint8_t>>& files,
                         const SceneManifest& manifest, const BlockId& id) {
    const BakeConfig& cfg = manifest.bake;
    BlockAssets a;
    a.block = id;
    a.geometry = BlockGeometry::make(manifest.layout, id, cfg.voxel_res, cfg.triplane_res);
    a.quant = cfg.quant;
    a.shader_group = manifest.block(id).shader_group;

    OccupancyGrid occ = decode_occupancy(need(files, "occupancy.bin"));
    if (occ.dims != a.geometry.voxel_dims)
        throw FormatError("occupancy.bin: dimensions disagree with the layout");

    // Slot order is raster order over macroblocks holding an occupied cell.
    SparseVoxelAtlas& atlas = a.voxels;
    atlas.texel_dims = a.geometry.voxel_dims;
    atlas.macro_dims = {atlas.texel_dims.x / kMacroblock, atlas.texel_dims.y / kMacroblock,
                        atlas.texel_dims.z / kMacroblock};
    atlas.indirection.assign(atlas.macro_dims.count(), SparseVoxelAtlas::kEmpty);
    std::int32_t m = 0;
    for (int k = 0; k < occ.dims.z; ++k)
        for (int j = 0; j < occ.dims.y; ++j)
            for (int i = 0; i < occ.dims.x; ++i) {
                if (!occ.at(i, j, k)) continue;
                auto& slot = atlas.indirection[atlas.macro_index(i / 8, j / 8, k / 8)];
                slot = 0;
            }
    for (auto& slot : atlas.indirection)
        if (slot != SparseVoxelAtlas::kEmpty) slot = m++;
    if (m != manifest.block(id).atlas_macroblocks)
        throw FormatError(id.to_string() + ": occupancy implies " + std::to_string(m) +
                          " macroblocks, manifest lists " +
                          std::to_string(manifest.block(id).atlas_macroblocks));

    atlas.macroblocks.assign(std::size_t(m) * SparseVoxelAtlas::kMacroblockBytes, 0);
    if (m > 0) {
        const auto [ax, ay] = atlas_tiles(m);
        for (int z = 0; z < kMacroblock; ++z) {
            const Image8 half[2] = {
                decode_named(files, atlas_name(z, 'a'), kMacroblock * ax, kMacroblock * ay),
                decode_named(files, atlas_name(z, 'b'), kMacroblock * ax, kMacroblock * ay)};
            for (int s = 0; s < m; ++s) {
                std::uint8_t* mb =
                    atlas.macroblocks.data() + std::size_t(s) * SparseVoxelAtlas::kMacroblockBytes;
                const int px = kMacroblock * (s % ax), py = kMacroblock * (s / ax);
                for (int j = 0; j < kMacroblock; ++j)
                    for (int i = 0; i < kMacroblock; ++i) {
                        std::uint8_t* t =
                            mb + ((std::size_t(z) * kMacroblock + j) * kMacroblock + i) * kChannels;
                        const std::size_t o = (std::size_t(py + j) * half[0].width + (px + i)) * 4;
                        std::copy_n(half[0].pixels.data() + o, 4, t);
                        std::copy_n(half[1].pixels.data() + o, 4, t + 4);
                    }
            }
        }
    }

    const GridDims pd = a.geometry.plane_dims;
    const std::pair<int, int> size[3] = {{pd.x, pd.y}, {pd.x, pd.z}, {pd.y, pd.z}};
    for (int pl = 0; pl < 3; ++pl) {
        const auto [w, h] = size[pl];
        const Image8 ha = decode_named(files, plane_name(pl, 'a'), w, h);
        const Image8 hb = decode_named(files, plane_name(pl, 'b'), w, h);
        TexelPlane p(w, h);
        for (std::size_t n = 0; n < std::size_t(w) * h; ++n) {
            std::copy_n(&ha.pixels[n * 4], 4, &p.data[n * 8]);
            std::copy_n(&hb.pixels[n * 4], 4, &p.data[n * 8 + 4]);
        }
        a.planes[pl] = std::move(p);
    }
    a.occupancy = OccupancyPyramid::build(std::move(occ), cfg.pyramid_levels);
    a.validate();
    return a;
}

SceneManifest export_assets(const BakedScene& scene, const fs::path& root) {
    SceneManifest manifest = scene.manifest;
    for (auto& entry : manifest.blocks) {
        auto it = scene.assets.find(entry.id);
        if (it == scene.assets.end())
            throw DomainError("export: no assets for " + entry.id.to_string());
        const fs::path dir = root / entry.directory();
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
        // Stale files from an earlier export would otherwise linger beside the new set.
        for (const auto& old : fs::directory_iterator(dir, ec))
            if (old.is_regular_file()) fs::remove(old.path(), ec);
        entry.files.clear();
        entry.atlas_macroblocks = it->second->voxels.macroblock_count();
        for (const auto& f : encode_block(*it->second)) {
            write_file(dir / f.name, f.bytes);
            entry.files.push_back({f.name, f.bytes.size(), sha256_hex(f.bytes)});
        }
    }
    manifest.validate();
    manifest.save(root / "manifest.json");
    return manifest;
}

std::shared_ptr<const BlockAssets> import_block(const fs::path& root,
                                                const SceneManifest& manifest,
                                                const BlockId& id) {
    const ManifestBlock& entry = manifest.block(id);
    if (entry.files.empty())
        throw FormatError("manifest lists no files for " + id.to_string());
    std::map<std::string, std::vector<std::uint8_t>> files;
    for (const auto& f : entry.files) {
        if (f.name.find('/') != std::string::npos || f.name.find("..") != std::string::npos)
            throw FormatError("manifest: invalid file name " + f.name);
        const fs::path path = root / entry.directory() / f.name;
        auto bytes = read_file(path);
        if (bytes.size() != f.bytes)
            throw FormatError(path.string() + ": size " + std::to_string(bytes.size()) +
                              " does not match manifest size " + std::to_string(f.bytes));
        if (sha256_hex(bytes) != f.sha256)
            throw FormatError(path.string() + ": content hash does not match the manifest");
        files.emplace(f.name, std::move(bytes));
    }
    return std::make_shared<const BlockAssets>(decode_block(files, manifest, id));
}

BakedScene import_assets(const fs::path& root) {
    BakedScene scene;
    scene.manifest = SceneManifest::load(root / "manifest.json");
    for (const auto& entry : scene.manifest.blocks)
        scene.assets[entry.id] = import_block(root, scene.manifest, entry.id);
    return scene;
}

}  // namespace blockrf
