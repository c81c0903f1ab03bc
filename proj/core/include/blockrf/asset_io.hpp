#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "blockrf/bake.hpp"

namespace blockrf {

// On-disk block format, all files under <root>/lod{l}/block_{ix}_{iy}/:
//   atlas_{z}_a.png, atlas_{z}_b.png  z = 0..7: one z-slice of every macroblock, channels
//       0-3 and 4-7 as RGBA. Macroblock m occupies the 8x8 tile at (8 (m % ax), 8 (m / ax))
//       of an (8 ax) x (8 ay) image, ax = ceil(sqrt(M)), ay = ceil(M / ax). Absent when M = 0.
//   plane_{xy,xz,yz}_{a,b}.png  one RGBA pair per plane, pixel (u, v) = texel (u, v).
//   occupancy.bin  "BRFOCC1\0", uint32 LE dims x y z, then level-0 bits LSB first, x fastest.
// The indirection grid and the coarser pyramid levels are rebuilt from level 0 on import.

inline constexpr char kOccupancyMagic[8] = {'B', 'R', 'F', 'O', 'C', 'C', '1', '\0'};

struct EncodedFile {
    std::string name;
    std::vector<std::uint8_t> bytes;
};

/// Encodes one block; files are returned sorted by name.
std::vector<EncodedFile> encode_block(const BlockAssets& assets);

/// Inverse of encode_block. `files` maps file name to contents; throws FormatError
/// naming the file when one is missing or malformed.
BlockAssets decode_block(const std::map<std::string, std::vector<std::uint8_t>>& files,
                         const SceneManifest& manifest, const BlockId& id);

std::vector<std::uint8_t> encode_occupancy(const OccupancyGrid& grid);
OccupancyGrid decode_occupancy(const std::vector<std::uint8_t>& bytes);

/// Writes every block plus manifest.json under `root` and returns the manifest with
/// file names, sizes and hashes filled in.
SceneManifest export_assets(const BakedScene& scene, const std::filesystem::path& root);

/// Reads one block, checking each file's size and SHA-256 against the manifest.
/// Throws IoError for a missing file and FormatError for a mismatch, naming the file.
std::shared_ptr<const BlockAssets> import_block(const std::filesystem::path& root,
                                                const SceneManifest& manifest,
                                                const BlockId& id);

/// Loads the manifest and every block it lists.
BakedScene import_assets(const std::filesystem::path& root);

}  // namespace blockrf
