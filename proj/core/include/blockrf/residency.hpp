#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "blockrf/assets.hpp"
#include "blockrf/lod_policy.hpp"

namespace blockrf {

struct ResidentEntry {
    std::shared_ptr<const BlockAssets> assets;  // may be null for dry-run planning
    std::uint64_t bytes = 0;
    std::uint64_t last_used = 0;
};

struct ResidentSet {
    std::uint64_t budget = 0;
    std::map<BlockId, ResidentEntry> entries;
    std::uint64_t clock = 0;  // advanced once per applied plan

    std::uint64_t total_bytes() const;
    std::vector<BlockId> ids() const;
};

using AssetFetcher = std::function<std::shared_ptr<const BlockAssets>(const BlockId&)>;

/// Fits the plan into the budget and updates the resident set:
///  1. while the plan's bytes exceed the budget, the farthest block below the coarsest
///     LOD is replaced by its parent (planned descendants of that parent go with it);
///     when nothing is left to degrade, the farthest block is dropped;
///  2. unplanned residents are evicted least recently used first (ties by BlockId)
///     until plan + kept residents fit;
///  3. missing planned blocks are fetched.
/// Residents never exceed the budget at any point. Throws InvalidArgument when a
/// single planned asset is larger than the whole budget.
RenderPlan apply_plan(RenderPlan plan, ResidentSet& resident, const SceneManifest& manifest,
                      const PinholeCamera& camera, const AssetFetcher& fetch = {});

/// What a render sees: the blocks of one applied plan in compositing order.
struct ResidentSnapshot {
    std::vector<BlockId> order;
    std::map<BlockId, std::shared_ptr<const BlockAssets>> assets;
};

/// Single-writer, many-reader publication of resident snapshots; readers always get
/// a complete snapshot.
class SnapshotStore {
public:
    void publish(std::shared_ptr<const ResidentSnapshot> snapshot);
    std::shared_ptr<const ResidentSnapshot> current() const;

private:
    mutable std::mutex mutex_;
    std::shared_ptr<const ResidentSnapshot> current_ = std::make_shared<ResidentSnapshot>();
};

/// select_lod + apply_plan + snapshot publication, one call per camera update.
class LoadingPlanner {
public:
    LoadingPlanner(SceneManifest manifest, std::uint64_t budget, AssetFetcher fetch = {});

    RenderPlan step(const PinholeCamera& camera);
    std::shared_ptr<const ResidentSnapshot> snapshot() const { return store_.current(); }
    const ResidentSet& resident() const { return resident_; }
    const SceneManifest& manifest() const { return manifest_; }

private:
    SceneManifest manifest_;
    ResidentSet resident_;
    AssetFetcher fetch_;
    SnapshotStore store_;
};

}  // namespace blockrf
