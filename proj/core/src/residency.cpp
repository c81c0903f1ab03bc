#include "blockrf/residency.hpp"

#include <algorithm>
#include <set>

#include "blockrf/error.hpp"

namespace blockrf {

std::uint64_t ResidentSet::total_bytes() const {
    std::uint64_t n = 0;
    for (const auto& [id, e] : entries) n += e.bytes;
    return n;
}

std::vector<BlockId> ResidentSet::ids() const {
    std::vector<BlockId> out;
    for (const auto& [id, e] : entries) out.push_back(id);
    return out;
}

namespace {

std::uint64_t plan_bytes(const std::vector<PlannedBlock>& blocks, const SceneManifest& m) {
    std::uint64_t n = 0;
    for (const auto& b : blocks) n += m.block(b.id).total_bytes();
    return n;
}

void check_fits(const BlockId& id, const SceneManifest& m, std::uint64_t budget) {
    const std::uint64_t bytes = m.block(id).total_bytes();
    if (bytes > budget)
        throw InvalidArgument("asset " + id.to_string() + " (" + std::to_string(bytes) +
                              " bytes) exceeds the memory budget of " + std::to_string(budget));
}

}  // namespace

RenderPlan apply_plan(RenderPlan plan, ResidentSet& resident, const SceneManifest& manifest,
                      const PinholeCamera& camera, const AssetFetcher& fetch) {
    const BlockLayout& layout = manifest.layout;
    const std::uint64_t budget = resident.budget;
    for (const auto& b : plan.blocks) check_fits(b.id, manifest, budget);

    while (plan_bytes(plan.blocks, manifest) > budget) {
        // blocks are depth sorted, so the farthest degradable block is the last one
        auto it = std::find_if(plan.blocks.rbegin(), plan.blocks.rend(), [&](const PlannedBlock& b) {
            return b.id.lod < layout.lod_count;
        });
        if (it == plan.blocks.rend()) {
            plan.dropped.push_back(plan.blocks.back().id);
            plan.blocks.pop_back();
            continue;
        }
        const BlockId parent = layout.parent(it->id);
        check_fits(parent, manifest, budget);
        std::vector<BlockId> ids;
        for (const auto& b : plan.blocks) {
            if (layout.covers(parent, b.id)) plan.degraded.push_back(b.id);
            else ids.push_back(b.id);
        }
        ids.push_back(parent);
        plan.blocks = depth_sort(ids, camera, manifest);
    }

    std::set<BlockId> planned;
    for (const auto& b : plan.blocks) planned.insert(b.id);
    std::uint64_t needed = plan_bytes(plan.blocks, manifest);

    std::vector<std::pair<std::uint64_t, BlockId>> unplanned;
    for (const auto& [id, e] : resident.entries)
        if (!planned.count(id)) {
            unplanned.push_back({e.last_used, id});
            needed += e.bytes;
        }
    std::sort(unplanned.begin(), unplanned.end());
    for (const auto& [used, id] : unplanned) {
        if (needed <= budget) break;
        needed -= resident.entries.at(id).bytes;
        resident.entries.erase(id);
        plan.evict.push_back(id);
    }

    ++resident.clock;
    for (const auto& b : plan.blocks) {
        auto it = resident.entries.find(b.id);
        if (it == resident.entries.end()) {
            ResidentEntry e;
            e.bytes = manifest.block(b.id).total_bytes();
            if (fetch) e.assets = fetch(b.id);
            it = resident.entries.emplace(b.id, std::move(e)).first;
            plan.load.push_back(b.id);
        }
        it->second.last_used = resident.clock;
    }
    return plan;
}

void SnapshotStore::publish(std::shared_ptr<const ResidentSnapshot> snapshot) {
    std::lock_guard lock(mutex_);
    current_ = std::move(snapshot);
}

std::shared_ptr<const ResidentSnapshot> SnapshotStore::current() const {
    std::lock_guard lock(mutex_);
    return current_;
}

LoadingPlanner::LoadingPlanner(SceneManifest manifest, std::uint64_t budget, AssetFetcher fetch)
    : manifest_(std::move(manifest)), fetch_(std::move(fetch)) {
    resident_.budget = budget;
}

RenderPlan LoadingPlanner::step(const PinholeCamera& camera) {
    RenderPlan plan = apply_plan(select_lod(camera, manifest_), resident_, manifest_, camera, fetch_);
    auto snap = std::make_shared<ResidentSnapshot>();
    for (const auto& b : plan.blocks) {
        snap->order.push_back(b.id);
        snap->assets[b.id] = resident_.entries.at(b.id).assets;
    }
    store_.publish(std::move(snap));
    return plan;
}

}  // namespace blockrf
