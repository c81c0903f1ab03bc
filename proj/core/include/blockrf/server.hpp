#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

namespace blockrf {

/// HTTP service over an exported asset root:
///   GET /manifest.json                  the manifest bytes as stored on disk
///   GET /lod{l}/block_{ix}_{iy}/{file}  a file listed in the manifest; Range and
///                                       If-None-Match supported, ETag = SHA-256
///   GET /healthz                        200
/// Anything else is 404; an unparsable Range header is 416.
class AssetServer {
public:
    /// Loads and validates <root>/manifest.json; throws on failure.
    explicit AssetServer(std::filesystem::path root);
    ~AssetServer();
    AssetServer(const AssetServer&) = delete;
    AssetServer& operator=(const AssetServer&) = delete;

    /// Binds and serves on a background thread. Port 0 picks a free port.
    /// Returns the bound port; throws IoError when binding fails.
    int start(const std::string& host, int port);
    /// Blocks serving on the calling thread until stop().
    void run(const std::string& host, int port);
    void stop();

    /// Re-reads the manifest and swaps it in atomically; requests in flight keep the
    /// version they started with. Throws and keeps the old manifest on failure.
    void reload_manifest();

private:
    struct State;
    struct Impl;
    std::shared_ptr<const State> state() const;

    std::filesystem::path root_;
    mutable std::mutex state_mutex_;
    std::shared_ptr<const State> state_;
    std::unique_ptr<Impl> impl_;
    std::thread thread_;
};

}  // namespace blockrf
