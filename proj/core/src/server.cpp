#include "blockrf/server.hpp"

#include <map>

#include <httplib.h>

#include "blockrf/error.hpp"
#include "blockrf/image_io.hpp"
#include "blockrf/manifest.hpp"

namespace blockrf {

struct AssetServer::State {
    std::string manifest_text;
    // "lod1/block_0_0/atlas_0_a.png" -> sha256
    std::map<std::string, std::string> files;
};

struct AssetServer::Impl {
    httplib::Server server;
};

namespace {

std::string content_type(const std::string& name) {
    if (name.size() > 4 && name.compare(name.size() - 4, 4, ".png") == 0) return "image/png";
    return "application/octet-stream";
}

}  // namespace

AssetServer::AssetServer(std::filesystem::path root)
    : root_(std::move(root)), impl_(std::make_unique<Impl>()) {
    reload_manifest();

    auto& svr = impl_->server;
    svr.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
        res.set_content("ok\n", "text/plain");
    });
    svr.Get("/manifest.json", [this](const httplib::Request&, httplib::Response& res) {
        const auto s = state();
        res.set_header("Cache-Control", "no-cache");
        res.set_content(s->manifest_text, "application/json");
    });
    svr.Get(R"(/(lod\d+/block_\d+_\d+/[A-Za-z0-9_.]+))",
            [this](const httplib::Request& req, httplib::Response& res) {
                const auto s = state();
                const std::string rel = req.matches[1];
                auto it = s->files.find(rel);
                if (it == s->files.end()) {
                    res.status = 404;
                    return;
                }
                const std::string etag = "\"" + it->second + "\"";
                res.set_header("ETag", etag);
                res.set_header("Accept-Ranges", "bytes");
                if (req.has_header("If-None-Match") &&
                    req.get_header_value("If-None-Match") == etag) {
                    res.status = 304;
                    return;
                }
                std::vector<std::uint8_t> bytes;
                try {
                    bytes = read_file(root_ / rel);
                } catch (const IoError&) {
                    res.status = 404;
                    return;
                }
                res.set_content(std::string(bytes.begin(), bytes.end()), content_type(rel));
            });
}

AssetServer::~AssetServer() { stop(); }

std::shared_ptr<const AssetServer::State> AssetServer::state() const {
    std::lock_guard lock(state_mutex_);
    return state_;
}

void AssetServer::reload_manifest() {
    const auto bytes = read_file(root_ / "manifest.json");
    auto s = std::make_shared<State>();
    s->manifest_text.assign(bytes.begin(), bytes.end());
    const SceneManifest m = SceneManifest::from_json(s->manifest_text);
    for (const auto& b : m.blocks)
        for (const auto& f : b.files) s->files[b.directory() + "/" + f.name] = f.sha256;
    std::lock_guard lock(state_mutex_);
    state_ = std::move(s);
}

int AssetServer::start(const std::string& host, int port) {
    auto& svr = impl_->server;
    int bound = port;
    if (port == 0) bound = svr.bind_to_any_port(host);
    else if (!svr.bind_to_port(host, port)) bound = -1;
    if (bound <= 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
    thread_ = std::thread([&svr] { svr.listen_after_bind(); });
    svr.wait_until_ready();
    return bound;
}

void AssetServer::run(const std::string& host, int port) {
    if (!impl_->server.listen(host, port))
        throw IoError("cannot listen on " + host + ":" + std::to_string(port));
}

void AssetServer::stop() {
    impl_->server.stop();
    if (thread_.joinable()) thread_.join();
}

}  // namespace blockrf
