#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

#include "topicbench/workbench.hpp"

namespace topicbench::api {

using nlohmann::json;

struct Request {
    std::string method;  // "GET", "POST", ...
    std::string path;    // decoded, without the query string
    std::map<std::string, std::string> query;
    std::string body;
};

struct Response {
    int status = 200;
    json body = json::object();

    /// Serialised body; deterministic for a given value.
    std::string text() const { return body.dump(); }
};

inline constexpr int kDefaultDocumentLimit = 20;
inline constexpr int kMaxDocumentLimit = 500;
inline constexpr std::size_t kExcerptChars = 280;

/// Routes requests against a workspace without any socket, so the contract
/// can be tested in-process. Reads never modify the workspace; ranking
/// writes go through the workspace's serialised store.
class ApiHandler {
public:
    explicit ApiHandler(workbench::Workspace& workspace);

    Response handle(const Request& request);

    /// Route templates, for documentation and contract tests.
    static const std::vector<std::pair<std::string, std::string>>& routes();

private:
    struct ModelRef {
        std::string id;
        std::string dataset;
        std::string run_id;
        std::string path;
    };

    Response datasets() const;
    Response dataset_models(const std::string& dataset);
    Response topics(const std::string& model);
    Response chord(const std::string& model, const Request& request);
    Response documents(const std::string& model, const std::string& topic, const Request& request);
    Response list_rankings(const Request& request) const;
    Response post_ranking(const Request& request);
    Response desirability_words() const;

    ModelRef find_model(const std::string& id) const;
    std::shared_ptr<const models::TopicModelResult> load_model(const ModelRef& ref);
    std::shared_ptr<const std::map<std::string, std::string>> load_threads(const std::string& dataset);

    workbench::Workspace& workspace_;
    std::mutex cache_mutex_;
    std::map<std::string, std::shared_ptr<const models::TopicModelResult>> models_;  // keyed by artifact path
    std::map<std::string, std::shared_ptr<const std::map<std::string, std::string>>> threads_;
};

struct ServerOptions {
    std::string host = "127.0.0.1";
    int port = 8080;  // 0 = pick a free port
    std::string static_dir;  // optional UI assets mounted at /
};

/// HTTP front end of ApiHandler.
class Server {
public:
    Server(workbench::Workspace& workspace, ServerOptions options);
    ~Server();
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    /// Binds and serves on a background thread; returns the bound port.
    int start();
    /// Binds and serves on the calling thread until stop().
    void listen();
    void stop();
    int port() const noexcept { return port_; }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    ServerOptions options_;
    int port_ = 0;
    std::thread thread_;
};

}  // namespace topicbench::api
