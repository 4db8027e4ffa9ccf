#include <regex>
#include <sstream>
#include <unordered_map>

#include "rng.hpp"
#include "topicbench/embedding.hpp"
#include "topicbench/error.hpp"

// After Eigen: <resolv.h> defines a `_res` macro that clashes with Eigen internals.
#include <httplib.h>

namespace topicbench::models {

using nlohmann::json;

namespace {

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

RandomProjectionEmbedder::RandomProjectionEmbedder(std::size_t dimension, std::uint64_t seed)
    : dim_(dimension), seed_(seed) {
    if (dim_ == 0) throw ConfigError("embedder dimension must be >= 1");
}

Eigen::MatrixXd RandomProjectionEmbedder::embed(const std::vector<std::string>& texts) const {
    const auto dim = static_cast<Eigen::Index>(dim_);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(texts.size()), dim);
    std::unordered_map<std::string, Eigen::VectorXd> cache;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        std::istringstream words(texts[i]);
        std::string w;
        while (words >> w) {
            auto it = cache.find(w);
            if (it == cache.end()) {
                auto rng = detail::make_rng({seed_, fnv1a(w)});
                Eigen::VectorXd v(dim);
                for (Eigen::Index k = 0; k < dim; ++k) v[k] = detail::standard_normal(rng);
                it = cache.emplace(w, std::move(v)).first;
            }
            out.row(static_cast<Eigen::Index>(i)) += it->second.transpose();
        }
        const double norm = out.row(static_cast<Eigen::Index>(i)).norm();
        if (norm > 0.0) out.row(static_cast<Eigen::Index>(i)) /= norm;
    }
    return out;
}

HttpEmbedder::HttpEmbedder(std::string url, std::string model, std::size_t dimension, std::size_t batch_size)
    : url_(std::move(url)), model_(std::move(model)), dim_(dimension), batch_(batch_size) {
    if (dim_ == 0 || batch_ == 0) throw ConfigError("http embedder: dimension and batch_size must be >= 1");
    static const std::regex kUrl(R"(^http://[^/]+(/.*)?$)");
    if (!std::regex_match(url_, kUrl)) throw ConfigError("http embedder: expected an http:// URL, got " + url_);
}

Eigen::MatrixXd HttpEmbedder::embed(const std::vector<std::string>& texts) const {
    const auto slash = url_.find('/', 7);
    const std::string origin = url_.substr(0, slash);
    const std::string path = slash == std::string::npos ? "/" : url_.substr(slash);
    httplib::Client client(origin);
    client.set_read_timeout(300, 0);

    Eigen::MatrixXd out(static_cast<Eigen::Index>(texts.size()), static_cast<Eigen::Index>(dim_));
    for (std::size_t start = 0; start < texts.size(); start += batch_) {
        const std::size_t end = std::min(texts.size(), start + batch_);
        const json body{{"model", model_},
                        {"input", std::vector<std::string>(texts.begin() + static_cast<std::ptrdiff_t>(start),
                                                           texts.begin() + static_cast<std::ptrdiff_t>(end))}};
        const auto res = client.Post(path, body.dump(), "application/json");
        if (!res) throw PipelineError("embed", "request to " + url_ + " failed: " + httplib::to_string(res.error()));
        if (res->status != 200) {
            throw PipelineError("embed", "embedding service returned HTTP " + std::to_string(res->status));
        }
        try {
            const auto reply = json::parse(res->body);
            const auto& data = reply.at("data");
            if (data.size() != end - start) throw PipelineError("embed", "embedding count mismatch");
            for (std::size_t i = 0; i < data.size(); ++i) {
                const auto v = data[i].at("embedding").get<std::vector<double>>();
                if (v.size() != dim_) {
                    throw PipelineError("embed", "expected dimension " + std::to_string(dim_) + ", got " +
                                                     std::to_string(v.size()));
                }
                for (std::size_t k = 0; k < dim_; ++k) {
                    out(static_cast<Eigen::Index>(start + i), static_cast<Eigen::Index>(k)) = v[k];
                }
            }
        } catch (const json::exception& e) {
            throw PipelineError("embed", std::string("malformed embedding response: ") + e.what());
        }
    }
    return out;
}

std::unique_ptr<Embedder> make_embedder(const json& config) {
    try {
        const auto backend = config.value("backend", std::string("random_projection"));
        if (backend == "random_projection") {
            return std::make_unique<RandomProjectionEmbedder>(config.value("dimension", std::size_t{64}),
                                                              config.value("seed", std::uint64_t{0}));
        }
        if (backend == "http") {
            return std::make_unique<HttpEmbedder>(config.at("url").get<std::string>(),
                                                  config.value("model", std::string("all-MiniLM-L6-v2")),
                                                  config.at("dimension").get<std::size_t>(),
                                                  config.value("batch_size", std::size_t{64}));
        }
        throw ConfigError("unknown embedder backend: " + backend);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("embedder config: ") + e.what());
    }
}

}  // namespace topicbench::models
