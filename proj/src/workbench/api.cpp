#include "topicbench/api.hpp"

#include <algorithm>
#include <charconv>
#include <regex>

#include <spdlog/spdlog.h>

#include "topicbench/error.hpp"

// After the Eigen headers: <resolv.h> defines a `_res` macro.
#include <httplib.h>

namespace topicbench::api {

using workbench::FieldError;

namespace {

Response error(int status, const std::string& code, const std::string& message) {
    return {status, {{"error", code}, {"message", message}}};
}

Response not_found(const std::string& message) { return error(404, "not_found", message); }

std::optional<long> parse_int(const std::string& s) {
    long v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

std::optional<double> parse_double(const std::string& s) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) return std::nullopt;
        return v;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

// Cuts at a UTF-8 boundary at or before `n` bytes.
std::string excerpt(const std::string& text, std::size_t n) {
    if (text.size() <= n) return text;
    std::size_t cut = n;
    while (cut > 0 && (static_cast<unsigned char>(text[cut]) & 0xC0) == 0x80) --cut;
    return text.substr(0, cut) + "...";
}

json keywords_json(const std::vector<models::Keyword>& kw) {
    json out = json::array();
    for (const auto& k : kw) out.push_back({{"word", k.word}, {"weight", k.weight}});
    return out;
}

}  // namespace

ApiHandler::ApiHandler(workbench::Workspace& workspace) : workspace_(workspace) {}

const std::vector<std::pair<std::string, std::string>>& ApiHandler::routes() {
    static const std::vector<std::pair<std::string, std::string>> r{
        {"GET", "/datasets"},
        {"GET", "/datasets/{dataset}/models"},
        {"GET", "/models/{model}/topics"},
        {"GET", "/models/{model}/chord"},
        {"GET", "/models/{model}/topics/{topic}/documents"},
        {"GET", "/rankings"},
        {"POST", "/rankings"},
        {"GET", "/desirability-words"},
    };
    return r;
}

Response ApiHandler::handle(const Request& request) {
    static const std::regex dataset_models_re("^/datasets/([^/]+)/models$");
    static const std::regex topics_re("^/models/([^/]+)/topics$");
    static const std::regex chord_re("^/models/([^/]+)/chord$");
    static const std::regex documents_re("^/models/([^/]+)/topics/([^/]+)/documents$");

    std::string path = request.path;
    while (path.size() > 1 && path.back() == '/') path.pop_back();
    const bool get = request.method == "GET";
    std::smatch m;
    try {
        if (path == "/rankings") {
            if (get) return list_rankings(request);
            if (request.method == "POST") return post_ranking(request);
            return error(405, "method_not_allowed", request.method + " " + path);
        }
        const bool known = path == "/datasets" || path == "/desirability-words" ||
                           std::regex_match(path, m, dataset_models_re) || std::regex_match(path, m, topics_re) ||
                           std::regex_match(path, m, chord_re) || std::regex_match(path, m, documents_re);
        if (!known) return not_found("no route for " + path);
        if (!get) return error(405, "method_not_allowed", request.method + " " + path);

        if (path == "/datasets") return datasets();
        if (path == "/desirability-words") return desirability_words();
        if (std::regex_match(path, m, dataset_models_re)) return dataset_models(m[1]);
        if (std::regex_match(path, m, topics_re)) return topics(m[1]);
        if (std::regex_match(path, m, chord_re)) return chord(m[1], request);
        if (std::regex_match(path, m, documents_re)) return documents(m[1], m[2], request);
        return not_found("no route for " + path);
    } catch (const NotFoundError& e) {
        return not_found(e.what());
    } catch (const std::exception& e) {
        spdlog::error("api {} {}: {}", request.method, request.path, e.what());
        return error(500, "internal", e.what());
    }
}

Response ApiHandler::datasets() const {
    json out = json::array();
    for (const auto& [name, e] : workspace_.registry()) {
        json ids = json::array();
        for (const auto& [id, _] : e.models) ids.push_back(id);
        out.push_back({{"name", name}, {"run_id", e.run_id}, {"models", ids}});
    }
    return {200, {{"datasets", out}}};
}

Response ApiHandler::dataset_models(const std::string& dataset) {
    const auto reg = workspace_.registry();
    const auto it = reg.find(dataset);
    if (it == reg.end()) return not_found("unknown dataset '" + dataset + "'");
    json out = json::array();
    for (const auto& [id, path] : it->second.models) {
        const auto model = load_model({id, dataset, it->second.run_id, path});
        out.push_back({{"id", id},
                       {"dataset", dataset},
                       {"method", models::method_name(model->method)},
                       {"run_id", it->second.run_id},
                       {"num_topics", model->num_topics()},
                       {"num_documents", model->num_docs()}});
    }
    return {200, {{"dataset", dataset}, {"models", out}}};
}

Response ApiHandler::topics(const std::string& id) {
    const auto ref = find_model(id);
    const auto model = load_model(ref);
    json topics = json::array();
    for (const auto& t : model->topics)
        topics.push_back({{"topic_id", t.id}, {"size", t.size}, {"keywords", keywords_json(t.keywords)}});
    return {200,
            {{"model", id},
             {"dataset", ref.dataset},
             {"method", models::method_name(model->method)},
             {"topics", topics}}};
}

Response ApiHandler::chord(const std::string& id, const Request& request) {
    double threshold = workbench::kDefaultMembershipThreshold;
    if (const auto it = request.query.find("threshold"); it != request.query.end()) {
        const auto v = parse_double(it->second);
        if (!v || !(*v >= 0.0 && *v <= 1.0))
            return error(400, "bad_request", "threshold must be a number in [0, 1]");
        threshold = *v;
    }
    const auto model = load_model(find_model(id));
    return {200, json(workbench::chord_graph(*model, threshold, 10, id))};
}

Response ApiHandler::documents(const std::string& id, const std::string& topic, const Request& request) {
    const auto ref = find_model(id);
    const auto model = load_model(ref);
    const auto t = parse_int(topic);
    if (!t || *t < 0 || static_cast<std::size_t>(*t) >= model->num_topics())
        return not_found("model '" + id + "' has no topic " + topic);

    long limit = kDefaultDocumentLimit;
    long offset = 0;
    double threshold = workbench::kDefaultMembershipThreshold;
    if (const auto it = request.query.find("limit"); it != request.query.end()) {
        const auto v = parse_int(it->second);
        if (!v || *v < 1 || *v > kMaxDocumentLimit)
            return error(400, "bad_request", "limit must be an integer in [1, " + std::to_string(kMaxDocumentLimit) + "]");
        limit = *v;
    }
    if (const auto it = request.query.find("offset"); it != request.query.end()) {
        const auto v = parse_int(it->second);
        if (!v || *v < 0) return error(400, "bad_request", "offset must be a non-negative integer");
        offset = *v;
    }
    if (const auto it = request.query.find("threshold"); it != request.query.end()) {
        const auto v = parse_double(it->second);
        if (!v || !(*v >= 0.0 && *v <= 1.0))
            return error(400, "bad_request", "threshold must be a number in [0, 1]");
        threshold = *v;
    }

    // Same membership rule as the chord graph.
    std::vector<std::pair<double, std::size_t>> members;
    for (std::size_t d = 0; d < model->num_docs(); ++d) {
        if (model->soft()) {
            const double w = model->doc_topic(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(*t));
            if (w >= threshold) members.emplace_back(w, d);
        } else if (model->labels[d] == *t) {
            members.emplace_back(model->probabilities[d], d);
        }
    }
    std::sort(members.begin(), members.end(), [&](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return model->doc_ids[a.second] < model->doc_ids[b.second];
    });

    const auto threads = load_threads(ref.dataset);
    json docs = json::array();
    const auto begin = std::min(members.size(), static_cast<std::size_t>(offset));
    const auto end = std::min(members.size(), begin + static_cast<std::size_t>(limit));
    for (std::size_t i = begin; i < end; ++i) {
        const auto& doc_id = model->doc_ids[members[i].second];
        const auto text = threads->find(doc_id);
        docs.push_back({{"thread_id", doc_id},
                        {"membership", members[i].first},
                        {"excerpt", text == threads->end() ? std::string() : excerpt(text->second, kExcerptChars)}});
    }
    return {200,
            {{"model", id},
             {"topic_id", *t},
             {"threshold", threshold},
             {"total", members.size()},
             {"limit", limit},
             {"offset", offset},
             {"documents", docs}}};
}

Response ApiHandler::list_rankings(const Request& request) const {
    std::string dataset;
    if (const auto it = request.query.find("dataset"); it != request.query.end()) dataset = it->second;
    return {200, {{"rankings", workspace_.rankings().list(dataset)}}};
}

Response ApiHandler::post_ranking(const Request& request) {
    json body;
    try {
        body = json::parse(request.body);
    } catch (const json::parse_error& e) {
        return error(400, "bad_request", std::string("body is not valid JSON: ") + e.what());
    }
    std::vector<std::string> available;
    std::vector<FieldError> errors;
    const auto reg = workspace_.registry();
    if (body.is_object() && body.contains("dataset") && body["dataset"].is_string()) {
        const auto it = reg.find(body["dataset"].get<std::string>());
        if (it == reg.end()) {
            errors.push_back({"dataset", "unknown dataset"});
        } else {
            for (const auto& [id, path] : it->second.models)
                available.emplace_back(models::method_name(load_model({id, it->first, it->second.run_id, path})->method));
        }
    }
    const auto words = workspace_.desirability_words();
    workbench::RankingRecord record;
    auto field_errors = workbench::validate_ranking(body, available, {words.begin(), words.end()}, record);
    if (!errors.empty()) {
        // Without a dataset there is nothing to check the ordering against.
        std::erase_if(field_errors, [](const FieldError& e) { return e.field == "ordering" || e.field.starts_with("words."); });
        errors.insert(errors.end(), field_errors.begin(), field_errors.end());
    } else {
        errors = std::move(field_errors);
    }
    if (!errors.empty()) return {422, {{"error", "validation"}, {"fields", errors}}};
    workspace_.rankings().append(record);
    return {201, json(record)};
}

Response ApiHandler::desirability_words() const {
    return {200, {{"words", workspace_.desirability_words()}, {"max_per_method", workbench::kMaxDesirabilityWords}}};
}

ApiHandler::ModelRef ApiHandler::find_model(const std::string& id) const {
    for (const auto& [name, e] : workspace_.registry()) {
        const auto it = e.models.find(id);
        if (it != e.models.end()) return {id, name, e.run_id, it->second};
    }
    throw NotFoundError("unknown model '" + id + "'");
}

std::shared_ptr<const models::TopicModelResult> ApiHandler::load_model(const ModelRef& ref) {
    {
        std::lock_guard lock(cache_mutex_);
        if (const auto it = models_.find(ref.path); it != models_.end()) return it->second;
    }
    // Completed run artifacts are immutable, so a cache keyed by path never goes stale.
    auto model = std::make_shared<const models::TopicModelResult>(models::read_model(workspace_.resolve(ref.path)));
    std::lock_guard lock(cache_mutex_);
    return models_.emplace(ref.path, std::move(model)).first->second;
}

std::shared_ptr<const std::map<std::string, std::string>> ApiHandler::load_threads(const std::string& dataset) {
    const auto reg = workspace_.registry();
    const auto it = reg.find(dataset);
    if (it == reg.end() || it->second.threads.empty()) return std::make_shared<const std::map<std::string, std::string>>();
    const std::string& path = it->second.threads;
    {
        std::lock_guard lock(cache_mutex_);
        if (const auto c = threads_.find(path); c != threads_.end()) return c->second;
    }
    auto texts = std::make_shared<std::map<std::string, std::string>>();
    for (auto& t : ingest::read_threads_json(workspace_.resolve(path))) (*texts)[t.id] = std::move(t.text);
    std::lock_guard lock(cache_mutex_);
    return threads_.emplace(path, std::move(texts)).first->second;
}

// ---------------------------------------------------------------------------
// Server

struct Server::Impl {
    explicit Impl(workbench::Workspace& ws) : handler(ws) {}
    ApiHandler handler;
    httplib::Server http;
};

Server::Server(workbench::Workspace& workspace, ServerOptions options)
    : impl_(std::make_unique<Impl>(workspace)), options_(std::move(options)) {
    auto& http = impl_->http;
    if (!options_.static_dir.empty() && !http.set_mount_point("/", options_.static_dir))
        throw ConfigError("static directory not found: " + options_.static_dir);

    auto dispatch = [this](const httplib::Request& req, httplib::Response& res) {
        Request r;
        r.method = req.method;
        r.path = req.path;
        for (const auto& [k, v] : req.params) r.query.emplace(k, v);
        r.body = req.body;
        const Response out = impl_->handler.handle(r);
        res.status = out.status;
        res.set_content(out.text(), "application/json");
    };
    http.Get(".*", dispatch);
    http.Post(".*", dispatch);
    http.Put(".*", dispatch);
    http.Delete(".*", dispatch);
    http.Patch(".*", dispatch);
}

Server::~Server() { stop(); }

int Server::start() {
    auto& http = impl_->http;
    if (options_.port == 0) {
        port_ = http.bind_to_any_port(options_.host);
    } else {
        port_ = http.bind_to_port(options_.host, options_.port) ? options_.port : -1;
    }
    if (port_ < 0) throw Error("cannot bind " + options_.host + ":" + std::to_string(options_.port));
    thread_ = std::thread([&http] { http.listen_after_bind(); });
    http.wait_until_ready();
    spdlog::info("serving on http://{}:{}", options_.host, port_);
    return port_;
}

void Server::listen() {
    start();
    if (thread_.joinable()) thread_.join();
}

void Server::stop() {
    impl_->http.stop();
    if (thread_.joinable()) thread_.join();
}

}  // namespace topicbench::api
