#include <algorithm>

#include "topicbench/error.hpp"
#include "topicbench/workbench.hpp"

namespace topicbench::workbench {

void to_json(json& j, const ChordGraph& g) {
    json nodes = json::array();
    for (const auto& n : g.nodes) nodes.push_back({{"topic_id", n.topic_id}, {"words", n.words}, {"size", n.size}});
    json edges = json::array();
    for (const auto& e : g.edges) edges.push_back({{"source", e.source}, {"target", e.target}, {"shared", e.shared}});
    j = {{"model", g.model}, {"threshold", g.threshold}, {"nodes", nodes}, {"edges", edges}};
}

void from_json(const json& j, ChordGraph& g) {
    g = ChordGraph{};
    g.model = j.value("model", "");
    g.threshold = j.at("threshold").get<double>();
    for (const auto& n : j.at("nodes"))
        g.nodes.push_back({n.at("topic_id").get<int>(), n.at("words").get<std::vector<std::string>>(),
                           n.at("size").get<std::size_t>()});
    for (const auto& e : j.at("edges"))
        g.edges.push_back({e.at("source").get<int>(), e.at("target").get<int>(), e.at("shared").get<std::size_t>()});
}

ChordGraph chord_graph(const TopicModelResult& model, double threshold, std::size_t top_words, std::string model_id) {
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("chord: threshold must lie in [0, 1]");
    ChordGraph g;
    g.model = std::move(model_id);
    g.threshold = threshold;
    const std::size_t k = model.num_topics();

    // Per document, the topics it belongs to (ascending).
    std::vector<std::vector<int>> belongs(model.num_docs());
    for (std::size_t d = 0; d < model.num_docs(); ++d) {
        if (model.soft()) {
            for (std::size_t t = 0; t < k; ++t)
                if (model.doc_topic(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(t)) >= threshold)
                    belongs[d].push_back(static_cast<int>(t));
        } else if (model.labels[d] != models::kOutlier) {
            belongs[d].push_back(model.labels[d]);
        }
    }

    std::vector<std::size_t> sizes(k, 0);
    std::vector<std::vector<std::size_t>> shared(k, std::vector<std::size_t>(k, 0));
    for (const auto& topics : belongs) {
        for (std::size_t a = 0; a < topics.size(); ++a) {
            ++sizes[static_cast<std::size_t>(topics[a])];
            for (std::size_t b = a + 1; b < topics.size(); ++b)
                ++shared[static_cast<std::size_t>(topics[a])][static_cast<std::size_t>(topics[b])];
        }
    }

    for (std::size_t t = 0; t < k; ++t) {
        ChordNode node;
        node.topic_id = static_cast<int>(t);  // labels index topics positionally
        const auto& kw = model.topics[t].keywords;
        for (std::size_t i = 0; i < std::min(top_words, kw.size()); ++i) node.words.push_back(kw[i].word);
        node.size = sizes[t];
        g.nodes.push_back(std::move(node));
    }
    for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = a + 1; b < k; ++b)
            if (shared[a][b] > 0)
                g.edges.push_back({static_cast<int>(a), static_cast<int>(b), shared[a][b]});
    return g;
}

}  // namespace topicbench::workbench
