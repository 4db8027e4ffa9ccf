#include <algorithm>

#include <spdlog/spdlog.h>

#include "topicbench/embedding.hpp"
#include "topicbench/error.hpp"
#include "topicbench/workbench.hpp"

namespace topicbench::workbench {

using models::Method;
using preprocess::TokenSet;

SelectionConfig default_selection(Method method) {
    SelectionConfig s;
    s.strategy = method == Method::Embed ? "median" : "sweep";
    return s;
}

std::vector<TokenSet> drop_empty(const std::vector<TokenSet>& sets, const std::string& label) {
    std::vector<TokenSet> out;
    std::copy_if(sets.begin(), sets.end(), std::back_inserter(out), [](const TokenSet& t) { return !t.tokens.empty(); });
    if (out.size() != sets.size())
        spdlog::info("{}: {} documents without tokens left out of training", label, sets.size() - out.size());
    if (out.empty()) throw ValidationError(label + ": no document has tokens");
    return out;
}

namespace {

TrainingOutcome train_bow(const TrainingSpec& spec, const std::vector<TokenSet>& docs, const std::string& label) {
    const auto vocab = models::build_vocabulary(docs);
    const auto corpus = models::to_bow(docs, vocab);
    const Method m = spec.method;
    TrainingOutcome out;

    std::function<TopicModelResult(int)> fit;
    if (m == Method::Lda) {
        auto lc = spec.config.get<models::LdaConfig>();
        if (!spec.config.contains("seed")) lc.seed = spec.seed;
        // Pinned so artifacts do not depend on the host's core count.
        if (!spec.config.contains("workers")) lc.workers = 1;
        out.seeds = {{"lda", lc.seed}};
        fit = [&corpus, &vocab, lc](int k) mutable {
            if (k > 0) lc.num_topics = k;
            return models::train_lda(corpus, vocab.tokens(), lc);
        };
    } else {
        auto nc = spec.config.get<models::NmfConfig>();
        if (!spec.config.contains("seed")) nc.seed = spec.seed;
        out.seeds = {{"nmf", nc.seed}};
        auto X = std::make_shared<models::SparseMatrix>(models::tfidf_matrix(corpus));
        fit = [X, &vocab, &corpus, nc](int k) mutable {
            if (k > 0) nc.num_topics = k;
            return models::train_nmf(*X, vocab.tokens(), corpus.doc_ids, nc);
        };
    }

    if (spec.selection.strategy == "fixed") {
        out.selection = {{"strategy", "fixed"}};
        out.model = metrics::timed_training([&] { return fit(0); });
        return out;
    }
    if (spec.selection.strategy != "sweep")
        throw ConfigError(std::string(models::method_name(m)) + " selection must be \"fixed\" or \"sweep\"");
    std::optional<TopicModelResult> best;
    int best_k = 0;
    double best_c = 0.0;
    const auto sweep = models::choose_topics_by_coherence(
        [&](int k) {
            auto model = metrics::timed_training([&] { return fit(k); });
            const double c = metrics::topic_coherence(model, docs, spec.coherence);
            // Same strict comparison as the sweep, so the kept model is its argmax.
            if (!best || c > best_c) {
                best_c = c;
                best = std::move(model);
                best_k = k;
            }
            return c;
        },
        spec.selection.grid);
    if (!best || best_k != sweep.best_k) throw PipelineError("select", "coherence sweep lost its best model");
    out.selection = sweep;
    out.selection["strategy"] = "sweep";
    spdlog::info("select {} {}: K={} (C_v {:.4f})", models::method_name(m), label, sweep.best_k, sweep.best_coherence);
    out.model = std::move(*best);
    return out;
}

TrainingOutcome train_embed(const TrainingSpec& spec, const std::vector<TokenSet>& docs, const std::string& label) {
    std::vector<std::string> ids, texts;
    for (const auto& d : docs) {
        ids.push_back(d.thread_id);
        std::string text;
        for (const auto& t : d.tokens) text += (text.empty() ? "" : " ") + t;
        texts.push_back(std::move(text));
    }
    const auto embedder = models::make_embedder(spec.embedder);
    auto ec = spec.config.get<models::EmbedClusterConfig>();
    const std::uint64_t base = spec.config.contains("seed") ? ec.seed : spec.seed;
    TrainingOutcome out;

    auto fit = [&](std::uint64_t seed) {
        ec.seed = seed;
        return metrics::timed_training([&] { return models::train_embed_cluster(ids, texts, ec, *embedder); });
    };
    if (spec.selection.strategy == "fixed") {
        out.seeds = {{"embed", base}};
        out.selection = {{"strategy", "fixed"}};
        out.model = fit(base);
        return out;
    }
    if (spec.selection.strategy != "median") throw ConfigError("EMBED selection must be \"fixed\" or \"median\"");
    std::vector<TopicModelResult> runs;
    const auto median = models::choose_topics_median(
        [&](int, std::uint64_t seed) {
            runs.push_back(fit(seed));
            return static_cast<int>(runs.back().num_topics());
        },
        spec.selection.runs, base);
    // The kept model is the first run that landed on the median count.
    const auto it = std::find(median.counts.begin(), median.counts.end(), median.median);
    const auto index = static_cast<std::size_t>(it - median.counts.begin());
    out.seeds = {{"embed", median.seeds}, {"embed_selected", median.seeds[index]}};
    out.selection = median;
    out.selection["strategy"] = "median";
    out.selection["selected_run"] = index;
    spdlog::info("select EMBED {}: median {} topics over {} runs (mean {:.2f}, sd {:.2f})", label, median.median,
                 spec.selection.runs, median.mean, median.std_dev);
    out.model = std::move(runs[index]);
    return out;
}

}  // namespace

TrainingOutcome train_with_selection(const TrainingSpec& spec, const std::vector<TokenSet>& token_sets,
                                     const std::string& label) {
    const auto docs = drop_empty(token_sets, label);
    return spec.method == Method::Embed ? train_embed(spec, docs, label) : train_bow(spec, docs, label);
}

}  // namespace topicbench::workbench
