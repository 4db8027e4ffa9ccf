#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include <spdlog/sinks/ringbuffer_sink.h>
#include <spdlog/spdlog.h>

#include "temp_dir.hpp"
#include "topicbench/error.hpp"
#include "topicbench/preprocess.hpp"

using namespace topicbench;
using namespace topicbench::preprocess;

namespace {

using Tokens = std::vector<std::string>;

// Dense brute-force TF-IDF: raw counts, idf = ln((1+N)/(1+df)) + 1, rows
// L2-normalised; returns the column maxima keyed by term.
std::map<std::string, double> oracle_max_tfidf(const std::vector<TokenSet>& docs) {
    std::vector<std::string> vocab;
    for (const auto& d : docs) {
        for (const auto& t : d.tokens) {
            if (std::find(vocab.begin(), vocab.end(), t) == vocab.end()) vocab.push_back(t);
        }
    }
    const std::size_t n = docs.size();
    const std::size_t v = vocab.size();
    std::vector<std::vector<double>> m(n, std::vector<double>(v, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < v; ++j) {
            m[i][j] = static_cast<double>(std::count(docs[i].tokens.begin(), docs[i].tokens.end(), vocab[j]));
        }
    }
    for (std::size_t j = 0; j < v; ++j) {
        double df = 0;
        for (std::size_t i = 0; i < n; ++i) df += m[i][j] > 0 ? 1 : 0;
        const double idf = std::log((1.0 + static_cast<double>(n)) / (1.0 + df)) + 1.0;
        for (std::size_t i = 0; i < n; ++i) m[i][j] *= idf;
    }
    std::map<std::string, double> best;
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0;
        for (std::size_t j = 0; j < v; ++j) s += m[i][j] * m[i][j];
        for (std::size_t j = 0; j < v; ++j) {
            const double w = s > 0 ? m[i][j] / std::sqrt(s) : 0.0;
            best[vocab[j]] = std::max(best[vocab[j]], w);
        }
    }
    return best;
}

// numpy's default "linear" percentile.
double oracle_quantile(std::vector<double> x, double q) {
    std::sort(x.begin(), x.end());
    const double h = (static_cast<double>(x.size()) - 1) * q;
    const auto j = static_cast<std::size_t>(h);
    if (j + 1 >= x.size()) return x.back();
    return (1 - (h - static_cast<double>(j))) * x[j] + (h - static_cast<double>(j)) * x[j + 1];
}

std::vector<ingest::Thread> random_threads(std::mt19937_64& rng, int n) {
    static const std::vector<std::string> words{
        "machine", "learning", "neural", "network", "data", "the", "and", "removed", "deleted", "imo", "tbh",
        "running", "studies", "apple", "banana", "they", "was", "x", "42", "café", "сafe", "“quoted”", "model",
        "training", "upvote", "http://example.com/x", "<b>bold</b>", "others", "supercalifragilisticexpialidocious"};
    std::vector<ingest::Thread> out;
    for (int i = 0; i < n; ++i) {
        std::string text;
        const int len = 5 + static_cast<int>(rng() % 40);
        for (int k = 0; k < len; ++k) {
            // Bias towards a recurring phrase so bigrams get promoted.
            if (rng() % 4 == 0) {
                text += "machine learning ";
            } else {
                text += words[rng() % words.size()] + " ";
            }
        }
        out.push_back({"t" + std::to_string(i), text, 0});
    }
    return out;
}

class LogCapture {
public:
    LogCapture() : sink_(std::make_shared<spdlog::sinks::ringbuffer_sink_mt>(64)) {
        previous_ = spdlog::default_logger();
        spdlog::set_default_logger(std::make_shared<spdlog::logger>("capture", sink_));
    }
    ~LogCapture() { spdlog::set_default_logger(previous_); }
    bool contains(const std::string& needle) const {
        for (const auto& line : sink_->last_formatted()) {
            if (line.find(needle) != std::string::npos) return true;
        }
        return false;
    }

private:
    std::shared_ptr<spdlog::sinks::ringbuffer_sink_mt> sink_;
    std::shared_ptr<spdlog::logger> previous_;
};

}  // namespace

TEST_SUITE("normalize and tokenize") {

TEST_CASE("normalize_text") {
    CHECK(normalize_text("hello") == "hello");
    CHECK(normalize_text("\xD1\x81" "afe") == "cafe");  // Cyrillic es
    CHECK(normalize_text("\xE2\x80\x9Cquoted\xE2\x80\x9D") == "quoted");
    CHECK(tokenize(normalize_text("<p>hi</p> &amp; more")) == Tokens{"hi", "more"});
    CHECK(tokenize(normalize_text("see https://example.com/a?b=c now")) == Tokens{"see", "now"});
}

TEST_CASE("tokenize") {
    CHECK(tokenize("Hello, World!") == Tokens{"hello", "world"});
    CHECK(tokenize("a b").empty());
    CHECK(tokenize(std::string(34, 'q')).empty());
    CHECK(tokenize(std::string(15, 'q')) == Tokens{std::string(15, 'q')});
    CHECK(tokenize("don't stop") == Tokens{"don", "stop"});
    CHECK(tokenize("caf\xC3\xA9 na\xC3\xAFve") == Tokens{"cafe", "naive"});
    CHECK(tokenize("abc123def") == Tokens{"abc", "def"});
    PreprocessConfig c;
    c.min_token_len = 4;
    CHECK(tokenize("one three", c) == Tokens{"three"});
}

TEST_CASE("remove_stopwords") {
    CHECK(remove_stopwords({"the", "removed", "apple"}) == Tokens{"apple"});
    CHECK(remove_stopwords({}).empty());
    PreprocessConfig c;
    c.extra_stopwords = {"upvote"};
    CHECK(remove_stopwords({"upvote", "cake"}, c) == Tokens{"cake"});
    CHECK(remove_stopwords({"deleted", "apple", "and", "pear"}) == Tokens{"apple", "pear"});
}

}  // TEST_SUITE

TEST_SUITE("bigrams") {

TEST_CASE("score formula") {
    CHECK(bigram_score(50, 60, 55, 1000, 5) == doctest::Approx(13.6364).epsilon(1e-4));
    CHECK(bigram_score(50, 60, 55, 1000, 5) >= 10.0);
    CHECK(bigram_score(1, 1, 1, 10, 5) < 0.0);
}

TEST_CASE("corpus-level promotion") {
    // 6 docs of "new york" plus filler; counts: new=6, york=6, (new,york)=6.
    std::vector<TokenSet> sets;
    for (int i = 0; i < 6; ++i) sets.push_back({"d" + std::to_string(i), {"new", "york", "w" + std::to_string(i)}});
    sets.push_back({"x", {"lonely", "pair"}});
    const auto model = learn_bigrams(sets);
    // V = distinct unigrams (new, york, w0..w5, lonely, pair) + distinct pairs.
    std::size_t unigrams = 10;
    std::size_t pairs = 1 + 6 + 1;  // (new,york), (york,wi), (lonely,pair)
    CHECK(model.vocab_size == unigrams + pairs);
    const double expected = (6.0 - 5.0) * static_cast<double>(unigrams + pairs) / (6.0 * 6.0);
    CHECK(model.score("new", "york") == doctest::Approx(expected));

    PreprocessConfig c;
    c.bigram_threshold = 0.4;
    const auto out = detect_bigrams(sets, c);
    CHECK(out[0].tokens == Tokens{"new_york", "w0"});
    CHECK(out.back().tokens == Tokens{"lonely", "pair"});  // occurs once
    CHECK(detect_bigrams({}).empty());
}

TEST_CASE("de-concatenating promoted bigrams recovers the input") {
    std::mt19937_64 rng(3);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<TokenSet> sets;
        for (int d = 0; d < 30; ++d) {
            TokenSet ts{"d" + std::to_string(d), {}};
            const int len = static_cast<int>(rng() % 25);
            for (int k = 0; k < len; ++k) ts.tokens.push_back("w" + std::to_string(rng() % 6));
            sets.push_back(ts);
        }
        PreprocessConfig c;
        c.bigram_min_count = 1;
        c.bigram_threshold = 0.5;
        const auto out = detect_bigrams(sets, c);
        for (std::size_t d = 0; d < sets.size(); ++d) {
            Tokens split;
            for (const auto& t : out[d].tokens) {
                const auto us = t.find('_');
                if (us == std::string::npos) {
                    split.push_back(t);
                } else {
                    split.push_back(t.substr(0, us));
                    split.push_back(t.substr(us + 1));
                }
            }
            CHECK(split == sets[d].tokens);
        }
    }
}

}  // TEST_SUITE

TEST_SUITE("lemmatize") {

TEST_CASE("dictionary backend") {
    DictionaryLemmatizer dict;
    dict.add("running", "run", Pos::Verb);
    dict.add("they", "they", Pos::Pron);
    CHECK(lemmatize({"running"}, dict) == Tokens{"run"});
    CHECK(lemmatize({"apple"}, dict) == Tokens{"apple"});
    CHECK(lemmatize({"they"}, dict).empty());
}

TEST_CASE("dictionary backend from file") {
    testing::TempDir dir;
    {
        std::ofstream f(dir / "lemmas.tsv");
        f << "# form\tlemma\tpos\nran\trun\tVERB\nquickly\tquickly\tADV\nthem\tthem\tPRON\n";
    }
    PreprocessConfig c;
    c.lemmatizer = "dictionary";
    c.lemma_dictionary = dir / "lemmas.tsv";
    const auto lem = make_lemmatizer(c);
    CHECK(lemmatize({"ran", "quickly", "them", "pear"}, *lem, c) == Tokens{"run", "quickly", "pear"});

    {
        std::ofstream f(dir / "bad.tsv");
        f << "ran\trun\tNOTAPOS\n";
    }
    c.lemma_dictionary = dir / "bad.tsv";
    CHECK_THROWS_AS(make_lemmatizer(c), PipelineError);
}

TEST_CASE("rule backend") {
    RuleLemmatizer rules;
    CHECK(lemmatize({"running", "studies", "making", "stopped", "agreed", "ran", "apple", "they"}, rules) ==
          Tokens{"run", "study", "make", "stop", "agree", "run", "apple"});
    CHECK(rules.analyze("children").lemma == "child");
    CHECK(rules.analyze("boxes").lemma == "box");
    CHECK(rules.analyze("morning").lemma == "morning");
    CHECK(rules.analyze("need").lemma == "need");
    CHECK(rules.analyze("machine_learning").lemma == "machine_learning");
    // A lemma that lands on a stopword is dropped.
    CHECK(lemmatize({"others"}, rules).empty());
}

TEST_CASE("unavailable backend names the stage") {
    PreprocessConfig c;
    c.lemmatizer = "spacy-gpu";
    try {
        (void)make_lemmatizer(c);
        FAIL("expected PipelineError");
    } catch (const PipelineError& e) {
        CHECK(e.stage() == "lemmatize");
    }
    c.lemmatizer = "dictionary";
    CHECK_THROWS_AS(make_lemmatizer(c), PipelineError);
}

}  // TEST_SUITE

TEST_SUITE("acronyms and cleanup") {

TEST_CASE("expand_acronyms") {
    const auto m = PreprocessConfig::default_acronyms();
    CHECK(expand_acronyms({"imo"}, m) == Tokens{"in", "my", "opinion"});
    CHECK(expand_acronyms({"tbh"}, m) == Tokens{"to", "be", "honest"});
    CHECK(expand_acronyms({"banana"}, m) == Tokens{"banana"});
}

TEST_CASE("final_cleanup") {
    CHECK(final_cleanup({"x", "42", "word"}) == Tokens{"word"});
    CHECK(final_cleanup({}).empty());
    CHECK(final_cleanup({"a1", "2b"}) == Tokens{"a1", "2b"});
}

}  // TEST_SUITE

TEST_SUITE("tfidf_filter") {

TEST_CASE("matches the brute-force matrix") {
    std::mt19937_64 rng(11);
    for (int rep = 0; rep < 10; ++rep) {
        std::vector<TokenSet> docs;
        for (int d = 0; d < 12; ++d) {
            TokenSet ts{"d" + std::to_string(d), {}};
            const int len = 1 + static_cast<int>(rng() % 15);
            for (int k = 0; k < len; ++k) ts.tokens.push_back("t" + std::to_string(rng() % 20));
            docs.push_back(ts);
        }
        const auto got = max_tfidf_weights(docs);
        const auto want = oracle_max_tfidf(docs);
        REQUIRE(got.size() == want.size());
        for (const auto& [t, w] : want) CHECK(got.at(t) == doctest::Approx(w).epsilon(1e-12));

        for (double q : {0.25, 0.5, 0.75, 0.9}) {
            std::vector<double> vals;
            for (const auto& [t, w] : want) vals.push_back(w);
            const double cut = oracle_quantile(vals, q);
            const auto filtered = tfidf_filter(docs, q);
            for (std::size_t d = 0; d < docs.size(); ++d) {
                Tokens expect;
                for (const auto& t : docs[d].tokens) {
                    if (want.at(t) >= cut) expect.push_back(t);
                }
                CHECK(filtered[d].tokens == expect);
            }
        }
    }
}

TEST_CASE("quantile 0 is the identity") {
    std::vector<TokenSet> docs{{"a", {"alpha", "beta"}}, {"b", {"beta", "gamma", "gamma"}}};
    CHECK(tfidf_filter(docs, 0.0) == docs);
}

TEST_CASE("toy corpus with a dominant term keeps only the top quartile") {
    std::vector<TokenSet> docs{{"a", {"alpha", "alpha", "alpha", "alpha", "beta"}},
                               {"b", {"beta", "gamma", "delta"}},
                               {"c", {"gamma", "delta", "beta"}},
                               {"d", {"beta", "delta", "gamma"}}};
    const auto want = oracle_max_tfidf(docs);
    REQUIRE(want.size() == 4);
    const auto out = tfidf_filter(docs, 0.75);
    CHECK(out[0].tokens == Tokens{"alpha", "alpha", "alpha", "alpha"});
    for (std::size_t d = 1; d < out.size(); ++d) CHECK(out[d].tokens.empty());
}

TEST_CASE("quantile") {
    CHECK(quantile({1, 2, 3, 4}, 0.75) == doctest::Approx(3.25));
    CHECK(quantile({5}, 0.3) == 5);
    CHECK_THROWS_AS(quantile({}, 0.5), DegenerateInputError);
}

}  // TEST_SUITE

TEST_SUITE("pipeline") {

TEST_CASE("end to end on a small thread") {
    std::vector<ingest::Thread> threads{{"t1", "IMO the <b>running</b> shoes were deleted, tbh. 42 x", 0}};
    const auto out = run_pipeline(threads, PreprocessConfig{});
    REQUIRE(out.size() == 1);
    CHECK(out[0].thread_id == "t1");
    CHECK(out[0].tokens == Tokens{"in", "my", "opinion", "run", "shoe", "to", "be", "honest"});
}

TEST_CASE("properties on random corpora") {
    std::mt19937_64 rng(21);
    const auto threads = random_threads(rng, 60);
    PreprocessConfig c;
    // Small vocabulary keeps V low, so the threshold must be low too.
    c.bigram_min_count = 2;
    c.bigram_threshold = 0.3;
    PipelineStats stats;
    const auto a = run_pipeline(threads, c, ModelPath::BagOfWords, &stats);
    const auto b = run_pipeline(threads, c);
    CHECK(a == b);
    CHECK(stats.bigrams_promoted > 0);

    std::set<std::string> expansion_words;
    for (const auto& [k, v] : c.acronym_map) {
        for (const auto& w : expand_acronyms({k}, c.acronym_map)) expansion_words.insert(w);
    }
    const auto& stop = default_stopwords();
    for (const auto& ts : a) {
        for (const auto& t : ts.tokens) {
            CHECK(t != "removed");
            CHECK(t != "deleted");
            if (stop.count(t) != 0) CHECK(expansion_words.count(t) == 1);
            CHECK(t.find(' ') == std::string::npos);
            CHECK(std::none_of(t.begin(), t.end(), [](unsigned char ch) { return std::isupper(ch) != 0; }));
            const bool bigram = t.find('_') != std::string::npos;
            const bool in_bounds = t.size() >= 2 && t.size() <= 15;
            CHECK((in_bounds || bigram || expansion_words.count(t) == 1));
        }
    }
}

TEST_CASE("tfidf filter is skipped on the embedding path") {
    std::mt19937_64 rng(8);
    const auto threads = random_threads(rng, 30);
    PreprocessConfig plain;
    PreprocessConfig filtered;
    filtered.tfidf_filter_quantile = 0.75;

    const auto base = run_pipeline(threads, plain, ModelPath::Embedding);
    PipelineStats stats;
    std::vector<TokenSet> embed;
    {
        LogCapture logs;
        embed = run_pipeline(threads, filtered, ModelPath::Embedding, &stats);
        CHECK(logs.contains("skipped on the embedding path"));
    }
    CHECK_FALSE(stats.tfidf_filter_applied);
    CHECK(embed == base);

    const auto bow = run_pipeline(threads, filtered, ModelPath::BagOfWords, &stats);
    CHECK(stats.tfidf_filter_applied);
    CHECK(stats.tokens_after_filter < stats.tokens_after_cleanup);
}

TEST_CASE("config validation and JSON") {
    PreprocessConfig c;
    c.min_token_len = 5;
    c.max_token_len = 3;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    PreprocessConfig q;
    q.tfidf_filter_quantile = 1.5;
    CHECK_THROWS_AS(q.validate(), ConfigError);

    PreprocessConfig orig;
    orig.tfidf_filter_quantile = 0.75;
    orig.extra_stopwords = {"foo"};
    orig.allowed_pos = {Pos::Noun};
    const nlohmann::json j = orig;
    const auto back = j.get<PreprocessConfig>();
    CHECK(back.tfidf_filter_quantile == orig.tfidf_filter_quantile);
    CHECK(back.extra_stopwords == orig.extra_stopwords);
    CHECK(back.allowed_pos == orig.allowed_pos);
    CHECK_THROWS_AS(nlohmann::json({{"allowed_pos", {"NOPE"}}}).get<PreprocessConfig>(), ConfigError);
}

TEST_CASE("token set file round trip") {
    testing::TempDir dir;
    std::vector<TokenSet> sets{{"a", {"x1", "y2"}}, {"b", {}}};
    write_token_sets(dir / "tokensets.json", sets);
    CHECK(read_token_sets(dir / "tokensets.json") == sets);
    CHECK_THROWS_AS(read_token_sets(dir / "missing.json"), NotFoundError);
}

}  // TEST_SUITE
