#include <fstream>
#include <sstream>

#include "topicbench/error.hpp"
#include "topicbench/preprocess.hpp"

namespace topicbench::preprocess {

namespace {

struct NamedPos {
    std::string_view name;
    Pos pos;
};

constexpr NamedPos kPosNames[] = {
    {"NOUN", Pos::Noun}, {"ADJ", Pos::Adj},   {"VERB", Pos::Verb}, {"ADV", Pos::Adv},
    {"PRON", Pos::Pron}, {"DET", Pos::Det},   {"ADP", Pos::Adp},   {"CONJ", Pos::Conj},
    {"NUM", Pos::Num},   {"PART", Pos::Part}, {"INTJ", Pos::Intj}, {"X", Pos::Other},
};

bool is_vowel(const std::string& w, std::size_t i) {
    switch (w[i]) {
        case 'a':
        case 'e':
        case 'i':
        case 'o':
        case 'u':
            return true;
        case 'y':
            return i > 0 && !is_vowel(w, i - 1);
        default:
            return false;
    }
}

bool has_vowel(const std::string& w) {
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (is_vowel(w, i)) return true;
    }
    return false;
}

// Number of vowel-consonant sequences, as in Porter's m.
int measure(const std::string& w) {
    int m = 0;
    bool prev_vowel = false;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const bool v = is_vowel(w, i);
        if (prev_vowel && !v) ++m;
        prev_vowel = v;
    }
    return m;
}

bool ends_cvc(const std::string& w) {
    const auto n = w.size();
    if (n < 3) return false;
    const char last = w[n - 1];
    return !is_vowel(w, n - 3) && is_vowel(w, n - 2) && !is_vowel(w, n - 1) && last != 'w' && last != 'x' &&
           last != 'y';
}

// Restores the base of a stem left by removing -ed / -ing.
std::string repair_stem(std::string stem) {
    const auto n = stem.size();
    if (n >= 2) {
        const auto tail = stem.substr(n - 2);
        if (tail == "at" || tail == "bl" || tail == "iz") return stem + "e";
        if (stem[n - 1] == stem[n - 2] && !is_vowel(stem, n - 1) && stem[n - 1] != 'l' && stem[n - 1] != 's' &&
            stem[n - 1] != 'z') {
            stem.pop_back();
            return stem;
        }
    }
    if (measure(stem) == 1 && ends_cvc(stem)) return stem + "e";
    return stem;
}

bool ends_with(const std::string& w, std::string_view suffix) {
    return w.size() >= suffix.size() && w.compare(w.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void add_all(DictionaryLemmatizer& d, std::initializer_list<const char*> words, Pos pos) {
    for (const char* w : words) d.add(w, w, pos);
}

void add_forms(DictionaryLemmatizer& d, const char* lemma, std::initializer_list<const char*> forms, Pos pos) {
    d.add(lemma, lemma, pos);
    for (const char* f : forms) d.add(f, lemma, pos);
}

}  // namespace

std::string_view pos_name(Pos p) {
    for (const auto& n : kPosNames) {
        if (n.pos == p) return n.name;
    }
    return "X";
}

Pos parse_pos(std::string_view name) {
    for (const auto& n : kPosNames) {
        if (n.name == name) return n.pos;
    }
    throw ConfigError("unknown part-of-speech tag: " + std::string(name));
}

DictionaryLemmatizer::DictionaryLemmatizer(std::map<std::string, Analysis> entries) : entries_(std::move(entries)) {}

DictionaryLemmatizer DictionaryLemmatizer::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw PipelineError("lemmatize", "cannot open lemma dictionary: " + path.string());
    DictionaryLemmatizer d;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream fields(line);
        std::string form, lemma, pos;
        if (!std::getline(fields, form, '\t') || !std::getline(fields, lemma, '\t') || !std::getline(fields, pos)) {
            throw PipelineError("lemmatize", path.string() + ":" + std::to_string(lineno) + ": expected 3 fields");
        }
        if (!pos.empty() && pos.back() == '\r') pos.pop_back();
        try {
            d.add(form, lemma, parse_pos(pos));
        } catch (const ConfigError& e) {
            throw PipelineError("lemmatize", path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return d;
}

void DictionaryLemmatizer::add(std::string form, std::string lemma, Pos pos) {
    entries_[std::move(form)] = Analysis{std::move(lemma), pos};
}

std::optional<Analysis> DictionaryLemmatizer::lookup(const std::string& token) const {
    const auto it = entries_.find(token);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

Analysis DictionaryLemmatizer::analyze(const std::string& token) const {
    return lookup(token).value_or(Analysis{token, Pos::Noun});
}

RuleLemmatizer::RuleLemmatizer() {
    auto& d = exceptions_;
    add_all(d,
            {"i", "me", "my", "mine", "myself", "we", "us", "our", "ours", "ourselves", "you", "your", "yours",
             "yourself", "yourselves", "he", "him", "his", "himself", "she", "her", "hers", "herself", "it",
             "its", "itself", "they", "them", "their", "theirs", "themselves", "someone", "anyone", "everyone",
             "noone", "nobody", "somebody", "anybody", "everybody", "something", "anything", "everything",
             "nothing", "who", "whom", "whose", "which", "what", "whoever", "whatever", "whichever", "ya", "yall",
             "thou", "thee"},
            Pos::Pron);
    add_all(d,
            {"a", "an", "the", "this", "that", "these", "those", "some", "any", "each", "every", "either",
             "neither", "no", "all", "both", "many", "much", "several", "such", "another"},
            Pos::Det);
    add_all(d,
            {"of", "at", "by", "for", "with", "about", "against", "between", "into", "through", "during",
             "before", "after", "above", "below", "from", "in", "out", "on", "off", "over", "under", "around",
             "among", "across", "along", "behind", "beyond", "near", "since", "until", "upon", "within",
             "without", "toward", "towards", "via", "per", "onto", "despite", "throughout", "beside", "besides"},
            Pos::Adp);
    add_all(d,
            {"and", "but", "or", "nor", "yet", "because", "if", "while", "although", "though", "unless",
             "whereas", "whether", "than", "cuz", "cause"},
            Pos::Conj);
    add_all(d, {"not", "to", "nt"}, Pos::Part);
    add_all(d,
            {"yes", "yeah", "yep", "yup", "nope", "nah", "ok", "okay", "oh", "hey", "hi", "hello", "lol", "lmao",
             "wow", "um", "uh", "umm", "hmm", "haha", "hahaha", "please", "thanks", "oops", "ugh", "bye"},
            Pos::Intj);
    add_all(d,
            {"one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven", "twelve",
             "twenty", "thirty", "forty", "fifty", "hundred", "thousand", "million", "billion"},
            Pos::Num);
    // Auxiliaries and modals.
    add_all(d, {"can", "could", "will", "would", "shall", "should", "may", "might", "must", "ought", "gonna",
                "wanna", "gotta"},
            Pos::Other);
    add_forms(d, "be", {"am", "is", "are", "was", "were", "been", "being"}, Pos::Other);

    add_forms(d, "have", {"has", "had", "having"}, Pos::Verb);
    add_forms(d, "do", {"does", "did", "done", "doing"}, Pos::Verb);
    add_forms(d, "go", {"goes", "went", "gone", "going"}, Pos::Verb);
    add_forms(d, "use", {"uses", "used", "using"}, Pos::Verb);
    struct Irregular {
        const char* lemma;
        std::initializer_list<const char*> forms;
    };
    const Irregular verbs[] = {
        {"run", {"ran", "running", "runs"}},
        {"make", {"made"}},
        {"say", {"said"}},
        {"get", {"got", "gotten"}},
        {"take", {"took", "taken"}},
        {"come", {"came"}},
        {"see", {"saw", "seen"}},
        {"know", {"knew", "known"}},
        {"think", {"thought"}},
        {"find", {"found"}},
        {"give", {"gave", "given"}},
        {"tell", {"told"}},
        {"feel", {"felt"}},
        {"become", {"became"}},
        {"leave", {"left"}},
        {"keep", {"kept"}},
        {"begin", {"began", "begun"}},
        {"bring", {"brought"}},
        {"buy", {"bought"}},
        {"write", {"wrote", "written"}},
        {"stand", {"stood"}},
        {"hear", {"heard"}},
        {"mean", {"meant"}},
        {"meet", {"met"}},
        {"pay", {"paid"}},
        {"sit", {"sat"}},
        {"speak", {"spoke", "spoken"}},
        {"lead", {"led"}},
        {"grow", {"grew", "grown"}},
        {"lose", {"lost"}},
        {"fall", {"fell", "fallen"}},
        {"send", {"sent"}},
        {"build", {"built"}},
        {"understand", {"understood"}},
        {"draw", {"drew", "drawn"}},
        {"break", {"broke", "broken"}},
        {"spend", {"spent"}},
        {"win", {"won"}},
        {"teach", {"taught"}},
        {"catch", {"caught"}},
        {"sell", {"sold"}},
        {"fight", {"fought"}},
        {"choose", {"chose", "chosen"}},
        {"drive", {"drove", "driven"}},
        {"eat", {"ate", "eaten"}},
        {"fly", {"flew", "flown", "flies"}},
        {"forget", {"forgot", "forgotten"}},
        {"hold", {"held"}},
        {"sleep", {"slept"}},
        {"throw", {"threw", "thrown"}},
        {"wear", {"wore", "worn"}},
        {"ride", {"rode", "ridden"}},
        {"sing", {"sang", "sung"}},
        {"swim", {"swam", "swum"}},
        {"hide", {"hid", "hidden"}},
        {"shake", {"shook", "shaken"}},
        {"wake", {"woke", "woken"}},
        {"steal", {"stole", "stolen"}},
        {"freeze", {"froze", "frozen"}},
        {"feed", {"fed"}},
        {"lie", {"lay", "lain", "lying", "lies"}},
        {"die", {"died", "dying", "dies"}},
        {"tie", {"tied", "tying", "ties"}},
        {"seek", {"sought"}},
        {"deal", {"dealt"}},
        {"bear", {"bore", "borne"}},
        {"bite", {"bit", "bitten"}},
        {"hang", {"hung"}},
        {"shoot", {"shot"}},
        {"strike", {"struck"}},
        {"swear", {"swore", "sworn"}},
        {"tear", {"tore", "torn"}},
        {"blow", {"blew", "blown"}},
        {"arise", {"arose", "arisen"}},
        {"forgive", {"forgave", "forgiven"}},
        {"sink", {"sank", "sunk"}},
        {"drink", {"drank", "drunk"}},
    };
    for (const auto& v : verbs) add_forms(d, v.lemma, v.forms, Pos::Verb);
    const Irregular nouns[] = {
        {"child", {"children"}}, {"man", {"men"}},     {"woman", {"women"}},   {"foot", {"feet"}},
        {"tooth", {"teeth"}},    {"mouse", {"mice"}},  {"goose", {"geese"}},   {"life", {"lives"}},
        {"wife", {"wives"}},     {"knife", {"knives"}}, {"wolf", {"wolves"}},  {"half", {"halves"}},
        {"person", {"persons"}}, {"crisis", {"crises"}}, {"analysis", {"analyses"}},
        {"thesis", {"theses"}},  {"criterion", {"criteria"}}, {"phenomenon", {"phenomena"}},
    };
    for (const auto& n : nouns) add_forms(d, n.lemma, n.forms, Pos::Noun);
    add_forms(d, "good", {"better", "best"}, Pos::Adj);
    add_forms(d, "bad", {"worse", "worst"}, Pos::Adj);
    // Closed-class adverbs and -ing / -ed words that are not inflections.
    add_all(d, {"very", "really", "also", "just", "only", "even", "still", "already", "always", "never", "often",
                "sometimes", "here", "there", "now", "then", "again", "too", "quite", "almost", "maybe", "perhaps",
                "ever", "soon", "once", "later", "anyway", "instead", "else", "rather", "away", "back"},
            Pos::Adv);
    add_all(d, {"morning", "evening", "building", "meeting", "wedding", "thing", "king", "ring", "spring",
                "string", "wing", "sibling", "ceiling", "pudding", "clothing", "painting", "feeling",
                "beginning", "ending", "offspring", "bed", "need",
                "seed", "speed", "hundred", "indeed", "news", "series", "species", "physics", "mathematics",
                "economics", "politics", "gas", "bus", "lens", "pants", "glasses"},
            Pos::Noun);
    d.add("red", "red", Pos::Adj);
    d.add("indeed", "indeed", Pos::Adv);
}

Analysis RuleLemmatizer::analyze(const std::string& w) const {
    if (auto known = exceptions_.lookup(w)) return *known;
    if (w.find('_') != std::string::npos) return {w, Pos::Noun};
    const auto n = w.size();

    if (n >= 5 && ends_with(w, "ing")) {
        const auto stem = w.substr(0, n - 3);
        if (has_vowel(stem)) return {repair_stem(stem), Pos::Verb};
    }
    if (n >= 4 && ends_with(w, "eed")) {
        const auto stem = w.substr(0, n - 3);
        if (measure(stem) > 0) return {w.substr(0, n - 1), Pos::Verb};
        return {w, Pos::Noun};
    }
    if (n >= 4 && ends_with(w, "ied")) return {w.substr(0, n - 3) + "y", Pos::Verb};
    if (n >= 4 && ends_with(w, "ed")) {
        const auto stem = w.substr(0, n - 2);
        if (has_vowel(stem)) return {repair_stem(stem), Pos::Verb};
    }
    if (n >= 5 && ends_with(w, "ies")) return {w.substr(0, n - 3) + "y", Pos::Noun};
    if (n >= 5 && ends_with(w, "sses")) return {w.substr(0, n - 2), Pos::Noun};
    if (n >= 5 && (ends_with(w, "xes") || ends_with(w, "ches") || ends_with(w, "shes") || ends_with(w, "zzes"))) {
        return {w.substr(0, n - 2), Pos::Noun};
    }
    if (n >= 4 && ends_with(w, "s") && !ends_with(w, "ss") && !ends_with(w, "us") && !ends_with(w, "is")) {
        return {w.substr(0, n - 1), Pos::Noun};
    }
    if (n >= 5 && ends_with(w, "ly")) return {w, Pos::Adv};
    if (n >= 6 && (ends_with(w, "ful") || ends_with(w, "ous") || ends_with(w, "ive") || ends_with(w, "able") ||
                   ends_with(w, "ible") || ends_with(w, "ical") || ends_with(w, "less"))) {
        return {w, Pos::Adj};
    }
    return {w, Pos::Noun};
}

std::unique_ptr<Lemmatizer> make_lemmatizer(const PreprocessConfig& config) {
    if (config.lemmatizer == "rules") return std::make_unique<RuleLemmatizer>();
    if (config.lemmatizer == "dictionary") {
        if (config.lemma_dictionary.empty()) {
            throw PipelineError("lemmatize", "dictionary backend requires lemma_dictionary");
        }
        return std::make_unique<DictionaryLemmatizer>(DictionaryLemmatizer::from_file(config.lemma_dictionary));
    }
    throw PipelineError("lemmatize", "lemmatizer backend unavailable: '" + config.lemmatizer + "'");
}

std::vector<std::string> lemmatize(const std::vector<std::string>& tokens, const Lemmatizer& lemmatizer,
                                   const PreprocessConfig& config) {
    const auto& stop = default_stopwords();
    std::vector<std::string> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) {
        auto a = lemmatizer.analyze(t);
        if (config.allowed_pos.count(a.pos) == 0) continue;
        // A lemma may land on a stopword ("others" -> "other") or outside the length bounds.
        if (stop.count(a.lemma) != 0 || config.extra_stopwords.count(a.lemma) != 0) continue;
        const bool bigram = a.lemma.find('_') != std::string::npos;
        const auto len = static_cast<int>(a.lemma.size());
        if (!bigram && (len < config.min_token_len || len > config.max_token_len)) continue;
        out.push_back(std::move(a.lemma));
    }
    return out;
}

}  // namespace topicbench::preprocess
