#include <algorithm>
#include <cctype>
#include <regex>
#include <sstream>

#include "topicbench/error.hpp"
#include "topicbench/preprocess.hpp"

namespace topicbench::preprocess {

namespace {

// Decodes one UTF-8 code point starting at s[i]; invalid bytes decode to
// U+FFFD and consume one byte.
char32_t decode_utf8(std::string_view s, std::size_t& i) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    auto cont = [&](std::size_t k) -> int {
        if (i + k >= s.size()) return -1;
        const auto b = static_cast<unsigned char>(s[i + k]);
        return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
    };
    if (b0 < 0x80) {
        ++i;
        return b0;
    }
    if ((b0 & 0xE0) == 0xC0) {
        const int c1 = cont(1);
        if (c1 >= 0) {
            i += 2;
            return (static_cast<char32_t>(b0 & 0x1F) << 6) | static_cast<char32_t>(c1);
        }
    } else if ((b0 & 0xF0) == 0xE0) {
        const int c1 = cont(1);
        const int c2 = c1 >= 0 ? cont(2) : -1;
        if (c2 >= 0) {
            i += 3;
            return (static_cast<char32_t>(b0 & 0x0F) << 12) | (static_cast<char32_t>(c1) << 6) |
                   static_cast<char32_t>(c2);
        }
    } else if ((b0 & 0xF8) == 0xF0) {
        const int c1 = cont(1);
        const int c2 = c1 >= 0 ? cont(2) : -1;
        const int c3 = c2 >= 0 ? cont(3) : -1;
        if (c3 >= 0) {
            i += 4;
            return (static_cast<char32_t>(b0 & 0x07) << 18) | (static_cast<char32_t>(c1) << 12) |
                   (static_cast<char32_t>(c2) << 6) | static_cast<char32_t>(c3);
        }
    }
    ++i;
    return 0xFFFD;
}

void encode_utf8(char32_t cp, std::string& out) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

// Cyrillic code points that render like a Latin letter.
char cyrillic_lookalike(char32_t cp) {
    switch (cp) {
        case U'а': return 'a';
        case U'в': return 'b';
        case U'е': return 'e';
        case U'ё': return 'e';
        case U'к': return 'k';
        case U'м': return 'm';
        case U'н': return 'h';
        case U'о': return 'o';
        case U'р': return 'p';
        case U'с': return 'c';
        case U'т': return 't';
        case U'у': return 'y';
        case U'х': return 'x';
        case U'і': return 'i';
        case U'ј': return 'j';
        case U'ѕ': return 's';
        case U'ԁ': return 'd';
        case U'һ': return 'h';
        case U'ԛ': return 'q';
        case U'ԝ': return 'w';
        case U'А': return 'A';
        case U'В': return 'B';
        case U'Е': return 'E';
        case U'Ё': return 'E';
        case U'К': return 'K';
        case U'М': return 'M';
        case U'Н': return 'H';
        case U'О': return 'O';
        case U'Р': return 'P';
        case U'С': return 'C';
        case U'Т': return 'T';
        case U'У': return 'Y';
        case U'Х': return 'X';
        case U'І': return 'I';
        case U'Ј': return 'J';
        case U'Ѕ': return 'S';
        default: return 0;
    }
}

bool is_curly_quote(char32_t cp) {
    switch (cp) {
        case U'‘':
        case U'’':
        case U'‚':
        case U'‛':
        case U'“':
        case U'”':
        case U'„':
        case U'‟':
        case U'«':
        case U'»':
        case U'‹':
        case U'›':
            return true;
        default:
            return false;
    }
}

// Latin-1 supplement letters folded to their unaccented lowercase base.
char fold_latin1(char32_t cp) {
    static constexpr std::string_view kFold =
        "aaaaaaaceeeeiiiidnooooo_ouuuuyts"   // U+00C0..U+00DF
        "aaaaaaaceeeeiiiidnooooo_ouuuuyty";  // U+00E0..U+00FF
    if (cp < 0xC0 || cp > 0xFF) return 0;
    const char c = kFold[cp - 0xC0];
    return c == '_' ? 0 : c;
}

}  // namespace

std::string normalize_text(std::string_view text) {
    static const std::regex kUrl(R"((https?://|www\.)[^\s<>"]+)", std::regex::icase | std::regex::optimize);
    static const std::regex kTag(R"(<[^<>]{0,200}>)", std::regex::optimize);
    static const std::regex kEntity(R"(&(#[0-9]{1,7}|#x[0-9a-fA-F]{1,6}|[a-zA-Z]{2,10});)", std::regex::optimize);

    std::string s(text);
    s = std::regex_replace(s, kUrl, " ");
    s = std::regex_replace(s, kTag, " ");
    s = std::regex_replace(s, kEntity, " ");

    std::string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        const char32_t cp = decode_utf8(s, i);
        if (is_curly_quote(cp)) continue;
        if (const char latin = cyrillic_lookalike(cp); latin != 0) {
            out.push_back(latin);
            continue;
        }
        encode_utf8(cp, out);
    }
    return out;
}

std::vector<std::string> tokenize(std::string_view text, const PreprocessConfig& config) {
    std::vector<std::string> tokens;
    std::string current;
    const auto flush = [&] {
        const auto n = static_cast<int>(current.size());
        if (n >= config.min_token_len && n <= config.max_token_len) tokens.push_back(current);
        current.clear();
    };
    std::size_t i = 0;
    while (i < text.size()) {
        const char32_t cp = decode_utf8(text, i);
        char c = 0;
        if (cp < 0x80 && std::isalpha(static_cast<int>(cp))) {
            c = static_cast<char>(std::tolower(static_cast<int>(cp)));
        } else {
            c = fold_latin1(cp);
        }
        if (c != 0) {
            current.push_back(c);
        } else if (!current.empty()) {
            flush();
        }
    }
    if (!current.empty()) flush();
    return tokens;
}

const std::set<std::string>& default_stopwords() {
    static const std::set<std::string> kWords = [] {
        // NLTK English list.
        std::set<std::string> w{
            "i", "me", "my", "myself", "we", "our", "ours", "ourselves", "you", "you're", "you've", "you'll",
            "you'd", "your", "yours", "yourself", "yourselves", "he", "him", "his", "himself", "she", "she's",
            "her", "hers", "herself", "it", "it's", "its", "itself", "they", "them", "their", "theirs",
            "themselves", "what", "which", "who", "whom", "this", "that", "that'll", "these", "those", "am",
            "is", "are", "was", "were", "be", "been", "being", "have", "has", "had", "having", "do", "does",
            "did", "doing", "a", "an", "the", "and", "but", "if", "or", "because", "as", "until", "while", "of",
            "at", "by", "for", "with", "about", "against", "between", "into", "through", "during", "before",
            "after", "above", "below", "to", "from", "up", "down", "in", "out", "on", "off", "over", "under",
            "again", "further", "then", "once", "here", "there", "when", "where", "why", "how", "all", "any",
            "both", "each", "few", "more", "most", "other", "some", "such", "no", "nor", "not", "only", "own",
            "same", "so", "than", "too", "very", "s", "t", "can", "will", "just", "don", "don't", "should",
            "should've", "now", "d", "ll", "m", "o", "re", "ve", "y", "ain", "aren", "aren't", "couldn",
            "couldn't", "didn", "didn't", "doesn", "doesn't", "hadn", "hadn't", "hasn", "hasn't", "haven",
            "haven't", "isn", "isn't", "ma", "mightn", "mightn't", "mustn", "mustn't", "needn", "needn't",
            "shan", "shan't", "shouldn", "shouldn't", "wasn", "wasn't", "weren", "weren't", "won", "won't",
            "wouldn", "wouldn't"};
        // Platform terms and markup residue.
        for (const char* p : {"removed", "deleted", "reddit", "subreddit", "subreddits", "upvote", "upvotes",
                              "upvoted", "downvote", "downvotes", "downvoted", "karma", "op", "edit", "edited",
                              "crosspost", "crossposted", "automoderator", "moderator", "moderators", "mods",
                              "amp", "gt", "lt", "nbsp", "http", "https", "www", "com", "imgur", "html"}) {
            w.insert(p);
        }
        return w;
    }();
    return kWords;
}

std::vector<std::string> remove_stopwords(const std::vector<std::string>& tokens, const PreprocessConfig& config) {
    const auto& base = default_stopwords();
    std::vector<std::string> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) {
        if (base.count(t) == 0 && config.extra_stopwords.count(t) == 0) out.push_back(t);
    }
    return out;
}

std::map<std::string, std::string> PreprocessConfig::default_acronyms() {
    return {
        {"afaik", "as far as i know"},
        {"afk", "away from keyboard"},
        {"ama", "ask me anything"},
        {"btw", "by the way"},
        {"fyi", "for your information"},
        {"idk", "i do not know"},
        {"iirc", "if i recall correctly"},
        {"imho", "in my humble opinion"},
        {"imo", "in my opinion"},
        {"irl", "in real life"},
        {"lmk", "let me know"},
        {"ngl", "not gonna lie"},
        {"smh", "shaking my head"},
        {"tbh", "to be honest"},
        {"til", "today i learned"},
        {"tldr", "too long did not read"},
    };
}

std::vector<std::string> expand_acronyms(const std::vector<std::string>& tokens,
                                         const std::map<std::string, std::string>& map) {
    std::vector<std::string> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) {
        const auto it = map.find(t);
        if (it == map.end()) {
            out.push_back(t);
            continue;
        }
        std::istringstream words(it->second);
        std::string w;
        while (words >> w) out.push_back(w);
    }
    return out;
}

std::vector<std::string> final_cleanup(const std::vector<std::string>& tokens) {
    std::vector<std::string> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) {
        if (t.size() <= 1) continue;
        if (std::all_of(t.begin(), t.end(), [](unsigned char c) { return std::isdigit(c) != 0; })) continue;
        out.push_back(t);
    }
    return out;
}

}  // namespace topicbench::preprocess
