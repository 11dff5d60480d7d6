#include "rsseg/text_decoupler.hpp"

#include <algorithm>
#include <cctype>
#include <initializer_list>

namespace rsseg {

std::string_view to_string(PosTag tag) {
    switch (tag) {
        case PosTag::Noun: return "NOUN";
        case PosTag::PropN: return "PROPN";
        case PosTag::Adj: return "ADJ";
        case PosTag::Verb: return "VERB";
        case PosTag::Num: return "NUM";
        case PosTag::Other: return "OTHER";
    }
    return "OTHER";
}

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

bool ends_with(std::string_view s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

bool is_number(std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) {
        return std::isdigit(c) || c == '.' || c == ',';
    }) && std::isdigit(static_cast<unsigned char>(s.front()));
}

void fill(std::map<std::string, PosTag, std::less<>>& lex, PosTag tag, std::initializer_list<const char*> words) {
    for (const char* w : words) lex[w] = tag;
}

}  // namespace

RuleBasedTagger::RuleBasedTagger() {
    fill(lexicon_, PosTag::Other,
         {"a",      "an",     "the",    "this",   "that",   "these",  "those",   "of",     "on",    "in",
          "at",     "to",     "with",   "by",     "from",   "near",   "next",    "beside", "between",
          "above",  "below",  "under",  "over",   "behind", "around", "along",   "across", "into",
          "onto",   "and",    "or",     "but",    "is",     "are",    "was",     "were",   "be",
          "been",   "being",  "it",     "its",    "which",  "who",    "whose",   "there",  "here",
          "as",     "than",   "for",    "about",  "very",   "most",   "more",    "also",   "some",
          "any",    "each",   "while",  "where",  "has",    "have",   "having",  "their",  "them",
          "they",   "his",    "her",    "our",    "your",   "my",     "not",     "no",     "just",
          "only",   "too",    "so",     "such",   "among",  "amongst", "within", "without", "toward",
          "towards", "against", "beneath", "up",  "down",   "off",    "out",     "via",    "per"});
    fill(lexicon_, PosTag::Adj,
         {"red",     "green",    "blue",      "white",      "black",    "gray",     "grey",      "yellow",
          "orange",  "brown",    "dark",      "light",      "bright",   "small",    "large",     "big",
          "tiny",    "huge",     "long",      "short",      "wide",     "narrow",   "tall",      "little",
          "oval",    "round",    "circular",  "rectangular", "square",  "elongated", "first",    "second",
          "third",   "last",     "upper",     "lower",      "leftmost", "rightmost", "topmost", "bottommost",
          "nearest", "closest",  "farthest",  "other",      "empty",    "new",      "old",       "open",
          "blank",   "several",  "many",      "few",        "same",     "different", "whole",   "entire",
          "adjacent", "central", "northern",  "southern",   "eastern",  "western",  "gray-white", "purple",
          "pink",    "silver",   "dense",     "sparse",     "curved",   "straight", "single",    "double"});
    fill(lexicon_, PosTag::Noun,
         {"left",     "right",   "top",      "bottom",   "center",   "centre",   "middle",   "side",
          "corner",   "edge",    "building", "parking",  "landing",  "forest",   "ground",
          "field",    "track",   "court",    "vehicle",  "ship",     "harbor",   "harbour",  "roof",
          "river",    "water",   "road",     "bridge",   "plane",    "airplane", "airport",  "stadium",
          "chimney",  "dam",     "overpass", "windmill", "station",  "tank",     "pool",     "roundabout",
          "helicopter", "image", "picture",  "scene",    "area",     "lot",      "lake",     "sea",
          "tennis",   "baseball", "basketball", "soccer", "golf",    "train",    "storage",  "toll",
          "expressway", "service", "ball",    "diamond",  "swimming", "car",     "dock",     "pier"});
    fill(lexicon_, PosTag::Verb,
         {"parked", "located", "surrounded", "situated", "lies", "lying", "sits", "standing", "stands",
          "docked", "moored", "covered", "crossing", "facing", "connected", "adjoining"});
    fill(lexicon_, PosTag::Num,
         {"one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven", "twelve",
          "dozen", "hundred"});
}

void RuleBasedTagger::add_word(std::string word, PosTag tag) { lexicon_[lower(word)] = tag; }

PosTag RuleBasedTagger::tag_word(const std::string& w) const {
    if (auto it = lexicon_.find(w); it != lexicon_.end()) return it->second;
    if (is_number(w)) return PosTag::Num;
    // Plural of a lexicon noun ("ships") keeps the noun tag.
    if (auto it = lexicon_.find(lemma(w)); it != lexicon_.end() && it->second == PosTag::Noun) return PosTag::Noun;
    if (w.size() > 4 && ends_with(w, "ly")) return PosTag::Other;
    if (w.size() > 4 && (ends_with(w, "ing") || ends_with(w, "ed"))) return PosTag::Verb;
    for (std::string_view suf : {"ous", "ive", "ful", "ic", "ular", "ish", "est", "able", "ible", "al"}) {
        if (w.size() > suf.size() + 2 && ends_with(w, suf)) return PosTag::Adj;
    }
    return PosTag::Noun;
}

std::vector<PosTag> RuleBasedTagger::tag(const std::vector<std::string>& words) const {
    std::vector<PosTag> tags;
    tags.reserve(words.size());
    for (std::size_t i = 0; i < words.size(); ++i) {
        const std::string w = lower(words[i]);
        PosTag t = tag_word(w);
        // Capitalised unknown word away from the sentence start reads as a name.
        if (i > 0 && t == PosTag::Noun && !lexicon_.contains(w) &&
            std::isupper(static_cast<unsigned char>(words[i].front()))) {
            t = PosTag::PropN;
        }
        tags.push_back(t);
    }
    return tags;
}

std::string lemma(std::string_view word) {
    std::string w = lower(word);
    if (w.size() <= 3 || ends_with(w, "ss")) return w;
    if (ends_with(w, "ies") && w.size() > 4) return w.substr(0, w.size() - 3) + "y";
    for (std::string_view suf : {"ches", "shes", "xes", "sses", "zes"}) {
        if (ends_with(w, suf)) return w.substr(0, w.size() - 2);
    }
    if (ends_with(w, "s") && !ends_with(w, "us") && !ends_with(w, "is")) return w.substr(0, w.size() - 1);
    return w;
}

std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> words;
    std::string cur;
    auto flush = [&] {
        while (!cur.empty() && (cur.back() == '-' || cur.back() == '\'')) cur.pop_back();
        if (!cur.empty()) words.push_back(std::move(cur));
        cur.clear();
    };
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isalnum(c) || c >= 0x80 || ((ch == '-' || ch == '\'' || ch == '.') && !cur.empty())) {
            cur.push_back(ch);
        } else {
            flush();
        }
    }
    flush();
    // Trailing full stops belong to the sentence, not the word.
    for (auto& w : words) {
        while (!w.empty() && w.back() == '.') w.pop_back();
    }
    std::erase_if(words, [](const std::string& w) { return w.empty(); });
    return words;
}

std::vector<TaggedToken> parse_expression(std::string_view text, const Tagger& tagger) {
    const std::vector<std::string> words = split_words(text);
    if (words.empty()) {
        throw InvalidArgument("unusable expression: '" + std::string(text) + "' has no words");
    }
    const std::vector<PosTag> tags = tagger.tag(words);
    if (tags.size() != words.size()) {
        throw BackendError("tagger returned " + std::to_string(tags.size()) + " tags for " +
                           std::to_string(words.size()) + " words");
    }
    std::vector<TaggedToken> kept;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (tags[i] == PosTag::Other) continue;
        kept.push_back({words[i], tags[i], i});
    }
    return kept;
}

void ClassVocabulary::add(ClassId id, std::string_view phrase) {
    std::vector<std::string> key;
    for (const auto& w : split_words(phrase)) key.push_back(lemma(w));
    if (key.empty()) throw InvalidArgument("empty vocabulary phrase for class " + std::to_string(id));
    longest_ = std::max(longest_, key.size());
    phrases_.insert_or_assign(std::move(key), id);
}

std::optional<ClassId> ClassVocabulary::lookup(const std::vector<std::string>& words) const {
    std::vector<std::string> key;
    key.reserve(words.size());
    for (const auto& w : words) key.push_back(lemma(w));
    if (auto it = phrases_.find(key); it != phrases_.end()) return it->second;
    return std::nullopt;
}

std::optional<ClassId> ClassVocabulary::lookup(std::string_view phrase) const { return lookup(split_words(phrase)); }

DecoupledExpression decouple(const std::vector<TaggedToken>& tokens, const ClassVocabulary& vocab, std::string raw) {
    if (tokens.empty()) {
        throw InvalidArgument("empty expression: no retained tokens in '" + raw + "'");
    }
    DecoupledExpression out;
    out.raw = std::move(raw);
    out.ref_tokens = tokens;

    const std::size_t n = tokens.size();
    std::size_t best_begin = 0, best_len = 0;
    std::optional<ClassId> best_class;
    for (std::size_t len = std::min(n, vocab.longest_phrase()); len >= 1 && !best_class; --len) {
        for (std::size_t b = 0; b + len <= n; ++b) {
            bool has_num = false;
            std::vector<std::string> words;
            for (std::size_t k = b; k < b + len; ++k) {
                has_num |= tokens[k].pos == PosTag::Num;
                words.push_back(tokens[k].text);
            }
            if (has_num) continue;
            if (auto id = vocab.lookup(words)) {
                best_begin = b;
                best_len = len;
                best_class = id;
                break;
            }
        }
    }

    if (!best_class) {
        auto is_noun = [](const TaggedToken& t) { return t.pos == PosTag::Noun || t.pos == PosTag::PropN; };
        auto first = std::find_if(tokens.begin(), tokens.end(), is_noun);
        std::size_t pick;
        if (first != tokens.end()) {
            pick = static_cast<std::size_t>(first - tokens.begin());
            while (pick + 1 < n && is_noun(tokens[pick + 1]) && tokens[pick + 1].index == tokens[pick].index + 1) {
                ++pick;
            }
        } else {
            pick = n - 1;
            for (std::size_t k = n; k-- > 0;) {
                if (tokens[k].pos != PosTag::Num) {
                    pick = k;
                    break;
                }
            }
        }
        best_begin = pick;
        best_len = 1;
    }

    for (std::size_t k = 0; k < n; ++k) {
        if (k >= best_begin && k < best_begin + best_len) {
            out.cls_tokens.push_back(tokens[k]);
        } else {
            out.mod_tokens.push_back(tokens[k]);
        }
    }
    out.vocab_class = best_class;
    return out;
}

DecoupledExpression decouple_text(std::string_view text, const Tagger& tagger, const ClassVocabulary& vocab) {
    return decouple(parse_expression(text, tagger), vocab, std::string(text));
}

std::string join_tokens(const std::vector<TaggedToken>& tokens) {
    std::string out;
    for (const auto& t : tokens) {
        if (!out.empty()) out.push_back(' ');
        out += t.text;
    }
    return out;
}

}  // namespace rsseg
