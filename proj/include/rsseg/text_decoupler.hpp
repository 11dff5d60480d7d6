#pragma once

#include "rsseg/core.hpp"

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rsseg {

enum class PosTag { Noun, PropN, Adj, Verb, Num, Other };

std::string_view to_string(PosTag tag);

struct TaggedToken {
    std::string text;
    PosTag pos = PosTag::Other;
    std::size_t index = 0;  ///< position in the whitespace/punctuation tokenisation of the raw text

    friend bool operator==(const TaggedToken&, const TaggedToken&) = default;
};

/// Part-of-speech tagger. Implementations receive already-split words.
class Tagger {
public:
    virtual ~Tagger() = default;
    virtual std::vector<PosTag> tag(const std::vector<std::string>& words) const = 0;
};

/// Closed-class stopword list, a small open-class lexicon, and suffix
/// heuristics. Unknown words default to NOUN.
class RuleBasedTagger : public Tagger {
public:
    RuleBasedTagger();
    std::vector<PosTag> tag(const std::vector<std::string>& words) const override;

    /// Overrides (or adds) a lexicon entry; `word` is matched case-insensitively.
    void add_word(std::string word, PosTag tag);

private:
    PosTag tag_word(const std::string& lower) const;
    std::map<std::string, PosTag, std::less<>> lexicon_;
};

/// Lowercase + simple plural stripping ("ships" -> "ship", "boxes" -> "box").
std::string lemma(std::string_view word);

/// Splits on whitespace and punctuation, keeping hyphenated words and digits.
std::vector<std::string> split_words(std::string_view text);

/// Tokenise, tag and keep only NOUN/PROPN/ADJ/VERB/NUM tokens.
/// Throws InvalidArgument for blank text.
std::vector<TaggedToken> parse_expression(std::string_view text, const Tagger& tagger);

/// Multi-word surface phrases mapped to class ids, matched on lemmas.
class ClassVocabulary {
public:
    void add(ClassId id, std::string_view phrase);

    /// Class for an exact phrase (lemma-normalised), if any.
    std::optional<ClassId> lookup(const std::vector<std::string>& words) const;
    std::optional<ClassId> lookup(std::string_view phrase) const;

    std::size_t longest_phrase() const { return longest_; }
    std::size_t size() const { return phrases_.size(); }

private:
    std::map<std::vector<std::string>, ClassId> phrases_;
    std::size_t longest_ = 0;
};

struct DecoupledExpression {
    std::string raw;
    std::vector<TaggedToken> ref_tokens;
    std::vector<TaggedToken> cls_tokens;
    std::vector<TaggedToken> mod_tokens;
    /// Set when cls_tokens came from a vocabulary match rather than the fallback.
    std::optional<ClassId> vocab_class;
};

/// Longest contiguous vocabulary match becomes the class tokens (numerals
/// never take part); everything else is a modifier. Without a match the
/// rightmost noun of the first noun run is the class token.
/// Throws InvalidArgument when `tokens` is empty.
DecoupledExpression decouple(const std::vector<TaggedToken>& tokens, const ClassVocabulary& vocab,
                             std::string raw = {});

DecoupledExpression decouple_text(std::string_view text, const Tagger& tagger, const ClassVocabulary& vocab);

std::string join_tokens(const std::vector<TaggedToken>& tokens);

}  // namespace rsseg
