#include <set>
#include <unordered_map>

#include "dn/corpus.hpp"

namespace dn::corpus {

namespace {

// Common English verb lemmas, weighted toward the vocabulary of data
// reporting (rise, decline, survey, outpace, ...).
const std::set<std::string>& lemma_set() {
    static const std::set<std::string> kLemmas = {
        "accelerate", "account",   "add",        "affect",     "agree",      "allow",
        "amount",     "appear",    "approach",   "approve",    "argue",      "ask",
        "associate",  "average",   "be",         "become",     "begin",      "believe",
        "bring",      "build",     "buy",        "call",       "cause",      "change",
        "claim",      "climb",     "collapse",   "come",       "compare",    "comprise",
        "conclude",   "consider",  "constitute", "continue",   "contract",   "contribute",
        "correlate",  "crash",     "create",     "cut",        "decide",     "decline",
        "decrease",   "demonstrate", "derive",   "describe",   "differ",     "dip",
        "disapprove", "display",   "dominate",   "double",     "drive",      "drop",
        "dwindle",    "edge",      "elect",      "emerge",     "endure",     "estimate",
        "exceed",     "expand",    "expect",     "express",    "fall",       "favor",
        "feel",       "find",      "fluctuate",  "follow",     "gain",       "get",
        "give",       "go",        "grow",       "halve",      "happen",     "have",
        "hear",       "help",      "highlight",  "hit",        "hold",       "hover",
        "identify",   "illustrate", "impact",    "improve",    "include",    "increase",
        "indicate",   "influence", "jump",       "keep",       "know",       "lag",
        "lead",       "leap",      "learn",      "leave",      "let",        "like",
        "link",       "live",      "look",       "lose",       "love",       "maintain",
        "make",       "mean",      "measure",    "meet",       "mention",    "move",
        "narrow",     "near",      "need",       "note",       "observe",    "offer",
        "open",       "oppose",    "outnumber",  "outpace",    "pass",       "pay",
        "peak",       "perceive",  "persist",    "play",       "plummet",    "poll",
        "predict",    "project",   "provide",    "pull",       "put",        "raise",
        "reach",      "read",      "rebound",    "record",     "recover",    "reflect",
        "regard",     "relate",    "remain",     "remember",   "report",     "represent",
        "require",    "result",    "reveal",     "rise",       "run",        "say",
        "see",        "seem",      "sell",       "send",       "serve",      "set",
        "share",      "shift",     "show",       "shrink",     "sit",        "slide",
        "slip",       "slow",      "soar",       "speak",      "spend",      "spike",
        "stabilize",  "stand",     "start",      "state",      "stay",       "stem",
        "stop",       "suggest",   "support",    "surge",      "surpass",    "survey",
        "sustain",    "take",      "talk",       "taper",      "tell",       "think",
        "top",        "total",     "track",      "trail",      "trend",      "triple",
        "try",        "tumble",    "turn",       "understand", "use",        "vary",
        "view",       "vote",      "wait",       "walk",       "wane",       "want",
        "watch",      "widen",     "win",        "work",       "worsen",     "write",
    };
    return kLemmas;
}

const std::unordered_map<std::string, std::string>& irregular_forms() {
    static const std::unordered_map<std::string, std::string> kIrregular = {
        {"am", "be"},       {"is", "be"},       {"are", "be"},      {"was", "be"},
        {"were", "be"},     {"been", "be"},     {"being", "be"},    {"has", "have"},
        {"had", "have"},    {"does", "do"},     {"did", "do"},      {"done", "do"},
        {"went", "go"},     {"gone", "go"},     {"got", "get"},     {"gotten", "get"},
        {"made", "make"},   {"knew", "know"},   {"known", "know"},  {"thought", "think"},
        {"saw", "see"},     {"seen", "see"},    {"came", "come"},   {"found", "find"},
        {"gave", "give"},   {"given", "give"},  {"told", "tell"},   {"became", "become"},
        {"left", "leave"},  {"felt", "feel"},   {"kept", "keep"},   {"meant", "mean"},
        {"began", "begin"}, {"begun", "begin"}, {"showed", "show"}, {"shown", "show"},
        {"heard", "hear"},  {"ran", "run"},     {"held", "hold"},   {"brought", "bring"},
        {"wrote", "write"}, {"written", "write"}, {"sat", "sit"},   {"stood", "stand"},
        {"lost", "lose"},   {"paid", "pay"},    {"met", "meet"},    {"led", "lead"},
        {"understood", "understand"},           {"spoke", "speak"}, {"spoken", "speak"},
        {"grew", "grow"},   {"grown", "grow"},  {"fell", "fall"},   {"fallen", "fall"},
        {"rose", "rise"},   {"risen", "rise"},  {"bought", "buy"},  {"built", "build"},
        {"sent", "send"},   {"spent", "spend"}, {"won", "win"},     {"sold", "sell"},
        {"took", "take"},   {"taken", "take"},  {"said", "say"},    {"let", "let"},
    };
    return kIrregular;
}

bool known(const std::string& stem) { return lemma_set().count(stem) != 0; }

// Undoes regular inflection: watches -> watch, carried -> carry,
// dropped -> drop, declining -> decline. Returns the lemma or empty.
std::string strip_suffix(const std::string& token) {
    const size_t n = token.size();
    auto ends_with = [&](const char* suffix, size_t len) {
        return n > len && token.compare(n - len, len, suffix) == 0;
    };

    if (ends_with("ies", 3)) {
        const std::string stem = token.substr(0, n - 3) + "y";
        if (known(stem)) return stem;
    }
    if (ends_with("ing", 3)) {
        std::string stem = token.substr(0, n - 3);
        if (known(stem)) return stem;
        if (known(stem + "e")) return stem + "e";
        if (stem.size() >= 2 && stem[stem.size() - 1] == stem[stem.size() - 2]) {
            stem.pop_back();
            if (known(stem)) return stem;
        }
    }
    if (ends_with("ied", 3)) {
        const std::string stem = token.substr(0, n - 3) + "y";
        if (known(stem)) return stem;
    }
    if (ends_with("ed", 2)) {
        std::string stem = token.substr(0, n - 2);
        if (known(stem)) return stem;
        if (known(stem + "e")) return stem + "e";  // declined -> decline
        if (stem.size() >= 2 && stem[stem.size() - 1] == stem[stem.size() - 2]) {
            stem.pop_back();
            if (known(stem)) return stem;
        }
    }
    if (ends_with("es", 2)) {
        const std::string stem = token.substr(0, n - 2);
        if (known(stem)) return stem;
    }
    if (ends_with("s", 1)) {
        const std::string stem = token.substr(0, n - 1);
        if (known(stem)) return stem;
    }
    return {};
}

class LexiconVerbTagger final : public VerbTagger {
public:
    std::optional<std::string> verb_lemma(const std::string& token) const override {
        auto it = irregular_forms().find(token);
        if (it != irregular_forms().end()) return it->second;
        if (known(token)) return token;
        std::string stem = strip_suffix(token);
        if (!stem.empty()) return stem;
        return std::nullopt;
    }
};

}  // namespace

const VerbTagger& default_verb_tagger() {
    static const LexiconVerbTagger kTagger;
    return kTagger;
}

}  // namespace dn::corpus
