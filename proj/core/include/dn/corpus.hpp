#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dn/table.hpp"

namespace dn::corpus {

enum class Source { pew, tableau, gapminder };
const char* to_string(Source source);
std::optional<Source> source_from(const std::string& name);

struct CorpusSegment {
    std::string text;
    std::optional<std::string> chart_type;  // raw string as found in the corpus
    std::optional<DataTable> table;
};

struct CorpusStory {
    std::string id;
    Source source = Source::pew;
    std::string title;
    std::vector<std::string> topics;
    std::vector<CorpusSegment> segments;
};

/// Segment texts joined with blank lines.
std::string story_text(const CorpusStory& story);

/// Lowercased word tokens: maximal runs of letters, digits and apostrophes
/// (bytes >= 0x80 count as letters so UTF-8 words survive). Punctuation is
/// dropped, so "53.8%" tokenizes as ["53", "8"].
std::vector<std::string> tokenize(const std::string& text);

enum class ExclusionReason { token_length, chart_count };
const char* to_string(ExclusionReason reason);

struct FilterDecision {
    bool keep = true;
    std::optional<ExclusionReason> reason;
};

/// Exclusion criteria: stories shorter than 500 tokens (Pew) or 140 tokens
/// (Tableau, GapMinder) go first; then stories with fewer than 3 or more
/// than 10 charts. Boundaries keep =500, =140, =3 and =10.
FilterDecision apply_exclusion_criteria(const CorpusStory& story);

/// Pluggable verb identification. Implementations must be deterministic.
class VerbTagger {
public:
    virtual ~VerbTagger() = default;
    /// The lemma when `token` reads as a verb form, otherwise nullopt.
    virtual std::optional<std::string> verb_lemma(const std::string& token) const = 0;
};

/// Bundled closed lexicon of common English verb lemmas and irregular forms,
/// with -s/-ed/-ing suffix stripping onto known stems. Hermetic: no models,
/// no files.
const VerbTagger& default_verb_tagger();

struct StoryStats {
    size_t char_len = 0;
    size_t token_count = 0;
    size_t paragraph_count = 0;
    double vocab_token_ratio = 0;  // unique tokens / tokens, in (0, 1]
    size_t unique_verbs = 0;       // distinct verb lemmas
    double diverse_verb_pct = 0;   // verb tokens outside the corpus top-10 lemmas
    double intra_trigram_rep_pct = 0;
};

using VerbFrequency = std::map<std::string, size_t>;

VerbFrequency corpus_verb_frequency(const std::vector<CorpusStory>& corpus,
                                    const VerbTagger& tagger = default_verb_tagger());

/// Throws ValidationError("EmptyStory...") when the story has no tokens.
StoryStats story_stats(const CorpusStory& story, const VerbFrequency& corpus_verb_freq,
                       const VerbTagger& tagger = default_verb_tagger(),
                       size_t diverse_cutoff = 10);

struct CorpusStats {
    size_t story_count = 0;
    size_t table_count = 0;
    size_t chart_count = 0;
    double mean_char_len = 0;
    double mean_token_count = 0;
    double mean_paragraph_count = 0;
    double mean_vocab_token_ratio = 0;
    double mean_unique_verbs = 0;
    double mean_diverse_verb_pct = 0;
    double mean_intra_trigram_rep_pct = 0;
    double inter_trigram_rep_pct = 0;
    std::map<std::string, double> chart_type_distribution;  // canonical name -> pct
    size_t unclassified_charts = 0;
    std::map<std::string, double> topic_distribution;  // topic -> pct
};

CorpusStats corpus_stats(const std::vector<CorpusStory>& corpus,
                         const VerbTagger& tagger = default_verb_tagger(),
                         size_t diverse_cutoff = 10);

/// Trigram metric primitives. Repetition is 100 * (1 - unique/total) over
/// word-token trigrams; sequences shorter than 3 tokens have repetition 0.
double intra_trigram_repetition_pct(const std::vector<std::string>& tokens);
std::set<std::string> trigram_types(const std::vector<std::string>& tokens);
double vocab_token_ratio(const std::vector<std::string>& tokens);

std::string story_to_json_text(const CorpusStory& story);
CorpusStory story_from_json_text(const std::string& text, const std::string& where);

/// Loads every *.json under `dir` (layout corpus/<source>/<id>.json), in
/// stable path order. Schema violations raise ValidationError naming the
/// story and field.
std::vector<CorpusStory> load_corpus(const std::filesystem::path& dir);

/// Thin CSV adapter: header row becomes column names; a column is numeric
/// iff it has no empty cells and every cell parses as a finite number.
DataTable import_csv_table(const std::filesystem::path& path, const std::string& title);

/// Table-style stats report over labelled groups, one column set per group.
std::string stats_report_text(const std::vector<std::pair<std::string, CorpusStats>>& groups);
std::string stats_report_json(const std::vector<std::pair<std::string, CorpusStats>>& groups);

}  // namespace dn::corpus
