#include "dn/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "dn/error.hpp"
#include "dn/io.hpp"
#include "dn/strings.hpp"
#include "dn/visspec.hpp"

namespace dn::corpus {

using ordered_json = nlohmann::ordered_json;

const char* to_string(Source source) {
    switch (source) {
        case Source::pew: return "pew";
        case Source::tableau: return "tableau";
        case Source::gapminder: return "gapminder";
    }
    return "pew";
}

std::optional<Source> source_from(const std::string& name) {
    if (name == "pew") return Source::pew;
    if (name == "tableau") return Source::tableau;
    if (name == "gapminder") return Source::gapminder;
    return std::nullopt;
}

std::string story_text(const CorpusStory& story) {
    std::string out;
    for (size_t i = 0; i < story.segments.size(); ++i) {
        if (i) out += "\n\n";
        out += story.segments[i].text;
    }
    return out;
}

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string current;
    auto word_char = [](unsigned char c) {
        return std::isalnum(c) != 0 || c == '\'' || c >= 0x80;
    };
    for (unsigned char c : text) {
        if (word_char(c)) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

const char* to_string(ExclusionReason reason) {
    return reason == ExclusionReason::token_length ? "token_length" : "chart_count";
}

FilterDecision apply_exclusion_criteria(const CorpusStory& story) {
    const size_t tokens = tokenize(story_text(story)).size();
    const size_t threshold = story.source == Source::pew ? 500 : 140;
    if (tokens < threshold) return {false, ExclusionReason::token_length};
    size_t charts = 0;
    for (const auto& seg : story.segments)
        if (seg.chart_type) ++charts;
    if (charts < 3 || charts > 10) return {false, ExclusionReason::chart_count};
    return {true, std::nullopt};
}

double vocab_token_ratio(const std::vector<std::string>& tokens) {
    if (tokens.empty()) return 0.0;
    std::unordered_set<std::string> unique(tokens.begin(), tokens.end());
    return static_cast<double>(unique.size()) / static_cast<double>(tokens.size());
}

namespace {
std::string trigram_key(const std::vector<std::string>& tokens, size_t i) {
    return tokens[i] + '\x1f' + tokens[i + 1] + '\x1f' + tokens[i + 2];
}
}  // namespace

double intra_trigram_repetition_pct(const std::vector<std::string>& tokens) {
    if (tokens.size() < 3) return 0.0;
    const size_t total = tokens.size() - 2;
    std::unordered_set<std::string> unique;
    for (size_t i = 0; i < total; ++i) unique.insert(trigram_key(tokens, i));
    return 100.0 * (1.0 - static_cast<double>(unique.size()) / static_cast<double>(total));
}

std::set<std::string> trigram_types(const std::vector<std::string>& tokens) {
    std::set<std::string> types;
    if (tokens.size() < 3) return types;
    for (size_t i = 0; i + 2 < tokens.size(); ++i) types.insert(trigram_key(tokens, i));
    return types;
}

VerbFrequency corpus_verb_frequency(const std::vector<CorpusStory>& corpus,
                                    const VerbTagger& tagger) {
    VerbFrequency freq;
    for (const auto& story : corpus)
        for (const auto& token : tokenize(story_text(story)))
            if (auto lemma = tagger.verb_lemma(token)) ++freq[*lemma];
    return freq;
}

namespace {

size_t count_paragraphs(const std::string& text) {
    size_t count = 0;
    bool in_block = false;
    for (const auto& line : split_lines(text)) {
        if (trim(line).empty()) {
            in_block = false;
        } else if (!in_block) {
            ++count;
            in_block = true;
        }
    }
    return count;
}

std::set<std::string> top_lemmas(const VerbFrequency& freq, size_t cutoff) {
    std::vector<std::pair<std::string, size_t>> items(freq.begin(), freq.end());
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::set<std::string> top;
    for (size_t i = 0; i < items.size() && i < cutoff; ++i) top.insert(items[i].first);
    return top;
}

}  // namespace

StoryStats story_stats(const CorpusStory& story, const VerbFrequency& corpus_verb_freq,
                       const VerbTagger& tagger, size_t diverse_cutoff) {
    const std::string text = story_text(story);
    const std::vector<std::string> tokens = tokenize(text);
    if (tokens.empty())
        throw ValidationError("EmptyStory: story '" + story.id + "' has no tokens");

    StoryStats stats;
    stats.char_len = text.size();
    stats.token_count = tokens.size();
    stats.paragraph_count = count_paragraphs(text);
    stats.vocab_token_ratio = vocab_token_ratio(tokens);
    stats.intra_trigram_rep_pct = intra_trigram_repetition_pct(tokens);

    std::vector<std::string> verb_tokens;
    std::set<std::string> lemmas;
    for (const auto& token : tokens) {
        if (auto lemma = tagger.verb_lemma(token)) {
            verb_tokens.push_back(*lemma);
            lemmas.insert(*lemma);
        }
    }
    stats.unique_verbs = lemmas.size();
    if (!verb_tokens.empty()) {
        const std::set<std::string> top = top_lemmas(corpus_verb_freq, diverse_cutoff);
        size_t diverse = 0;
        for (const auto& lemma : verb_tokens)
            if (!top.count(lemma)) ++diverse;
        stats.diverse_verb_pct =
            100.0 * static_cast<double>(diverse) / static_cast<double>(verb_tokens.size());
    }
    return stats;
}

CorpusStats corpus_stats(const std::vector<CorpusStory>& corpus, const VerbTagger& tagger,
                         size_t diverse_cutoff) {
    if (corpus.empty()) throw ValidationError("corpus_stats needs a non-empty corpus");

    const VerbFrequency verb_freq = corpus_verb_frequency(corpus, tagger);
    CorpusStats stats;
    stats.story_count = corpus.size();

    std::vector<std::set<std::string>> story_trigrams;
    story_trigrams.reserve(corpus.size());
    std::unordered_map<std::string, size_t> trigram_story_count;

    std::map<std::string, size_t> chart_counts;
    std::map<std::string, size_t> topic_counts;
    size_t classified_charts = 0;
    size_t topic_total = 0;

    for (const auto& story : corpus) {
        const StoryStats s = story_stats(story, verb_freq, tagger, diverse_cutoff);
        stats.mean_char_len += static_cast<double>(s.char_len);
        stats.mean_token_count += static_cast<double>(s.token_count);
        stats.mean_paragraph_count += static_cast<double>(s.paragraph_count);
        stats.mean_vocab_token_ratio += s.vocab_token_ratio;
        stats.mean_unique_verbs += static_cast<double>(s.unique_verbs);
        stats.mean_diverse_verb_pct += s.diverse_verb_pct;
        stats.mean_intra_trigram_rep_pct += s.intra_trigram_rep_pct;

        story_trigrams.push_back(trigram_types(tokenize(story_text(story))));
        for (const auto& tg : story_trigrams.back()) ++trigram_story_count[tg];

        for (const auto& seg : story.segments) {
            if (seg.table) ++stats.table_count;
            if (seg.chart_type) {
                ++stats.chart_count;
                try {
                    const auto type = visspec::normalize_chart_type(*seg.chart_type);
                    ++chart_counts[visspec::to_string(type)];
                    ++classified_charts;
                } catch (const visspec::SpecError&) {
                    ++stats.unclassified_charts;
                }
            }
        }
        for (const auto& topic : story.topics) {
            ++topic_counts[topic];
            ++topic_total;
        }
    }

    const double n = static_cast<double>(corpus.size());
    stats.mean_char_len /= n;
    stats.mean_token_count /= n;
    stats.mean_paragraph_count /= n;
    stats.mean_vocab_token_ratio /= n;
    stats.mean_unique_verbs /= n;
    stats.mean_diverse_verb_pct /= n;
    stats.mean_intra_trigram_rep_pct /= n;

    double inter_sum = 0;
    for (const auto& types : story_trigrams) {
        if (types.empty()) continue;
        size_t shared = 0;
        for (const auto& tg : types)
            if (trigram_story_count[tg] >= 2) ++shared;
        inter_sum += 100.0 * static_cast<double>(shared) / static_cast<double>(types.size());
    }
    stats.inter_trigram_rep_pct = inter_sum / n;

    if (classified_charts > 0)
        for (const auto& [name, count] : chart_counts)
            stats.chart_type_distribution[name] =
                100.0 * static_cast<double>(count) / static_cast<double>(classified_charts);
    if (topic_total > 0)
        for (const auto& [topic, count] : topic_counts)
            stats.topic_distribution[topic] =
                100.0 * static_cast<double>(count) / static_cast<double>(topic_total);
    return stats;
}

namespace {

ordered_json table_to_json_min(const DataTable& table) {
    ordered_json jt;
    jt["id"] = table.id;
    jt["title"] = table.title;
    jt["columns"] = ordered_json::array();
    for (const auto& col : table.columns) {
        ordered_json jc;
        jc["name"] = col.name;
        jc["kind"] = dn::to_string(col.kind);
        jt["columns"].push_back(std::move(jc));
    }
    jt["rows"] = ordered_json::array();
    for (const auto& row : table.rows) {
        ordered_json jr = ordered_json::array();
        for (const auto& cell : row) {
            if (cell_is_number(cell))
                jr.push_back(cell_number(cell));
            else
                jr.push_back(std::get<std::string>(cell));
        }
        jt["rows"].push_back(std::move(jr));
    }
    return jt;
}

DataTable table_from_json_min(const ordered_json& jt, const std::string& where) {
    DataTable table;
    if (!jt.contains("id") || !jt.contains("columns") || !jt.contains("rows"))
        throw ValidationError(where + ": table needs id, columns and rows");
    table.id = jt["id"].get<std::string>();
    table.title = jt.value("title", "");
    for (const auto& jc : jt["columns"]) {
        Column col;
        col.name = jc.at("name").get<std::string>();
        col.kind = jc.value("kind", "text") == "number" ? ColumnKind::number : ColumnKind::text;
        table.columns.push_back(std::move(col));
    }
    for (const auto& jr : jt["rows"]) {
        std::vector<Cell> row;
        for (const auto& jc : jr) {
            if (jc.is_number())
                row.emplace_back(jc.get<double>());
            else
                row.emplace_back(jc.get<std::string>());
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

}  // namespace

std::string story_to_json_text(const CorpusStory& story) {
    ordered_json j;
    j["schema"] = "dn/1";
    j["kind"] = "corpus_story";
    j["id"] = story.id;
    j["source"] = to_string(story.source);
    j["title"] = story.title;
    j["topics"] = story.topics;
    j["segments"] = ordered_json::array();
    for (const auto& seg : story.segments) {
        ordered_json js;
        js["text"] = seg.text;
        js["chart_type"] = seg.chart_type ? ordered_json(*seg.chart_type) : ordered_json(nullptr);
        js["table"] = seg.table ? table_to_json_min(*seg.table) : ordered_json(nullptr);
        j["segments"].push_back(std::move(js));
    }
    return j.dump(2) + "\n";
}

CorpusStory story_from_json_text(const std::string& text, const std::string& where) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(where + ": " + e.what());
    }
    CorpusStory story;
    if (!j.contains("id") || !j["id"].is_string())
        throw ValidationError(where + ": missing or non-string field 'id'");
    story.id = j["id"].get<std::string>();
    const std::string story_ref = "story '" + story.id + "'";
    if (!j.contains("source") || !j["source"].is_string())
        throw ValidationError(story_ref + ": missing field 'source'");
    const std::string source_name = j["source"].get<std::string>();
    const auto source = source_from(source_name);
    if (!source)
        throw ValidationError(story_ref + ": field 'source': unknown source '" + source_name +
                              "' (expected pew, tableau or gapminder)");
    story.source = *source;
    story.title = j.value("title", "");
    if (j.contains("topics"))
        for (const auto& t : j["topics"]) story.topics.push_back(t.get<std::string>());
    if (!j.contains("segments") || !j["segments"].is_array() || j["segments"].empty())
        throw ValidationError(story_ref + ": field 'segments' must be a non-empty array");
    for (const auto& js : j["segments"]) {
        CorpusSegment seg;
        if (!js.contains("text"))
            throw ValidationError(story_ref + ": segment missing field 'text'");
        seg.text = js["text"].get<std::string>();
        if (js.contains("chart_type") && !js["chart_type"].is_null())
            seg.chart_type = js["chart_type"].get<std::string>();
        if (js.contains("table") && !js["table"].is_null())
            seg.table = table_from_json_min(js["table"], story_ref);
        story.segments.push_back(std::move(seg));
    }
    return story;
}

std::vector<CorpusStory> load_corpus(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    if (!fs::exists(dir)) throw IoError("corpus directory not found: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".json")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    std::vector<CorpusStory> corpus;
    for (const auto& file : files)
        corpus.push_back(story_from_json_text(io::read_file(file), file.string()));
    return corpus;
}

namespace {

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    bool row_dirty = false;
    for (size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"': quoted = true; row_dirty = true; break;
            case ',':
                row.push_back(std::move(field));
                field.clear();
                row_dirty = true;
                break;
            case '\r': break;
            case '\n':
                if (row_dirty || !field.empty()) {
                    row.push_back(std::move(field));
                    field.clear();
                    rows.push_back(std::move(row));
                    row.clear();
                    row_dirty = false;
                }
                break;
            default: field.push_back(c); row_dirty = true;
        }
    }
    if (row_dirty || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

bool parse_number(const std::string& text, double& out) {
    const std::string t = trim(text);
    if (t.empty()) return false;
    char* end = nullptr;
    out = std::strtod(t.c_str(), &end);
    return end == t.c_str() + t.size() && std::isfinite(out);
}

}  // namespace

DataTable import_csv_table(const std::filesystem::path& path, const std::string& title) {
    const auto rows = parse_csv(io::read_file(path));
    if (rows.empty()) throw ValidationError("CSV file has no header row: " + path.string());

    DataTable table;
    table.id = path.stem().string();
    table.title = title;
    const size_t ncols = rows[0].size();
    for (const auto& name : rows[0]) table.columns.push_back({trim(name), ColumnKind::text, {}});

    std::vector<bool> numeric(ncols, true);
    for (size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() != ncols)
            throw ValidationError("CSV row " + std::to_string(r) + " has " +
                                  std::to_string(rows[r].size()) + " fields, expected " +
                                  std::to_string(ncols) + ": " + path.string());
        for (size_t c = 0; c < ncols; ++c) {
            double value = 0;
            if (!parse_number(rows[r][c], value)) numeric[c] = false;
        }
    }
    for (size_t c = 0; c < ncols; ++c)
        table.columns[c].kind = numeric[c] ? ColumnKind::number : ColumnKind::text;

    for (size_t r = 1; r < rows.size(); ++r) {
        std::vector<Cell> row;
        for (size_t c = 0; c < ncols; ++c) {
            double value = 0;
            if (numeric[c] && parse_number(rows[r][c], value))
                row.emplace_back(value);
            else
                row.emplace_back(trim(rows[r][c]));
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

namespace {

std::string fmt(double v, int decimals = 2) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    return buf;
}

ordered_json stats_to_json(const CorpusStats& s) {
    ordered_json j;
    j["story_count"] = s.story_count;
    j["table_count"] = s.table_count;
    j["chart_count"] = s.chart_count;
    j["mean_char_len"] = s.mean_char_len;
    j["mean_token_count"] = s.mean_token_count;
    j["mean_paragraph_count"] = s.mean_paragraph_count;
    j["mean_vocab_token_ratio"] = s.mean_vocab_token_ratio;
    j["mean_unique_verbs"] = s.mean_unique_verbs;
    j["mean_diverse_verb_pct"] = s.mean_diverse_verb_pct;
    j["mean_intra_trigram_rep_pct"] = s.mean_intra_trigram_rep_pct;
    j["inter_trigram_rep_pct"] = s.inter_trigram_rep_pct;
    j["chart_type_distribution"] = s.chart_type_distribution;
    j["unclassified_charts"] = s.unclassified_charts;
    j["topic_distribution"] = s.topic_distribution;
    return j;
}

}  // namespace

std::string stats_report_text(const std::vector<std::pair<std::string, CorpusStats>>& groups) {
    const std::vector<std::string> metric_names = {
        "stories",     "tables",        "charts",          "char len",
        "tokens",      "#paragraphs",   "vocab:token",     "unique verbs",
        "diverse verbs %", "intra-rep %", "inter-rep %",
    };
    std::vector<std::vector<std::string>> columns;
    for (const auto& [label, s] : groups) {
        std::vector<std::string> col;
        col.push_back(label);
        col.push_back(std::to_string(s.story_count));
        col.push_back(std::to_string(s.table_count));
        col.push_back(std::to_string(s.chart_count));
        col.push_back(fmt(s.mean_char_len, 1));
        col.push_back(fmt(s.mean_token_count, 1));
        col.push_back(fmt(s.mean_paragraph_count, 1));
        col.push_back(fmt(s.mean_vocab_token_ratio));
        col.push_back(fmt(s.mean_unique_verbs, 1));
        col.push_back(fmt(s.mean_diverse_verb_pct));
        col.push_back(fmt(s.mean_intra_trigram_rep_pct));
        col.push_back(fmt(s.inter_trigram_rep_pct));
        columns.push_back(std::move(col));
    }

    size_t name_width = 0;
    for (const auto& name : metric_names) name_width = std::max(name_width, name.size());
    std::vector<size_t> widths(columns.size(), 0);
    for (size_t c = 0; c < columns.size(); ++c)
        for (const auto& cell : columns[c]) widths[c] = std::max(widths[c], cell.size());

    std::string out;
    auto emit_row = [&](const std::string& name, size_t row) {
        std::string padded_name = name;
        padded_name.resize(name_width, ' ');
        out += padded_name;
        for (size_t c = 0; c < columns.size(); ++c) {
            std::string cell = columns[c][row];
            std::string padded(widths[c] >= cell.size() ? widths[c] - cell.size() : 0, ' ');
            out += "  " + padded + cell;
        }
        out += "\n";
    };
    emit_row("", 0);
    for (size_t m = 0; m < metric_names.size(); ++m) emit_row(metric_names[m], m + 1);
    return out;
}

std::string stats_report_json(const std::vector<std::pair<std::string, CorpusStats>>& groups) {
    ordered_json j;
    j["schema"] = "dn/1";
    j["kind"] = "corpus_stats";
    j["groups"] = ordered_json::array();
    for (const auto& [label, s] : groups) {
        ordered_json jg;
        jg["label"] = label;
        jg["stats"] = stats_to_json(s);
        j["groups"].push_back(std::move(jg));
    }
    return j.dump(2) + "\n";
}

}  // namespace dn::corpus
