#include "dn/eval.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <random>

#include <json.hpp>

#include "dn/strings.hpp"

namespace dn::eval {

using ordered_json = nlohmann::ordered_json;

const std::vector<Criterion>& all_criteria() {
    static const std::vector<Criterion> kAll = {
        Criterion::informativeness,     Criterion::clarity_coherence,
        Criterion::visualization_quality, Criterion::narrative_quality,
        Criterion::factual_correctness,
    };
    return kAll;
}

const char* to_string(Criterion criterion) {
    switch (criterion) {
        case Criterion::informativeness: return "informativeness";
        case Criterion::clarity_coherence: return "clarity_coherence";
        case Criterion::visualization_quality: return "visualization_quality";
        case Criterion::narrative_quality: return "narrative_quality";
        case Criterion::factual_correctness: return "factual_correctness";
    }
    return "informativeness";
}

const char* criterion_key(Criterion criterion) {
    switch (criterion) {
        case Criterion::informativeness: return "INFORMATIVENESS";
        case Criterion::clarity_coherence: return "CLARITY_COHERENCE";
        case Criterion::visualization_quality: return "VISUALIZATION_QUALITY";
        case Criterion::narrative_quality: return "NARRATIVE_QUALITY";
        case Criterion::factual_correctness: return "FACTUAL_CORRECTNESS";
    }
    return "INFORMATIVENESS";
}

const char* to_string(Label label) {
    switch (label) {
        case Label::A: return "A";
        case Label::B: return "B";
        case Label::tie: return "tie";
    }
    return "tie";
}

std::optional<Label> label_from(const std::string& name) {
    const std::string key = to_lower(trim(name));
    if (key == "a" || key == "story a") return Label::A;
    if (key == "b" || key == "story b") return Label::B;
    if (key == "tie" || key == "draw" || key == "equal") return Label::tie;
    return std::nullopt;
}

Label swap_label(Label label) {
    if (label == Label::A) return Label::B;
    if (label == Label::B) return Label::A;
    return Label::tie;
}

const char* to_string(OrderShown order) { return order == OrderShown::AB ? "AB" : "BA"; }

std::string story_judge_text(const DataStory& story) {
    std::string out;
    for (const auto& seg : story.segments) {
        if (seg.heading) out += "Section: " + *seg.heading + "\n";
        for (const auto& para : seg.paragraphs) out += para + "\n";
        if (seg.visspec) {
            const auto& spec = *seg.visspec;
            out += std::string("[Chart: ") + visspec::to_string(spec.chart_type);
            if (!spec.title.empty()) out += " \"" + spec.title + "\"";
            out += " | table " + spec.table_ref + " | x: " + spec.x +
                   " | y: " + join(spec.y, ", ");
            if (spec.series) out += " | series: " + *spec.series;
            out += "]\n";
        }
        if (seg.visspec_failure)
            out += "[Chart specification failed to parse: " + seg.visspec_failure->message +
                   "]\n";
        out += "\n";
    }
    return out;
}

namespace {

const char* criterion_blurb(Criterion criterion) {
    switch (criterion) {
        case Criterion::informativeness:
            return "how much useful information the story carries";
        case Criterion::clarity_coherence:
            return "organization, readability, and flow between parts";
        case Criterion::visualization_quality:
            return "how well the charts support the story";
        case Criterion::narrative_quality:
            return "how engaging and insightful the storytelling is";
        case Criterion::factual_correctness:
            return "agreement between the story's statements and the data";
    }
    return "";
}

std::string strip_non_alpha_upper(const std::string& s) {
    std::string out;
    for (char c : s)
        if (std::isalpha(static_cast<unsigned char>(c)))
            out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    return out;
}

std::optional<Criterion> criterion_from_key(const std::string& key) {
    const std::string k = strip_non_alpha_upper(key);
    if (k == "INFORMATIVENESS") return Criterion::informativeness;
    if (k == "CLARITYCOHERENCE" || k == "CLARITYANDCOHERENCE")
        return Criterion::clarity_coherence;
    if (k == "VISUALIZATIONQUALITY") return Criterion::visualization_quality;
    if (k == "NARRATIVEQUALITY") return Criterion::narrative_quality;
    if (k == "FACTUALCORRECTNESS") return Criterion::factual_correctness;
    return std::nullopt;
}

}  // namespace

gateway::ChatRequest build_judge_prompt(const DataStory& story_a, const DataStory& story_b,
                                        const std::vector<Criterion>& criteria,
                                        OrderShown order, const JudgeOptions& options) {
    const DataStory& first = order == OrderShown::AB ? story_a : story_b;
    const DataStory& second = order == OrderShown::AB ? story_b : story_a;

    std::string prompt;
    prompt +=
        "You are judging two data stories generated from the same data tables.\n"
        "Compare them criterion by criterion and pick a winner for each.\n\n";
    prompt += "Story A:\n" + story_judge_text(first) + "\n";
    prompt += "Story B:\n" + story_judge_text(second) + "\n";
    prompt += "Criteria:\n";
    for (const auto criterion : criteria)
        prompt += std::string("- ") + criterion_key(criterion) + ": " +
                  criterion_blurb(criterion) + "\n";
    prompt += "\nReply with exactly one line per criterion, in this form:\n";
    for (const auto criterion : criteria)
        prompt += std::string(criterion_key(criterion)) + ": A|B|TIE\n";
    prompt += "OVERALL: A|B|TIE\n";

    gateway::ChatRequest request;
    request.model = options.model;
    request.messages = {{gateway::MessageRole::user, prompt}};
    request.temperature = options.temperature;
    request.max_tokens = options.max_tokens;
    request.tag = "judge.pairwise";
    return request;
}

Verdict parse_verdict(const std::string& text, OrderShown order,
                      const std::vector<Criterion>& criteria) {
    Verdict verdict;
    verdict.order_shown = order;
    verdict.raw = text;

    bool overall_found = false;
    for (const auto& line : split_lines(text)) {
        const size_t colon = line.find(':');
        if (colon == std::string::npos) continue;
        const std::string key = line.substr(0, colon);
        const auto label = label_from(line.substr(colon + 1));
        if (!label) continue;
        if (strip_non_alpha_upper(key) == "OVERALL") {
            verdict.overall = *label;
            overall_found = true;
        } else if (auto criterion = criterion_from_key(key)) {
            verdict.winners[*criterion] = *label;
        }
    }

    if (!overall_found && verdict.winners.empty())
        throw ParseFailure("judge reply contains no verdict lines");

    for (const auto criterion : criteria) {
        if (!verdict.winners.empty() && !verdict.winners.count(criterion)) {
            verdict.winners[criterion] = Label::tie;
            verdict.warnings.push_back(std::string("missing criterion line ") +
                                       criterion_key(criterion) + "; recorded as tie");
        }
    }
    if (!overall_found) {
        verdict.overall = Label::tie;
        verdict.warnings.push_back("missing OVERALL line; recorded as tie");
    }

    if (order == OrderShown::BA) {
        verdict.overall = swap_label(verdict.overall);
        for (auto& [criterion, label] : verdict.winners) label = swap_label(label);
    }
    return verdict;
}

Verdict pairwise_judge(const DataStory& story_a, const DataStory& story_b,
                       gateway::Gateway& gw, uint64_t seed, const std::string& pair_id,
                       const std::vector<Criterion>& criteria, const JudgeOptions& options) {
    std::mt19937_64 rng(seed);
    const OrderShown order =
        (rng() & 1) == 0 ? OrderShown::AB : OrderShown::BA;
    const gateway::ChatRequest request =
        build_judge_prompt(story_a, story_b, criteria, order, options);
    gateway::ChatResponse response;
    try {
        response = gw.complete(request);
    } catch (const gateway::GatewayError& e) {
        throw gateway::GatewayError(e.kind(), "pair '" + pair_id + "': " + e.what(),
                                    e.status());
    }
    try {
        Verdict verdict = parse_verdict(response.content, order, criteria);
        verdict.pair_id = pair_id;
        return verdict;
    } catch (const ParseFailure& e) {
        throw ParseFailure("pair '" + pair_id + "': " + e.what());
    }
}

Verdict judge_both_orders(const DataStory& story_a, const DataStory& story_b,
                          gateway::Gateway& gw, uint64_t seed, const std::string& pair_id,
                          const std::vector<Criterion>& criteria, const JudgeOptions& options) {
    auto one = [&](OrderShown order) {
        const gateway::ChatRequest request =
            build_judge_prompt(story_a, story_b, criteria, order, options);
        const gateway::ChatResponse response = gw.complete(request);
        return parse_verdict(response.content, order, criteria);
    };
    (void)seed;  // both orders always run; no coin flip needed
    const Verdict forward = one(OrderShown::AB);
    const Verdict backward = one(OrderShown::BA);

    Verdict merged;
    merged.pair_id = pair_id;
    merged.order_shown = OrderShown::AB;
    merged.raw = forward.raw + "\n---\n" + backward.raw;
    merged.overall = forward.overall == backward.overall ? forward.overall : Label::tie;
    if (forward.overall != backward.overall)
        merged.warnings.push_back("orders disagree on OVERALL; recorded as tie");
    for (const auto criterion : criteria) {
        auto fit = forward.winners.find(criterion);
        auto bit = backward.winners.find(criterion);
        if (fit == forward.winners.end() && bit == backward.winners.end()) continue;
        if (fit != forward.winners.end() && bit != backward.winners.end() &&
            fit->second == bit->second) {
            merged.winners[criterion] = fit->second;
        } else {
            merged.winners[criterion] = Label::tie;
            merged.warnings.push_back(std::string("orders disagree on ") +
                                      criterion_key(criterion) + "; recorded as tie");
        }
    }
    return merged;
}

namespace {

WinRateRow make_row(size_t a, size_t b, size_t tie) {
    WinRateRow row;
    row.n = a + b + tie;
    if (row.n == 0) return row;
    const double n = static_cast<double>(row.n);
    row.a_win_pct = 100.0 * static_cast<double>(a) / n;
    row.b_win_pct = 100.0 * static_cast<double>(b) / n;
    row.tie_pct = 100.0 * static_cast<double>(tie) / n;
    return row;
}

}  // namespace

const WinRateRow* WinRateTable::find(const std::string& key) const {
    for (const auto& [name, row] : rows)
        if (name == key) return &row;
    return nullptr;
}

WinRateTable win_rates(const std::vector<Verdict>& verdicts) {
    if (verdicts.empty()) throw EvalError("win_rates needs at least one verdict");
    WinRateTable table;

    std::vector<WinRateRow> criterion_rows;
    for (const auto criterion : all_criteria()) {
        size_t a = 0, b = 0, tie = 0;
        for (const auto& verdict : verdicts) {
            auto it = verdict.winners.find(criterion);
            if (it == verdict.winners.end()) continue;
            if (it->second == Label::A)
                ++a;
            else if (it->second == Label::B)
                ++b;
            else
                ++tie;
        }
        if (a + b + tie == 0) continue;
        WinRateRow row = make_row(a, b, tie);
        criterion_rows.push_back(row);
        table.rows.emplace_back(to_string(criterion), row);
    }

    {
        size_t a = 0, b = 0, tie = 0;
        for (const auto& verdict : verdicts) {
            if (verdict.overall == Label::A)
                ++a;
            else if (verdict.overall == Label::B)
                ++b;
            else
                ++tie;
        }
        table.rows.emplace_back("overall", make_row(a, b, tie));
    }

    if (!criterion_rows.empty()) {
        WinRateRow average;
        for (const auto& row : criterion_rows) {
            average.a_win_pct += row.a_win_pct;
            average.b_win_pct += row.b_win_pct;
            average.tie_pct += row.tie_pct;
            average.n += row.n;
        }
        const double k = static_cast<double>(criterion_rows.size());
        average.a_win_pct /= k;
        average.b_win_pct /= k;
        average.tie_pct /= k;
        table.rows.emplace_back("average", average);
    }
    return table;
}

std::string verdicts_to_jsonl(const std::vector<Verdict>& verdicts) {
    std::string out;
    for (const auto& verdict : verdicts) {
        ordered_json j;
        j["pair_id"] = verdict.pair_id;
        j["order_shown"] = to_string(verdict.order_shown);
        ordered_json winners;
        for (const auto criterion : all_criteria()) {
            auto it = verdict.winners.find(criterion);
            if (it != verdict.winners.end()) winners[to_string(criterion)] = to_string(it->second);
        }
        j["criteria"] = std::move(winners);
        j["overall"] = to_string(verdict.overall);
        j["dataset"] = verdict.dataset;
        j["warnings"] = verdict.warnings;
        j["raw"] = verdict.raw;
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::vector<Verdict> verdicts_from_jsonl(const std::string& text) {
    std::vector<Verdict> verdicts;
    int line_no = 0;
    for (const auto& line : split_lines(text)) {
        ++line_no;
        if (trim(line).empty()) continue;
        ordered_json j;
        try {
            j = ordered_json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError("verdicts line " + std::to_string(line_no) + ": " + e.what(),
                             line_no, 0);
        }
        Verdict verdict;
        verdict.pair_id = j.value("pair_id", "");
        verdict.order_shown = j.value("order_shown", "AB") == "BA" ? OrderShown::BA
                                                                   : OrderShown::AB;
        if (j.contains("criteria"))
            for (const auto criterion : all_criteria()) {
                const char* name = to_string(criterion);
                if (j["criteria"].contains(name)) {
                    auto label = label_from(j["criteria"][name].get<std::string>());
                    if (!label)
                        throw ParseError("verdicts line " + std::to_string(line_no) +
                                         ": bad label for " + name);
                    verdict.winners[criterion] = *label;
                }
            }
        const auto overall = label_from(j.value("overall", ""));
        if (!overall)
            throw ParseError("verdicts line " + std::to_string(line_no) +
                             ": missing or bad 'overall' label");
        verdict.overall = *overall;
        verdict.dataset = j.value("dataset", "");
        if (j.contains("warnings"))
            for (const auto& w : j["warnings"]) verdict.warnings.push_back(w.get<std::string>());
        verdict.raw = j.value("raw", "");
        verdicts.push_back(std::move(verdict));
    }
    return verdicts;
}

std::vector<std::pair<std::string, WinRateTable>> win_rates_by_dataset(
    const std::vector<Verdict>& verdicts) {
    std::vector<std::string> order;
    std::map<std::string, std::vector<Verdict>> groups;
    for (const auto& verdict : verdicts) {
        const std::string key = verdict.dataset.empty() ? "all" : verdict.dataset;
        if (!groups.count(key)) order.push_back(key);
        groups[key].push_back(verdict);
    }
    std::vector<std::pair<std::string, WinRateTable>> out;
    for (const auto& key : order) out.emplace_back(key, win_rates(groups[key]));
    return out;
}

namespace {
std::string pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}
}  // namespace

std::string win_rate_report_text(
    const std::vector<std::pair<std::string, WinRateTable>>& by_dataset) {
    std::string out;
    for (const auto& [dataset, table] : by_dataset) {
        out += dataset + "\n";
        size_t width = 0;
        for (const auto& [name, row] : table.rows) width = std::max(width, name.size());
        char header[160];
        std::snprintf(header, sizeof(header), "%-*s  %8s  %8s  %8s  %6s\n",
                      static_cast<int>(width), "", "Win", "Loss", "Tie", "N");
        out += header;
        for (const auto& [name, row] : table.rows) {
            char line[160];
            std::snprintf(line, sizeof(line), "%-*s  %7s%%  %7s%%  %7s%%  %6zu\n",
                          static_cast<int>(width), name.c_str(), pct(row.a_win_pct).c_str(),
                          pct(row.b_win_pct).c_str(), pct(row.tie_pct).c_str(), row.n);
            out += line;
        }
        out += "\n";
    }
    return out;
}

std::string win_rate_report_json(
    const std::vector<std::pair<std::string, WinRateTable>>& by_dataset) {
    ordered_json j;
    j["schema"] = "dn/1";
    j["kind"] = "win_rates";
    j["datasets"] = ordered_json::array();
    for (const auto& [dataset, table] : by_dataset) {
        ordered_json jd;
        jd["dataset"] = dataset;
        jd["rows"] = ordered_json::array();
        for (const auto& [name, row] : table.rows) {
            ordered_json jr;
            jr["name"] = name;
            jr["a_win_pct"] = row.a_win_pct;
            jr["b_win_pct"] = row.b_win_pct;
            jr["tie_pct"] = row.tie_pct;
            jr["n"] = row.n;
            jd["rows"].push_back(std::move(jr));
        }
        j["datasets"].push_back(std::move(jd));
    }
    return j.dump(2) + "\n";
}

AnnotationSet annotations_from_csv(const std::string& text) {
    AnnotationSet set;
    std::map<std::string, size_t> index;
    bool header_seen = false;
    int line_no = 0;
    for (const auto& line : split_lines(text)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split(line, ',');
        if (fields.size() != 3)
            throw ParseError("annotations line " + std::to_string(line_no) +
                             ": expected item_id,annotator,label");
        if (!header_seen) {
            header_seen = true;
            if (to_lower(trim(fields[0])) == "item_id") continue;  // header row optional
        }
        const std::string item_id = trim(fields[0]);
        const std::string annotator = trim(fields[1]);
        const auto label = label_from(fields[2]);
        if (!label)
            throw ParseError("annotations line " + std::to_string(line_no) + ": bad label '" +
                             trim(fields[2]) + "'");
        if (!index.count(item_id)) {
            index[item_id] = set.items.size();
            set.items.push_back({item_id, {}});
        }
        set.items[index[item_id]].labels[annotator] = *label;
    }
    return set;
}

MergeResult merge_annotators(const AnnotationSet& annotations) {
    if (annotations.items.empty()) throw EvalError("merge_annotators needs at least one item");
    MergeResult result;
    result.items = annotations.items.size();
    for (const auto& item : annotations.items) {
        if (item.labels.size() != 2)
            throw EvalError("item '" + item.item_id + "' has " +
                            std::to_string(item.labels.size()) +
                            " labels; exactly 2 annotators expected");
        auto it = item.labels.begin();
        const Label first = it->second;
        const Label second = std::next(it)->second;
        if (first == second) {
            ++result.agreements;
            result.consensus.emplace_back(item.item_id, first);
        } else {
            result.consensus.emplace_back(item.item_id, Label::tie);
        }
    }
    result.raw_agreement_pct =
        100.0 * static_cast<double>(result.agreements) / static_cast<double>(result.items);
    return result;
}

double krippendorff_alpha(const AnnotationSet& annotations, std::string* warning) {
    constexpr size_t kLabels = 3;
    std::array<std::array<double, kLabels>, kLabels> coincidence{};
    bool any_pairable = false;

    for (const auto& item : annotations.items) {
        const size_t m = item.labels.size();
        if (m < 2) continue;
        any_pairable = true;
        std::vector<size_t> values;
        values.reserve(m);
        for (const auto& [annotator, label] : item.labels)
            values.push_back(static_cast<size_t>(label));
        const double weight = 1.0 / static_cast<double>(m - 1);
        for (size_t i = 0; i < values.size(); ++i)
            for (size_t j = 0; j < values.size(); ++j)
                if (i != j) coincidence[values[i]][values[j]] += weight;
    }
    if (!any_pairable)
        throw EvalError("krippendorff_alpha needs at least one item with two or more labels");

    std::array<double, kLabels> marginals{};
    double n = 0;
    for (size_t c = 0; c < kLabels; ++c)
        for (size_t k = 0; k < kLabels; ++k) {
            marginals[c] += coincidence[c][k];
            n += coincidence[c][k];
        }

    double observed_disagreement = 0;
    for (size_t c = 0; c < kLabels; ++c)
        for (size_t k = 0; k < kLabels; ++k)
            if (c != k) observed_disagreement += coincidence[c][k];
    observed_disagreement /= n;

    double expected_disagreement = 0;
    for (size_t c = 0; c < kLabels; ++c)
        for (size_t k = 0; k < kLabels; ++k)
            if (c != k) expected_disagreement += marginals[c] * marginals[k];
    expected_disagreement /= n * (n - 1);

    if (expected_disagreement == 0) {
        if (warning)
            *warning = "all labels identical: expected disagreement is zero, alpha defined as 1";
        return 1.0;
    }
    return 1.0 - observed_disagreement / expected_disagreement;
}

const std::vector<std::string>& ablation_config_names() {
    static const std::vector<std::string> kNames = {
        "full", "skip_reflection", "skip_outline", "skip_verification", "direct",
    };
    return kNames;
}

pipeline::StoryResult run_ablation(const std::string& config_name, const StoryRequest& request,
                                   gateway::Gateway& gw, const pipeline::PipelineConfig& base,
                                   const pipeline::TemplateSet& templates) {
    pipeline::PipelineConfig config = base;
    config.skip_reflection = false;
    config.skip_outline = false;
    config.skip_verification = false;
    if (config_name == "full") {
    } else if (config_name == "skip_reflection") {
        config.skip_reflection = true;
    } else if (config_name == "skip_outline") {
        config.skip_outline = true;
    } else if (config_name == "skip_verification") {
        config.skip_verification = true;
    } else if (config_name == "direct") {
        config.skip_reflection = true;
        config.skip_outline = true;
        config.skip_verification = true;
    } else {
        throw EvalError("unknown ablation config '" + config_name + "'; valid names: " +
                        join(ablation_config_names(), ", "));
    }
    pipeline::StoryResult result = pipeline::generate_story(request, config, gw, templates);
    result.trace.config = config_name;
    return result;
}

}  // namespace dn::eval
