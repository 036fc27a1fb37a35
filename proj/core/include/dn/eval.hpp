#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dn/gateway.hpp"
#include "dn/pipeline.hpp"
#include "dn/story.hpp"

namespace dn::eval {

class EvalError : public dn::Error {
public:
    explicit EvalError(const std::string& what) : dn::Error(what) {}
};

/// Raised when judge output carries no verdict line at all.
class ParseFailure : public EvalError {
public:
    explicit ParseFailure(const std::string& what) : EvalError(what) {}
};

enum class Criterion {
    informativeness,
    clarity_coherence,
    visualization_quality,
    narrative_quality,
    factual_correctness,
};

const std::vector<Criterion>& all_criteria();
const char* to_string(Criterion criterion);
/// Upper-case verdict-line key, e.g. "CLARITY_COHERENCE".
const char* criterion_key(Criterion criterion);

enum class Label { A, B, tie };
const char* to_string(Label label);
std::optional<Label> label_from(const std::string& name);
Label swap_label(Label label);  // A<->B, tie fixed

enum class OrderShown { AB, BA };
const char* to_string(OrderShown order);

struct Verdict {
    std::string pair_id;
    std::map<Criterion, Label> winners;  // criteria the judge actually answered
    Label overall = Label::tie;
    OrderShown order_shown = OrderShown::AB;
    std::string raw;
    std::vector<std::string> warnings;  // noncompliance notes (missing lines)
    std::string dataset;                // optional test-set tag for grouped reports
};

/// Judge-readable rendering: headings, paragraphs and one-line chart
/// summaries.
std::string story_judge_text(const DataStory& story);

struct JudgeOptions {
    std::string model = "dn-judge";
    double temperature = 0.0;
    int max_tokens = 512;
};

/// Single prompt presenting both stories under neutral "Story A"/"Story B"
/// labels (swapped when order is BA) and instructing one "KEY: A|B|TIE"
/// verdict line per criterion plus OVERALL.
gateway::ChatRequest build_judge_prompt(const DataStory& story_a, const DataStory& story_b,
                                        const std::vector<Criterion>& criteria,
                                        OrderShown order, const JudgeOptions& options = {});

/// Extracts verdict lines case-insensitively and un-swaps labels when the
/// stories were shown in BA order. A requested criterion without a line
/// scores tie with a warning; text with no verdict line at all raises
/// ParseFailure.
Verdict parse_verdict(const std::string& text, OrderShown order,
                      const std::vector<Criterion>& criteria = all_criteria());

/// Judges one pair: seeded coin flip for presentation order, prompt, call,
/// parse, un-swap.
Verdict pairwise_judge(const DataStory& story_a, const DataStory& story_b,
                       gateway::Gateway& gw, uint64_t seed, const std::string& pair_id = "",
                       const std::vector<Criterion>& criteria = all_criteria(),
                       const JudgeOptions& options = {});

/// Judges the pair under both presentation orders; conflicting answers on a
/// criterion merge to tie.
Verdict judge_both_orders(const DataStory& story_a, const DataStory& story_b,
                          gateway::Gateway& gw, uint64_t seed, const std::string& pair_id = "",
                          const std::vector<Criterion>& criteria = all_criteria(),
                          const JudgeOptions& options = {});

struct WinRateRow {
    double a_win_pct = 0;
    double b_win_pct = 0;
    double tie_pct = 0;
    size_t n = 0;
};

/// Rows keyed by criterion name plus "overall" and "average"; every row sums
/// to 100 within 0.01.
struct WinRateTable {
    std::vector<std::pair<std::string, WinRateRow>> rows;

    const WinRateRow* find(const std::string& key) const;
};

WinRateTable win_rates(const std::vector<Verdict>& verdicts);

std::string verdicts_to_jsonl(const std::vector<Verdict>& verdicts);
std::vector<Verdict> verdicts_from_jsonl(const std::string& text);

std::string win_rate_report_text(
    const std::vector<std::pair<std::string, WinRateTable>>& by_dataset);
std::string win_rate_report_json(
    const std::vector<std::pair<std::string, WinRateTable>>& by_dataset);
/// Groups verdicts by their dataset tag (untagged -> "all"), preserving
/// first-appearance order.
std::vector<std::pair<std::string, WinRateTable>> win_rates_by_dataset(
    const std::vector<Verdict>& verdicts);

struct AnnotationItem {
    std::string item_id;
    std::map<std::string, Label> labels;  // annotator -> label
};

struct AnnotationSet {
    std::vector<AnnotationItem> items;
};

/// CSV with header item_id,annotator,label.
AnnotationSet annotations_from_csv(const std::string& text);

struct MergeResult {
    std::vector<std::pair<std::string, Label>> consensus;  // item_id -> label
    size_t agreements = 0;
    size_t items = 0;
    double raw_agreement_pct = 0;
};

/// Two-annotator consensus: the shared label on agreement, tie otherwise.
/// An item with a label count other than two raises EvalError naming it.
MergeResult merge_annotators(const AnnotationSet& annotations);

/// Krippendorff's alpha for nominal labels via the coincidence matrix,
/// pairing labels within each item (items with fewer than two labels are
/// skipped). Zero expected disagreement yields 1.0 and sets *warning.
double krippendorff_alpha(const AnnotationSet& annotations, std::string* warning = nullptr);

const std::vector<std::string>& ablation_config_names();

/// Maps a named ablation ("full", "skip_reflection", "skip_outline",
/// "skip_verification", "direct") onto pipeline flags and runs the pipeline;
/// the trace is tagged with the config name. Unknown names raise EvalError
/// listing the valid ones.
pipeline::StoryResult run_ablation(const std::string& config_name, const StoryRequest& request,
                                   gateway::Gateway& gw,
                                   const pipeline::PipelineConfig& base = {},
                                   const pipeline::TemplateSet& templates =
                                       pipeline::TemplateSet::builtin());

}  // namespace dn::eval
