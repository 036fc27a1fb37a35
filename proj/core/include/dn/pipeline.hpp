#pragma once

#include <optional>
#include <string>

#include "dn/gateway.hpp"
#include "dn/prompts.hpp"
#include "dn/story.hpp"

namespace dn::pipeline {

/// Ablation switches plus generation knobs. The defaults reproduce the full
/// three-stage pipeline with at most one revision per stage, i.e. the
/// nine-call ceiling.
struct PipelineConfig {
    bool skip_reflection = false;
    bool skip_outline = false;
    bool skip_verification = false;
    int max_revisions_per_stage = 1;

    std::string model = "dn-model";
    int max_tokens = 2048;
    double generate_temperature = 0.7;
    double critique_temperature = 0.0;
};

/// Canonical name for a config: "full", "skip_reflection", "skip_outline",
/// "skip_verification", "direct" (all skips), or "custom".
std::string config_name(const PipelineConfig& config);

/// Marker text bound in place of a skipped stage's artifact so one template
/// set serves every ablation.
inline constexpr const char* kReflectionSkipped = "(reflection skipped)";
inline constexpr const char* kOutlineSkipped = "(outline skipped)";

/// Stage failure; carries the trace accumulated before the abort.
class PipelineError : public dn::Error {
public:
    PipelineError(StageId stage, const std::string& what, PipelineTrace partial,
                  bool gateway_failure = false)
        : dn::Error(std::string(to_string(stage)) + ": " + what),
          stage_(stage),
          trace_(std::move(partial)),
          gateway_failure_(gateway_failure) {}

    StageId stage() const { return stage_; }
    const PipelineTrace& partial_trace() const { return trace_; }
    bool gateway_failure() const { return gateway_failure_; }

private:
    StageId stage_;
    PipelineTrace trace_;
    bool gateway_failure_;
};

/// Lenient critic-output parser. A leading "REVISION: YES|NO" line decides
/// the verdict (case-insensitive); plan items are the bullets after it. With
/// no verdict line, needs_revision is inferred true iff at least one bullet
/// of plan text is present. Never fails; the raw text is always preserved.
Critique parse_critique(const std::string& text);

/// Bullet list: lines marked with -, *, the unicode bullet, or numbering.
std::vector<std::string> parse_bullets(const std::string& text);

/// Parsed reflection bullets; empty when no bullet lines are present.
std::vector<std::string> parse_reflection_bullets(const std::string& text);

/// Beginning/middle/end sections with points, sub-points, and "(vis: ...)"
/// hints. Role completeness is checked by run_outline, not here.
Outline parse_outline_text(const std::string& text);

/// Sections split on "## " headings; each fenced ```visspec block is parsed
/// via the visspec module. A block that fails to parse becomes a structured
/// parse-failure note on its segment; narration never aborts on one.
DataStory parse_narration_text(const std::string& text);

struct StageOutcome {
    std::string artifact;  // final artifact text (revised when revised=true)
    std::optional<Critique> critique;
    bool revised = false;
};

/// Runs one generate / critique / revise stage against the gateway,
/// appending every call to `trace`. With skip_verification the stage is a
/// single generate call.
StageOutcome run_stage(StageId stage, const Bindings& bindings, const PipelineConfig& config,
                       gateway::Gateway& gw, const TemplateSet& templates,
                       PipelineTrace& trace);

Reflection run_reflection(const StoryRequest& request, const PipelineConfig& config,
                          gateway::Gateway& gw,
                          const TemplateSet& templates = TemplateSet::builtin());

Outline run_outline(const Reflection& reflection, const StoryRequest& request,
                    const PipelineConfig& config, gateway::Gateway& gw,
                    const TemplateSet& templates = TemplateSet::builtin());

DataStory run_narration(const Outline& outline, const StoryRequest& request,
                        const PipelineConfig& config, gateway::Gateway& gw,
                        const TemplateSet& templates = TemplateSet::builtin());

struct StoryResult {
    DataStory story;
    PipelineTrace trace;
};

/// The full pipeline: reflection -> outline -> narration, with stages skipped
/// per config. The all-skip config is the direct-prompting baseline (one
/// call). Any stage failure raises PipelineError carrying the partial trace.
StoryResult generate_story(const StoryRequest& request, const PipelineConfig& config,
                           gateway::Gateway& gw,
                           const TemplateSet& templates = TemplateSet::builtin());

}  // namespace dn::pipeline
