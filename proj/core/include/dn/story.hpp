#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dn/table.hpp"
#include "dn/visspec.hpp"

namespace dn {

/// Input to story generation: tables D, intent I, guidelines G. Immutable
/// value object after construction, like every type in this header.
struct StoryRequest {
    DataTableSet tables;
    std::string intent;
    std::string guidelines;
};

/// Throws ValidationError on empty intent or an invalid table set.
void validate_request(const StoryRequest& request);

/// Stable id for a request, derived from its content so replayed runs
/// produce identical story documents.
std::string request_id(const StoryRequest& request);

/// The critic's reply: verdict plus the issues the generator must fix.
struct Critique {
    bool needs_revision = false;
    std::vector<std::string> plan;
    std::string raw;
};

struct StageMeta {
    bool revised = false;
    std::optional<Critique> critique;
};

struct Reflection {
    std::vector<std::string> bullets;
    StageMeta stage_meta;
};

enum class SectionRole { beginning, middle, end };

const char* to_string(SectionRole role);
std::optional<SectionRole> section_role_from(const std::string& name);

struct OutlinePoint {
    std::string text;
    std::vector<std::string> subpoints;
    std::optional<std::string> vis_hint;
};

struct OutlineSection {
    SectionRole role = SectionRole::beginning;
    std::string heading;
    std::vector<OutlinePoint> points;
};

struct Outline {
    std::vector<OutlineSection> sections;
    StageMeta stage_meta;
};

/// True when the outline has at least one section per role and the roles
/// appear in beginning -> middle -> end order.
bool outline_structure_complete(const Outline& outline);

struct VisSpecFailure {
    std::string code;
    std::string message;
    std::string raw;  // the fenced block that failed to parse
};

struct StorySegment {
    std::optional<std::string> heading;
    std::vector<std::string> paragraphs;
    std::optional<visspec::VisSpec> visspec;
    std::optional<VisSpecFailure> visspec_failure;
};

struct DataStory {
    std::string request_id;
    std::vector<StorySegment> segments;
    StageMeta stage_meta;
    /// Source tables embedded so a story document renders without its request.
    std::optional<DataTableSet> tables;
    /// Post-parse check results from the narration stage.
    visspec::Report validation;
};

/// Finalization check: >=1 segment with a visspec, every table reference
/// resolving, every segment carrying content. Report-style.
visspec::Report check_finalized_story(const DataStory& story, const DataTableSet& tables);

enum class StageId { reflection, outline, narration };
const char* to_string(StageId stage);

enum class CallRole { generate, critique, revise };
const char* to_string(CallRole role);

struct TraceCall {
    CallRole role = CallRole::generate;
    std::string tag;  // "<stage>.<role>"
    std::string prompt;
    std::string response;
    double latency_ms = 0;
};

struct TraceStage {
    StageId stage = StageId::reflection;
    std::vector<std::string> warnings;
    std::vector<TraceCall> calls;
};

/// Audit record of one pipeline run: every call in issue order, per stage.
struct PipelineTrace {
    std::string config;  // "full", "skip_reflection", ..., "direct"
    std::vector<TraceStage> stages;

    size_t call_count() const;
    std::vector<std::string> tags() const;
};

}  // namespace dn
