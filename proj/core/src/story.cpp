#include "dn/story.hpp"

#include "dn/error.hpp"
#include "dn/strings.hpp"

namespace dn {

void validate_request(const StoryRequest& request) {
    if (trim(request.intent).empty())
        throw ValidationError("story request intent must be non-empty");
    TableValidationReport report = validate_table_set(request.tables);
    if (!report.empty()) {
        std::string msg = "invalid table set:";
        for (const auto& v : report) {
            msg += "\n  ";
            if (!v.table_id.empty()) msg += "table '" + v.table_id + "' ";
            if (!v.where.empty()) msg += v.where + ": ";
            msg += v.rule + " (" + v.message + ")";
        }
        throw ValidationError(msg);
    }
}

std::string request_id(const StoryRequest& request) {
    std::string key = request.intent;
    key += '\x1f';
    key += request.guidelines;
    for (const auto& t : request.tables.tables) {
        key += '\x1f';
        key += t.id;
        key += '\x1f';
        key += t.title;
        for (const auto& c : t.columns) {
            key += '\x1e';
            key += c.name;
        }
        for (const auto& row : t.rows)
            for (const auto& cell : row) {
                key += '\x1d';
                key += cell_text(cell);
            }
    }
    return "req-" + fnv1a_hex(key);
}

const char* to_string(SectionRole role) {
    switch (role) {
        case SectionRole::beginning: return "beginning";
        case SectionRole::middle: return "middle";
        case SectionRole::end: return "end";
    }
    return "beginning";
}

std::optional<SectionRole> section_role_from(const std::string& name) {
    const std::string key = to_lower(trim(name));
    if (key == "beginning") return SectionRole::beginning;
    if (key == "middle") return SectionRole::middle;
    if (key == "end") return SectionRole::end;
    return std::nullopt;
}

bool outline_structure_complete(const Outline& outline) {
    bool seen[3] = {false, false, false};
    int last = -1;
    for (const auto& section : outline.sections) {
        int r = static_cast<int>(section.role);
        if (r < last) return false;
        seen[r] = true;
        last = r;
    }
    return seen[0] && seen[1] && seen[2];
}

visspec::Report check_finalized_story(const DataStory& story, const DataTableSet& tables) {
    visspec::Report report;
    size_t vis_count = 0;
    for (size_t i = 0; i < story.segments.size(); ++i) {
        const auto& seg = story.segments[i];
        const std::string path = "segments[" + std::to_string(i) + "]";
        if (seg.paragraphs.empty() && !seg.visspec && !seg.visspec_failure)
            report.push_back({visspec::Severity::error, "empty_segment",
                              "segment has neither paragraphs nor a visualization", path});
        if (seg.visspec) {
            ++vis_count;
            if (!tables.find_table(seg.visspec->table_ref))
                report.push_back({visspec::Severity::error, "unknown_table",
                                  "visspec references unknown table '" +
                                      seg.visspec->table_ref + "'",
                                  path + ".visspec"});
        }
    }
    if (story.segments.empty())
        report.push_back(
            {visspec::Severity::error, "empty_story", "story has no segments", "segments"});
    else if (vis_count == 0)
        report.push_back({visspec::Severity::warning, "no_visualizations",
                          "finalized story contains no parseable visualizations", "segments"});
    return report;
}

const char* to_string(StageId stage) {
    switch (stage) {
        case StageId::reflection: return "reflection";
        case StageId::outline: return "outline";
        case StageId::narration: return "narration";
    }
    return "reflection";
}

const char* to_string(CallRole role) {
    switch (role) {
        case CallRole::generate: return "generate";
        case CallRole::critique: return "critique";
        case CallRole::revise: return "revise";
    }
    return "generate";
}

size_t PipelineTrace::call_count() const {
    size_t n = 0;
    for (const auto& stage : stages) n += stage.calls.size();
    return n;
}

std::vector<std::string> PipelineTrace::tags() const {
    std::vector<std::string> out;
    for (const auto& stage : stages)
        for (const auto& call : stage.calls) out.push_back(call.tag);
    return out;
}

}  // namespace dn
