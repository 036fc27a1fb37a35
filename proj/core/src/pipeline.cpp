#include "dn/pipeline.hpp"

#include <algorithm>

#include "dn/strings.hpp"

namespace dn::pipeline {

std::string config_name(const PipelineConfig& config) {
    const int skips = (config.skip_reflection ? 1 : 0) + (config.skip_outline ? 1 : 0) +
                      (config.skip_verification ? 1 : 0);
    if (skips == 0) return "full";
    if (skips == 3) return "direct";
    if (skips == 1) {
        if (config.skip_reflection) return "skip_reflection";
        if (config.skip_outline) return "skip_outline";
        return "skip_verification";
    }
    return "custom";
}

namespace {

// Recognizes "- x", "* x", "• x" (UTF-8 bullet) and "1. x" / "1) x".
// Returns the content and the marker's indent, or nullopt for non-bullets.
struct BulletLine {
    std::string text;
    int indent = 0;
};

std::optional<BulletLine> match_bullet(const std::string& line) {
    size_t i = 0;
    int indent = 0;
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) {
        indent += line[i] == '\t' ? 4 : 1;
        ++i;
    }
    size_t content = std::string::npos;
    if (i < line.size() && (line[i] == '-' || line[i] == '*')) {
        content = i + 1;
    } else if (line.compare(i, 3, "\xE2\x80\xA2") == 0) {
        content = i + 3;
    } else if (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) {
        size_t j = i;
        while (j < line.size() && std::isdigit(static_cast<unsigned char>(line[j]))) ++j;
        if (j < line.size() && (line[j] == '.' || line[j] == ')')) content = j + 1;
    }
    if (content == std::string::npos) return std::nullopt;
    if (content < line.size() && line[content] != ' ' && line[content] != '\t')
        return std::nullopt;
    const std::string text = trim(line.substr(content));
    if (text.empty()) return std::nullopt;
    return BulletLine{text, indent};
}

// First line carrying a "REVISION: YES|NO" verdict, leniently matched.
std::optional<bool> find_verdict(const std::vector<std::string>& lines, size_t* index) {
    for (size_t i = 0; i < lines.size(); ++i) {
        const std::string lower = to_lower(lines[i]);
        const size_t pos = lower.find("revision");
        if (pos == std::string::npos) continue;
        size_t j = pos + 8;
        while (j < lower.size() && (lower[j] == ' ' || lower[j] == '*')) ++j;
        if (j >= lower.size() || lower[j] != ':') continue;
        ++j;
        while (j < lower.size() && (lower[j] == ' ' || lower[j] == '*')) ++j;
        if (lower.compare(j, 3, "yes") == 0) {
            if (index) *index = i;
            return true;
        }
        if (lower.compare(j, 2, "no") == 0) {
            if (index) *index = i;
            return false;
        }
    }
    return std::nullopt;
}

}  // namespace

std::vector<std::string> parse_bullets(const std::string& text) {
    std::vector<std::string> bullets;
    for (const auto& line : split_lines(text))
        if (auto bullet = match_bullet(line)) bullets.push_back(bullet->text);
    return bullets;
}

Critique parse_critique(const std::string& text) {
    Critique critique;
    critique.raw = text;
    const std::vector<std::string> lines = split_lines(text);
    size_t verdict_line = 0;
    const std::optional<bool> verdict = find_verdict(lines, &verdict_line);
    if (verdict) {
        critique.needs_revision = *verdict;
        for (size_t i = verdict_line + 1; i < lines.size(); ++i)
            if (auto bullet = match_bullet(lines[i])) critique.plan.push_back(bullet->text);
        if (critique.needs_revision && critique.plan.empty()) {
            // keep the Critique invariant: YES implies a non-empty plan
            for (size_t i = verdict_line + 1; i < lines.size(); ++i) {
                const std::string t = trim(lines[i]);
                if (!t.empty()) critique.plan.push_back(t);
            }
            if (critique.plan.empty()) critique.plan.push_back("(unspecified revision)");
        }
    } else {
        critique.plan = parse_bullets(text);
        critique.needs_revision = !critique.plan.empty();
    }
    return critique;
}

std::vector<std::string> parse_reflection_bullets(const std::string& text) {
    return parse_bullets(text);
}

namespace {

std::string strip_heading_markup(const std::string& line) {
    std::string s = trim(line);
    size_t i = 0;
    while (i < s.size() && s[i] == '#') ++i;
    s = trim(s.substr(i));
    while (starts_with(s, "**")) s = trim(s.substr(2));
    while (s.size() >= 2 && s.compare(s.size() - 2, 2, "**") == 0)
        s = trim(s.substr(0, s.size() - 2));
    return s;
}

std::optional<SectionRole> match_section_header(const std::string& line) {
    const std::string s = strip_heading_markup(line);
    if (s.empty()) return std::nullopt;
    size_t word_end = 0;
    while (word_end < s.size() && std::isalpha(static_cast<unsigned char>(s[word_end])))
        ++word_end;
    const std::string word = to_lower(s.substr(0, word_end));
    if (word != "beginning" && word != "middle" && word != "end") return std::nullopt;
    // the keyword must stand alone or be followed by punctuation, not prose
    if (word_end < s.size() && s[word_end] != ':' && s[word_end] != ' ' && s[word_end] != '-')
        return std::nullopt;
    return section_role_from(word);
}

// "(vis: bar)" / "(visualization: line chart)" anywhere in a point.
std::optional<std::string> extract_vis_hint(std::string& text) {
    const std::string lower = to_lower(text);
    for (const char* marker : {"(vis:", "(visualization:", "(chart:"}) {
        const size_t pos = lower.find(marker);
        if (pos == std::string::npos) continue;
        const size_t close = text.find(')', pos);
        if (close == std::string::npos) continue;
        const size_t colon = text.find(':', pos);
        std::string hint = trim(text.substr(colon + 1, close - colon - 1));
        text = trim(text.substr(0, pos) + text.substr(close + 1));
        if (hint.empty()) return std::nullopt;
        return hint;
    }
    return std::nullopt;
}

}  // namespace

Outline parse_outline_text(const std::string& text) {
    Outline outline;
    OutlineSection* current = nullptr;
    for (const auto& line : split_lines(text)) {
        const auto bullet = match_bullet(line);
        if (!bullet) {
            if (auto role = match_section_header(line)) {
                OutlineSection section;
                section.role = *role;
                section.heading = strip_heading_markup(line);
                outline.sections.push_back(std::move(section));
                current = &outline.sections.back();
            }
            continue;
        }
        if (!current) continue;  // bullets before any section header are dropped
        if (bullet->indent >= 2 && !current->points.empty()) {
            current->points.back().subpoints.push_back(bullet->text);
            continue;
        }
        OutlinePoint point;
        point.text = bullet->text;
        point.vis_hint = extract_vis_hint(point.text);
        current->points.push_back(std::move(point));
    }
    return outline;
}

namespace {

const char* spec_error_code(visspec::SpecError::Code code) {
    using Code = visspec::SpecError::Code;
    switch (code) {
        case Code::ambiguous_chart_type: return "ambiguous_chart_type";
        case Code::missing_field: return "missing_field";
        case Code::bad_arity: return "bad_arity";
        case Code::bad_value: return "bad_value";
        case Code::duplicate_column: return "duplicate_column";
    }
    return "bad_value";
}

struct SegmentBuilder {
    DataStory& story;
    StorySegment segment;
    std::vector<std::string> paragraph_lines;
    bool dirty = false;

    explicit SegmentBuilder(DataStory& s) : story(s) {}

    void flush_paragraph() {
        if (paragraph_lines.empty()) return;
        segment.paragraphs.push_back(join(paragraph_lines, "\n"));
        paragraph_lines.clear();
    }

    void flush_segment() {
        flush_paragraph();
        if (segment.heading || !segment.paragraphs.empty() || segment.visspec ||
            segment.visspec_failure)
            story.segments.push_back(std::move(segment));
        segment = {};
        dirty = false;
    }

    void add_line(const std::string& line) {
        const std::string t = trim(line);
        if (t.empty()) {
            flush_paragraph();
        } else {
            paragraph_lines.push_back(t);
            dirty = true;
        }
    }

    void add_visspec(const std::string& block) {
        flush_paragraph();
        if (segment.visspec || segment.visspec_failure) {
            // one visualization per segment; extra blocks open a continuation
            StorySegment done = std::move(segment);
            story.segments.push_back(std::move(done));
            segment = {};
        }
        try {
            segment.visspec = visspec::parse_visspec(block);
        } catch (const visspec::SpecError& e) {
            segment.visspec_failure =
                VisSpecFailure{spec_error_code(e.code()), e.what(), block};
        }
        dirty = true;
    }
};

}  // namespace

DataStory parse_narration_text(const std::string& text) {
    DataStory story;
    SegmentBuilder builder(story);
    const std::vector<std::string> lines = split_lines(text);
    for (size_t i = 0; i < lines.size(); ++i) {
        const std::string trimmed = trim(lines[i]);
        if (starts_with(trimmed, "##")) {
            builder.flush_segment();
            builder.segment.heading = strip_heading_markup(trimmed);
            builder.dirty = true;
            continue;
        }
        if (starts_with(trimmed, "```")) {
            const bool is_visspec = to_lower(trim(trimmed.substr(3))) == "visspec";
            std::vector<std::string> block;
            ++i;
            while (i < lines.size() && trim(lines[i]) != "```") {
                block.push_back(lines[i]);
                ++i;
            }
            const std::string content = join(block, "\n");
            if (is_visspec)
                builder.add_visspec(content);
            else
                for (const auto& l : block) builder.add_line(l);
            continue;
        }
        builder.add_line(lines[i]);
    }
    builder.flush_segment();
    return story;
}

namespace {

const char* artifact_binding(StageId stage) {
    switch (stage) {
        case StageId::reflection: return "reflection";
        case StageId::outline: return "outline";
        case StageId::narration: return "narration";
    }
    return "narration";
}

std::string render_plan(const Critique& critique) {
    if (critique.plan.empty()) return critique.raw;
    std::string out;
    for (const auto& item : critique.plan) out += "- " + item + "\n";
    return out;
}

}  // namespace

StageOutcome run_stage(StageId stage, const Bindings& bindings, const PipelineConfig& config,
                       gateway::Gateway& gw, const TemplateSet& templates,
                       PipelineTrace& trace) {
    const std::string stage_name = to_string(stage);
    TraceStage ts;
    ts.stage = stage;

    auto call = [&](CallRole role, const Bindings& b, double temperature) -> std::string {
        const PromptTemplate& tmpl =
            templates.get(stage_name + "." + to_string(role));
        const std::string prompt = render_prompt(tmpl, b);
        gateway::ChatRequest request;
        request.model = config.model;
        request.messages = {{gateway::MessageRole::user, prompt}};
        request.temperature = temperature;
        request.max_tokens = config.max_tokens;
        request.tag = stage_name + "." + to_string(role);
        gateway::CallMeta meta;
        const gateway::ChatResponse response = gw.complete(request, &meta);
        ts.calls.push_back({role, request.tag, prompt, response.content, meta.latency_ms});
        return response.content;
    };

    try {
        StageOutcome outcome;
        outcome.artifact = call(CallRole::generate, bindings, config.generate_temperature);
        if (config.skip_verification) {
            trace.stages.push_back(std::move(ts));
            return outcome;
        }

        Bindings with_artifact = bindings;
        with_artifact[artifact_binding(stage)] = outcome.artifact;
        std::string critique_text =
            call(CallRole::critique, with_artifact, config.critique_temperature);
        Critique critique = parse_critique(critique_text);
        {
            size_t ignored = 0;
            if (!find_verdict(split_lines(critique_text), &ignored))
                ts.warnings.push_back(
                    "no explicit REVISION verdict in critique; verdict inferred leniently");
        }

        int revisions = 0;
        while (critique.needs_revision && revisions < config.max_revisions_per_stage) {
            Bindings revise_bindings = bindings;
            revise_bindings[artifact_binding(stage)] = outcome.artifact;
            revise_bindings["revision_plan"] = render_plan(critique);
            outcome.artifact =
                call(CallRole::revise, revise_bindings, config.generate_temperature);
            outcome.revised = true;
            ++revisions;
            if (revisions >= config.max_revisions_per_stage) break;
            with_artifact[artifact_binding(stage)] = outcome.artifact;
            critique_text =
                call(CallRole::critique, with_artifact, config.critique_temperature);
            critique = parse_critique(critique_text);
        }
        outcome.critique = std::move(critique);
        trace.stages.push_back(std::move(ts));
        return outcome;
    } catch (const gateway::GatewayError& e) {
        trace.stages.push_back(std::move(ts));
        throw PipelineError(stage, e.what(), trace, true);
    } catch (const PipelineError&) {
        throw;
    } catch (const dn::Error& e) {
        trace.stages.push_back(std::move(ts));
        throw PipelineError(stage, e.what(), trace, false);
    }
}

namespace {

Bindings base_bindings(const StoryRequest& request) {
    return {
        {"tables", render_tables_text(request.tables)},
        {"intent", request.intent},
        {"guidelines", request.guidelines.empty() ? "(none)" : request.guidelines},
    };
}

DataStory finalize_story(DataStory story, const StoryRequest& request,
                         const StageOutcome& outcome) {
    story.stage_meta.revised = outcome.revised;
    story.stage_meta.critique = outcome.critique;
    story.request_id = request_id(request);
    story.tables = request.tables;

    story.validation = check_finalized_story(story, request.tables);
    for (size_t i = 0; i < story.segments.size(); ++i) {
        const auto& seg = story.segments[i];
        const std::string path = "segments[" + std::to_string(i) + "].visspec";
        if (seg.visspec && request.tables.find_table(seg.visspec->table_ref)) {
            for (auto issue : visspec::validate_visspec(*seg.visspec, request.tables)) {
                issue.path = path + "." + issue.path;
                story.validation.push_back(std::move(issue));
            }
        }
        if (seg.visspec_failure)
            story.validation.push_back({visspec::Severity::warning, seg.visspec_failure->code,
                                        seg.visspec_failure->message, path});
    }
    return story;
}

}  // namespace

Reflection run_reflection(const StoryRequest& request, const PipelineConfig& config,
                          gateway::Gateway& gw, const TemplateSet& templates) {
    validate_request(request);
    PipelineTrace trace;
    trace.config = config_name(config);
    Bindings bindings = base_bindings(request);
    bindings.erase("intent");
    const StageOutcome outcome =
        run_stage(StageId::reflection, bindings, config, gw, templates, trace);
    Reflection reflection;
    reflection.bullets = parse_reflection_bullets(outcome.artifact);
    if (reflection.bullets.empty())
        throw PipelineError(StageId::reflection, "empty reflection", trace);
    reflection.stage_meta = {outcome.revised, outcome.critique};
    return reflection;
}

Outline run_outline(const Reflection& reflection, const StoryRequest& request,
                    const PipelineConfig& config, gateway::Gateway& gw,
                    const TemplateSet& templates) {
    validate_request(request);
    PipelineTrace trace;
    trace.config = config_name(config);
    Bindings bindings = base_bindings(request);
    std::string reflection_text;
    for (const auto& bullet : reflection.bullets) reflection_text += "- " + bullet + "\n";
    bindings["reflection"] =
        config.skip_reflection ? std::string(kReflectionSkipped) : reflection_text;
    const StageOutcome outcome =
        run_stage(StageId::outline, bindings, config, gw, templates, trace);
    Outline outline = parse_outline_text(outcome.artifact);
    outline.stage_meta = {outcome.revised, outcome.critique};
    if (!outline_structure_complete(outline))
        throw PipelineError(StageId::outline, "incomplete narrative structure", trace);
    return outline;
}

DataStory run_narration(const Outline& outline, const StoryRequest& request,
                        const PipelineConfig& config, gateway::Gateway& gw,
                        const TemplateSet& templates) {
    validate_request(request);
    PipelineTrace trace;
    trace.config = config_name(config);
    Bindings bindings = base_bindings(request);
    std::string outline_text;
    for (const auto& section : outline.sections) {
        outline_text += "## " + section.heading + "\n";
        for (const auto& point : section.points) {
            outline_text += "- " + point.text;
            if (point.vis_hint) outline_text += " (vis: " + *point.vis_hint + ")";
            outline_text += "\n";
            for (const auto& sub : point.subpoints) outline_text += "  - " + sub + "\n";
        }
    }
    bindings["reflection"] = kReflectionSkipped;
    bindings["outline"] =
        config.skip_outline ? std::string(kOutlineSkipped) : outline_text;
    const StageOutcome outcome =
        run_stage(StageId::narration, bindings, config, gw, templates, trace);
    DataStory story = parse_narration_text(outcome.artifact);
    if (story.segments.empty())
        throw PipelineError(StageId::narration, "empty narration", trace);
    return finalize_story(std::move(story), request, outcome);
}

StoryResult generate_story(const StoryRequest& request, const PipelineConfig& config,
                           gateway::Gateway& gw, const TemplateSet& templates) {
    validate_request(request);
    PipelineTrace trace;
    trace.config = config_name(config);
    const Bindings base = base_bindings(request);

    std::string reflection_text = kReflectionSkipped;
    if (!config.skip_reflection) {
        Bindings bindings = base;
        bindings.erase("intent");
        const StageOutcome outcome =
            run_stage(StageId::reflection, bindings, config, gw, templates, trace);
        if (parse_reflection_bullets(outcome.artifact).empty())
            throw PipelineError(StageId::reflection, "empty reflection", trace);
        reflection_text = outcome.artifact;
    }

    std::string outline_text = kOutlineSkipped;
    if (!config.skip_outline) {
        Bindings bindings = base;
        bindings["reflection"] = reflection_text;
        const StageOutcome outcome =
            run_stage(StageId::outline, bindings, config, gw, templates, trace);
        Outline outline = parse_outline_text(outcome.artifact);
        if (!outline_structure_complete(outline))
            throw PipelineError(StageId::outline, "incomplete narrative structure", trace);
        outline_text = outcome.artifact;
    }

    Bindings bindings = base;
    bindings["reflection"] = reflection_text;
    bindings["outline"] = outline_text;
    const StageOutcome outcome =
        run_stage(StageId::narration, bindings, config, gw, templates, trace);
    DataStory story = parse_narration_text(outcome.artifact);
    if (story.segments.empty())
        throw PipelineError(StageId::narration, "empty narration", trace);
    return {finalize_story(std::move(story), request, outcome), std::move(trace)};
}

}  // namespace dn::pipeline
