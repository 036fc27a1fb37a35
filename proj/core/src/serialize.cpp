#include "dn/serialize.hpp"

#include <json.hpp>

#include "dn/error.hpp"

namespace dn {

using ordered_json = nlohmann::ordered_json;

namespace {

void byte_to_line_col(const std::string& text, size_t byte, int& line, int& col) {
    line = 1;
    col = 1;
    for (size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
}

ordered_json parse_document(const std::string& text) {
    try {
        return ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        int line = 0, col = 0;
        byte_to_line_col(text, e.byte > 0 ? e.byte - 1 : 0, line, col);
        throw ParseError("parse error at line " + std::to_string(line) + ", column " +
                             std::to_string(col) + ": " + e.what(),
                         line, col);
    }
}

const ordered_json& require(const ordered_json& j, const char* key, const std::string& where) {
    auto it = j.find(key);
    if (it == j.end())
        throw ParseError(where + " is missing required field '" + key + "'");
    return *it;
}

void expect_schema(const ordered_json& j, const char* kind, const std::string& where) {
    const auto& schema = require(j, "schema", where);
    if (!schema.is_string() || schema.get<std::string>() != kSchemaVersion)
        throw ParseError(where + ": unsupported schema version (expected \"" +
                         std::string(kSchemaVersion) + "\")");
    const auto& k = require(j, "kind", where);
    if (!k.is_string() || k.get<std::string>() != kind)
        throw ParseError(where + ": expected kind \"" + kind + "\"");
}

ordered_json cell_to_json(const Cell& cell) {
    if (cell_is_number(cell)) return cell_number(cell);
    return std::get<std::string>(cell);
}

Cell cell_from_json(const ordered_json& j, const std::string& where) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) return j.get<std::string>();
    throw ParseError(where + ": cell must be a string or a number");
}

ordered_json table_to_json(const DataTable& table) {
    ordered_json jt;
    jt["id"] = table.id;
    jt["title"] = table.title;
    jt["columns"] = ordered_json::array();
    for (const auto& col : table.columns) {
        ordered_json jc;
        jc["name"] = col.name;
        jc["kind"] = to_string(col.kind);
        jc["unit"] = col.unit ? ordered_json(*col.unit) : ordered_json(nullptr);
        jt["columns"].push_back(std::move(jc));
    }
    jt["rows"] = ordered_json::array();
    for (const auto& row : table.rows) {
        ordered_json jr = ordered_json::array();
        for (const auto& cell : row) jr.push_back(cell_to_json(cell));
        jt["rows"].push_back(std::move(jr));
    }
    jt["source_note"] =
        table.source_note ? ordered_json(*table.source_note) : ordered_json(nullptr);
    return jt;
}

DataTable table_from_json(const ordered_json& jt, const std::string& where) {
    DataTable table;
    table.id = require(jt, "id", where).get<std::string>();
    table.title = require(jt, "title", where).get<std::string>();
    for (const auto& jc : require(jt, "columns", where)) {
        Column col;
        col.name = require(jc, "name", where + ".columns").get<std::string>();
        const std::string kind = require(jc, "kind", where + ".columns").get<std::string>();
        if (kind == "number")
            col.kind = ColumnKind::number;
        else if (kind == "text")
            col.kind = ColumnKind::text;
        else
            throw ParseError(where + ": unknown column kind '" + kind + "'");
        if (jc.contains("unit") && !jc["unit"].is_null())
            col.unit = jc["unit"].get<std::string>();
        table.columns.push_back(std::move(col));
    }
    for (const auto& jr : require(jt, "rows", where)) {
        std::vector<Cell> row;
        for (const auto& jc : jr) row.push_back(cell_from_json(jc, where + ".rows"));
        table.rows.push_back(std::move(row));
    }
    if (jt.contains("source_note") && !jt["source_note"].is_null())
        table.source_note = jt["source_note"].get<std::string>();
    return table;
}

ordered_json table_set_to_json(const DataTableSet& set) {
    ordered_json arr = ordered_json::array();
    for (const auto& table : set.tables) arr.push_back(table_to_json(table));
    return arr;
}

DataTableSet table_set_from_json(const ordered_json& arr, const std::string& where) {
    if (!arr.is_array()) throw ParseError(where + ": 'tables' must be an array");
    DataTableSet set;
    for (const auto& jt : arr) set.tables.push_back(table_from_json(jt, where + ".tables"));
    return set;
}

ordered_json visspec_to_json(const visspec::VisSpec& spec) {
    ordered_json j;
    j["title"] = spec.title;
    j["chart_type"] = visspec::to_string(spec.chart_type);
    j["table"] = spec.table_ref;
    j["x"] = spec.x;
    j["y"] = spec.y;
    j["series"] = spec.series ? ordered_json(*spec.series) : ordered_json(nullptr);
    j["notes"] = spec.notes ? ordered_json(*spec.notes) : ordered_json(nullptr);
    return j;
}

visspec::VisSpec visspec_from_json(const ordered_json& j, const std::string& where) {
    visspec::VisSpec spec;
    spec.title = require(j, "title", where).get<std::string>();
    spec.chart_type = visspec::normalize_chart_type(
        require(j, "chart_type", where).get<std::string>());
    spec.table_ref = require(j, "table", where).get<std::string>();
    spec.x = require(j, "x", where).get<std::string>();
    for (const auto& y : require(j, "y", where)) spec.y.push_back(y.get<std::string>());
    if (j.contains("series") && !j["series"].is_null())
        spec.series = j["series"].get<std::string>();
    if (j.contains("notes") && !j["notes"].is_null()) spec.notes = j["notes"].get<std::string>();
    return spec;
}

ordered_json critique_to_json(const Critique& critique) {
    ordered_json j;
    j["needs_revision"] = critique.needs_revision;
    j["plan"] = critique.plan;
    j["raw"] = critique.raw;
    return j;
}

Critique critique_from_json(const ordered_json& j, const std::string& where) {
    Critique critique;
    critique.needs_revision = require(j, "needs_revision", where).get<bool>();
    for (const auto& p : require(j, "plan", where))
        critique.plan.push_back(p.get<std::string>());
    critique.raw = require(j, "raw", where).get<std::string>();
    return critique;
}

ordered_json stage_meta_to_json(const StageMeta& meta) {
    ordered_json j;
    j["revised"] = meta.revised;
    j["critique"] = meta.critique ? critique_to_json(*meta.critique) : ordered_json(nullptr);
    return j;
}

StageMeta stage_meta_from_json(const ordered_json& j, const std::string& where) {
    StageMeta meta;
    meta.revised = require(j, "revised", where).get<bool>();
    if (j.contains("critique") && !j["critique"].is_null())
        meta.critique = critique_from_json(j["critique"], where + ".critique");
    return meta;
}

ordered_json report_to_json(const visspec::Report& report) {
    ordered_json arr = ordered_json::array();
    for (const auto& issue : report) {
        ordered_json j;
        j["severity"] = issue.severity == visspec::Severity::error ? "error" : "warning";
        j["code"] = issue.code;
        j["message"] = issue.message;
        j["path"] = issue.path;
        arr.push_back(std::move(j));
    }
    return arr;
}

visspec::Report report_from_json(const ordered_json& arr, const std::string& where) {
    visspec::Report report;
    for (const auto& j : arr) {
        visspec::Issue issue;
        issue.severity = require(j, "severity", where).get<std::string>() == "error"
                             ? visspec::Severity::error
                             : visspec::Severity::warning;
        issue.code = require(j, "code", where).get<std::string>();
        issue.message = require(j, "message", where).get<std::string>();
        issue.path = require(j, "path", where).get<std::string>();
        report.push_back(std::move(issue));
    }
    return report;
}

std::string dump_document(const ordered_json& j) { return j.dump(2) + "\n"; }

}  // namespace

std::string serialize_table_set(const DataTableSet& set) {
    ordered_json j;
    j["schema"] = kSchemaVersion;
    j["kind"] = "table_set";
    j["tables"] = table_set_to_json(set);
    return dump_document(j);
}

DataTableSet deserialize_table_set(const std::string& text) {
    const ordered_json j = parse_document(text);
    expect_schema(j, "table_set", "table_set document");
    return table_set_from_json(require(j, "tables", "table_set document"), "table_set");
}

std::string serialize_story(const DataStory& story) {
    ordered_json j;
    j["schema"] = kSchemaVersion;
    j["kind"] = "story";
    j["request_id"] = story.request_id;
    j["tables"] = story.tables ? table_set_to_json(*story.tables) : ordered_json(nullptr);
    j["segments"] = ordered_json::array();
    for (const auto& seg : story.segments) {
        ordered_json js;
        js["heading"] = seg.heading ? ordered_json(*seg.heading) : ordered_json(nullptr);
        js["paragraphs"] = seg.paragraphs;
        js["visspec"] = seg.visspec ? visspec_to_json(*seg.visspec) : ordered_json(nullptr);
        if (seg.visspec_failure) {
            ordered_json jf;
            jf["code"] = seg.visspec_failure->code;
            jf["message"] = seg.visspec_failure->message;
            jf["raw"] = seg.visspec_failure->raw;
            js["visspec_failure"] = std::move(jf);
        } else {
            js["visspec_failure"] = nullptr;
        }
        j["segments"].push_back(std::move(js));
    }
    j["stage_meta"] = stage_meta_to_json(story.stage_meta);
    j["validation"] = report_to_json(story.validation);
    return dump_document(j);
}

DataStory deserialize_story(const std::string& text) {
    const ordered_json j = parse_document(text);
    expect_schema(j, "story", "story document");
    DataStory story;
    story.request_id = require(j, "request_id", "story document").get<std::string>();
    if (j.contains("tables") && !j["tables"].is_null())
        story.tables = table_set_from_json(j["tables"], "story");
    const auto& segments = require(j, "segments", "story document");
    if (!segments.is_array()) throw ParseError("story document: 'segments' must be an array");
    for (size_t i = 0; i < segments.size(); ++i) {
        const auto& js = segments[i];
        const std::string where = "story segments[" + std::to_string(i) + "]";
        StorySegment seg;
        if (js.contains("heading") && !js["heading"].is_null())
            seg.heading = js["heading"].get<std::string>();
        for (const auto& p : require(js, "paragraphs", where))
            seg.paragraphs.push_back(p.get<std::string>());
        if (js.contains("visspec") && !js["visspec"].is_null()) {
            try {
                seg.visspec = visspec_from_json(js["visspec"], where);
            } catch (const visspec::SpecError& e) {
                throw ParseError(where + ": " + e.what());
            }
        }
        if (js.contains("visspec_failure") && !js["visspec_failure"].is_null()) {
            VisSpecFailure failure;
            failure.code = require(js["visspec_failure"], "code", where).get<std::string>();
            failure.message =
                require(js["visspec_failure"], "message", where).get<std::string>();
            failure.raw = require(js["visspec_failure"], "raw", where).get<std::string>();
            seg.visspec_failure = std::move(failure);
        }
        story.segments.push_back(std::move(seg));
    }
    story.stage_meta = stage_meta_from_json(require(j, "stage_meta", "story document"),
                                            "story stage_meta");
    if (j.contains("validation"))
        story.validation = report_from_json(j["validation"], "story validation");
    return story;
}

std::string serialize_trace(const PipelineTrace& trace) {
    ordered_json j;
    j["schema"] = kSchemaVersion;
    j["kind"] = "trace";
    j["config"] = trace.config;
    j["stages"] = ordered_json::array();
    for (const auto& stage : trace.stages) {
        ordered_json js;
        js["stage"] = to_string(stage.stage);
        js["warnings"] = stage.warnings;
        js["calls"] = ordered_json::array();
        for (const auto& call : stage.calls) {
            ordered_json jc;
            jc["role"] = to_string(call.role);
            jc["tag"] = call.tag;
            jc["prompt"] = call.prompt;
            jc["response"] = call.response;
            jc["latency_ms"] = call.latency_ms;
            js["calls"].push_back(std::move(jc));
        }
        j["stages"].push_back(std::move(js));
    }
    return dump_document(j);
}

PipelineTrace deserialize_trace(const std::string& text) {
    const ordered_json j = parse_document(text);
    expect_schema(j, "trace", "trace document");
    PipelineTrace trace;
    trace.config = require(j, "config", "trace document").get<std::string>();
    for (const auto& js : require(j, "stages", "trace document")) {
        TraceStage stage;
        const std::string name = require(js, "stage", "trace stage").get<std::string>();
        if (name == "reflection")
            stage.stage = StageId::reflection;
        else if (name == "outline")
            stage.stage = StageId::outline;
        else if (name == "narration")
            stage.stage = StageId::narration;
        else
            throw ParseError("trace document: unknown stage '" + name + "'");
        for (const auto& w : require(js, "warnings", "trace stage"))
            stage.warnings.push_back(w.get<std::string>());
        for (const auto& jc : require(js, "calls", "trace stage")) {
            TraceCall call;
            const std::string role = require(jc, "role", "trace call").get<std::string>();
            if (role == "generate")
                call.role = CallRole::generate;
            else if (role == "critique")
                call.role = CallRole::critique;
            else if (role == "revise")
                call.role = CallRole::revise;
            else
                throw ParseError("trace document: unknown call role '" + role + "'");
            call.tag = require(jc, "tag", "trace call").get<std::string>();
            call.prompt = require(jc, "prompt", "trace call").get<std::string>();
            call.response = require(jc, "response", "trace call").get<std::string>();
            call.latency_ms = require(jc, "latency_ms", "trace call").get<double>();
            stage.calls.push_back(std::move(call));
        }
        trace.stages.push_back(std::move(stage));
    }
    return trace;
}

}  // namespace dn
