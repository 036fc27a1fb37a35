#include "dn/prompts.hpp"

#include <algorithm>

#include "dn/error.hpp"
#include "dn/io.hpp"
#include "dn/strings.hpp"

namespace dn::pipeline {

namespace {

bool placeholder_char(char c) { return (c >= 'a' && c <= 'z') || c == '_'; }

// Scans `body` for {name} placeholders; other brace uses stay literal.
std::vector<std::string> scan_placeholders(const std::string& body) {
    std::vector<std::string> names;
    for (size_t i = 0; i < body.size(); ++i) {
        if (body[i] != '{') continue;
        size_t j = i + 1;
        while (j < body.size() && placeholder_char(body[j])) ++j;
        if (j > i + 1 && j < body.size() && body[j] == '}') {
            std::string name = body.substr(i + 1, j - i - 1);
            if (std::find(names.begin(), names.end(), name) == names.end())
                names.push_back(std::move(name));
            i = j;
        }
    }
    return names;
}

StageId stage_of(const std::string& template_name) {
    if (starts_with(template_name, "reflection.")) return StageId::reflection;
    if (starts_with(template_name, "outline.")) return StageId::outline;
    return StageId::narration;
}

}  // namespace

std::vector<std::string> PromptTemplate::placeholders() const { return scan_placeholders(body); }

void PromptTemplate::validate() const {
    const auto& names = template_names();
    if (std::find(names.begin(), names.end(), name) == names.end())
        throw ValidationError("unknown template name '" + name + "'");
    const auto& allowed = allowed_placeholders(stage_of(name));
    for (const auto& p : placeholders())
        if (!allowed.count(p))
            throw ValidationError("template '" + name + "' uses placeholder '" + p +
                                  "' outside its stage's allowed set");
}

const std::set<std::string>& allowed_placeholders(StageId stage) {
    static const std::set<std::string> kReflection = {"tables", "guidelines", "reflection",
                                                      "revision_plan"};
    static const std::set<std::string> kOutline = {"tables",  "guidelines",   "intent",
                                                   "reflection", "outline", "revision_plan"};
    static const std::set<std::string> kNarration = {"tables",  "guidelines", "intent",
                                                     "reflection", "outline",    "narration",
                                                     "revision_plan"};
    switch (stage) {
        case StageId::reflection: return kReflection;
        case StageId::outline: return kOutline;
        case StageId::narration: return kNarration;
    }
    return kNarration;
}

const std::vector<std::string>& template_names() {
    static const std::vector<std::string> kNames = {
        "reflection.generate", "reflection.critique", "reflection.revise",
        "outline.generate",    "outline.critique",    "outline.revise",
        "narration.generate",  "narration.critique",  "narration.revise",
    };
    return kNames;
}

namespace {

const char* builtin_body(const std::string& name) {
    if (name == "reflection.generate")
        return R"tmpl(You are a data analyst preparing a data story. Study the data tables below
and write a reflection: the most impactful insights as bullet points, one
per line starting with "- ". Focus on critical trends, notable patterns,
and outliers. Weigh the relevance and significance of the data points and
explain how different attributes relate to each other.

Data tables:
{tables}

Additional guidelines:
{guidelines}

Reply with bullet points only.
)tmpl";
    if (name == "reflection.critique")
        return R"tmpl(You are a meticulous reviewer. Cross-match the reflection below against the
data tables and identify inconsistencies or factual inaccuracies in the
data description.

Data tables:
{tables}

Reflection:
{reflection}

First reply with a single verdict line: "REVISION: YES" or "REVISION: NO".
If YES, follow with a revision plan: the issues to fix, one bullet per line.
)tmpl";
    if (name == "reflection.revise")
        return R"tmpl(Revise the reflection below according to the revision plan. Keep the
bullet-point format and stay grounded in the data tables.

Data tables:
{tables}

Current reflection:
{reflection}

Revision plan:
{revision_plan}

Reply with the full revised reflection as bullet points.
)tmpl";
    if (name == "outline.generate")
        return R"tmpl(You are planning a data story. Using the reflection and the data tables,
construct an outline with a linear narrative structure: a beginning, a
middle, and an end. Break each major point into smaller sub-points that
highlight key figures, patterns, notable exceptions, and comparisons over
time. Where a chart would support the narrative, add a visualization hint
in the form "(vis: chart-type)". Keep the story intent consistently
emphasized throughout the outline.

Story intent:
{intent}

Reflection:
{reflection}

Data tables:
{tables}

Use this format:
## Beginning
- major point (vis: bar)
  - sub-point
## Middle
- major point
## End
- major point
)tmpl";
    if (name == "outline.critique")
        return R"tmpl(You are a meticulous reviewer. Evaluate the outline below on two aspects:
(a) whether its insights, trends, and outliers are consistent with the data
presented in the tables, and (b) whether it is coherent with the story
intent.

Story intent:
{intent}

Data tables:
{tables}

Outline:
{outline}

First reply with a single verdict line: "REVISION: YES" or "REVISION: NO".
If YES, follow with a revision plan: the issues to fix, one bullet per line.
)tmpl";
    if (name == "outline.revise")
        return R"tmpl(Revise the outline below according to the revision plan. Keep the
beginning/middle/end structure and the "## " section format, and keep the
story intent emphasized.

Story intent:
{intent}

Data tables:
{tables}

Current outline:
{outline}

Revision plan:
{revision_plan}

Reply with the full revised outline.
)tmpl";
    if (name == "narration.generate")
        return R"tmpl(Write the data story following the outline. Start each section with a line
beginning "## ", write one or more paragraphs per section, and emphasize the
key statistics essential to the theme, balancing technical precision with
accessibility. Where the outline calls for a visualization, insert a fenced
specification block:

```visspec
title: chart title
chart_type: bar | stacked_bar | grouped_bar | line | pie | scatter | bubble | area
table: table id
x: column name
y: column name (comma-separated list for multiple series)
series: optional grouping column
```

Story intent:
{intent}

Outline:
{outline}

Data tables:
{tables}

Additional guidelines:
{guidelines}
)tmpl";
    if (name == "narration.critique")
        return R"tmpl(You are a meticulous reviewer. Assess the narration below: confirm it aligns
with the outline, that the insights, trends, and patterns it discusses are
substantiated by the data tables, and that the visualization specifications
are factually correct.

Story intent:
{intent}

Outline:
{outline}

Data tables:
{tables}

Narration:
{narration}

First reply with a single verdict line: "REVISION: YES" or "REVISION: NO".
If YES, follow with a revision plan: the issues to fix, one bullet per line.
)tmpl";
    if (name == "narration.revise")
        return R"tmpl(Revise the narration below according to the revision plan. Keep the "## "
section format and the fenced visspec blocks.

Story intent:
{intent}

Data tables:
{tables}

Current narration:
{narration}

Revision plan:
{revision_plan}

Reply with the full revised narration.
)tmpl";
    return "";
}

}  // namespace

TemplateSet TemplateSet::builtin() {
    TemplateSet set;
    for (const auto& name : template_names()) {
        PromptTemplate tmpl{name, builtin_body(name)};
        tmpl.validate();
        set.templates_[name] = std::move(tmpl);
    }
    return set;
}

TemplateSet TemplateSet::load_dir(const std::filesystem::path& dir) {
    TemplateSet set = builtin();
    for (const auto& name : template_names()) {
        const std::filesystem::path file = dir / (name + ".txt");
        if (std::filesystem::exists(file)) {
            PromptTemplate tmpl{name, io::read_file(file)};
            tmpl.validate();
            set.templates_[name] = std::move(tmpl);
        }
    }
    return set;
}

const PromptTemplate& TemplateSet::get(const std::string& name) const {
    auto it = templates_.find(name);
    if (it == templates_.end()) throw ValidationError("no template named '" + name + "'");
    return it->second;
}

std::string render_prompt(const PromptTemplate& tmpl, const Bindings& bindings) {
    std::string out;
    const std::string& body = tmpl.body;
    out.reserve(body.size());
    for (size_t i = 0; i < body.size(); ++i) {
        if (body[i] == '{') {
            size_t j = i + 1;
            while (j < body.size() && placeholder_char(body[j])) ++j;
            if (j > i + 1 && j < body.size() && body[j] == '}') {
                const std::string name = body.substr(i + 1, j - i - 1);
                auto it = bindings.find(name);
                if (it == bindings.end())
                    throw ValidationError("unbound placeholder " + name);
                out += it->second;
                i = j;
                continue;
            }
        }
        out.push_back(body[i]);
    }
    return out;
}

std::string render_tables_text(const DataTableSet& tables) {
    std::string out;
    for (size_t t = 0; t < tables.tables.size(); ++t) {
        const DataTable& table = tables.tables[t];
        if (t) out += "\n";
        out += "Table " + table.id + ": " + table.title + "\n";

        std::vector<size_t> widths(table.columns.size(), 0);
        std::vector<std::vector<std::string>> cells;
        cells.emplace_back();
        for (size_t c = 0; c < table.columns.size(); ++c) {
            std::string header = table.columns[c].name;
            if (table.columns[c].unit) header += " (" + *table.columns[c].unit + ")";
            widths[c] = header.size();
            cells.back().push_back(std::move(header));
        }
        for (const auto& row : table.rows) {
            cells.emplace_back();
            for (size_t c = 0; c < row.size(); ++c) {
                std::string text = cell_text(row[c]);
                if (c < widths.size()) widths[c] = std::max(widths[c], text.size());
                cells.back().push_back(std::move(text));
            }
        }
        for (const auto& line : cells) {
            std::string rendered;
            for (size_t c = 0; c < line.size(); ++c) {
                std::string padded = line[c];
                if (c < widths.size() && c + 1 < line.size())
                    padded.resize(widths[c], ' ');
                if (c) rendered += " | ";
                rendered += padded;
            }
            out += rendered + "\n";
        }
        if (!table.source_note) continue;
        out += "Note: " + *table.source_note + "\n";
    }
    return out;
}

}  // namespace dn::pipeline
