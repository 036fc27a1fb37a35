#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "dn/story.hpp"
#include "dn/table.hpp"

namespace dn::pipeline {

/// name -> substitution text for the {name} placeholders of a template body.
using Bindings = std::map<std::string, std::string>;

struct PromptTemplate {
    std::string name;  // "<stage>.<role>", e.g. "outline.critique"
    std::string body;

    /// Placeholder names appearing in the body, in order of first use.
    std::vector<std::string> placeholders() const;

    /// Checks the name is one of the nine canonical templates and every
    /// placeholder belongs to the stage's allowed set. Throws ValidationError.
    void validate() const;
};

const std::set<std::string>& allowed_placeholders(StageId stage);
const std::vector<std::string>& template_names();

/// The nine prompt templates of one pipeline configuration.
class TemplateSet {
public:
    /// Compiled-in templates, identical to the files shipped under prompts/.
    static TemplateSet builtin();
    /// Builtin set with any `<name>.txt` found in `dir` overriding its entry.
    static TemplateSet load_dir(const std::filesystem::path& dir);

    const PromptTemplate& get(const std::string& name) const;

private:
    std::map<std::string, PromptTemplate> templates_;
};

/// Exact textual substitution of {placeholder} occurrences. A placeholder
/// without a binding raises ValidationError naming it.
std::string render_prompt(const PromptTemplate& tmpl, const Bindings& bindings);

/// Deterministic text block per table: a title line, then an aligned header
/// row and data rows joined with " | ". Tables separated by blank lines.
std::string render_tables_text(const DataTableSet& tables);

}  // namespace dn::pipeline
