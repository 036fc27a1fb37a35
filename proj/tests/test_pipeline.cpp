#include <doctest.h>

#include <random>

#include "common/test_util.hpp"
#include "dn/pipeline.hpp"

using namespace dn;
using namespace dn::pipeline;

namespace {

gateway::Gateway replay_gateway(const gateway::Transcript& transcript) {
    return gateway::Gateway(
        std::make_shared<gateway::ReplayBackend>(transcript, /*lenient=*/true));
}

}  // namespace

TEST_CASE("render_prompt substitutes bindings exactly") {
    PromptTemplate tmpl{"outline.generate", "Intent: {intent}"};
    CHECK(render_prompt(tmpl, {{"intent", "EU response"}}) == "Intent: EU response");
}

TEST_CASE("render_prompt with a missing binding names the placeholder") {
    PromptTemplate tmpl{"outline.generate", "Outline: {outline}"};
    try {
        render_prompt(tmpl, {{"intent", "x"}});
        FAIL("expected error");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()) == "unbound placeholder outline");
    }
}

TEST_CASE("non-placeholder braces render literally") {
    PromptTemplate tmpl{"narration.generate", "literal {2010} and {not placeholder} kept"};
    CHECK(render_prompt(tmpl, {}) == "literal {2010} and {not placeholder} kept");
}

TEST_CASE("table rendering: title line plus header plus one line per row") {
    DataTableSet single;
    single.tables.push_back(test::make_tables().tables[0]);
    const std::string text = render_tables_text(single);
    const auto lines = split_lines(text);
    REQUIRE(lines.size() == 5);  // title + header + 3 rows
    CHECK(lines[0] == "Table t0: Presidential approval by year");
    CHECK(lines[1].find("Year") != std::string::npos);
    CHECK(lines[1].find("|") != std::string::npos);

    DataTableSet two_rows;
    DataTable t;
    t.id = "x";
    t.title = "two by two";
    t.columns = {{"A", ColumnKind::text, {}}, {"B", ColumnKind::number, {}}};
    t.rows = {{std::string("p"), 1.0}, {std::string("q"), 2.0}};
    two_rows.tables.push_back(t);
    // exactly 3 data lines: header + 2 rows
    CHECK(split_lines(render_tables_text(two_rows)).size() == 4);
}

TEST_CASE("template placeholders are stage-checked") {
    PromptTemplate bad{"reflection.generate", "uses {outline}"};
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    PromptTemplate good{"outline.generate", "uses {reflection} and {tables} and {intent}"};
    CHECK_NOTHROW(good.validate());
    PromptTemplate unknown{"prologue.generate", "x"};
    CHECK_THROWS_AS(unknown.validate(), ValidationError);
}

TEST_CASE("every builtin template renders with full bindings") {
    const TemplateSet templates = TemplateSet::builtin();
    Bindings bindings = {
        {"tables", "T"},     {"guidelines", "G"},    {"intent", "I"},
        {"reflection", "R"}, {"outline", "O"},       {"narration", "N"},
        {"revision_plan", "P"},
    };
    for (const auto& name : template_names()) {
        const std::string rendered = render_prompt(templates.get(name), bindings);
        CHECK(rendered.find('{') == rendered.find("{\n"));  // no unresolved {placeholder}
    }
}

TEST_CASE("parse_critique: explicit verdicts") {
    const Critique no = parse_critique("REVISION: NO");
    CHECK_FALSE(no.needs_revision);
    CHECK(no.plan.empty());

    const Critique yes = parse_critique("REVISION: YES\n- fix avg 53.8%");
    CHECK(yes.needs_revision);
    REQUIRE(yes.plan.size() == 1);
    CHECK(yes.plan[0] == "fix avg 53.8%");

    const Critique cased = parse_critique("revision:   yes\n* item one\n* item two");
    CHECK(cased.needs_revision);
    CHECK(cased.plan.size() == 2);
}

TEST_CASE("parse_critique: lenient inference without a verdict line") {
    const Critique prose = parse_critique("The outline is fine overall.");
    CHECK_FALSE(prose.needs_revision);
    CHECK(prose.raw == "The outline is fine overall.");

    const Critique bullets = parse_critique("Problems found:\n- the average is wrong");
    CHECK(bullets.needs_revision);
    REQUIRE(bullets.plan.size() == 1);
}

TEST_CASE("parse_critique: YES with no bullets still yields a non-empty plan") {
    const Critique c = parse_critique("REVISION: YES\nplease tighten the middle section");
    CHECK(c.needs_revision);
    REQUIRE_FALSE(c.plan.empty());
    CHECK(c.plan[0] == "please tighten the middle section");

    const Critique bare = parse_critique("REVISION: YES");
    CHECK(bare.needs_revision);
    CHECK_FALSE(bare.plan.empty());
}

TEST_CASE("reflection bullets parse across marker styles") {
    CHECK(parse_reflection_bullets("- A rose\n- B fell") ==
          std::vector<std::string>{"A rose", "B fell"});
    CHECK(parse_reflection_bullets("\xE2\x80\xA2 A rose\n\xE2\x80\xA2 B fell") ==
          std::vector<std::string>{"A rose", "B fell"});
    CHECK(parse_reflection_bullets("* starred") == std::vector<std::string>{"starred"});
    CHECK(parse_reflection_bullets("1. first\n2) second") ==
          std::vector<std::string>{"first", "second"});
    CHECK(parse_reflection_bullets("   \n\t\n").empty());
    CHECK(parse_reflection_bullets("no markers here at all").empty());
}

TEST_CASE("outline parse: three roles in order") {
    const Outline outline = parse_outline_text(
        "## Beginning\n- open\n## Middle\n- develop\n## End\n- close\n");
    REQUIRE(outline.sections.size() == 3);
    CHECK(outline.sections[0].role == SectionRole::beginning);
    CHECK(outline.sections[1].role == SectionRole::middle);
    CHECK(outline.sections[2].role == SectionRole::end);
    CHECK(outline_structure_complete(outline));
}

TEST_CASE("outline parse: bare role names without hashes") {
    const Outline outline =
        parse_outline_text("Beginning\n- a\nMiddle\n- b\nEnd\n- c\n");
    CHECK(outline.sections.size() == 3);
    CHECK(outline_structure_complete(outline));
}

TEST_CASE("outline parse: missing End is incomplete") {
    const Outline outline = parse_outline_text("## Beginning\n- a\n## Middle\n- b\n");
    CHECK_FALSE(outline_structure_complete(outline));
}

TEST_CASE("outline point with vis hint") {
    const Outline outline = parse_outline_text(
        "## Beginning\n\xE2\x80\xA2 Key figure: 59% Rep enthusiasm (vis: bar)\n"
        "  - sub detail\n## Middle\n- m\n## End\n- e\n");
    REQUIRE(outline.sections[0].points.size() == 1);
    const OutlinePoint& point = outline.sections[0].points[0];
    CHECK(point.text == "Key figure: 59% Rep enthusiasm");
    REQUIRE(point.vis_hint.has_value());
    CHECK(*point.vis_hint == "bar");
    REQUIRE(point.subpoints.size() == 1);
    CHECK(point.subpoints[0] == "sub detail");
}

TEST_CASE("narration parse: sections, paragraphs, visspecs") {
    const DataStory story = parse_narration_text(test::narration_fixture());
    REQUIRE(story.segments.size() == 2);
    CHECK(*story.segments[0].heading == "The rise");
    REQUIRE(story.segments[0].paragraphs.size() == 1);
    REQUIRE(story.segments[0].visspec.has_value());
    CHECK(story.segments[0].visspec->chart_type == visspec::ChartType::line);
    REQUIRE(story.segments[1].visspec.has_value());
    CHECK(story.segments[1].visspec->y ==
          std::vector<std::string>{"Rep", "Dem"});
}

TEST_CASE("narration parse: ambiguous chart type becomes a failure note") {
    const std::string text =
        "## One\npara\n\n```visspec\nchart_type: combined\ntable: t0\nx: Year\ny: "
        "Approval\n```\n";
    const DataStory story = parse_narration_text(text);
    REQUIRE(story.segments.size() == 1);
    CHECK_FALSE(story.segments[0].visspec.has_value());
    REQUIRE(story.segments[0].visspec_failure.has_value());
    CHECK(story.segments[0].visspec_failure->code == "ambiguous_chart_type");
    CHECK(story.segments[0].visspec_failure->message.find("combined") != std::string::npos);
    CHECK(story.segments[0].paragraphs.size() == 1);  // paragraphs retained
}

TEST_CASE("narration parse: two visspecs in one section open a continuation segment") {
    const std::string text =
        "## One\npara\n\n```visspec\nchart_type: bar\ntable: t0\nx: Year\ny: Approval\n```\n"
        "\n```visspec\nchart_type: line\ntable: t0\nx: Year\ny: Approval\n```\n";
    const DataStory story = parse_narration_text(text);
    REQUIRE(story.segments.size() == 2);
    CHECK(story.segments[0].visspec->chart_type == visspec::ChartType::bar);
    CHECK_FALSE(story.segments[1].heading.has_value());
    CHECK(story.segments[1].visspec->chart_type == visspec::ChartType::line);
}

TEST_CASE("run_stage call accounting") {
    const PipelineConfig config;

    SUBCASE("critique NO: 2 calls, not revised") {
        auto backend = std::make_shared<gateway::ScriptedBackend>();
        backend->push_response("- insight");
        backend->push_response("REVISION: NO");
        gateway::Gateway gw(backend);
        PipelineTrace trace;
        const StageOutcome outcome = run_stage(
            StageId::reflection, {{"tables", "T"}, {"guidelines", "G"}}, config, gw,
            TemplateSet::builtin(), trace);
        CHECK_FALSE(outcome.revised);
        CHECK(outcome.artifact == "- insight");
        REQUIRE(trace.stages.size() == 1);
        CHECK(trace.stages[0].calls.size() == 2);
        CHECK(trace.tags() ==
              std::vector<std::string>{"reflection.generate", "reflection.critique"});
    }

    SUBCASE("critique YES: 3 calls, revised artifact returned") {
        auto backend = std::make_shared<gateway::ScriptedBackend>();
        backend->push_response("- insight");
        backend->push_response("REVISION: YES\n- sharpen");
        backend->push_response("- sharper insight");
        gateway::Gateway gw(backend);
        PipelineTrace trace;
        const StageOutcome outcome = run_stage(
            StageId::reflection, {{"tables", "T"}, {"guidelines", "G"}}, config, gw,
            TemplateSet::builtin(), trace);
        CHECK(outcome.revised);
        CHECK(outcome.artifact == "- sharper insight");
        CHECK(trace.stages[0].calls.size() == 3);
        // the revise prompt carries the plan
        CHECK(trace.stages[0].calls[2].prompt.find("sharpen") != std::string::npos);
    }

    SUBCASE("skip_verification: exactly 1 call") {
        auto backend = std::make_shared<gateway::ScriptedBackend>();
        backend->push_response("- insight");
        gateway::Gateway gw(backend);
        PipelineConfig skip = config;
        skip.skip_verification = true;
        PipelineTrace trace;
        const StageOutcome outcome = run_stage(
            StageId::reflection, {{"tables", "T"}, {"guidelines", "G"}}, skip, gw,
            TemplateSet::builtin(), trace);
        CHECK(trace.stages[0].calls.size() == 1);
        CHECK_FALSE(outcome.critique.has_value());
    }

    SUBCASE("unparseable critique falls back to no revision with a warning") {
        auto backend = std::make_shared<gateway::ScriptedBackend>();
        backend->push_response("- insight");
        backend->push_response("   ");
        gateway::Gateway gw(backend);
        PipelineTrace trace;
        const StageOutcome outcome = run_stage(
            StageId::reflection, {{"tables", "T"}, {"guidelines", "G"}}, config, gw,
            TemplateSet::builtin(), trace);
        CHECK_FALSE(outcome.revised);
        CHECK(trace.stages[0].calls.size() == 2);
        REQUIRE(trace.stages[0].warnings.size() == 1);
    }
}

TEST_CASE("generate_story: all critiques demand revision -> 9 calls in canonical order") {
    gateway::Gateway gw = replay_gateway(test::scripted_transcript(/*revise=*/true));
    const StoryResult result = generate_story(test::make_request(), {}, gw);
    CHECK(result.trace.call_count() == 9);
    CHECK(result.trace.tags() ==
          std::vector<std::string>{
              "reflection.generate", "reflection.critique", "reflection.revise",
              "outline.generate", "outline.critique", "outline.revise",
              "narration.generate", "narration.critique", "narration.revise"});
    CHECK(result.trace.config == "full");
    CHECK(result.story.stage_meta.revised);
    CHECK(result.story.segments.size() >= 2);
}

TEST_CASE("generate_story: no critique demands revision -> 6 calls") {
    gateway::Gateway gw = replay_gateway(test::scripted_transcript(/*revise=*/false));
    const StoryResult result = generate_story(test::make_request(), {}, gw);
    CHECK(result.trace.call_count() == 6);
    CHECK_FALSE(result.story.stage_meta.revised);
}

TEST_CASE("generate_story: all-skip config is one narration.generate call") {
    gateway::Gateway gw = replay_gateway(test::direct_transcript());
    PipelineConfig config;
    config.skip_reflection = true;
    config.skip_outline = true;
    config.skip_verification = true;
    const StoryResult result = generate_story(test::make_request(), config, gw);
    CHECK(result.trace.call_count() == 1);
    CHECK(result.trace.tags() == std::vector<std::string>{"narration.generate"});
    CHECK(result.trace.config == "direct");
}

TEST_CASE("chaining law: later prompts embed earlier finalized artifacts verbatim") {
    gateway::Gateway gw = replay_gateway(test::scripted_transcript(/*revise=*/true));
    const StoryResult result = generate_story(test::make_request(), {}, gw);
    const auto& stages = result.trace.stages;
    REQUIRE(stages.size() == 3);
    const std::string final_reflection = stages[0].calls.back().response;
    const std::string final_outline = stages[1].calls.back().response;
    CHECK(stages[1].calls[0].prompt.find(final_reflection) != std::string::npos);
    CHECK(stages[2].calls[0].prompt.find(final_outline) != std::string::npos);
}

TEST_CASE("skipped reflection binds the skip marker into the outline prompt") {
    gateway::Transcript transcript;
    auto add = [&](const std::string& tag, const std::string& content) {
        transcript.append({"", tag, {content, gateway::FinishReason::stop, {}}});
    };
    add("outline.generate", test::outline_fixture());
    add("outline.critique", "REVISION: NO");
    add("narration.generate", test::narration_fixture());
    add("narration.critique", "REVISION: NO");
    gateway::Gateway gw = replay_gateway(transcript);
    PipelineConfig config;
    config.skip_reflection = true;
    const StoryResult result = generate_story(test::make_request(), config, gw);
    CHECK(result.trace.call_count() == 4);
    CHECK(result.trace.stages[0].calls[0].prompt.find("(reflection skipped)") !=
          std::string::npos);
    for (const auto& tag : result.trace.tags())
        CHECK(tag.find("reflection") == std::string::npos);
}

TEST_CASE("whitespace-only reflection aborts with empty reflection error") {
    gateway::Transcript transcript;
    transcript.append({"", "reflection.generate", {"   \n  ", gateway::FinishReason::stop, {}}});
    transcript.append({"", "reflection.critique", {"REVISION: NO", gateway::FinishReason::stop, {}}});
    gateway::Gateway gw = replay_gateway(transcript);
    try {
        generate_story(test::make_request(), {}, gw);
        FAIL("expected PipelineError");
    } catch (const PipelineError& e) {
        CHECK(e.stage() == StageId::reflection);
        CHECK(std::string(e.what()).find("empty reflection") != std::string::npos);
        CHECK(e.partial_trace().call_count() == 2);  // partial trace preserved
    }
}

TEST_CASE("outline missing a role aborts with incomplete narrative structure") {
    gateway::Transcript transcript;
    auto add = [&](const std::string& tag, const std::string& content) {
        transcript.append({"", tag, {content, gateway::FinishReason::stop, {}}});
    };
    add("reflection.generate", test::reflection_fixture());
    add("reflection.critique", "REVISION: NO");
    add("outline.generate", "## Beginning\n- a\n## Middle\n- b\n");
    add("outline.critique", "REVISION: NO");
    gateway::Gateway gw = replay_gateway(transcript);
    try {
        generate_story(test::make_request(), {}, gw);
        FAIL("expected PipelineError");
    } catch (const PipelineError& e) {
        CHECK(e.stage() == StageId::outline);
        CHECK(std::string(e.what()).find("incomplete narrative structure") !=
              std::string::npos);
    }
}

TEST_CASE("gateway failure mid-pipeline preserves the partial trace") {
    auto backend = std::make_shared<gateway::ScriptedBackend>();
    backend->push_response(test::reflection_fixture());
    backend->push_response("REVISION: NO");
    backend->push_error(gateway::GatewayError(gateway::GatewayError::Kind::backend,
                                              "server exploded", 500));
    gateway::Gateway gw(backend, gateway::RetryPolicy{1, 1, 2.0});
    try {
        generate_story(test::make_request(), {}, gw);
        FAIL("expected PipelineError");
    } catch (const PipelineError& e) {
        CHECK(e.gateway_failure());
        CHECK(e.stage() == StageId::outline);
        CHECK(e.partial_trace().call_count() == 2);
    }
}

TEST_CASE("standalone stage runners mirror the composed pipeline") {
    gateway::Gateway gw = replay_gateway(test::scripted_transcript(/*revise=*/false));
    const StoryRequest request = test::make_request();
    const Reflection reflection = run_reflection(request, {}, gw);
    REQUIRE(reflection.bullets.size() == 2);
    CHECK_FALSE(reflection.stage_meta.revised);
    REQUIRE(reflection.stage_meta.critique.has_value());

    const Outline outline = run_outline(reflection, request, {}, gw);
    CHECK(outline_structure_complete(outline));

    const DataStory story = run_narration(outline, request, {}, gw);
    CHECK(story.segments.size() == 2);
    CHECK(story.request_id == request_id(request));
    REQUIRE(story.tables.has_value());
}

TEST_CASE("narration validation report flags unknown columns and failures") {
    gateway::Transcript transcript;
    auto add = [&](const std::string& tag, const std::string& content) {
        transcript.append({"", tag, {content, gateway::FinishReason::stop, {}}});
    };
    const std::string narration =
        "## One\npara one\n\n```visspec\nchart_type: bar\ntable: t0\nx: Yearr\ny: "
        "Approval\n```\n\n## Two\npara two\n\n```visspec\nchart_type: summary "
        "chart\ntable: t0\nx: Year\ny: Approval\n```\n";
    add("narration.generate", narration);
    add("narration.critique", "REVISION: NO");
    gateway::Gateway gw = replay_gateway(transcript);
    PipelineConfig config;
    config.skip_reflection = true;
    config.skip_outline = true;
    const StoryResult result = generate_story(test::make_request(), config, gw);
    bool unknown_column = false, parse_failure = false;
    for (const auto& issue : result.story.validation) {
        if (issue.code == "unknown_column") {
            unknown_column = true;
            CHECK(issue.message.find("Year") != std::string::npos);  // nearest-match hint
        }
        if (issue.code == "ambiguous_chart_type") parse_failure = true;
    }
    CHECK(unknown_column);
    CHECK(parse_failure);
}

TEST_CASE("call-count law holds for random critic verdict patterns") {
    std::mt19937 rng(7);
    for (int iter = 0; iter < 40; ++iter) {
        const bool revise_reflection = (rng() & 1) != 0;
        const bool revise_outline = (rng() & 1) != 0;
        const bool revise_narration = (rng() & 1) != 0;
        auto backend = std::make_shared<gateway::ScriptedBackend>();
        backend->push_response(test::reflection_fixture());
        backend->push_response(revise_reflection ? "REVISION: YES\n- fix" : "REVISION: NO");
        if (revise_reflection) backend->push_response(test::reflection_fixture());
        backend->push_response(test::outline_fixture());
        backend->push_response(revise_outline ? "REVISION: YES\n- fix" : "REVISION: NO");
        if (revise_outline) backend->push_response(test::outline_fixture());
        backend->push_response(test::narration_fixture());
        backend->push_response(revise_narration ? "REVISION: YES\n- fix" : "REVISION: NO");
        if (revise_narration) backend->push_response(test::narration_fixture());
        gateway::Gateway gw(backend);
        const StoryResult result = generate_story(test::make_request(), {}, gw);
        const size_t expected = 3 + 3 + (revise_reflection ? 1 : 0) +
                                (revise_outline ? 1 : 0) + (revise_narration ? 1 : 0);
        CHECK(result.trace.call_count() == expected);

        // revision monotonicity: a revise call happens iff the stage critique said yes
        for (const auto& stage : result.trace.stages) {
            bool saw_revise = false;
            for (const auto& call : stage.calls)
                if (call.role == CallRole::revise) saw_revise = true;
            const bool wanted = stage.stage == StageId::reflection ? revise_reflection
                                : stage.stage == StageId::outline  ? revise_outline
                                                                    : revise_narration;
            CHECK(saw_revise == wanted);
        }
    }
}

TEST_CASE("revision budget zero never revises") {
    gateway::Transcript transcript;
    auto add = [&](const std::string& tag, const std::string& content) {
        transcript.append({"", tag, {content, gateway::FinishReason::stop, {}}});
    };
    add("reflection.generate", test::reflection_fixture());
    add("reflection.critique", "REVISION: YES\n- fix");
    add("outline.generate", test::outline_fixture());
    add("outline.critique", "REVISION: YES\n- fix");
    add("narration.generate", test::narration_fixture());
    add("narration.critique", "REVISION: YES\n- fix");
    gateway::Gateway gw = replay_gateway(transcript);
    PipelineConfig config;
    config.max_revisions_per_stage = 0;
    const StoryResult result = generate_story(test::make_request(), config, gw);
    CHECK(result.trace.call_count() == 6);
    for (const auto& tag : result.trace.tags())
        CHECK(tag.find("revise") == std::string::npos);
}

TEST_CASE("builtin templates match the files shipped under prompts/") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::path(DN_PROMPTS_DIR);
    REQUIRE(fs::exists(dir));
    const TemplateSet from_files = TemplateSet::load_dir(dir);
    const TemplateSet builtin = TemplateSet::builtin();
    for (const auto& name : template_names())
        CHECK(from_files.get(name).body == builtin.get(name).body);
}
