#include "cli.hpp"

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "dn/corpus.hpp"
#include "dn/error.hpp"
#include "dn/eval.hpp"
#include "dn/gateway.hpp"
#include "dn/io.hpp"
#include "dn/pipeline.hpp"
#include "dn/serialize.hpp"
#include "dn/strings.hpp"
#include "dn/visspec.hpp"

namespace dn::cli {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitBackend = 3;

struct CliConfig {
    std::string backend = "replay";  // http | replay | record
    std::string transcript_path;
    std::string model;
    uint64_t seed = 0;
    std::string output_dir = "dn_out";
    bool lenient_replay = false;
};

void add_backend_flags(CLI::App* cmd, CliConfig& config) {
    cmd->add_option("--backend", config.backend, "Backend: http, replay or record")
        ->check(CLI::IsMember({"http", "replay", "record"}));
    cmd->add_option("--transcript", config.transcript_path,
                    "Transcript file (required for replay/record)");
    cmd->add_option("--model", config.model, "Model name (default: DN_MODEL or dn-model)");
    cmd->add_option("--seed", config.seed, "Random seed");
    cmd->add_option("--output-dir", config.output_dir, "Output directory");
    cmd->add_flag("--lenient-replay", config.lenient_replay,
                  "Replay matching falls back to (tag, sequence index)");
}

std::string resolve_model(const CliConfig& config) {
    if (!config.model.empty()) return config.model;
    if (const char* env = std::getenv("DN_MODEL")) return env;
    return "dn-model";
}

struct Session {
    gateway::Gateway gw;
    std::shared_ptr<gateway::RecordingBackend> recorder;
};

Session make_session(const CliConfig& config) {
    std::shared_ptr<gateway::Backend> backend;
    if (config.backend == "replay") {
        if (config.transcript_path.empty())
            throw ValidationError("--backend replay requires --transcript");
        backend = std::make_shared<gateway::ReplayBackend>(
            gateway::Transcript::load(config.transcript_path), config.lenient_replay);
    } else {
        if (config.backend == "record" && config.transcript_path.empty())
            throw ValidationError("--backend record requires --transcript");
        gateway::HttpOptions options = gateway::HttpOptions::from_env();
        if (options.api_key.empty())
            throw ValidationError("--backend " + config.backend + " requires DN_API_KEY");
        backend = std::make_shared<gateway::HttpBackend>(options);
    }
    auto recorder = std::make_shared<gateway::RecordingBackend>(backend);
    return {gateway::Gateway(recorder), recorder};
}

void save_session_transcript(const Session& session, const fs::path& out_dir,
                             const CliConfig& config) {
    const fs::path path = out_dir / "transcript.jsonl";
    session.recorder->recorded().save(path);
    if (config.backend == "record")
        session.recorder->recorded().save(config.transcript_path);
}

// ---- generate / ablate -------------------------------------------------

struct GenerateArgs {
    std::string tables_path;
    std::string intent;
    std::string guidelines_path;
    std::string ablation;
    std::string prompts_dir;
};

int cmd_generate(const GenerateArgs& args, const CliConfig& config) {
    DataTableSet tables = deserialize_table_set(io::read_file(args.tables_path));
    const TableValidationReport violations = validate_table_set(tables);
    if (!violations.empty()) {
        std::cerr << "table set is invalid:\n";
        for (const auto& v : violations)
            std::cerr << "  [" << v.table_id << "] " << v.where << ": " << v.rule << " ("
                      << v.message << ")\n";
        return kExitInput;
    }

    StoryRequest request;
    request.tables = std::move(tables);
    request.intent = args.intent;
    if (!args.guidelines_path.empty())
        request.guidelines = io::read_file(args.guidelines_path);
    validate_request(request);

    pipeline::PipelineConfig pc;
    pc.model = resolve_model(config);
    const pipeline::TemplateSet templates = args.prompts_dir.empty()
                                                ? pipeline::TemplateSet::builtin()
                                                : pipeline::TemplateSet::load_dir(args.prompts_dir);

    Session session = make_session(config);
    const fs::path out_dir(config.output_dir);

    pipeline::StoryResult result;
    try {
        result = args.ablation.empty()
                     ? pipeline::generate_story(request, pc, session.gw, templates)
                     : eval::run_ablation(args.ablation, request, session.gw, pc, templates);
    } catch (const pipeline::PipelineError& e) {
        io::write_file_atomic(out_dir / "trace.json", serialize_trace(e.partial_trace()));
        save_session_transcript(session, out_dir, config);
        std::cerr << "error: " << e.what() << " (partial trace written)\n";
        return kExitBackend;
    }

    io::write_file_atomic(out_dir / "story.json", serialize_story(result.story));
    io::write_file_atomic(out_dir / "trace.json", serialize_trace(result.trace));
    save_session_transcript(session, out_dir, config);

    std::cout << "calls: " << result.trace.call_count() << "\n"
              << "story: " << (out_dir / "story.json").string() << "\n"
              << "trace: " << (out_dir / "trace.json").string() << "\n"
              << "transcript: " << (out_dir / "transcript.jsonl").string() << "\n";
    return kExitOk;
}

// ---- render ------------------------------------------------------------

std::string html_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

int cmd_render(const std::string& story_path, const std::string& tables_path,
               const CliConfig& config, int width, int height) {
    const DataStory story = deserialize_story(io::read_file(story_path));
    DataTableSet tables;
    if (!tables_path.empty())
        tables = deserialize_table_set(io::read_file(tables_path));
    else if (story.tables)
        tables = *story.tables;
    else
        throw ValidationError(
            "story document does not embed tables; pass --tables explicitly");

    const fs::path out_dir(config.output_dir);
    visspec::RenderOptions opts;
    opts.width = width;
    opts.height = height;

    size_t chart_no = 0;
    size_t warning_count = 0;
    std::string html;
    html += "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n";
    html += "<title>data story</title>\n";
    html +=
        "<style>body{font-family:sans-serif;max-width:760px;margin:2em auto;}"
        ".placard{border:1px solid #c00;background:#fee;padding:0.7em;margin:1em 0;}"
        "img{max-width:100%;}</style>\n</head>\n<body>\n";
    for (const auto& seg : story.segments) {
        if (seg.heading) html += "<h2>" + html_escape(*seg.heading) + "</h2>\n";
        for (const auto& para : seg.paragraphs)
            html += "<p>" + html_escape(para) + "</p>\n";
        if (seg.visspec) {
            const visspec::Report report = visspec::validate_visspec(*seg.visspec, tables);
            if (visspec::has_errors(report)) {
                ++warning_count;
                html += "<div class=\"placard\">chart skipped: " +
                        html_escape(report.front().message) + "</div>\n";
                continue;
            }
            ++chart_no;
            char name[32];
            std::snprintf(name, sizeof(name), "chart_%03zu.svg", chart_no);
            io::write_file_atomic(out_dir / name, visspec::render_svg(*seg.visspec, tables, opts));
            html += std::string("<img src=\"") + name + "\" alt=\"" +
                    html_escape(seg.visspec->title) + "\">\n";
        }
        if (seg.visspec_failure) {
            ++warning_count;
            html += "<div class=\"placard\">chart specification failed to parse: " +
                    html_escape(seg.visspec_failure->message) + "</div>\n";
        }
    }
    html += "</body>\n</html>\n";
    io::write_file_atomic(out_dir / "index.html", html);
    std::cout << "charts: " << chart_no << "\nwarnings: " << warning_count << "\nindex: "
              << (out_dir / "index.html").string() << "\n";
    return kExitOk;
}

// ---- filter / stats ----------------------------------------------------

int cmd_filter(const std::string& corpus_dir, const CliConfig& config) {
    const auto corpus = corpus::load_corpus(corpus_dir);
    if (corpus.empty()) {
        std::cerr << "error: corpus directory is empty\n";
        return kExitInput;
    }
    const fs::path out_dir(config.output_dir);
    std::string excluded_log;
    size_t kept = 0;
    for (const auto& story : corpus) {
        const corpus::FilterDecision decision = corpus::apply_exclusion_criteria(story);
        if (decision.keep) {
            ++kept;
            const fs::path path =
                out_dir / corpus::to_string(story.source) / (story.id + ".json");
            io::write_file_atomic(path, corpus::story_to_json_text(story));
        } else {
            ordered_json j;
            j["id"] = story.id;
            j["source"] = corpus::to_string(story.source);
            j["reason"] = corpus::to_string(*decision.reason);
            excluded_log += j.dump();
            excluded_log += '\n';
        }
    }
    io::write_file_atomic(out_dir / "excluded.jsonl", excluded_log);
    std::cout << "kept: " << kept << "\nexcluded: " << corpus.size() - kept << "\nlog: "
              << (out_dir / "excluded.jsonl").string() << "\n";
    return kExitOk;
}

int cmd_stats(const std::string& corpus_dir, const std::string& output_dir) {
    const auto corpus = corpus::load_corpus(corpus_dir);
    if (corpus.empty()) {
        std::cerr << "error: corpus directory is empty\n";
        return kExitInput;
    }
    std::vector<std::pair<std::string, corpus::CorpusStats>> groups;
    groups.emplace_back("all", corpus::corpus_stats(corpus));
    for (const auto source :
         {corpus::Source::pew, corpus::Source::tableau, corpus::Source::gapminder}) {
        std::vector<corpus::CorpusStory> subset;
        for (const auto& story : corpus)
            if (story.source == source) subset.push_back(story);
        if (!subset.empty())
            groups.emplace_back(corpus::to_string(source), corpus::corpus_stats(subset));
    }
    const std::string text = corpus::stats_report_text(groups);
    std::cout << text;
    if (!output_dir.empty()) {
        io::write_file_atomic(fs::path(output_dir) / "stats.json",
                              corpus::stats_report_json(groups));
        io::write_file_atomic(fs::path(output_dir) / "stats.txt", text);
    }
    return kExitOk;
}

// ---- judge / winrate / agreement ----------------------------------------

struct JudgePair {
    std::string id;
    std::string story_a_path;
    std::string story_b_path;
    std::string dataset;
};

std::vector<JudgePair> load_manifest(const fs::path& path) {
    const ordered_json j = ordered_json::parse(io::read_file(path));
    std::vector<JudgePair> pairs;
    const fs::path base = path.parent_path();
    for (const auto& jp : j.at("pairs")) {
        JudgePair pair;
        pair.id = jp.at("id").get<std::string>();
        pair.story_a_path = (base / jp.at("story_a").get<std::string>()).string();
        pair.story_b_path = (base / jp.at("story_b").get<std::string>()).string();
        pair.dataset = jp.value("dataset", "");
        pairs.push_back(std::move(pair));
    }
    return pairs;
}

int cmd_judge(const std::string& a_path, const std::string& b_path,
              const std::string& manifest_path, const CliConfig& config, bool both_orders,
              int workers) {
    std::vector<JudgePair> pairs;
    if (!manifest_path.empty()) {
        pairs = load_manifest(manifest_path);
    } else {
        if (a_path.empty() || b_path.empty())
            throw ValidationError("judge needs --story-a and --story-b, or --manifest");
        JudgePair pair;
        pair.id = fs::path(a_path).stem().string() + "_vs_" + fs::path(b_path).stem().string();
        pair.story_a_path = a_path;
        pair.story_b_path = b_path;
        pairs.push_back(std::move(pair));
    }

    Session session = make_session(config);
    eval::JudgeOptions options;
    options.model = resolve_model(config);

    std::vector<std::optional<eval::Verdict>> results(pairs.size());
    std::vector<std::string> errors(pairs.size());
    std::atomic<size_t> next{0};
    std::atomic<bool> backend_failed{false};

    auto worker = [&]() {
        while (true) {
            const size_t i = next.fetch_add(1);
            if (i >= pairs.size()) return;
            try {
                const DataStory a = deserialize_story(io::read_file(pairs[i].story_a_path));
                const DataStory b = deserialize_story(io::read_file(pairs[i].story_b_path));
                eval::Verdict verdict =
                    both_orders
                        ? eval::judge_both_orders(a, b, session.gw, config.seed + i,
                                                  pairs[i].id, eval::all_criteria(), options)
                        : eval::pairwise_judge(a, b, session.gw, config.seed + i, pairs[i].id,
                                               eval::all_criteria(), options);
                verdict.dataset = pairs[i].dataset;
                results[i] = std::move(verdict);
            } catch (const gateway::GatewayError& e) {
                errors[i] = e.what();
                backend_failed = true;
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        }
    };
    const size_t pool = std::max(1, std::min<int>(workers, static_cast<int>(pairs.size())));
    std::vector<std::thread> threads;
    for (size_t i = 0; i < pool; ++i) threads.emplace_back(worker);
    for (auto& t : threads) t.join();

    std::vector<eval::Verdict> verdicts;
    std::string error_log;
    for (size_t i = 0; i < pairs.size(); ++i) {
        if (results[i]) verdicts.push_back(*results[i]);
        if (!errors[i].empty()) error_log += pairs[i].id + ": " + errors[i] + "\n";
    }

    const fs::path out_dir(config.output_dir);
    io::write_file_atomic(out_dir / "verdicts.jsonl", eval::verdicts_to_jsonl(verdicts));
    if (!error_log.empty())
        io::write_file_atomic(out_dir / "judge_errors.log", error_log);
    if (!verdicts.empty())
        std::cout << eval::win_rate_report_text(eval::win_rates_by_dataset(verdicts));
    std::cout << "verdicts: " << verdicts.size() << "/" << pairs.size() << " -> "
              << (out_dir / "verdicts.jsonl").string() << "\n";
    if (!error_log.empty()) {
        std::cerr << "errors logged to " << (out_dir / "judge_errors.log").string() << "\n";
        return backend_failed ? kExitBackend : kExitInput;
    }
    return kExitOk;
}

int cmd_winrate(const std::string& verdicts_path, const std::string& output_dir) {
    const auto verdicts = eval::verdicts_from_jsonl(io::read_file(verdicts_path));
    if (verdicts.empty()) {
        std::cerr << "error: no verdicts in " << verdicts_path << "\n";
        return kExitInput;
    }
    const auto tables = eval::win_rates_by_dataset(verdicts);
    std::cout << eval::win_rate_report_text(tables);
    if (!output_dir.empty())
        io::write_file_atomic(fs::path(output_dir) / "win_rates.json",
                              eval::win_rate_report_json(tables));
    return kExitOk;
}

int cmd_agreement(const std::string& annotations_path, const std::string& output_dir) {
    const eval::AnnotationSet annotations =
        eval::annotations_from_csv(io::read_file(annotations_path));
    const eval::MergeResult merged = eval::merge_annotators(annotations);
    std::string warning;
    const double alpha = eval::krippendorff_alpha(annotations, &warning);

    ordered_json j;
    j["items"] = merged.items;
    j["agreements"] = merged.agreements;
    j["raw_agreement_pct"] = merged.raw_agreement_pct;
    j["krippendorff_alpha"] = alpha;
    if (!warning.empty()) j["warning"] = warning;
    std::cout << j.dump(2) << "\n";
    if (!output_dir.empty())
        io::write_file_atomic(fs::path(output_dir) / "agreement.json", j.dump(2) + "\n");
    return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"data story generation, rendering and evaluation"};
    app.require_subcommand(1);

    CliConfig config;
    GenerateArgs gen_args;
    std::string story_path, tables_path, corpus_dir, manifest_path, verdicts_path;
    std::string annotations_path, a_path, b_path, ablate_config;
    bool both_orders = false;
    int workers = 4;
    int width = 640, height = 400;

    CLI::App* generate = app.add_subcommand("generate", "Generate a data story from tables");
    generate->add_option("--tables", gen_args.tables_path, "Table-set JSON file")->required();
    generate->add_option("--intent", gen_args.intent, "Story intent / theme")->required();
    generate->add_option("--guidelines", gen_args.guidelines_path,
                         "File with additional guidelines");
    generate->add_option("--ablation", gen_args.ablation,
                         "Ablation config: full, skip_reflection, skip_outline, "
                         "skip_verification, direct");
    generate->add_option("--prompts", gen_args.prompts_dir, "Directory of prompt overrides");
    add_backend_flags(generate, config);

    CLI::App* ablate = app.add_subcommand("ablate", "Generate under a named ablation config");
    ablate->add_option("--config", ablate_config, "Ablation config name")->required();
    ablate->add_option("--tables", gen_args.tables_path, "Table-set JSON file")->required();
    ablate->add_option("--intent", gen_args.intent, "Story intent / theme")->required();
    ablate->add_option("--guidelines", gen_args.guidelines_path,
                       "File with additional guidelines");
    ablate->add_option("--prompts", gen_args.prompts_dir, "Directory of prompt overrides");
    add_backend_flags(ablate, config);

    CLI::App* render = app.add_subcommand("render", "Render a story's charts to SVG + HTML");
    render->add_option("--story", story_path, "Story JSON file")->required();
    render->add_option("--tables", tables_path, "Table-set JSON (when not embedded)");
    render->add_option("--output-dir", config.output_dir, "Output directory");
    render->add_option("--width", width, "Chart width in px");
    render->add_option("--height", height, "Chart height in px");

    CLI::App* filter = app.add_subcommand("filter", "Apply the exclusion criteria to a corpus");
    filter->add_option("--corpus", corpus_dir, "Corpus directory")->required();
    filter->add_option("--output-dir", config.output_dir, "Output directory");

    CLI::App* stats = app.add_subcommand("stats", "Corpus statistics report");
    stats->add_option("--corpus", corpus_dir, "Corpus directory")->required();
    std::string stats_out;
    stats->add_option("--output-dir", stats_out, "Write stats.json/stats.txt here");

    CLI::App* judge = app.add_subcommand("judge", "Pairwise story comparison by an LLM judge");
    judge->add_option("--story-a", a_path, "First story JSON");
    judge->add_option("--story-b", b_path, "Second story JSON");
    judge->add_option("--manifest", manifest_path, "Batch manifest JSON");
    judge->add_flag("--both-orders", both_orders,
                    "Judge each pair under both presentation orders, tie on conflict");
    judge->add_option("--workers", workers, "Worker pool size for batch judging");
    add_backend_flags(judge, config);

    CLI::App* winrate = app.add_subcommand("winrate", "Aggregate verdicts into win rates");
    winrate->add_option("--verdicts", verdicts_path, "verdicts.jsonl path")->required();
    std::string winrate_out;
    winrate->add_option("--output-dir", winrate_out, "Write win_rates.json here");

    CLI::App* agreement = app.add_subcommand("agreement", "Inter-annotator agreement");
    agreement->add_option("--annotations", annotations_path,
                          "CSV with header item_id,annotator,label")
        ->required();
    std::string agreement_out;
    agreement->add_option("--output-dir", agreement_out, "Write agreement.json here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInput;
    }

    try {
        if (generate->parsed()) return cmd_generate(gen_args, config);
        if (ablate->parsed()) {
            gen_args.ablation = ablate_config;
            return cmd_generate(gen_args, config);
        }
        if (render->parsed())
            return cmd_render(story_path, tables_path, config, width, height);
        if (filter->parsed()) return cmd_filter(corpus_dir, config);
        if (stats->parsed()) return cmd_stats(corpus_dir, stats_out);
        if (judge->parsed())
            return cmd_judge(a_path, b_path, manifest_path, config, both_orders, workers);
        if (winrate->parsed()) return cmd_winrate(verdicts_path, winrate_out);
        if (agreement->parsed()) return cmd_agreement(annotations_path, agreement_out);
    } catch (const pipeline::PipelineError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBackend;
    } catch (const gateway::GatewayError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBackend;
    } catch (const dn::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    }
    return kExitInput;
}

}  // namespace dn::cli
