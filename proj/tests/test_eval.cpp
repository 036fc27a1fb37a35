#include <doctest.h>

#include <random>

#include <json.hpp>

#include "common/test_util.hpp"
#include "dn/eval.hpp"
#include "dn/io.hpp"

using namespace dn;
using namespace dn::eval;

namespace {

size_t count_occurrences(const std::string& text, const std::string& needle) {
    size_t count = 0;
    for (size_t pos = text.find(needle); pos != std::string::npos;
         pos = text.find(needle, pos + needle.size()))
        ++count;
    return count;
}

DataStory story_with_text(const std::string& marker) {
    DataStory story = test::make_story(marker);
    story.segments[0].paragraphs = {"unique marker " + marker};
    return story;
}

AnnotationSet two_annotator_set(const std::vector<std::pair<Label, Label>>& pairs) {
    AnnotationSet set;
    for (size_t i = 0; i < pairs.size(); ++i)
        set.items.push_back(
            {"item" + std::to_string(i), {{"r1", pairs[i].first}, {"r2", pairs[i].second}}});
    return set;
}

}  // namespace

TEST_CASE("judge prompt contains both stories and six verdict-line instructions") {
    const DataStory a = story_with_text("alpha");
    const DataStory b = story_with_text("beta");
    const gateway::ChatRequest request =
        build_judge_prompt(a, b, all_criteria(), OrderShown::AB);
    const std::string& prompt = request.messages[0].content;
    CHECK(prompt.find("unique marker alpha") != std::string::npos);
    CHECK(prompt.find("unique marker beta") != std::string::npos);
    CHECK(count_occurrences(prompt, ": A|B|TIE") == 6);
    CHECK(prompt.find("Story A:") < prompt.find("unique marker alpha"));
    CHECK(request.tag == "judge.pairwise");
    CHECK(request.temperature == 0.0);
}

TEST_CASE("BA order swaps the story texts under the labels") {
    const DataStory a = story_with_text("alpha");
    const DataStory b = story_with_text("beta");
    const gateway::ChatRequest request =
        build_judge_prompt(a, b, all_criteria(), OrderShown::BA);
    const std::string& prompt = request.messages[0].content;
    CHECK(prompt.find("unique marker beta") < prompt.find("unique marker alpha"));
}

TEST_CASE("criteria subset yields criterion count + 1 instructions") {
    const DataStory a = story_with_text("alpha");
    const DataStory b = story_with_text("beta");
    const gateway::ChatRequest request = build_judge_prompt(
        a, b, {Criterion::factual_correctness}, OrderShown::AB);
    CHECK(count_occurrences(request.messages[0].content, ": A|B|TIE") == 2);
}

TEST_CASE("parse_verdict: overall under both orders") {
    const Verdict ab = parse_verdict("OVERALL: A", OrderShown::AB, {});
    CHECK(ab.overall == Label::A);
    const Verdict ba = parse_verdict("OVERALL: A", OrderShown::BA, {});
    CHECK(ba.overall == Label::B);  // label un-swap
    const Verdict tie = parse_verdict("overall: tie", OrderShown::BA, {});
    CHECK(tie.overall == Label::tie);
}

TEST_CASE("parse_verdict: full reply with flexible key spelling") {
    const std::string reply =
        "INFORMATIVENESS: A\nClarity and Coherence: B\nVISUALIZATION_QUALITY: TIE\n"
        "Narrative Quality: a\nFACTUAL CORRECTNESS: B\nOVERALL: A\n";
    const Verdict verdict = parse_verdict(reply, OrderShown::AB);
    CHECK(verdict.winners.at(Criterion::informativeness) == Label::A);
    CHECK(verdict.winners.at(Criterion::clarity_coherence) == Label::B);
    CHECK(verdict.winners.at(Criterion::visualization_quality) == Label::tie);
    CHECK(verdict.winners.at(Criterion::narrative_quality) == Label::A);
    CHECK(verdict.winners.at(Criterion::factual_correctness) == Label::B);
    CHECK(verdict.overall == Label::A);
    CHECK(verdict.warnings.empty());
}

TEST_CASE("missing criterion line defaults to tie with a warning") {
    const Verdict verdict =
        parse_verdict("INFORMATIVENESS: A\nOVERALL: A", OrderShown::AB);
    CHECK(verdict.winners.at(Criterion::informativeness) == Label::A);
    CHECK(verdict.winners.at(Criterion::narrative_quality) == Label::tie);
    CHECK(verdict.warnings.size() == 4);
}

TEST_CASE("no verdict lines at all raise ParseFailure") {
    CHECK_THROWS_AS(parse_verdict("I liked both stories a lot.", OrderShown::AB),
                    ParseFailure);
}

TEST_CASE("label un-swap involution: AB and BA parses mirror each other") {
    const std::string reply =
        "INFORMATIVENESS: A\nCLARITY_COHERENCE: B\nVISUALIZATION_QUALITY: TIE\n"
        "NARRATIVE_QUALITY: A\nFACTUAL_CORRECTNESS: B\nOVERALL: A\n";
    const Verdict forward = parse_verdict(reply, OrderShown::AB);
    const Verdict backward = parse_verdict(reply, OrderShown::BA);
    CHECK(backward.overall == swap_label(forward.overall));
    for (const auto criterion : all_criteria())
        CHECK(backward.winners.at(criterion) == swap_label(forward.winners.at(criterion)));
}

TEST_CASE("pairwise_judge: seeded order is stable, ties parse through") {
    auto backend = std::make_shared<gateway::ScriptedBackend>();
    backend->set_responder(
        [](const gateway::ChatRequest&) { return gateway::ChatResponse{"OVERALL: TIE", {}, {}}; });
    gateway::Gateway gw(backend);
    const DataStory a = story_with_text("alpha");
    const DataStory b = story_with_text("beta");
    const Verdict first = pairwise_judge(a, b, gw, 42, "pair-1");
    const Verdict second = pairwise_judge(a, b, gw, 42, "pair-1");
    CHECK(first.order_shown == second.order_shown);
    CHECK(first.overall == Label::tie);
    CHECK(first.pair_id == "pair-1");
}

TEST_CASE("judge_both_orders ties when the judge flips with presentation order") {
    auto backend = std::make_shared<gateway::ScriptedBackend>();
    // always prefers whichever story is shown first
    backend->set_responder([](const gateway::ChatRequest&) {
        return gateway::ChatResponse{"OVERALL: A", {}, {}};
    });
    gateway::Gateway gw(backend);
    const DataStory a = story_with_text("alpha");
    const DataStory b = story_with_text("beta");
    const Verdict verdict = judge_both_orders(a, b, gw, 7, "pair-2");
    CHECK(verdict.overall == Label::tie);
    CHECK_FALSE(verdict.warnings.empty());
}

TEST_CASE("judge_both_orders keeps a stable winner") {
    auto backend = std::make_shared<gateway::ScriptedBackend>();
    int call = 0;
    backend->set_responder([&call](const gateway::ChatRequest&) {
        // first call AB -> A wins; second call BA -> B slot holds story A
        return gateway::ChatResponse{++call == 1 ? "OVERALL: A" : "OVERALL: B", {}, {}};
    });
    gateway::Gateway gw(backend);
    const Verdict verdict =
        judge_both_orders(story_with_text("alpha"), story_with_text("beta"), gw, 7, "p");
    CHECK(verdict.overall == Label::A);
}

TEST_CASE("win rates: 7 A, 2 B, 1 tie -> 70/20/10") {
    std::vector<Verdict> verdicts;
    for (int i = 0; i < 10; ++i) {
        Verdict v;
        v.pair_id = "p" + std::to_string(i);
        v.overall = i < 7 ? Label::A : (i < 9 ? Label::B : Label::tie);
        verdicts.push_back(v);
    }
    const WinRateTable table = win_rates(verdicts);
    const WinRateRow* overall = table.find("overall");
    REQUIRE(overall != nullptr);
    CHECK(overall->a_win_pct == doctest::Approx(70.0));
    CHECK(overall->b_win_pct == doctest::Approx(20.0));
    CHECK(overall->tie_pct == doctest::Approx(10.0));
    CHECK(overall->n == 10);
    CHECK(overall->a_win_pct + overall->b_win_pct + overall->tie_pct ==
          doctest::Approx(100.0).epsilon(0.0001));
}

TEST_CASE("win rates: all ties and criterion averaging") {
    std::vector<Verdict> verdicts;
    for (int i = 0; i < 5; ++i) {
        Verdict v;
        v.overall = Label::tie;
        verdicts.push_back(v);
    }
    const WinRateTable ties = win_rates(verdicts);
    CHECK(ties.find("overall")->tie_pct == doctest::Approx(100.0));
    CHECK(ties.find("overall")->a_win_pct == 0.0);

    // two criteria with A-rates 60% and 80% average to 70%
    std::vector<Verdict> crits;
    for (int i = 0; i < 10; ++i) {
        Verdict v;
        v.overall = Label::A;
        v.winners[Criterion::informativeness] = i < 6 ? Label::A : Label::B;
        v.winners[Criterion::clarity_coherence] = i < 8 ? Label::A : Label::B;
        crits.push_back(v);
    }
    const WinRateTable table = win_rates(crits);
    CHECK(table.find("average")->a_win_pct == doctest::Approx(70.0));
    CHECK(table.find("informativeness")->a_win_pct == doctest::Approx(60.0));
    CHECK(table.find("clarity_coherence")->a_win_pct == doctest::Approx(80.0));
}

TEST_CASE("win rate counts are permutation invariant") {
    std::vector<Verdict> verdicts;
    std::mt19937 rng(3);
    for (int i = 0; i < 30; ++i) {
        Verdict v;
        v.overall = static_cast<Label>(rng() % 3);
        verdicts.push_back(v);
    }
    const WinRateTable forward = win_rates(verdicts);
    std::shuffle(verdicts.begin(), verdicts.end(), rng);
    const WinRateTable shuffled = win_rates(verdicts);
    CHECK(forward.find("overall")->a_win_pct ==
          doctest::Approx(shuffled.find("overall")->a_win_pct));
    CHECK(forward.find("overall")->tie_pct ==
          doctest::Approx(shuffled.find("overall")->tie_pct));
}

TEST_CASE("win_rates on empty input errors") {
    CHECK_THROWS_AS(win_rates({}), EvalError);
}

TEST_CASE("verdicts jsonl round-trip") {
    std::vector<Verdict> verdicts;
    Verdict v;
    v.pair_id = "p0";
    v.order_shown = OrderShown::BA;
    v.winners[Criterion::informativeness] = Label::A;
    v.overall = Label::B;
    v.dataset = "pew";
    v.raw = "OVERALL: B";
    verdicts.push_back(v);
    const std::string jsonl = verdicts_to_jsonl(verdicts);
    const auto back = verdicts_from_jsonl(jsonl);
    REQUIRE(back.size() == 1);
    CHECK(back[0].pair_id == "p0");
    CHECK(back[0].order_shown == OrderShown::BA);
    CHECK(back[0].winners.at(Criterion::informativeness) == Label::A);
    CHECK(back[0].overall == Label::B);
    CHECK(back[0].dataset == "pew");
}

TEST_CASE("merge_annotators: tie rule and raw agreement") {
    const AnnotationSet agree_set = two_annotator_set({{Label::A, Label::A}});
    CHECK(merge_annotators(agree_set).consensus[0].second == Label::A);

    const AnnotationSet disagree_set = two_annotator_set({{Label::A, Label::B}});
    CHECK(merge_annotators(disagree_set).consensus[0].second == Label::tie);

    // 17 agreements of 20 -> 85.0%, 3 disagreements all merge to tie
    std::vector<std::pair<Label, Label>> pairs;
    for (int i = 0; i < 17; ++i) pairs.emplace_back(Label::A, Label::A);
    pairs.emplace_back(Label::A, Label::B);
    pairs.emplace_back(Label::B, Label::tie);
    pairs.emplace_back(Label::tie, Label::A);
    const MergeResult merged = merge_annotators(two_annotator_set(pairs));
    CHECK(merged.raw_agreement_pct == doctest::Approx(85.0));
    CHECK(merged.agreements == 17);
    size_t ties = 0;
    for (size_t i = 17; i < merged.consensus.size(); ++i)
        if (merged.consensus[i].second == Label::tie) ++ties;
    CHECK(ties == 3);
}

TEST_CASE("merge_annotators rejects items without exactly two labels") {
    AnnotationSet set;
    set.items.push_back({"solo", {{"r1", Label::A}}});
    CHECK_THROWS_WITH_AS(merge_annotators(set), doctest::Contains("solo"), EvalError);
}

TEST_CASE("agreement is symmetric in annotator order") {
    std::vector<std::pair<Label, Label>> pairs = {
        {Label::A, Label::B}, {Label::B, Label::B}, {Label::tie, Label::A}};
    std::vector<std::pair<Label, Label>> flipped;
    for (auto [x, y] : pairs) flipped.emplace_back(y, x);
    CHECK(merge_annotators(two_annotator_set(pairs)).raw_agreement_pct ==
          doctest::Approx(merge_annotators(two_annotator_set(flipped)).raw_agreement_pct));
}

TEST_CASE("alpha: perfect agreement on mixed labels is 1.0") {
    const AnnotationSet set = two_annotator_set(
        {{Label::A, Label::A}, {Label::B, Label::B}, {Label::tie, Label::tie}});
    CHECK(krippendorff_alpha(set) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("alpha: all labels globally identical defines 1.0 with warning") {
    const AnnotationSet set = two_annotator_set({{Label::A, Label::A}, {Label::A, Label::A}});
    std::string warning;
    CHECK(krippendorff_alpha(set, &warning) == 1.0);
    CHECK_FALSE(warning.empty());
}

TEST_CASE("alpha: six-item hand dataset matches the committed oracle to 1e-9") {
    const auto expected =
        nlohmann::json::parse(io::read_file("oracles/krippendorff_expected.json"));
    auto label_of = [](const std::string& s) {
        return s == "A" ? Label::A : (s == "B" ? Label::B : Label::tie);
    };
    std::vector<std::pair<Label, Label>> pairs;
    for (const auto& item : expected["hand_dataset"])
        pairs.emplace_back(label_of(item[0].get<std::string>()),
                           label_of(item[1].get<std::string>()));
    REQUIRE(pairs.size() == 6);
    const double alpha = krippendorff_alpha(two_annotator_set(pairs));
    CHECK(alpha == doctest::Approx(expected["alpha"].get<double>()).epsilon(1e-9));
    CHECK(alpha == doctest::Approx(25.0 / 47.0).epsilon(1e-9));
}

TEST_CASE("alpha: independent-uniform labels stay near zero at n=500") {
    std::mt19937 rng(20240501);
    std::vector<std::pair<Label, Label>> pairs;
    for (int i = 0; i < 500; ++i)
        pairs.emplace_back(static_cast<Label>(rng() % 3), static_cast<Label>(rng() % 3));
    const double alpha = krippendorff_alpha(two_annotator_set(pairs));
    CHECK(std::abs(alpha) < 0.1);
}

TEST_CASE("alpha is invariant under label renaming") {
    const std::vector<std::pair<Label, Label>> pairs = {
        {Label::A, Label::A}, {Label::A, Label::B}, {Label::B, Label::tie},
        {Label::tie, Label::tie}, {Label::B, Label::B}};
    auto permute = [](Label label) {  // A->B->tie->A
        return label == Label::A ? Label::B : (label == Label::B ? Label::tie : Label::A);
    };
    std::vector<std::pair<Label, Label>> renamed;
    for (auto [x, y] : pairs) renamed.emplace_back(permute(x), permute(y));
    CHECK(krippendorff_alpha(two_annotator_set(pairs)) ==
          doctest::Approx(krippendorff_alpha(two_annotator_set(renamed))).epsilon(1e-12));
}

TEST_CASE("alpha handles items with missing labels by per-item pairing") {
    AnnotationSet set = two_annotator_set({{Label::A, Label::A}, {Label::A, Label::B}});
    set.items.push_back({"threeway",
                         {{"r1", Label::B}, {"r2", Label::B}, {"r3", Label::tie}}});
    set.items.push_back({"solo", {{"r1", Label::A}}});  // unpaired, skipped
    CHECK_NOTHROW(krippendorff_alpha(set));

    AnnotationSet all_solo;
    all_solo.items.push_back({"x", {{"r1", Label::A}}});
    CHECK_THROWS_AS(krippendorff_alpha(all_solo), EvalError);
}

TEST_CASE("annotations csv parsing") {
    const std::string csv =
        "item_id,annotator,label\np1,r1,A\np1,r2,a\np2,r1,B\np2,r2,tie\n";
    const AnnotationSet set = annotations_from_csv(csv);
    REQUIRE(set.items.size() == 2);
    CHECK(set.items[0].labels.at("r1") == Label::A);
    CHECK(set.items[1].labels.at("r2") == Label::tie);
    CHECK_THROWS_AS(annotations_from_csv("p1,r1,maybe\n"), ParseError);
}

TEST_CASE("run_ablation maps names onto pipeline flags") {
    const StoryRequest request = test::make_request();

    SUBCASE("skip_verification has no critique or revise calls") {
        gateway::Gateway gw(std::make_shared<gateway::ReplayBackend>(
            test::generate_only_transcript(), /*lenient=*/true));
        const auto result = run_ablation("skip_verification", request, gw);
        CHECK(result.trace.call_count() == 3);
        for (const auto& tag : result.trace.tags()) {
            CHECK(tag.find("critique") == std::string::npos);
            CHECK(tag.find("revise") == std::string::npos);
        }
        CHECK(result.trace.config == "skip_verification");
    }

    SUBCASE("direct is exactly one call") {
        gateway::Gateway gw(std::make_shared<gateway::ReplayBackend>(
            test::direct_transcript(), /*lenient=*/true));
        const auto result = run_ablation("direct", request, gw);
        CHECK(result.trace.call_count() == 1);
        CHECK(result.trace.config == "direct");
    }

    SUBCASE("skip_reflection binds the marker and drops reflection tags") {
        gateway::Transcript transcript;
        auto add = [&](const std::string& tag, const std::string& content) {
            transcript.append({"", tag, {content, gateway::FinishReason::stop, {}}});
        };
        add("outline.generate", test::outline_fixture());
        add("outline.critique", "REVISION: NO");
        add("narration.generate", test::narration_fixture());
        add("narration.critique", "REVISION: NO");
        gateway::Gateway gw(
            std::make_shared<gateway::ReplayBackend>(transcript, /*lenient=*/true));
        const auto result = run_ablation("skip_reflection", request, gw);
        for (const auto& tag : result.trace.tags())
            CHECK(tag.find("reflection") == std::string::npos);
        CHECK(result.trace.stages[0].calls[0].prompt.find("(reflection skipped)") !=
              std::string::npos);
    }

    SUBCASE("unknown names list the valid ones") {
        gateway::Gateway gw(std::make_shared<gateway::ScriptedBackend>());
        CHECK_THROWS_WITH_AS(run_ablation("skip_everything", request, gw),
                             doctest::Contains("skip_verification"), EvalError);
    }
}
