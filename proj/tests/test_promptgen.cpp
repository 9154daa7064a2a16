#include <doctest.h>

#include "support.hpp"
#include "tfw/error.hpp"
#include "tfw/promptgen.hpp"

using namespace tfw;

namespace {

const TaskSchema& schema_for(TaskId task) { return SchemaRegistry::builtin().get(task); }

MixedSample sample(std::string id, std::string text, std::string label, std::vector<LabelSpanPair> pairs,
                   TaskId task = TaskId::kScposRw) {
  return {std::move(id), std::move(text), std::move(label), std::move(pairs), task};
}

}  // namespace

TEST_CASE("expected TFW answer is the pairs line then the label") {
  const auto tmpl = TemplateLibrary().load("en", TaskId::kScposRw, Strategy::kTfw);
  const auto s = sample("s1", "The ramen was delicious.", "positive", {{"positive", "delicious"}});
  CHECK(expected_answer(Strategy::kTfw, tmpl, s) == ":positive;delicious\npositive");
  CHECK(expected_answer(Strategy::kBaselineIclIl, tmpl, s) == "positive");
  CHECK(expected_answer(Strategy::kTfwExtra, tmpl, s) == "positive");
}

TEST_CASE("render_pairs concatenates pairs") {
  const std::vector<LabelSpanPair> pairs{{"people", "Tanaka"}, {"places", "東京"}};
  CHECK(render_pairs(pairs) == ":people;Tanaka:places;東京");
  CHECK(render_pairs(std::vector<LabelSpanPair>{}).empty());
}

TEST_CASE("TFW prompt layout matches the golden rendering") {
  const auto& schema = schema_for(TaskId::kScposRw);
  const auto tmpl = TemplateLibrary().load("en", schema.task, Strategy::kTfw);
  const std::vector<MixedSample> shots{
      sample("e1", "The ramen was delicious.", "positive", {{"positive", "delicious"}})};
  const auto target = sample("t1", "The room was cramped.", "negative", {{"negative", "cramped"}});
  const auto bundle = build_prompt(Strategy::kTfw, tmpl, schema, shots, target);
  const std::string question =
      "Step 1: Find the words in the text above that belong to the named entities (positive, neutral, negative) "
      "and list every label-span pair on one line in a uniform format (e.g. :positive;delicious).\n"
      "Step 2: Using the label-span pairs from step 1, decide which category the whole text belongs to "
      "(positive, negative) and write the category name on the next line.";
  const std::string expected = "The ramen was delicious.\n\n" + question +
                               "\n\n:positive;delicious\npositive\n\nThe room was cramped.\n\n" + question;
  CHECK(bundle.rendered == expected);
  CHECK(bundle.parts.size() == 5);
  CHECK(bundle.sample_id == "t1");
}

TEST_CASE("block counts follow the shot count") {
  for (const auto& schema : SchemaRegistry::builtin().all()) {
    const auto corpus = gen_fixtures(schema, 4, 11);
    const std::span exemplars(corpus.data(), static_cast<std::size_t>(schema.icl_shots));
    for (auto strategy : {Strategy::kBaselineIclIl, Strategy::kTfw, Strategy::kTfwExtra}) {
      const auto tmpl = TemplateLibrary().load("en", schema.task, strategy);
      const auto bundle = build_prompt(strategy, tmpl, schema, exemplars, corpus.back());
      CHECK(bundle.parts.size() == 3 * static_cast<std::size_t>(schema.icl_shots) + 2);
      CHECK(bundle.parts.back().kind == BlockKind::kQuestion);
      CHECK(bundle.parts[bundle.parts.size() - 2].kind == BlockKind::kTargetText);
      CHECK(bundle.rendered.find('{') == std::string::npos);
    }
  }
}

TEST_CASE("TFW Extra injects each sample's own gold pairs") {
  const auto& schema = schema_for(TaskId::kScposRw);
  const auto tmpl = TemplateLibrary().load("en", schema.task, Strategy::kTfwExtra);
  const std::vector<MixedSample> shots{sample("e1", "Good tea.", "positive", {{"positive", "Good"}})};
  const auto target = sample("t1", "Bad tea.", "negative", {{"negative", "Bad"}});
  const auto bundle = build_prompt(Strategy::kTfwExtra, tmpl, schema, shots, target);
  CHECK(bundle.parts[1].text.find(":positive;Good") != std::string::npos);
  CHECK(bundle.parts[4].text.find(":negative;Bad") != std::string::npos);
  CHECK(bundle.parts[4].text.find(":positive;Good") == std::string::npos);
  CHECK(bundle.parts[2].text == "positive");
}

TEST_CASE("build_prompt rejects wrong shot counts and leaked targets") {
  const auto& schema = schema_for(TaskId::kTcree);
  const auto corpus = gen_fixtures(schema, 4, 2);
  const auto tmpl = TemplateLibrary().load("en", schema.task, Strategy::kTfw);
  CHECK_THROWS(build_prompt(Strategy::kTfw, tmpl, schema, std::span(corpus).first(1), corpus[3]));
  CHECK_THROWS(build_prompt(Strategy::kTfw, tmpl, schema, std::span(corpus).first(2), corpus[1]));
}

TEST_CASE("turn layout splits exemplars into user and assistant messages") {
  const auto& schema = schema_for(TaskId::kTcree);
  const auto corpus = gen_fixtures(schema, 3, 4);
  const auto tmpl = TemplateLibrary().load("en", schema.task, Strategy::kTfw);
  const auto bundle = build_prompt(Strategy::kTfw, tmpl, schema, std::span(corpus).first(2), corpus[2]);
  const auto turns = bundle.messages(ChatLayout::kTurns);
  REQUIRE(turns.size() == 5);
  CHECK(turns[1].role == "assistant");
  CHECK(turns[1].content == expected_answer(Strategy::kTfw, tmpl, corpus[0]));
  CHECK(turns[4].role == "user");
  const auto single = bundle.messages(ChatLayout::kSingleUser);
  REQUIRE(single.size() == 1);
  CHECK(single[0].content == bundle.rendered);
}

TEST_CASE("fill_placeholders fails loudly on unresolved names") {
  CHECK(fill_placeholders("a {x} b", {{"x", "1"}}) == "a 1 b");
  CHECK(fill_placeholders("json {\"k\": 1} {}", {}) == "json {\"k\": 1} {}");
  try {
    fill_placeholders("hello {name}", {});
    FAIL("expected RenderError");
  } catch (const RenderError& e) {
    CHECK(e.placeholder() == "name");
  }
}

TEST_CASE("template validation requires each placeholder once") {
  PromptTemplate tmpl;
  tmpl.question_stage2 = "Pick one: {text_label_list}";
  CHECK_NOTHROW(tmpl.validate(Strategy::kBaselineIclIl));
  CHECK_THROWS_AS(tmpl.validate(Strategy::kTfw), ConfigError);
  tmpl.question_stage2 = "{text_label_list} or {text_label_list}";
  CHECK_THROWS_AS(tmpl.validate(Strategy::kBaselineIclIl), ConfigError);
  CHECK_THROWS_AS(PromptTemplate::from_yaml("question_stage2: x\nbogus: y\n"), ConfigError);
}

TEST_CASE("japanese templates use the ideographic list separator") {
  const auto& schema = schema_for(TaskId::kScposRw);
  const auto tmpl = TemplateLibrary().load("ja", schema.task, Strategy::kTfw);
  const auto s = sample("s", "美味しい料理。", "positive", {{"positive", "美味しい"}});
  const auto question = render_question(Strategy::kTfw, tmpl, schema, s);
  CHECK(question.find("positive、neutral、negative") != std::string::npos);
  CHECK(question.find(":positive;美味しい") != std::string::npos);
}

TEST_CASE("template directory overrides resolve per task before per language") {
  const auto root = tfw::testing::scratch_dir("templates");
  tfw::testing::write_file(root / "en" / "baseline_icl_il.yaml", "question_stage2: 'generic {text_label_list}'\n");
  tfw::testing::write_file(root / "en" / "tcree" / "baseline_icl_il.yaml",
                           "question_stage2: 'tcree {text_label_list}'\n");
  const TemplateLibrary library(root);
  CHECK(library.load("en", TaskId::kTcree, Strategy::kBaselineIclIl).question_stage2 == "tcree {text_label_list}");
  CHECK(library.load("en", TaskId::kScnm, Strategy::kBaselineIclIl).question_stage2 == "generic {text_label_list}");
  CHECK_THROWS(library.load("en", TaskId::kScnm, Strategy::kTfw));
  CHECK_THROWS(TemplateLibrary().load("xx", TaskId::kScnm, Strategy::kTfw));
}

TEST_CASE("strategy names parse leniently") {
  CHECK(parse_strategy("TFW_EXTRA") == Strategy::kTfwExtra);
  CHECK(parse_strategy("TFW Extra") == Strategy::kTfwExtra);
  CHECK(parse_strategy("baseline-icl-il") == Strategy::kBaselineIclIl);
  CHECK(parse_strategy("ICL+IL") == Strategy::kBaselineIclIl);
  CHECK_THROWS(parse_strategy("cot"));
  CHECK(display_name(Strategy::kTfwExtra) == "TFW Extra");
}
