#include <doctest.h>

#include <algorithm>
#include <random>

#include "fixtures.hpp"
#include "igda/assessment.hpp"
#include "igda/errors.hpp"
#include "igda/prompts.hpp"

using namespace igda;
using igda::testing::data_path;
using igda::testing::read_json;
using igda::testing::read_text;

namespace {

GroundTruthGraph lawn() { return load_graph(data_path("prompt3.json")); }

LocalUpdateContext lawn_update(UpdateRelation relation) {
  LocalUpdateContext ctx;
  ctx.experiment = {0, 1};
  ctx.revealed = EdgeLabel::Present;
  ctx.experiment_prior = SignedConfidence(25);
  ctx.relation = relation;
  ctx.round = 1;
  if (relation == UpdateRelation::SharesParent) {
    ctx.target = {0, 2};
    ctx.target_confidence = SignedConfidence(-40);
  } else {
    ctx.target = {2, 1};
    ctx.target_confidence = SignedConfidence(-73.4);
  }
  return ctx;
}

}  // namespace

TEST_CASE("zero-shot prompt matches its golden byte for byte") {
  const auto g = lawn();
  const auto rendered = render_zero_shot_prompt(make_prompt_context(g, {0, 1}));
  CHECK(rendered == read_text(data_path("prompts/zero_shot_Rain_WetGrass.txt")));
  // Only the third variable is listed as "other".
  CHECK(rendered.find("Sprinkler: Whether the garden sprinkler") != std::string::npos);
  CHECK(rendered.find("\nRain: ") == std::string::npos);
}

TEST_CASE("parent-update prompt matches its golden byte for byte") {
  const auto g = lawn();
  CHECK(render_update_prompt(g, lawn_update(UpdateRelation::SharesParent)) ==
        read_text(data_path("prompts/parent_update.txt")));
}

TEST_CASE("child-update prompt matches its golden byte for byte") {
  const auto g = lawn();
  const auto rendered = render_update_prompt(g, lawn_update(UpdateRelation::SharesChild));
  CHECK(rendered == read_text(data_path("prompts/child_update.txt")));
  CHECK(rendered.find("(NOT Sprinkler->WetGrass, 73)") != std::string::npos);
}

TEST_CASE("prompt rendering edge cases") {
  auto g = lawn();
  g.variables[1].description.clear();
  const auto rendered = render_zero_shot_prompt(make_prompt_context(g, {0, 1}));
  CHECK(rendered.find("Information about WetGrass:\n\n") != std::string::npos);

  PromptContext same = make_prompt_context(g, {0, 1});
  same.parent = same.target;
  CHECK_THROWS_AS(render_zero_shot_prompt(same), ContractError);

  auto ctx = lawn_update(UpdateRelation::SharesParent);
  ctx.target = ctx.experiment;
  CHECK_THROWS_AS(render_update_prompt(g, ctx), ContractError);
  ctx = lawn_update(UpdateRelation::SharesParent);
  ctx.target_confidence = SignedConfidence(100);
  CHECK_THROWS_AS(render_update_prompt(g, ctx), ContractError);

  CHECK(render_edge(g, {2, 1}, SignedConfidence(-73.4)) == "(NOT Sprinkler->WetGrass, 73)");
  CHECK(render_edge(g, {2, 1}, SignedConfidence(0)) == "(Sprinkler->WetGrass,0)");
  CHECK(render_edge(g, {0, 1}, SignedConfidence(88.6)) == "(Rain->WetGrass,89)");
  CHECK(render_template("a {x} \\\nb {y_z}", {{"x", "{y_z}"}, {"y_z", "2"}}) == "a {y_z} b 2");
  CHECK_THROWS_AS(render_template("{missing}", {}), ContractError);
}

TEST_CASE("rendering is deterministic") {
  const auto g = lawn();
  const auto ctx = lawn_update(UpdateRelation::SharesChild);
  CHECK(render_update_prompt(g, ctx) == render_update_prompt(g, ctx));
}

TEST_CASE("parser reads every well-formed fixture") {
  const auto corpus = read_json("responses.json");
  std::size_t ok = 0;
  for (const auto& item : corpus["well_formed"]) {
    const auto text = item["text"].get<std::string>();
    const auto parsed = parse_assessment(text);
    const auto* a = std::get_if<EdgeAssessment>(&parsed);
    CAPTURE(text);
    REQUIRE(a != nullptr);
    CHECK((a->decision == Decision::Yes) == (item["decision"] == "YES"));
    CHECK(a->confidence == item["confidence"].get<int>());
    ok += a != nullptr;
  }
  CHECK(ok == corpus["well_formed"].size());
}

TEST_CASE("parser rejects every malformed class and keeps the raw text") {
  const auto corpus = read_json("responses.json");
  REQUIRE(corpus["malformed"].size() == 10);
  for (const auto& item : corpus["malformed"]) {
    const auto text = item["text"].get<std::string>();
    CAPTURE(item["class"].get<std::string>());
    const auto parsed = parse_assessment(text);
    const auto* failure = std::get_if<ParseFailure>(&parsed);
    REQUIRE(failure != nullptr);
    CHECK(failure->raw_text == text);
    CHECK_FALSE(failure->reason.empty());
  }
}

TEST_CASE("parser takes the last tags") {
  const auto parsed = parse_assessment(
      "<decision>YES</decision><confidence>10</confidence> hmm <decision>NOT CAUSAL</decision><confidence>60</confidence>");
  const auto& a = std::get<EdgeAssessment>(parsed);
  CHECK(a.decision == Decision::No);
  CHECK(a.confidence == 60);
  CHECK(std::holds_alternative<ParseFailure>(parse_assessment("<decision>YES</decision><confidence>150</confidence>")));
}

TEST_CASE("formatting then parsing is the identity for both vocabularies") {
  for (auto d : {Decision::Yes, Decision::No}) {
    for (int c = 1; c <= 100; ++c) {
      for (bool update_words : {false, true}) {
        const auto a = std::get<EdgeAssessment>(parse_assessment(format_assessment(d, c, update_words)));
        REQUIRE(a.decision == d);
        REQUIRE(a.confidence == c);
      }
    }
  }
}

TEST_CASE("sample aggregation is the signed mean") {
  const std::vector<EdgeAssessment> mixed{{Decision::Yes, 80, {}}, {Decision::No, 60, {}}, {Decision::Yes, 40, {}}};
  CHECK(aggregate_samples(mixed).value() == 20.0);
  CHECK(aggregate_samples(std::vector<EdgeAssessment>{{Decision::No, 50, {}}}).value() == -50.0);
  CHECK(aggregate_samples(std::vector<EdgeAssessment>(16, {Decision::Yes, 100, {}})).value() == 100.0);
  CHECK_THROWS_AS(aggregate_samples(std::vector<EdgeAssessment>{}), AggregationError);

  std::mt19937 rng(3);
  std::vector<EdgeAssessment> many;
  for (int k = 0; k < 16; ++k) many.push_back({rng() % 2 ? Decision::Yes : Decision::No, int(1 + rng() % 100), {}});
  const auto reference = aggregate_samples(many).value();
  for (int k = 0; k < 20; ++k) {
    std::shuffle(many.begin(), many.end(), rng);
    REQUIRE(aggregate_samples(many).value() == reference);
  }
  CHECK(reference <= 100.0);
  CHECK(reference >= -100.0);
}

TEST_CASE("edge lists and revisions from tagged blocks") {
  const auto g = lawn();
  std::size_t rejected = 0;
  const auto list = parse_edge_list("<experiments>\n(Rain->WetGrass)\n- Sprinkler->Rain\nFoo->Bar\n</experiments>", g,
                                    &rejected);
  REQUIRE(list.has_value());
  CHECK(*list == std::vector<EdgePair>{{0, 1}, {2, 0}});
  CHECK(rejected == 1);
  CHECK_FALSE(parse_edge_list("no block here", g).has_value());

  const auto revisions = parse_revisions("<updates>\n(Rain->Sprinkler,30)\n(NOT WetGrass->Rain, 80)\n</updates>", g);
  REQUIRE(revisions.has_value());
  REQUIRE(revisions->size() == 2);
  CHECK((*revisions)[0].pair == EdgePair{0, 2});
  CHECK((*revisions)[0].confidence.value() == 30.0);
  CHECK((*revisions)[1].confidence.value() == -80.0);
}
