#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "hashrag/corpus.hpp"
#include "hashrag/error.hpp"
#include "test_util.hpp"

namespace hashrag {
namespace {

using testing::ErrorMessage;

Corpus Parse(const std::string& text) {
  std::istringstream in(text);
  return ParseCorpus(in);
}

const char* kTwoDocs =
    R"({"kind":"doc","doc_id":"d1","title":"One","text":"First document."}
{"kind":"prop","prop_id":"p1","doc_id":"d1","ordinal":0,"text":"a"}
{"kind":"prop","prop_id":"p2","doc_id":"d1","ordinal":1,"text":"b"}
{"kind":"prop","prop_id":"p3","doc_id":"d2","ordinal":0,"text":"c"}
{"kind":"doc","doc_id":"d2","title":"Two","text":"Second document."}
{"kind":"prop","prop_id":"p4","doc_id":"d2","ordinal":1,"text":"d"}
{"kind":"prop","prop_id":"p5","doc_id":"d2","ordinal":2,"text":"e"}
)";

TEST_CASE("corpus: two documents, five propositions") {
  Corpus c = Parse(kTwoDocs);
  CHECK(c.size() == 5);
  CHECK(c.documents().size() == 2);
  CHECK(c.prop(0).prop_id == "p1");
  CHECK(c.prop(4).prop_id == "p5");
  CHECK(c.DocOf("p3") == "d2");
  CHECK(c.PropIndex("p4") == 3);
  CHECK_FALSE(c.PropIndex("zz").has_value());
  CHECK(c.document("d2").title == "Two");
}

TEST_CASE("corpus: dangling reference names the missing document") {
  std::string msg = ErrorMessage([] {
    Parse(R"({"kind":"doc","doc_id":"d1","title":"t","text":"x"}
{"kind":"prop","prop_id":"p1","doc_id":"d9","ordinal":0,"text":"a"}
)");
  });
  CHECK(msg.find("\"d9\"") != std::string::npos);
}

TEST_CASE("corpus: empty input") {
  CHECK(ErrorMessage([] { Parse(""); }) == "empty corpus");
  CHECK(ErrorMessage([] { Parse("\n\n"); }) == "empty corpus");
}

TEST_CASE("corpus: malformed line reports its number") {
  std::string msg = ErrorMessage([] {
    Parse(R"({"kind":"doc","doc_id":"d1","title":"t","text":"x"}
{"kind":"prop", oops
)");
  });
  CHECK(msg.find("line 2") != std::string::npos);
}

TEST_CASE("corpus: validation errors") {
  const std::string doc = R"({"kind":"doc","doc_id":"d1","title":"t","text":"x"})"
                          "\n";
  SUBCASE("duplicate prop_id") {
    auto msg = ErrorMessage([&] {
      Parse(doc + R"({"kind":"prop","prop_id":"p1","doc_id":"d1","ordinal":0,"text":"a"}
{"kind":"prop","prop_id":"p1","doc_id":"d1","ordinal":1,"text":"b"}
)");
    });
    CHECK(msg.find("duplicate prop_id") != std::string::npos);
  }
  SUBCASE("duplicate doc_id") {
    auto msg = ErrorMessage([&] {
      Parse(doc + doc + R"({"kind":"prop","prop_id":"p1","doc_id":"d1","ordinal":0,"text":"a"})");
    });
    CHECK(msg.find("duplicate doc_id") != std::string::npos);
  }
  SUBCASE("duplicate ordinal") {
    auto msg = ErrorMessage([&] {
      Parse(doc + R"({"kind":"prop","prop_id":"p1","doc_id":"d1","ordinal":0,"text":"a"}
{"kind":"prop","prop_id":"p2","doc_id":"d1","ordinal":0,"text":"b"}
)");
    });
    CHECK(msg.find("duplicate ordinal") != std::string::npos);
  }
  SUBCASE("empty text") {
    CHECK_FALSE(ErrorMessage([&] {
      Parse(doc + R"({"kind":"prop","prop_id":"p1","doc_id":"d1","ordinal":0,"text":""})");
    }).empty());
  }
  SUBCASE("unknown kind") {
    CHECK_FALSE(ErrorMessage([&] { Parse(R"({"kind":"chapter"})"); }).empty());
  }
}

TEST_CASE("corpus: errors are input errors") {
  ErrorKind kind = ErrorKind::kNumeric;
  ErrorMessage([] { Parse(""); }, &kind);
  CHECK(kind == ErrorKind::kInput);
}

TEST_CASE("corpus: canonical serialization round-trips") {
  Corpus c = Parse(kTwoDocs);
  std::ostringstream first;
  WriteCorpus(first, c);
  Corpus again = Parse(first.str());
  std::ostringstream second;
  WriteCorpus(second, again);
  CHECK(first.str() == second.str());
  CHECK(again.PropIds() == c.PropIds());

  // Canonical input is reproduced byte for byte.
  const std::string fixture = testing::ReadText(testing::DataPath("fixture_corpus.jsonl"));
  std::ostringstream out;
  WriteCorpus(out, Parse(fixture));
  CHECK(out.str() == fixture);
}

TEST_CASE("corpus: DocsOf examples") {
  Corpus c = Parse(kTwoDocs);
  std::vector<std::string> a = {"p1", "p2", "p3"};
  CHECK(DocsOf(c, a) == std::vector<std::string>{"d1", "d2"});
  CHECK(DocsOf(c, std::vector<std::string>{}).empty());
  std::vector<std::string> b = {"p3", "p1", "p2"};
  CHECK(DocsOf(c, b) == std::vector<std::string>{"d2", "d1"});
  std::vector<std::string> bad = {"p1", "nope"};
  CHECK_THROWS_AS(DocsOf(c, bad), Error);
}

TEST_CASE("corpus: DocsOf is a duplicate-free first-occurrence subsequence") {
  Corpus c = Parse(kTwoDocs);
  auto ids = c.PropIds();
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::string> pick;
    std::uniform_int_distribution<std::size_t> len(0, 8), which(0, ids.size() - 1);
    for (std::size_t n = len(rng); n > 0; --n) pick.push_back(ids[which(rng)]);

    auto docs = DocsOf(c, pick);
    std::vector<std::string> expected;
    for (const auto& p : pick) {
      const auto& d = c.DocOf(p);
      if (std::find(expected.begin(), expected.end(), d) == expected.end()) {
        expected.push_back(d);
      }
    }
    CHECK(docs == expected);
  }
}

}  // namespace
}  // namespace hashrag
