#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "slm/corpus.hpp"
#include "slm/synthetic.hpp"

namespace {

using namespace slm::corpus;

constexpr const char* kHeader =
    "storyid,storytitle,sentence1,sentence2,sentence3,sentence4,sentence5\n";

std::vector<Story> parse_csv(const std::string& body) {
  std::istringstream in(kHeader + body);
  return read_corpus(in, Format::CsvRoc);
}

std::vector<Story> numbered(std::size_t count) {
  std::vector<Story> out;
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back({"s" + std::to_string(i), {"a " + std::to_string(i), "b", "c"}});
  }
  return out;
}

TEST(LoadCorpus, SingleCsvRecord) {
  auto stories = parse_csv("id-1,Title,One.,Two.,Three.,Four.,Five.\n");
  ASSERT_EQ(stories.size(), 1u);
  EXPECT_EQ(stories[0].story_id, "id-1");
  ASSERT_EQ(stories[0].size(), 5u);
  EXPECT_EQ(stories[0].sentences[4], "Five.");
}

TEST(LoadCorpus, CsvQuotingAndCrlf) {
  auto stories = parse_csv(
      "x,\"T, t\",\"He said \"\"hi\"\".\",\"Two,\nlines.\", Three. ,Four.,Five.\r\n"
      "y,T,a,b,c,d,e");
  ASSERT_EQ(stories.size(), 2u);
  EXPECT_EQ(stories[0].sentences[0], "He said \"hi\".");
  EXPECT_EQ(stories[0].sentences[1], "Two,\nlines.");
  EXPECT_EQ(stories[0].sentences[2], "Three.");
  EXPECT_EQ(stories[1].sentences[4], "e");
}

TEST(LoadCorpus, BlankSentenceNamesTheRecord) {
  try {
    parse_csv("ok,T,a,b,c,d,e\nbad-one,T,a,b,   ,d,e\n");
    FAIL() << "expected a ParseError";
  } catch (const slm::ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_NE(std::string(e.what()).find("bad-one"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("sentence3"), std::string::npos);
  }
}

TEST(LoadCorpus, DuplicateStoryIdIsAnError) {
  EXPECT_THROW(parse_csv("a,T,1,2,3,4,5\na,T,1,2,3,4,5\n"), slm::ParseError);
}

TEST(LoadCorpus, MalformedCsvReportsLine) {
  try {
    parse_csv("a,T,1,2,3,4,5\nb,T,1,2,3\n");
    FAIL();
  } catch (const slm::ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  EXPECT_THROW(parse_csv("a,T,\"open,2,3,4,5\n"), slm::ParseError);
}

TEST(LoadCorpus, TwoChoiceRecordsAreRejected) {
  std::istringstream cloze(
      "InputStoryid,InputSentence1,InputSentence2,InputSentence3,InputSentence4,"
      "RandomFifthSentenceQuiz1,RandomFifthSentenceQuiz2,AnswerRightEnding\n"
      "q,1,2,3,4,5a,5b,1\n");
  EXPECT_THROW(read_corpus(cloze, Format::CsvRoc), slm::TwoChoiceStoryError);
  EXPECT_THROW(parse_csv("a,T,1,2,3,4,5a,5b\n"), slm::TwoChoiceStoryError);
}

TEST(LoadCorpus, WrongHeaderIsAnError) {
  std::istringstream in("id,title,s1,s2,s3,s4,s5\n");
  EXPECT_THROW(read_corpus(in, Format::CsvRoc), slm::ParseError);
}

TEST(LoadCorpus, JsonlVariableLength) {
  std::istringstream in(
      "{\"_meta\": {\"tool\": \"slm\"}}\n"
      "{\"story_id\": \"a\", \"sentences\": [\"x\", \"y\"]}\n"
      "\n"
      "{\"story_id\": \"b\", \"sentences\": [\"only\"]}\n");
  auto stories = read_corpus(in, Format::Jsonl);
  ASSERT_EQ(stories.size(), 2u);
  EXPECT_EQ(stories[0].size(), 2u);
  EXPECT_EQ(stories[1].size(), 1u);
}

TEST(LoadCorpus, JsonlErrors) {
  std::istringstream empty_sentence("{\"story_id\": \"a\", \"sentences\": [\"x\", \" \"]}\n");
  EXPECT_THROW(read_corpus(empty_sentence, Format::Jsonl), slm::ParseError);
  std::istringstream bad_json("{\"story_id\": \"a\", \n");
  EXPECT_THROW(read_corpus(bad_json, Format::Jsonl), slm::ParseError);
  std::istringstream no_sentences("{\"story_id\": \"a\", \"sentences\": []}\n");
  EXPECT_THROW(read_corpus(no_sentences, Format::Jsonl), slm::ParseError);
}

TEST(LoadCorpus, SerializeThenLoadIsIdempotent) {
  const auto original = slm::synthetic::routine_stories(12, 4);
  std::stringstream jsonl;
  write_jsonl(jsonl, original);
  EXPECT_EQ(read_corpus(jsonl, Format::Jsonl), original);

  std::stringstream csv;
  write_csv_roc(csv, original);
  EXPECT_EQ(read_corpus(csv, Format::CsvRoc), original);
}

TEST(ShuffleStory, SingleSentenceIsIdentity) {
  const Story s{"one", {"Only sentence."}};
  const auto shuffled = shuffle_story(s, 123);
  EXPECT_EQ(shuffled.gold_perm, std::vector<std::size_t>{0});
  EXPECT_EQ(shuffled.sentences, s.sentences);
}

TEST(ShuffleStory, DeterministicForSeed) {
  const Story s{"x", {"a", "b", "c", "d", "e"}};
  EXPECT_EQ(shuffle_story(s, 9), shuffle_story(s, 9));
}

TEST(ShuffleStory, RoundTripOverManySeeds) {
  const auto stories = slm::synthetic::routine_stories(20, 2);
  bool saw_non_identity = false;
  for (const auto& story : stories) {
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
      const auto sh = shuffle_story(story, seed);
      ASSERT_EQ(unshuffle(sh), story);
      for (std::size_t k = 0; k < sh.sentences.size(); ++k) {
        ASSERT_EQ(sh.sentences[k], story.sentences[sh.gold_perm[k]]);
      }
      auto sorted = sh.gold_perm;
      std::sort(sorted.begin(), sorted.end());
      ASSERT_EQ(sorted, (std::vector<std::size_t>{0, 1, 2, 3, 4}));
      saw_non_identity |= !std::is_sorted(sh.gold_perm.begin(), sh.gold_perm.end());
    }
  }
  EXPECT_TRUE(saw_non_identity);
}

TEST(SplitCorpus, ExactFractions) {
  const auto split = split_corpus(numbered(10), SplitSpec{{4, 5}, {1, 10}, {1, 10}, 7});
  EXPECT_EQ(split.train.size(), 8u);
  EXPECT_EQ(split.validation.size(), 1u);
  EXPECT_EQ(split.test.size(), 1u);
}

TEST(SplitCorpus, Deterministic) {
  const auto stories = numbered(50);
  const SplitSpec spec{{4, 5}, {1, 10}, {1, 10}, 3};
  const auto a = split_corpus(stories, spec);
  const auto b = split_corpus(stories, spec);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.validation, b.validation);
  EXPECT_EQ(a.test, b.test);
}

TEST(SplitCorpus, IsAPartition) {
  for (std::size_t count : {1u, 3u, 10u, 37u, 101u}) {
    const auto stories = numbered(count);
    const auto split = split_corpus(stories, SplitSpec{{4, 5}, {1, 10}, {1, 10}, count});
    std::multiset<std::string> ids;
    for (const auto* part : {&split.train, &split.validation, &split.test})
      for (const auto& s : *part) ids.insert(s.story_id);
    ASSERT_EQ(ids.size(), count);
    for (const auto& s : stories) ASSERT_EQ(ids.count(s.story_id), 1u);
  }
}

// floor(98162 * 1/10) = 9816 for validation and test, remainder
// 98162 - 2 * 9816 = 78530 to train.
TEST(SplitCorpus, FullCorpusSizesFollowFloorRule) {
  std::vector<int> ids(98162);
  const auto split = split_items(ids, SplitSpec{{4, 5}, {1, 10}, {1, 10}, 1});
  EXPECT_EQ(split.train.size(), 78530u);
  EXPECT_EQ(split.validation.size(), 9816u);
  EXPECT_EQ(split.test.size(), 9816u);
}

TEST(SplitCorpus, FractionsMustSumToOne) {
  EXPECT_THROW(split_corpus(numbered(5), SplitSpec{{4, 5}, {1, 10}, {1, 5}, 0}),
               slm::ValidationError);
  EXPECT_THROW(split_corpus(numbered(5), SplitSpec{{1, 1}, {0, 1}, {0, 1}, 0}),
               slm::ValidationError);
  EXPECT_THROW(split_corpus({}, SplitSpec{}), slm::ValidationError);
}

TEST(SplitCorpus, ParseFraction) {
  EXPECT_EQ(parse_fraction("0.8"), (Fraction{8, 10}));
  EXPECT_EQ(parse_fraction("4/5"), (Fraction{4, 5}));
  EXPECT_EQ(parse_fraction(".1"), (Fraction{1, 10}));
  EXPECT_THROW(parse_fraction("1/0"), slm::ValidationError);
  EXPECT_THROW(parse_fraction("abc"), slm::ValidationError);
  SplitSpec spec{parse_fraction("0.8"), parse_fraction("0.1"), parse_fraction("1/10"), 0};
  EXPECT_NO_THROW(validate(spec));
}

}  // namespace
