#include <gtest/gtest.h>

#include <numeric>
#include <sstream>

#include "pore/ratings.hpp"
#include "support.hpp"

using namespace pore;

namespace {

LoadedRatings parse(const std::string& text, RatingFormat f = RatingFormat::MovieLensTab,
                    RatingDomain d = {}) {
  std::istringstream in(text);
  return parse_ratings(in, f, d);
}

}  // namespace

TEST(Load, SingleLineRemapsToZero) {
  const auto r = parse("1\t7\t5\t0\n");
  ASSERT_EQ(r.matrix.n_users(), 1u);
  ASSERT_EQ(r.matrix.n_items(), 1u);
  const auto e = r.matrix.entries();
  ASSERT_EQ(e.size(), 1u);
  EXPECT_EQ(e[0].user, 0u);
  EXPECT_EQ(e[0].item, 0u);
  EXPECT_EQ(e[0].score, 5.0);
  EXPECT_EQ(r.ids.users[0], 1);
  EXPECT_EQ(r.ids.items[0], 7);
}

TEST(Load, MalformedLineNamesLine) {
  try {
    parse("1 7\n");
    FAIL() << "expected a parse error";
  } catch (const ParseError& ex) {
    EXPECT_EQ(ex.line(), 1u);
  }
  try {
    parse("1\t2\t3\t4\n\n5\tx\t3\t1\n");
    FAIL();
  } catch (const ParseError& ex) {
    EXPECT_EQ(ex.line(), 3u);
  }
}

TEST(Load, EmptyFileIsAnError) {
  EXPECT_THROW(parse(""), Error);
  EXPECT_THROW(parse("\n  \n"), Error);
}

TEST(Load, RatingOutsideDomain) {
  EXPECT_THROW(parse("1\t1\t6\t0\n"), ParseError);
  EXPECT_THROW(parse("1\t1\t0\t0\n"), ParseError);  // zero means unrated
  EXPECT_THROW(parse("1,1,3\n", RatingFormat::GenericCsv, RatingDomain::enumerated({1, 5})),
               ParseError);
  EXPECT_NO_THROW(parse("1,1,5\n", RatingFormat::GenericCsv, RatingDomain::enumerated({1, 5})));
}

TEST(Load, DuplicatePairReportsLaterLine) {
  try {
    parse("1\t1\t3\t0\n2\t1\t3\t0\n1\t1\t4\t0\n");
    FAIL();
  } catch (const ParseError& ex) {
    EXPECT_EQ(ex.line(), 3u);
  }
}

TEST(Load, OtherFormats) {
  const auto dat = parse("10::20::4::978300760\n10::30::2::978300761\n", RatingFormat::MovieLensDat);
  EXPECT_EQ(dat.matrix.n_users(), 1u);
  EXPECT_EQ(dat.matrix.n_items(), 2u);
  EXPECT_EQ(dat.matrix.score(0, 1), 2.0);
  const auto csv = parse("3,9,1.5\n1,9,2\n", RatingFormat::GenericCsv);
  EXPECT_EQ(csv.matrix.n_users(), 2u);
  EXPECT_EQ(csv.matrix.score(csv.ids.user_index(3), 0), 1.5);
  EXPECT_THROW(parse("1,2,3,4,5\n", RatingFormat::GenericCsv), ParseError);
  EXPECT_EQ(parse_rating_format("movielens-100k-tab"), RatingFormat::MovieLensTab);
  EXPECT_EQ(parse_rating_format("movielens-dat-double-colon"), RatingFormat::MovieLensDat);
  EXPECT_EQ(parse_rating_format("generic-csv"), RatingFormat::GenericCsv);
  EXPECT_THROW(parse_rating_format("xml"), Error);
}

TEST(Load, IdRemapRoundTrips) {
  const auto r = parse("40\t9\t1\t0\n7\t300\t2\t0\n40\t300\t3\t0\n-2\t9\t4\t0\n");
  for (UserId u = 0; u < r.matrix.n_users(); ++u) EXPECT_EQ(r.ids.user_index(r.ids.users[u]), u);
  for (ItemId i = 0; i < r.matrix.n_items(); ++i) EXPECT_EQ(r.ids.item_index(r.ids.items[i]), i);
  EXPECT_EQ(r.ids.users, (std::vector<std::int64_t>{-2, 7, 40}));
  EXPECT_THROW(r.ids.user_index(8), Error);
}

TEST(Matrix, RejectsInvalidEntries) {
  EXPECT_THROW(RatingMatrix(2, 2, {{0, 0, 3}, {0, 0, 4}}), Error);
  EXPECT_THROW(RatingMatrix(2, 2, {{2, 0, 3}}), Error);
  EXPECT_THROW(RatingMatrix(2, 2, {{0, 0, 0}}), Error);
  EXPECT_THROW(RatingMatrix(2, 2, {{0, 0, 9}}), Error);
}

TEST(Matrix, AppendUsers) {
  const auto m = test::dense({{1, 0, 2}, {0, 3, 0}});
  std::vector<std::vector<std::pair<ItemId, double>>> fake{{{2, 5.0}}, {}};
  const auto p = m.with_appended_users(fake);
  EXPECT_EQ(p.n_users(), 4u);
  EXPECT_EQ(p.score(2, 2), 5.0);
  EXPECT_EQ(p.count(3), 0u);
  EXPECT_EQ(p.score(0, 2), 2.0);
}

TEST(Split, FourRatingsGiveThreeAndOne) {
  const auto m = test::dense({{1, 2, 3, 4, 0}});
  const auto s = split_train_test(m, 0.75, 3);
  EXPECT_EQ(s.train.count(0), 3u);
  EXPECT_EQ(s.test.of(0).size(), 1u);
}

TEST(Split, FullFractionLeavesTestEmpty) {
  const auto m = test::dense({{1, 2, 0}, {0, 4, 5}});
  const auto s = split_train_test(m, 1.0, 3);
  for (UserId u = 0; u < 2; ++u) EXPECT_TRUE(s.test.of(u).empty());
  EXPECT_EQ(s.train.nnz(), m.nnz());
}

TEST(Split, BadFraction) {
  const auto m = test::dense({{1, 2}});
  EXPECT_THROW(split_train_test(m, 0.0, 1), Error);
  EXPECT_THROW(split_train_test(m, 1.5, 1), Error);
  EXPECT_THROW(split_train_test(m, -0.1, 1), Error);
}

TEST(Split, SingleRatingUserKeepsOneForTraining) {
  const auto m = test::dense({{3, 0}, {1, 2}});
  const auto s = split_train_test(m, 0.4, 1);
  EXPECT_EQ(s.train.count(0), 1u);
  EXPECT_TRUE(s.test.of(0).empty());
}

TEST(Split, PartitionAndDeterminism) {
  Rng rng(11);
  std::vector<std::vector<double>> rows(30, std::vector<double>(40, 0));
  for (auto& row : rows) {
    for (auto& v : row)
      if (rng.uniform() < 0.3) v = 1 + static_cast<double>(rng.below(5));
    row[rng.below(40)] = 3;
  }
  const auto m = test::dense(rows);
  const auto a = split_train_test(m, 0.75, 42);
  const auto b = split_train_test(m, 0.75, 42);
  const auto c = split_train_test(m, 0.75, 43);
  bool differs = false;
  for (UserId u = 0; u < m.n_users(); ++u) {
    EXPECT_EQ(a.train.count(u) + a.test.of(u).size(), m.count(u));
    EXPECT_EQ(a.train.count(u), train_count(m.count(u), 0.75));
    for (ItemId i : a.test.of(u)) {
      EXPECT_TRUE(m.has_rating(u, i));
      EXPECT_FALSE(a.train.has_rating(u, i));
    }
    EXPECT_EQ(a.test.of(u), b.test.of(u));
    const auto ta = a.train.items_of(u), tb = b.train.items_of(u);
    EXPECT_TRUE(std::equal(ta.begin(), ta.end(), tb.begin(), tb.end()));
    differs = differs || a.test.of(u) != c.test.of(u);
  }
  EXPECT_TRUE(differs);
  EXPECT_EQ(a.train.n_items(), m.n_items());
}

TEST(Split, TrainCountFloor) {
  EXPECT_EQ(train_count(100, 0.29), 29u);
  EXPECT_EQ(train_count(7, 0.75), 5u);
  EXPECT_EQ(train_count(1, 0.75), 1u);
  EXPECT_EQ(train_count(10, 1.0), 10u);
}

TEST(MovieLens100k, DimensionsAndTrainSize) {
  if (!test::have_ml100k()) GTEST_SKIP() << "ml-100k not found at " << test::ml100k_path();
  const auto data = load_ratings(test::ml100k_path(), RatingFormat::MovieLensTab);
  EXPECT_EQ(data.matrix.n_users(), 943u);
  EXPECT_EQ(data.matrix.n_items(), 1682u);
  EXPECT_EQ(data.matrix.nnz(), 100000u);
  const auto s = split_train_test(data.matrix, 0.75, 1);
  const double mean = static_cast<double>(s.train.nnz()) / 943.0;
  EXPECT_NEAR(mean, 79.5, 1.0);
  std::size_t expect = 0;
  for (UserId u = 0; u < 943; ++u) expect += train_count(data.matrix.count(u), 0.75);
  EXPECT_EQ(s.train.nnz(), expect);
}
