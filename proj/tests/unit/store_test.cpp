#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <thread>

#include "mmtlab/annotate/store.hpp"
#include "mmtlab/error.hpp"

using namespace mmtlab::annotate;
using mmtlab::Errc;
namespace fs = std::filesystem;

namespace {

class StoreTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("mmtlab_store_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path dir_;
};

BatchRequest naturalness(std::size_t n, std::optional<std::string> key = std::nullopt) {
  BatchRequest r;
  r.kind = TaskKind::naturalness;
  for (std::size_t i = 0; i < n; ++i) r.naturalness.push_back({"sentence " + std::to_string(i), "sntnc"});
  r.batch_key = std::move(key);
  return r;
}

BatchRequest quality(std::size_t n, const std::string& subset, const std::string& language) {
  BatchRequest r;
  r.kind = TaskKind::quality;
  for (std::size_t i = 0; i < n; ++i) r.quality.push_back({"src", "tgt", "img" + std::to_string(i), subset, language});
  return r;
}

Verdict rating(const std::string& task, const std::string& who, int value) {
  Verdict v;
  v.task_id = task;
  v.annotator_id = who;
  v.rating = value;
  return v;
}

Verdict judged(const std::string& task, const std::string& who, Grade a, Grade f, ImageNeed need) {
  Verdict v;
  v.task_id = task;
  v.annotator_id = who;
  v.adequacy = a;
  v.fluency = f;
  v.image_need = need;
  return v;
}

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const mmtlab::Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::io;
}

}  // namespace

TEST_F(StoreTest, TwentyItemsGiveTwentyOpenTasks) {
  Store s(dir_);
  const auto r = s.create_batch(naturalness(20));
  ASSERT_EQ(r.tasks.size(), 20u);
  for (const auto& t : r.tasks) EXPECT_EQ(t.status, TaskStatus::open);
  EXPECT_TRUE(r.created);
}

TEST_F(StoreTest, EmptyBatchRejected) {
  Store s(dir_);
  EXPECT_EQ(code_of([&] { s.create_batch(naturalness(0)); }), Errc::invalid_argument);
}

TEST_F(StoreTest, ResubmissionWithSameKeyIsIdempotent) {
  Store s(dir_);
  const auto first = s.create_batch(naturalness(5, "round-1"));
  const auto second = s.create_batch(naturalness(5, "round-1"));
  EXPECT_FALSE(second.created);
  EXPECT_EQ(first.tasks, second.tasks);
  EXPECT_EQ(s.tasks().size(), 5u);
  EXPECT_EQ(code_of([&] { s.create_batch(naturalness(6, "round-1")); }), Errc::conflict);
}

TEST_F(StoreTest, NextTaskFollowsIdOrder) {
  Store s(dir_);
  const auto r = s.create_batch(naturalness(3));
  EXPECT_EQ(s.next_task(TaskKind::naturalness, "ann")->task_id, r.tasks[0].task_id);
  s.submit_verdict(rating(r.tasks[0].task_id, "ann", 4));
  EXPECT_EQ(s.next_task(TaskKind::naturalness, "ann")->task_id, r.tasks[1].task_id);
  s.submit_verdict(rating(r.tasks[1].task_id, "ann", 4));
  s.submit_verdict(rating(r.tasks[2].task_id, "ann", 4));
  EXPECT_FALSE(s.next_task(TaskKind::naturalness, "ann"));
  EXPECT_FALSE(s.next_task(TaskKind::quality, "ann"));
}

TEST_F(StoreTest, InterleavedAnnotatorsEachSeeEveryTaskOnce) {
  Store s(dir_);
  s.create_batch(naturalness(3));
  std::map<std::string, std::vector<std::string>> seen;
  for (int step = 0; step < 6; ++step) {
    const std::string who = step % 2 ? "bob" : "ann";
    const auto t = s.next_task(TaskKind::naturalness, who);
    ASSERT_TRUE(t);
    seen[who].push_back(t->task_id);
    s.submit_verdict(rating(t->task_id, who, 3));
  }
  EXPECT_EQ(seen["ann"], seen["bob"]);
  EXPECT_EQ(std::set<std::string>(seen["ann"].begin(), seen["ann"].end()).size(), 3u);
}

TEST_F(StoreTest, VerdictValidation) {
  Store s(dir_);
  const auto n = s.create_batch(naturalness(1)).tasks[0].task_id;
  const auto q = s.create_batch(quality(1, "test", "hi")).tasks[0].task_id;
  EXPECT_EQ(s.submit_verdict(rating(n, "a", 5)).rating, 5);
  EXPECT_EQ(code_of([&] { s.submit_verdict(rating(n, "a", 6)); }), Errc::invalid_argument);
  EXPECT_EQ(code_of([&] { s.submit_verdict(rating(n, "", 3)); }), Errc::invalid_argument);
  EXPECT_EQ(code_of([&] { s.submit_verdict(rating("T999999", "a", 3)); }), Errc::not_found);
  EXPECT_EQ(code_of([&] { s.submit_verdict(rating(q, "a", 3)); }), Errc::invalid_argument);
  Verdict partial = judged(q, "a", Grade::good, Grade::good, ImageNeed::no);
  partial.image_need.reset();
  EXPECT_EQ(code_of([&] { s.submit_verdict(partial); }), Errc::invalid_argument);
  EXPECT_GT(s.submit_verdict(judged(q, "a", Grade::good, Grade::bad, ImageNeed::maybe)).timestamp, 0);
}

TEST_F(StoreTest, LatestRatingWins) {
  Store s(dir_);
  const auto r = s.create_batch(naturalness(1));
  s.submit_verdict(rating(r.tasks[0].task_id, "a", 2));
  s.submit_verdict(rating(r.tasks[0].task_id, "a", 4));
  const auto rep = s.aggregate_naturalness(r.batch);
  EXPECT_EQ(rep.mean, 4.0);
  EXPECT_EQ(rep.ratings, 1u);
  EXPECT_EQ(s.verdicts().size(), 2u);
}

TEST_F(StoreTest, NaturalnessMeans) {
  Store s(dir_);
  const auto r = s.create_batch(naturalness(2));
  EXPECT_EQ(code_of([&] { s.aggregate_naturalness(r.batch); }), Errc::state);
  EXPECT_EQ(code_of([&] { s.aggregate_naturalness("nope"); }), Errc::not_found);
  s.submit_verdict(rating(r.tasks[0].task_id, "a", 4));
  s.submit_verdict(rating(r.tasks[1].task_id, "a", 5));
  EXPECT_EQ(s.aggregate_naturalness(r.batch).mean, 4.5);

  const auto twenty = s.create_batch(naturalness(20));
  std::mt19937 rng(4);
  long long sum = 0;
  for (const auto& t : twenty.tasks) {
    const int v = 1 + int(rng() % 5);
    sum += v;
    s.submit_verdict(rating(t.task_id, "a", v));
  }
  EXPECT_NEAR(s.aggregate_naturalness(twenty.batch).mean, double(sum) / 20.0, 1e-12);
}

TEST_F(StoreTest, ImageNeedPercentagesOnChallengeBatch) {
  Store s(dir_);
  const auto r = s.create_batch(quality(50, "challenge", "hi"));
  for (std::size_t i = 0; i < 50; ++i) {
    const ImageNeed need = i < 3 ? ImageNeed::yes : i < 5 ? ImageNeed::maybe : i < 47 ? ImageNeed::no
                                                                                       : ImageNeed::not_reflected;
    s.submit_verdict(judged(r.tasks[i].task_id, "a", Grade::good, Grade::medium, need));
  }
  const auto rep = s.aggregate_quality({std::string("challenge"), std::nullopt});
  EXPECT_EQ(rep.image_need, (std::array<double, 4>{6, 4, 84, 6}));
  EXPECT_EQ(rep.adequacy, (std::array<double, 3>{100, 0, 0}));
  EXPECT_EQ(rep.fluency, (std::array<double, 3>{0, 100, 0}));
  EXPECT_EQ(code_of([&] { s.aggregate_quality({std::string("test"), std::nullopt}); }), Errc::not_found);
}

TEST_F(StoreTest, LanguageFilterSkipsImageNeed) {
  Store s(dir_);
  const auto hi = s.create_batch(quality(2, "test", "hi"));
  const auto bn = s.create_batch(quality(2, "test", "bn"));
  s.submit_verdict(judged(hi.tasks[0].task_id, "a", Grade::good, Grade::good, ImageNeed::yes));
  s.submit_verdict(judged(hi.tasks[1].task_id, "a", Grade::bad, Grade::good, ImageNeed::yes));
  s.submit_verdict(judged(bn.tasks[0].task_id, "a", Grade::bad, Grade::bad, ImageNeed::no));
  s.submit_verdict(judged(bn.tasks[1].task_id, "a", Grade::bad, Grade::bad, ImageNeed::no));
  const auto rep = s.aggregate_quality({std::nullopt, std::string("hi")});
  EXPECT_EQ(rep.verdicts, 2u);
  EXPECT_EQ(rep.adequacy, (std::array<double, 3>{50, 0, 50}));
  EXPECT_EQ(rep.image_need_verdicts, 4u);
  EXPECT_EQ(rep.image_need[0], 50.0);
}

TEST_F(StoreTest, ReopenReplaysLog) {
  BatchResult r;
  {
    Store s(dir_);
    r = s.create_batch(naturalness(3, "k"));
    for (const auto& t : r.tasks) s.submit_verdict(rating(t.task_id, "a", 5));
  }
  Store again(dir_);
  EXPECT_EQ(again.tasks().size(), 3u);
  EXPECT_EQ(again.aggregate_naturalness(r.batch).mean, 5.0);
  EXPECT_FALSE(again.create_batch(naturalness(3, "k")).created);
}

TEST_F(StoreTest, TornTailIsDropped) {
  std::vector<Verdict> before;
  std::string batch;
  {
    Store s(dir_);
    const auto r = s.create_batch(naturalness(2));
    batch = r.batch;
    s.submit_verdict(rating(r.tasks[0].task_id, "a", 3));
    before = s.verdicts();
  }
  {
    std::ofstream log(dir_ / "events.jsonl", std::ios::app);
    log << R"({"type":"verdict","verdict":{"task_id":"T000)";
  }
  Store s(dir_);
  EXPECT_EQ(s.verdicts(), before);
  // the store stays writable and the next line lands cleanly
  s.submit_verdict(rating(s.tasks()[1].task_id, "a", 5));
  Store t(dir_);
  EXPECT_EQ(t.aggregate_naturalness(batch).mean, 4.0);
}

TEST_F(StoreTest, CorruptMiddleLineIsAnError) {
  {
    Store s(dir_);
    s.create_batch(naturalness(2));
  }
  std::string contents;
  {
    std::ifstream in(dir_ / "events.jsonl");
    contents.assign(std::istreambuf_iterator<char>(in), {});
  }
  {
    std::ofstream out(dir_ / "events.jsonl", std::ios::trunc);
    out << "{broken\n" << contents;
  }
  EXPECT_EQ(code_of([&] { Store s(dir_); }), Errc::data);
}

TEST_F(StoreTest, ConcurrentWritersAndReaders) {
  Store s(dir_);
  const auto r = s.create_batch(naturalness(40));
  std::vector<std::thread> threads;
  for (int w = 0; w < 4; ++w)
    threads.emplace_back([&, w] {
      for (const auto& t : r.tasks) s.submit_verdict(rating(t.task_id, "w" + std::to_string(w), 1 + w));
    });
  threads.emplace_back([&] {
    for (int i = 0; i < 200; ++i) (void)s.next_task(TaskKind::naturalness, "reader");
  });
  for (auto& t : threads) t.join();
  EXPECT_EQ(s.verdicts().size(), 160u);
  EXPECT_EQ(Store(dir_).verdicts().size(), 160u);
}

TEST(Percentages, SumToHundred) {
  EXPECT_EQ(percentages({3, 2, 42, 3}), (std::vector<double>{6, 4, 84, 6}));
  EXPECT_EQ(percentages({0, 0}), (std::vector<double>{0, 0}));
}

TEST(Names, RoundTrip) {
  EXPECT_EQ(parse_image_need("not reflected"), ImageNeed::not_reflected);
  EXPECT_EQ(parse_image_need(to_string(ImageNeed::maybe)), ImageNeed::maybe);
  EXPECT_EQ(parse_grade("medium"), Grade::medium);
  EXPECT_THROW(parse_grade("great"), mmtlab::Error);
  EXPECT_THROW(parse_task_kind("other"), mmtlab::Error);
}
