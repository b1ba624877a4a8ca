#include <doctest.h>

#include <cmath>

#include "metric_oracle.hpp"
#include "seqdn/errors.hpp"
#include "seqdn/eval.hpp"
#include "seqdn/rng.hpp"

using namespace seqdn;

TEST_CASE("rank cases") {
  std::vector<double> s{0.9, 0.8, 0.7, 0.1};
  auto r1 = rank_and_score(s, 1);
  CHECK(r1.rank == 1);
  CHECK(r1.ndcg[0] == 1.0);
  CHECK(r1.hr[0] == 1.0);
  auto r3 = rank_and_score(s, 3);
  CHECK(r3.rank == 3);
  CHECK(r3.ndcg[0] == 0.5);
  std::vector<double> big(30, 0.0);
  for (std::size_t j = 0; j < 30; ++j) big[j] = 30.0 - static_cast<double>(j);
  auto r21 = rank_and_score(big, 21);
  CHECK(r21.rank == 21);
  for (int k = 0; k < 3; ++k) {
    CHECK(r21.hr[k] == 0.0);
    CHECK(r21.ndcg[k] == 0.0);
  }
  // Ties rank the lower index first.
  std::vector<double> tie{0.5, 0.5, 0.5};
  CHECK(rank_and_score(tie, 1).rank == 1);
  CHECK(rank_and_score(tie, 3).rank == 3);
  CHECK_THROWS(rank_and_score(s, 0));
  std::vector<double> nan{NAN, 1.0};
  CHECK_THROWS_AS(rank_and_score(nan, 1), NumericError);
}

TEST_CASE("evaluator equals brute force on ten users") {
  const auto split = testing::ten_user_split();
  testing::TableScorer scorer(30);
  for (Stage stage : {Stage::valid, Stage::test}) {
    EvalOptions opts;
    opts.batch_size = 3;
    opts.buckets = false;
    const auto report = evaluate(scorer, split, stage, opts);
    std::array<double, 3> hr_lo{}, hr_hi{}, nd_lo{}, nd_hi{};
    for (std::size_t u = 0; u < 10; ++u) {
      const auto& us = split.users[u];
      const std::size_t target = stage == Stage::valid ? us.valid.target : us.test.target;
      const auto m = testing::oracle_metrics(scorer.row(u), target);
      // Per-user metrics through the evaluator on a one-user split.
      DatasetSplit one = split;
      one.users = {us};
      const auto single = evaluate(scorer, one, stage, opts);
      for (int k = 0; k < 3; ++k) {
        CHECK(single.hr[k] == m.hr[k]);
        CHECK(single.ndcg[k] == m.ndcg[k]);
        // Halves summed separately, then added.
        (u < 5 ? hr_lo : hr_hi)[k] += m.hr[k];
        (u < 5 ? nd_lo : nd_hi)[k] += m.ndcg[k];
      }
    }
    for (int k = 0; k < 3; ++k) {
      CHECK(report.hr[k] == (hr_lo[k] + hr_hi[k]) / 10.0);
      CHECK(report.ndcg[k] == (nd_lo[k] + nd_hi[k]) / 10.0);
    }
  }
}

namespace {

class TargetFirst final : public Scorer {
 public:
  explicit TargetFirst(std::size_t n) : n_(n) {}
  std::vector<double> score(std::span<const EvalCase> batch) override {
    std::vector<double> out(batch.size() * n_, 0.0);
    for (std::size_t b = 0; b < batch.size(); ++b) out[b * n_ + batch[b].target - 1] = 1.0;
    return out;
  }

 private:
  std::size_t n_;
};

class UniformRandom final : public Scorer {
 public:
  UniformRandom(std::size_t n, std::uint64_t seed) : n_(n), rng_(seed) {}
  std::vector<double> score(std::span<const EvalCase> batch) override {
    std::vector<double> out(batch.size() * n_);
    for (auto& v : out) v = rng_.uniform();
    return out;
  }

 private:
  std::size_t n_;
  Rng rng_;
};

DatasetSplit many_users(std::size_t users, std::size_t items) {
  DatasetSplit s;
  for (std::size_t i = 1; i <= items; ++i) s.catalog.add_item("i" + std::to_string(i));
  for (std::size_t u = 0; u < users; ++u) {
    s.catalog.add_user("u" + std::to_string(u));
    UserSplit us;
    us.user = u;
    us.train = {1 + u % items, 1 + (u + 1) % items};
    us.valid = {us.train, 1 + (u * 7) % items};
    us.test = {us.train, 1 + (u * 3 + 1) % items};
    s.users.push_back(us);
  }
  return s;
}

}  // namespace

TEST_CASE("oracle model scores one everywhere") {
  const auto split = many_users(20, 40);
  TargetFirst scorer(40);
  const auto r = evaluate(scorer, split, Stage::test);
  for (int k = 0; k < 3; ++k) {
    CHECK(r.hr[k] == 1.0);
    CHECK(r.ndcg[k] == 1.0);
  }
}

TEST_CASE("uniform random scorer hits K/n within 3 sigma") {
  const std::size_t users = 2000, items = 100;
  const auto split = many_users(users, items);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    UniformRandom scorer(items, seed);
    const auto r = evaluate(scorer, split, Stage::test, {64, 5, BucketMode::items, false});
    for (int k = 0; k < 3; ++k) {
      const double p = static_cast<double>(kCutoffs[k]) / static_cast<double>(items);
      const double sigma = std::sqrt(p * (1 - p) / static_cast<double>(users));
      CHECK(std::abs(r.hr[k] - p) < 3 * sigma);
    }
  }
}

TEST_CASE("popularity buckets") {
  std::vector<std::size_t> ten(11, 0);
  for (std::size_t i = 1; i <= 10; ++i) ten[i] = 100 - i;
  const auto b10 = popularity_buckets(ten, 5, BucketMode::items);
  std::vector<std::size_t> sizes(5, 0);
  for (std::size_t i = 1; i <= 10; ++i) ++sizes[b10[i]];
  CHECK(sizes == std::vector<std::size_t>{2, 2, 2, 2, 2});
  CHECK(b10[1] == 0);
  CHECK(b10[10] == 4);

  std::vector<std::size_t> eleven(12, 5);
  eleven[0] = 0;
  const auto b11 = popularity_buckets(eleven, 5, BucketMode::items);
  std::vector<std::size_t> s11(5, 0);
  for (std::size_t i = 1; i <= 11; ++i) ++s11[b11[i]];
  CHECK(s11 == std::vector<std::size_t>{3, 2, 2, 2, 2});
  // Equal counts: item index order decides.
  for (std::size_t i = 1; i <= 11; ++i) CHECK(b11[i] == (i <= 3 ? 0 : (i - 4) / 2 + 1));

  CHECK_THROWS_AS(popularity_buckets(std::vector<std::size_t>(5, 1), 5, BucketMode::items), InputError);

  std::vector<std::size_t> mass{0, 50, 30, 10, 5, 5};
  const auto bi = popularity_buckets(mass, 5, BucketMode::interactions);
  CHECK(bi[1] == 0);
  CHECK(bi[2] == 2);
  CHECK(bi[3] == 4);
  CHECK(bi[5] == 4);
}

TEST_CASE("noise recovery counts") {
  const std::vector<std::vector<char>> masks{{1, 0, 1, 0}, {0, 1}};
  const std::vector<std::vector<char>> labels{{0, 1, 0, 0}, {1, 1}};
  const auto r = noise_recovery(masks, labels);
  CHECK(r.flagged == 3);
  CHECK(r.noise == 3);
  CHECK(r.hits == 2);
  CHECK(*r.precision == doctest::Approx(2.0 / 3.0));
  CHECK(*r.recall == doctest::Approx(2.0 / 3.0));
  CHECK(*r.f1 == doctest::Approx(2.0 / 3.0));

  // Oracle masks recover everything.
  const std::vector<std::vector<char>> oracle{{1, 0, 1, 1}, {0, 0}};
  CHECK(*noise_recovery(oracle, labels).f1 == 1.0);
  // Nothing flagged: precision undefined.
  const std::vector<std::vector<char>> keep_all{{1, 1, 1, 1}, {1, 1}};
  const auto none = noise_recovery(keep_all, labels);
  CHECK_FALSE(none.precision.has_value());
  CHECK_FALSE(none.f1.has_value());
  CHECK_THROWS_AS(noise_recovery(std::vector<std::vector<char>>{{1}}, labels), InputError);
}

TEST_CASE("report formats") {
  MetricsReport r;
  r.users = 2;
  r.hr = {0.5, 1, 1};
  r.ndcg = {0.25, 0.5, 0.5};
  r.bucket_ndcg5 = {0.1, 0.2};
  r.bucket_users = {1, 1};
  const auto kv = format_report(r);
  CHECK(kv.find("HR@5 0.5\n") != std::string::npos);
  CHECK(kv.find("NDCG@20 0.5\n") != std::string::npos);
  CHECK(kv.find("denoise_ratio undefined\n") != std::string::npos);
  const auto csv = report_csv(r);
  CHECK(csv.rfind("users,HR@5,HR@10,HR@20,NDCG@5,NDCG@10,NDCG@20,denoise_ratio,bucket1_NDCG@5,bucket2_NDCG@5\n", 0) == 0);
  CHECK(bucket_csv(r) == "bucket,mode,users,NDCG@5\n1,items,1,0.1\n2,items,1,0.2\n");
}
