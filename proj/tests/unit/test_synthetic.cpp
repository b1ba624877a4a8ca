#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "seqdn/errors.hpp"
#include "seqdn/synthetic.hpp"

using namespace seqdn;

TEST_CASE("noise count is binomial within 3 sigma") {
  SyntheticSpec s;
  s.n_users = 50;
  s.min_len = s.max_len = 20;  // 1,000 positions
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    s.seed = seed;
    const auto d = generate_synthetic(s);
    REQUIRE(d.labels.size() == 1000);
    std::size_t noise = 0;
    for (const auto& l : d.labels) noise += l.noise;
    const double sigma = std::sqrt(1000 * 0.2 * 0.8);
    CHECK(std::abs(static_cast<double>(noise) - 200.0) < 3 * sigma);
  }
}

TEST_CASE("zero noise rate gives no noise labels") {
  SyntheticSpec s;
  s.n_users = 20;
  s.noise_rate = 0.0;
  for (const auto& l : generate_synthetic(s).labels) CHECK_FALSE(l.noise);
}

TEST_CASE("noise positions leave the user's cluster and clean ones stay") {
  SyntheticSpec s;
  s.n_users = 40;
  const auto d = generate_synthetic(s);
  std::size_t idx = 0;
  std::string user;
  std::size_t cluster = 0;
  for (std::size_t k = 0; k < d.events.size(); ++k) {
    const auto& e = d.events[k];
    const std::size_t item = std::stoul(e.item_id.substr(1));
    if (e.user_id != user) {
      user = e.user_id;
      idx = 0;
      cluster = s.n_clusters;  // unknown until the first clean item
    }
    CHECK(d.labels[k].position == idx++);
    if (!d.labels[k].noise) {
      if (cluster == s.n_clusters) cluster = d.item_cluster[item];
      CHECK(d.item_cluster[item] == cluster);
    } else if (cluster != s.n_clusters) {
      CHECK(d.item_cluster[item] != cluster);
    }
  }
}

TEST_CASE("semantics cluster around their centroid") {
  SyntheticSpec s;
  s.n_users = 10;
  s.sem_spread = 0.3;
  const auto d = generate_synthetic(s);
  auto cos = [&](std::size_t a, std::size_t b) {
    double dot = 0, na = 0, nb = 0;
    for (std::size_t k = 0; k < d.semantic.dim; ++k) {
      const double x = d.semantic.row(a)[k], y = d.semantic.row(b)[k];
      dot += x * y;
      na += x * x;
      nb += y * y;
    }
    return dot / std::sqrt(na * nb);
  };
  double same = 0, other = 0;
  std::size_t ns = 0, no = 0;
  for (std::size_t a = 0; a < 60; ++a) {
    for (std::size_t b = a + 1; b < 60; ++b) {
      const bool eq = d.item_cluster[a + 1] == d.item_cluster[b + 1];
      (eq ? same : other) += cos(a, b);
      ++(eq ? ns : no);
    }
  }
  CHECK(same / static_cast<double>(ns) > 0.8);
  CHECK(std::abs(other / static_cast<double>(no)) < 0.3);
}

TEST_CASE("generation is deterministic per seed") {
  SyntheticSpec s;
  s.n_users = 30;
  const auto a = generate_synthetic(s), b = generate_synthetic(s);
  CHECK(a.events == b.events);
  CHECK(a.semantic.values == b.semantic.values);
  s.seed = 2;
  CHECK(generate_synthetic(s).events != a.events);
}

TEST_CASE("label file round-trip and validation") {
  std::vector<NoiseLabel> labels{{"u1", 0, false}, {"u1", 1, true}, {"u2", 0, true}};
  const auto p = std::filesystem::temp_directory_path() / "seqdn_labels_test.tsv";
  write_noise_labels(p, labels);
  const auto back = read_noise_labels(p);
  REQUIRE(back.size() == 3);
  CHECK(back[1].noise);
  const auto by = labels_by_user(back);
  CHECK(by.at("u1") == std::vector<char>{0, 1});
  std::filesystem::remove(p);
  CHECK_THROWS_AS(labels_by_user({{"u1", 1, false}}), InputError);

  SyntheticSpec bad;
  bad.n_clusters = 1;
  CHECK_THROWS_AS(generate_synthetic(bad), InputError);
  bad = {};
  bad.noise_rate = 1.0;
  CHECK_THROWS_AS(generate_synthetic(bad), InputError);
}
