#include "seqdn/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "seqdn/errors.hpp"
#include "seqdn/fileio.hpp"

namespace seqdn {

double ndcg_at(std::size_t rank, std::size_t k) {
  if (rank == 0 || rank > k) return 0.0;
  return 1.0 / std::log2(static_cast<double>(rank) + 1.0);
}

RankResult rank_and_score(std::span<const double> scores, std::size_t target) {
  if (target == 0) throw std::invalid_argument("rank_and_score: target is the padding item");
  if (target > scores.size()) throw std::out_of_range("rank_and_score: target outside catalog");
  const double s = scores[target - 1];
  if (std::isnan(s)) throw NumericError("rank_and_score: NaN score for target item");
  std::size_t ahead = 0;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (scores[j] > s || (scores[j] == s && j < target - 1)) ++ahead;
  }
  RankResult r;
  r.rank = ahead + 1;
  for (std::size_t i = 0; i < kCutoffs.size(); ++i) {
    r.hr[i] = r.rank <= kCutoffs[i] ? 1.0 : 0.0;
    r.ndcg[i] = ndcg_at(r.rank, kCutoffs[i]);
  }
  return r;
}

std::vector<EvalCase> eval_cases(const DatasetSplit& split, Stage stage) {
  std::vector<EvalCase> out;
  out.reserve(split.users.size());
  for (const auto& u : split.users) {
    EvalCase c;
    c.user = u.user;
    c.history = u.train;
    if (stage == Stage::test) c.history.push_back(u.valid.target);
    const Holdout& h = stage == Stage::valid ? u.valid : u.test;
    c.prefix = h.prefix;
    c.target = h.target;
    out.push_back(std::move(c));
  }
  return out;
}

BucketMode parse_bucket_mode(std::string_view name) {
  if (name == "items") return BucketMode::items;
  if (name == "interactions") return BucketMode::interactions;
  throw InputError("unknown bucket mode '" + std::string(name) + "' (expected items|interactions)");
}

std::string_view bucket_mode_name(BucketMode mode) { return mode == BucketMode::items ? "items" : "interactions"; }

std::vector<std::size_t> train_item_counts(const DatasetSplit& split) {
  std::vector<std::size_t> counts(split.catalog.n_items() + 1, 0);
  for (const auto& u : split.users) {
    for (const auto i : u.train) ++counts.at(i);
  }
  return counts;
}

std::vector<std::size_t> popularity_buckets(std::span<const std::size_t> train_counts, std::size_t n_buckets,
                                            BucketMode mode) {
  if (train_counts.empty()) throw InputError("popularity_buckets: empty catalog");
  const std::size_t n = train_counts.size() - 1;
  if (n_buckets == 0 || n < n_buckets) {
    throw InputError("popularity_buckets: " + std::to_string(n) + " items cannot fill " + std::to_string(n_buckets) +
                     " buckets");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{1});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return train_counts[a] > train_counts[b]; });
  std::vector<std::size_t> bucket(n + 1, 0);
  if (mode == BucketMode::items) {
    const std::size_t base = n / n_buckets, extra = n % n_buckets;
    std::size_t pos = 0;
    for (std::size_t b = 0; b < n_buckets; ++b) {
      const std::size_t size = base + (b < extra ? 1 : 0);
      for (std::size_t k = 0; k < size; ++k) bucket[order[pos++]] = b;
    }
    return bucket;
  }
  // Equal interaction mass: an item joins the bucket its preceding
  // cumulative mass falls into. A very hot item can leave a bucket empty.
  const double total = std::accumulate(train_counts.begin() + 1, train_counts.end(), 0.0);
  double before = 0.0;
  for (const std::size_t item : order) {
    const double frac = total > 0 ? before / total : 0.0;
    bucket[item] = std::min(n_buckets - 1, static_cast<std::size_t>(frac * static_cast<double>(n_buckets)));
    before += static_cast<double>(train_counts[item]);
  }
  return bucket;
}

void accumulate_recovery(NoiseRecovery& acc, std::span<const char> keep, std::span<const char> labels) {
  if (keep.size() != labels.size()) {
    throw InputError("noise_recovery: mask length " + std::to_string(keep.size()) + " differs from label length " +
                     std::to_string(labels.size()));
  }
  for (std::size_t t = 0; t < keep.size(); ++t) {
    const bool flagged = keep[t] == 0;
    const bool noise = labels[t] != 0;
    acc.flagged += flagged;
    acc.noise += noise;
    acc.hits += flagged && noise;
  }
}

void finalize_recovery(NoiseRecovery& acc) {
  acc.precision.reset();
  acc.recall.reset();
  acc.f1.reset();
  if (acc.flagged > 0) acc.precision = static_cast<double>(acc.hits) / static_cast<double>(acc.flagged);
  if (acc.noise > 0) acc.recall = static_cast<double>(acc.hits) / static_cast<double>(acc.noise);
  if (acc.precision && acc.recall && *acc.precision + *acc.recall > 0.0) {
    acc.f1 = 2.0 * *acc.precision * *acc.recall / (*acc.precision + *acc.recall);
  } else if (acc.precision && acc.recall) {
    acc.f1 = 0.0;
  }
}

NoiseRecovery noise_recovery(std::span<const std::vector<char>> masks, std::span<const std::vector<char>> labels) {
  if (masks.size() != labels.size()) throw InputError("noise_recovery: mask and label user counts differ");
  NoiseRecovery acc;
  for (std::size_t u = 0; u < masks.size(); ++u) accumulate_recovery(acc, masks[u], labels[u]);
  finalize_recovery(acc);
  return acc;
}

double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 8) {
    double s = 0.0;
    for (const double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

MetricsReport evaluate(Scorer& scorer, const DatasetSplit& split, Stage stage, const EvalOptions& options) {
  const auto cases = eval_cases(split, stage);
  const std::size_t n_items = split.catalog.n_items();
  std::array<std::vector<double>, 3> hr, nd;
  std::vector<std::size_t> targets;
  const std::size_t batch = std::max<std::size_t>(1, options.batch_size);
  for (std::size_t begin = 0; begin < cases.size(); begin += batch) {
    const auto chunk = std::span(cases).subspan(begin, std::min(batch, cases.size() - begin));
    const auto scores = scorer.score(chunk);
    if (scores.size() != chunk.size() * n_items) throw ShapeError("evaluate: scorer returned wrong shape");
    for (std::size_t b = 0; b < chunk.size(); ++b) {
      const auto r = rank_and_score(std::span(scores).subspan(b * n_items, n_items), chunk[b].target);
      for (std::size_t k = 0; k < 3; ++k) {
        hr[k].push_back(r.hr[k]);
        nd[k].push_back(r.ndcg[k]);
      }
      targets.push_back(chunk[b].target);
    }
  }
  MetricsReport report;
  report.users = cases.size();
  for (std::size_t k = 0; k < 3; ++k) {
    const double n = std::max<double>(1.0, static_cast<double>(cases.size()));
    report.hr[k] = pairwise_sum(hr[k]) / n;
    report.ndcg[k] = pairwise_sum(nd[k]) / n;
  }
  report.denoise_ratio = scorer.denoise_ratio();
  report.bucket_mode = options.bucket_mode;
  if (options.buckets && n_items >= options.n_buckets) {
    const auto bucket = popularity_buckets(train_item_counts(split), options.n_buckets, options.bucket_mode);
    std::vector<std::vector<double>> per(options.n_buckets);
    for (std::size_t i = 0; i < targets.size(); ++i) per[bucket[targets[i]]].push_back(nd[0][i]);
    for (const auto& values : per) {
      report.bucket_users.push_back(values.size());
      report.bucket_ndcg5.push_back(values.empty() ? 0.0 : pairwise_sum(values) / static_cast<double>(values.size()));
    }
  }
  return report;
}

namespace {

std::string opt(const std::optional<double>& v) { return v ? format_double(*v) : std::string("undefined"); }

}  // namespace

std::string format_report(const MetricsReport& r) {
  std::string out = "users " + std::to_string(r.users) + "\n";
  for (std::size_t k = 0; k < 3; ++k) out += "HR@" + std::to_string(kCutoffs[k]) + " " + format_double(r.hr[k]) + "\n";
  for (std::size_t k = 0; k < 3; ++k) {
    out += "NDCG@" + std::to_string(kCutoffs[k]) + " " + format_double(r.ndcg[k]) + "\n";
  }
  if (!r.bucket_ndcg5.empty()) {
    out += "bucket_mode " + std::string(bucket_mode_name(r.bucket_mode)) + "\n";
    for (std::size_t b = 0; b < r.bucket_ndcg5.size(); ++b) {
      out += "bucket" + std::to_string(b + 1) + "_NDCG@5 " + format_double(r.bucket_ndcg5[b]) + "\n";
      out += "bucket" + std::to_string(b + 1) + "_users " + std::to_string(r.bucket_users[b]) + "\n";
    }
  }
  out += "denoise_ratio " + opt(r.denoise_ratio) + "\n";
  if (r.recovery) {
    out += "noise_precision " + opt(r.recovery->precision) + "\n";
    out += "noise_recall " + opt(r.recovery->recall) + "\n";
    out += "noise_f1 " + opt(r.recovery->f1) + "\n";
  }
  return out;
}

std::string report_csv(const MetricsReport& r) {
  std::string head = "users,HR@5,HR@10,HR@20,NDCG@5,NDCG@10,NDCG@20,denoise_ratio";
  std::string row = std::to_string(r.users);
  for (const double v : r.hr) row += "," + format_double(v);
  for (const double v : r.ndcg) row += "," + format_double(v);
  row += "," + opt(r.denoise_ratio);
  for (std::size_t b = 0; b < r.bucket_ndcg5.size(); ++b) {
    head += ",bucket" + std::to_string(b + 1) + "_NDCG@5";
    row += "," + format_double(r.bucket_ndcg5[b]);
  }
  if (r.recovery) {
    head += ",noise_precision,noise_recall,noise_f1";
    row += "," + opt(r.recovery->precision) + "," + opt(r.recovery->recall) + "," + opt(r.recovery->f1);
  }
  return head + "\n" + row + "\n";
}

std::string bucket_csv(const MetricsReport& r) {
  std::string out = "bucket,mode,users,NDCG@5\n";
  for (std::size_t b = 0; b < r.bucket_ndcg5.size(); ++b) {
    out += std::to_string(b + 1) + "," + std::string(bucket_mode_name(r.bucket_mode)) + "," +
           std::to_string(r.bucket_users[b]) + "," + format_double(r.bucket_ndcg5[b]) + "\n";
  }
  return out;
}

}  // namespace seqdn
