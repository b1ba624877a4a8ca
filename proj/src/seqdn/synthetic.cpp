#include "seqdn/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "seqdn/errors.hpp"
#include "seqdn/fileio.hpp"
#include "seqdn/rng.hpp"

namespace seqdn {

void validate(const SyntheticSpec& spec) {
  if (spec.n_clusters < 2) throw InputError("synthetic: need at least 2 clusters");
  if (spec.n_items < spec.n_clusters) throw InputError("synthetic: fewer items than clusters");
  if (spec.n_users == 0) throw InputError("synthetic: no users");
  if (spec.min_len < 3 || spec.max_len < spec.min_len) throw InputError("synthetic: invalid length range");
  if (!(spec.noise_rate >= 0.0 && spec.noise_rate < 1.0)) throw InputError("synthetic: noise rate must be in [0, 1)");
  if (!(spec.transition >= 0.0 && spec.transition <= 1.0)) throw InputError("synthetic: transition must be in [0, 1]");
  if (spec.sem_dim < 2) throw InputError("synthetic: semantic dimension must be >= 2");
  if (!(spec.sem_spread >= 0.0)) throw InputError("synthetic: semantic spread must be >= 0");
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  validate(spec);
  Rng rng(mix_seed(spec.seed));
  SyntheticData data;

  // Clusters: a random partition of the items into near-equal groups; the
  // order inside each group defines its transition chain.
  std::vector<std::size_t> perm(spec.n_items);
  for (std::size_t i = 0; i < spec.n_items; ++i) perm[i] = i + 1;
  rng.shuffle(std::span(perm));
  std::vector<std::vector<std::size_t>> members(spec.n_clusters);
  data.item_cluster.assign(spec.n_items + 1, 0);
  for (std::size_t k = 0; k < perm.size(); ++k) {
    members[k % spec.n_clusters].push_back(perm[k]);
    data.item_cluster[perm[k]] = k % spec.n_clusters;
  }
  std::vector<std::size_t> slot(spec.n_items + 1, 0);
  for (const auto& m : members) {
    for (std::size_t s = 0; s < m.size(); ++s) slot[m[s]] = s;
  }

  auto item_name = [](std::size_t i) { return "i" + std::to_string(i); };

  for (std::size_t u = 0; u < spec.n_users; ++u) {
    const std::string user = "u" + std::to_string(u + 1);
    const std::size_t cluster = rng.below(spec.n_clusters);
    const auto& own = members[cluster];
    const std::size_t len = spec.min_len + rng.below(spec.max_len - spec.min_len + 1);
    std::size_t previous = 0;
    for (std::size_t pos = 0; pos < len; ++pos) {
      std::size_t item = 0;
      const bool noise = rng.uniform() < spec.noise_rate;
      if (noise) {
        do {
          item = 1 + rng.below(spec.n_items);
        } while (data.item_cluster[item] == cluster);
      } else {
        if (previous != 0 && rng.uniform() < spec.transition) {
          item = own[(slot[previous] + 1) % own.size()];
        } else {
          item = own[rng.below(own.size())];
        }
        previous = item;
      }
      data.events.push_back({user, item_name(item), static_cast<std::int64_t>(1000000 + 60 * pos)});
      data.labels.push_back({user, pos, noise});
    }
  }

  // Semantics: unit centroid per cluster plus a Gaussian perturbation of
  // expected norm sem_spread.
  const std::size_t d = spec.sem_dim;
  std::vector<std::vector<double>> centroid(spec.n_clusters, std::vector<double>(d));
  for (auto& c : centroid) {
    double ss = 0.0;
    for (auto& x : c) {
      x = rng.normal();
      ss += x * x;
    }
    for (auto& x : c) x /= std::sqrt(ss);
  }
  const double sigma = spec.sem_spread / std::sqrt(static_cast<double>(d));
  data.semantic.dim = d;
  for (std::size_t i = 1; i <= spec.n_items; ++i) {
    data.semantic.ids.push_back(item_name(i));
    for (std::size_t k = 0; k < d; ++k) {
      data.semantic.values.push_back(centroid[data.item_cluster[i]][k] + sigma * rng.normal());
    }
  }
  return data;
}

void write_noise_labels(const std::filesystem::path& path, const std::vector<NoiseLabel>& labels) {
  std::string out;
  for (const auto& l : labels) out += l.user_id + "\t" + std::to_string(l.position) + "\t" + (l.noise ? "1" : "0") + "\n";
  write_file_atomic(path, out);
}

std::vector<NoiseLabel> read_noise_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open noise labels " + path.string());
  std::vector<NoiseLabel> out;
  std::string line;
  std::size_t ln = 0;
  while (std::getline(in, line)) {
    ++ln;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream fields(line);
    NoiseLabel l;
    int flag = -1;
    std::string extra;
    if (!(fields >> l.user_id >> l.position >> flag) || (flag != 0 && flag != 1) || (fields >> extra)) {
      throw InputError(path.string() + " line " + std::to_string(ln) + ": expected '<user_id> <position> <0|1>'");
    }
    l.noise = flag == 1;
    out.push_back(std::move(l));
  }
  return out;
}

std::map<std::string, std::vector<char>> labels_by_user(const std::vector<NoiseLabel>& labels) {
  std::map<std::string, std::vector<std::pair<std::size_t, char>>> grouped;
  for (const auto& l : labels) grouped[l.user_id].emplace_back(l.position, l.noise ? 1 : 0);
  std::map<std::string, std::vector<char>> out;
  for (auto& [user, rows] : grouped) {
    std::sort(rows.begin(), rows.end());
    std::vector<char> seq;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].first != i) throw InputError("noise labels for user '" + user + "' are not positions 0..n-1");
      seq.push_back(rows[i].second);
    }
    out.emplace(user, std::move(seq));
  }
  return out;
}

}  // namespace seqdn
