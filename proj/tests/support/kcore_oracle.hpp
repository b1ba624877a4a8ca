#pragma once

// Independent k-core references: a degree check for the fixpoint property
// and exhaustive search over user/item subsets for tiny logs.

#include <cstddef>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "seqdn/dataio.hpp"

namespace seqdn::testing {

inline bool every_degree_at_least(std::span<const Interaction> events, int k) {
  std::map<std::string, int> users, items;
  for (const auto& e : events) {
    ++users[e.user_id];
    ++items[e.item_id];
  }
  for (const auto& [id, d] : users) {
    if (d < k) return false;
  }
  for (const auto& [id, d] : items) {
    if (d < k) return false;
  }
  return true;
}

// Largest induced sub-log (by event count) whose users and items all have
// degree >= k. Exponential in the number of distinct ids.
inline std::vector<Interaction> brute_force_k_core(std::span<const Interaction> events, int k) {
  std::vector<std::string> users, items;
  {
    std::set<std::string> us, is;
    for (const auto& e : events) {
      us.insert(e.user_id);
      is.insert(e.item_id);
    }
    users.assign(us.begin(), us.end());
    items.assign(is.begin(), is.end());
  }
  std::vector<Interaction> best;
  for (std::size_t um = 0; um < (std::size_t{1} << users.size()); ++um) {
    std::set<std::string> su;
    for (std::size_t i = 0; i < users.size(); ++i) {
      if (um >> i & 1) su.insert(users[i]);
    }
    for (std::size_t im = 0; im < (std::size_t{1} << items.size()); ++im) {
      std::set<std::string> si;
      for (std::size_t i = 0; i < items.size(); ++i) {
        if (im >> i & 1) si.insert(items[i]);
      }
      std::vector<Interaction> sub;
      for (const auto& e : events) {
        if (su.count(e.user_id) && si.count(e.item_id)) sub.push_back(e);
      }
      if (sub.size() > best.size() && every_degree_at_least(sub, k)) best = sub;
    }
  }
  return best;
}

}  // namespace seqdn::testing
