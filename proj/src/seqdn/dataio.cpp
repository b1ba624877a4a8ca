#include "seqdn/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "seqdn/errors.hpp"
#include "seqdn/fileio.hpp"
#include "seqdn/log.hpp"

namespace seqdn {
namespace {

std::vector<std::string_view> split_on(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && line[i] == ' ') ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

template <typename T>
bool parse_int(std::string_view text, T& out) {
  if (text.empty()) return false;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), out);
  return res.ec == std::errc() && res.ptr == text.data() + text.size();
}

std::string_view chomp(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

[[noreturn]] void manifest_fail(std::size_t line, const std::string& what) {
  throw InputError("manifest line " + std::to_string(line) + ": " + what);
}

std::vector<std::size_t> parse_index_list(std::string_view field, std::size_t line_no, std::size_t n_items) {
  std::vector<std::size_t> out;
  for (auto tok : split_ws(field)) {
    std::size_t v = 0;
    if (!parse_int(tok, v) || v == 0 || v > n_items) manifest_fail(line_no, "bad item index '" + std::string(tok) + "'");
    out.push_back(v);
  }
  return out;
}

void write_index_list(std::ostream& out, std::span<const std::size_t> items) {
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out << ' ';
    out << items[i];
  }
}

}  // namespace

LogFormat parse_log_format(std::string_view name) {
  if (name == "tsv") return LogFormat::tsv;
  if (name == "movielens") return LogFormat::movielens;
  throw InputError("unknown interaction format '" + std::string(name) + "' (expected tsv|movielens)");
}

std::size_t Catalog::add_user(const std::string& id) {
  auto [it, inserted] = user_index_.try_emplace(id, user_ids_.size());
  if (inserted) user_ids_.push_back(id);
  return it->second;
}

std::size_t Catalog::add_item(const std::string& id) {
  auto [it, inserted] = item_index_.try_emplace(id, item_ids_.size());
  if (inserted) item_ids_.push_back(id);
  return it->second;
}

const std::string& Catalog::item_id(std::size_t index) const {
  if (index == 0 || index >= item_ids_.size()) {
    throw std::out_of_range("catalog: item index " + std::to_string(index) + " out of range");
  }
  return item_ids_[index];
}

std::optional<std::size_t> Catalog::find_user(const std::string& id) const {
  auto it = user_index_.find(id);
  if (it == user_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> Catalog::find_item(const std::string& id) const {
  auto it = item_index_.find(id);
  if (it == item_index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::size_t> UserSplit::full_sequence() const {
  std::vector<std::size_t> out = train;
  out.push_back(valid.target);
  out.push_back(test.target);
  return out;
}

std::vector<Interaction> parse_interactions(std::istream& in, LogFormat format) {
  const std::size_t expected = format == LogFormat::tsv ? 3 : 4;
  std::vector<Interaction> events;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = chomp(raw);
    if (line.empty()) continue;
    const auto fields = split_on(line, '\t');
    if (fields.size() != expected) {
      throw InputError("line " + std::to_string(line_no) + ": expected " + std::to_string(expected) +
                       " tab-separated fields, got " + std::to_string(fields.size()));
    }
    Interaction ev;
    ev.user_id = std::string(fields[0]);
    ev.item_id = std::string(fields[1]);
    if (ev.user_id.empty() || ev.item_id.empty()) {
      throw InputError("line " + std::to_string(line_no) + ": empty user or item id");
    }
    const auto ts_field = fields[expected - 1];
    if (!parse_int(ts_field, ev.timestamp) || ev.timestamp < 0) {
      throw InputError("line " + std::to_string(line_no) + ": bad timestamp '" + std::string(ts_field) + "'");
    }
    events.push_back(std::move(ev));
  }
  if (in.bad()) throw InputError("read error after line " + std::to_string(line_no));
  return events;
}

std::vector<Interaction> load_interactions(const std::filesystem::path& path, LogFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open interaction file '" + path.string() + "'");
  try {
    return parse_interactions(in, format);
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

void write_interactions_tsv(std::ostream& out, std::span<const Interaction> events) {
  for (const auto& ev : events) out << ev.user_id << '\t' << ev.item_id << '\t' << ev.timestamp << '\n';
}

std::vector<Interaction> k_core_filter(std::span<const Interaction> events, int k) {
  if (k < 1) throw InputError("k_core_filter: k must be >= 1, got " + std::to_string(k));
  if (k == 1) return {events.begin(), events.end()};

  // Dense ids for the bipartite event graph.
  std::unordered_map<std::string_view, std::size_t> user_ix, item_ix;
  std::vector<std::size_t> ev_user(events.size()), ev_item(events.size());
  for (std::size_t e = 0; e < events.size(); ++e) {
    ev_user[e] = user_ix.try_emplace(events[e].user_id, user_ix.size()).first->second;
    ev_item[e] = item_ix.try_emplace(events[e].item_id, item_ix.size()).first->second;
  }
  std::vector<std::vector<std::size_t>> user_events(user_ix.size()), item_events(item_ix.size());
  std::vector<std::size_t> user_deg(user_ix.size(), 0), item_deg(item_ix.size(), 0);
  for (std::size_t e = 0; e < events.size(); ++e) {
    user_events[ev_user[e]].push_back(e);
    item_events[ev_item[e]].push_back(e);
    ++user_deg[ev_user[e]];
    ++item_deg[ev_item[e]];
  }

  const auto kk = static_cast<std::size_t>(k);
  std::vector<char> alive(events.size(), 1), user_gone(user_ix.size(), 0), item_gone(item_ix.size(), 0);
  // Queue entries: (is_item, id). Peeling order does not affect the fixpoint.
  std::vector<std::pair<bool, std::size_t>> queue;
  for (std::size_t u = 0; u < user_deg.size(); ++u) {
    if (user_deg[u] < kk) queue.emplace_back(false, u);
  }
  for (std::size_t i = 0; i < item_deg.size(); ++i) {
    if (item_deg[i] < kk) queue.emplace_back(true, i);
  }
  while (!queue.empty()) {
    const auto [is_item, id] = queue.back();
    queue.pop_back();
    auto& gone = is_item ? item_gone[id] : user_gone[id];
    if (gone) continue;
    gone = 1;
    for (const std::size_t e : is_item ? item_events[id] : user_events[id]) {
      if (!alive[e]) continue;
      alive[e] = 0;
      if (is_item) {
        const std::size_t u = ev_user[e];
        if (--user_deg[u] < kk && !user_gone[u]) queue.emplace_back(false, u);
      } else {
        const std::size_t i = ev_item[e];
        if (--item_deg[i] < kk && !item_gone[i]) queue.emplace_back(true, i);
      }
    }
  }

  std::vector<Interaction> out;
  for (std::size_t e = 0; e < events.size(); ++e) {
    if (alive[e]) out.push_back(events[e]);
  }
  return out;
}

SequenceSet build_sequences(std::span<const Interaction> events, const PreprocessConfig& config) {
  (void)config;
  std::unordered_map<std::string_view, std::size_t> user_slot;
  std::vector<std::vector<std::size_t>> per_user;
  for (std::size_t e = 0; e < events.size(); ++e) {
    auto [it, inserted] = user_slot.try_emplace(events[e].user_id, per_user.size());
    if (inserted) per_user.emplace_back();
    per_user[it->second].push_back(e);
  }

  SequenceSet out;
  std::vector<std::vector<std::size_t>> kept;
  for (auto& evs : per_user) {
    if (evs.size() < 3) continue;
    std::stable_sort(evs.begin(), evs.end(),
                     [&](std::size_t a, std::size_t b) { return events[a].timestamp < events[b].timestamp; });
    kept.push_back(std::move(evs));
  }
  // Items are indexed by first appearance in the original event order among
  // surviving users, independent of the per-user sort.
  std::vector<std::size_t> survivors;
  for (const auto& evs : kept) survivors.insert(survivors.end(), evs.begin(), evs.end());
  std::sort(survivors.begin(), survivors.end());
  for (const std::size_t e : survivors) out.catalog.add_item(events[e].item_id);

  for (const auto& evs : kept) {
    UserSequence seq;
    seq.user = out.catalog.add_user(events[evs.front()].user_id);
    for (const std::size_t e : evs) {
      seq.items.push_back(*out.catalog.find_item(events[e].item_id));
      seq.timestamps.push_back(events[e].timestamp);
    }
    out.users.push_back(std::move(seq));
  }
  return out;
}

std::vector<std::size_t> truncate_newest(std::span<const std::size_t> items, std::size_t max_len) {
  const std::size_t start = items.size() > max_len ? items.size() - max_len : 0;
  return {items.begin() + static_cast<std::ptrdiff_t>(start), items.end()};
}

DatasetSplit leave_one_out_split(std::span<const UserSequence> sequences, const Catalog& catalog,
                                 const PreprocessConfig& config) {
  if (config.max_len < 2) throw InputError("max_len must be >= 2");
  const auto max_len = static_cast<std::size_t>(config.max_len);
  DatasetSplit split;
  split.catalog = catalog;
  split.config = config;
  for (const auto& seq : sequences) {
    const std::size_t n = seq.items.size();
    if (n < 3) {
      log::warn("user " + catalog.user_id(seq.user) + " has fewer than 3 items; excluded from split");
      continue;
    }
    UserSplit us;
    us.user = seq.user;
    us.train.assign(seq.items.begin(), seq.items.end() - 2);
    us.valid.prefix = truncate_newest(us.train, max_len);
    us.valid.target = seq.items[n - 2];
    us.test.prefix = truncate_newest(std::span(seq.items).first(n - 1), max_len);
    us.test.target = seq.items[n - 1];
    split.users.push_back(std::move(us));
  }
  return split;
}

DatasetStats compute_stats(std::span<const Interaction> events) {
  std::unordered_map<std::string_view, int> users, items;
  for (const auto& ev : events) {
    users.try_emplace(ev.user_id, 0);
    items.try_emplace(ev.item_id, 0);
  }
  DatasetStats s;
  s.users = users.size();
  s.items = items.size();
  s.actions = events.size();
  if (s.users > 0) s.avg_len = static_cast<double>(s.actions) / static_cast<double>(s.users);
  if (s.users > 0 && s.items > 0) {
    s.sparsity = 1.0 - static_cast<double>(s.actions) / (static_cast<double>(s.users) * static_cast<double>(s.items));
  }
  return s;
}

DatasetStats compute_stats(const DatasetSplit& split) {
  DatasetStats s;
  s.users = split.users.size();
  s.items = split.catalog.n_items();
  for (const auto& u : split.users) s.actions += u.train.size() + 2;
  if (s.users > 0) s.avg_len = static_cast<double>(s.actions) / static_cast<double>(s.users);
  if (s.users > 0 && s.items > 0) {
    s.sparsity = 1.0 - static_cast<double>(s.actions) / (static_cast<double>(s.users) * static_cast<double>(s.items));
  }
  return s;
}

// Layout:
//   SPLIT v1
//   config <k_core> <max_len>
//   items <n>
//   <index>\t<item_id>                         (n lines, index 1..n)
//   users <m>
//   <user_index>\t<user_id>\t<train>\t<valid prefix>\t<valid target>\t<test prefix>\t<test target>
// Item lists are space-separated dense indices.
void write_manifest(std::ostream& out, const DatasetSplit& split) {
  out << "SPLIT v1\n";
  out << "config " << split.config.k_core << ' ' << split.config.max_len << '\n';
  out << "items " << split.catalog.n_items() << '\n';
  for (std::size_t i = 1; i <= split.catalog.n_items(); ++i) out << i << '\t' << split.catalog.item_id(i) << '\n';
  out << "users " << split.users.size() << '\n';
  for (const auto& u : split.users) {
    out << u.user << '\t' << split.catalog.user_id(u.user) << '\t';
    write_index_list(out, u.train);
    out << '\t';
    write_index_list(out, u.valid.prefix);
    out << '\t' << u.valid.target << '\t';
    write_index_list(out, u.test.prefix);
    out << '\t' << u.test.target << '\n';
  }
}

void write_manifest(const std::filesystem::path& path, const DatasetSplit& split) {
  std::ostringstream os;
  write_manifest(os, split);
  write_file_atomic(path, os.str());
}

DatasetSplit read_manifest(std::istream& in) {
  DatasetSplit split;
  std::string raw;
  std::size_t line_no = 0;
  auto next = [&]() -> std::string_view {
    if (!std::getline(in, raw)) manifest_fail(line_no + 1, "unexpected end of file");
    ++line_no;
    return chomp(raw);
  };

  if (next() != "SPLIT v1") manifest_fail(line_no, "expected header 'SPLIT v1'");
  {
    const auto f = split_ws(next());
    if (f.size() != 3 || f[0] != "config" || !parse_int(f[1], split.config.k_core) ||
        !parse_int(f[2], split.config.max_len)) {
      manifest_fail(line_no, "expected 'config <k_core> <max_len>'");
    }
  }
  std::size_t n_items = 0;
  {
    const auto f = split_ws(next());
    if (f.size() != 2 || f[0] != "items" || !parse_int(f[1], n_items)) manifest_fail(line_no, "expected 'items <n>'");
  }
  for (std::size_t i = 1; i <= n_items; ++i) {
    const auto f = split_on(next(), '\t');
    std::size_t idx = 0;
    if (f.size() != 2 || !parse_int(f[0], idx) || idx != i || f[1].empty()) {
      manifest_fail(line_no, "expected '<index>\\t<item_id>' with index " + std::to_string(i));
    }
    if (split.catalog.add_item(std::string(f[1])) != i) manifest_fail(line_no, "duplicate item id");
  }
  std::size_t n_users = 0;
  {
    const auto f = split_ws(next());
    if (f.size() != 2 || f[0] != "users" || !parse_int(f[1], n_users)) manifest_fail(line_no, "expected 'users <m>'");
  }
  for (std::size_t k = 0; k < n_users; ++k) {
    const auto f = split_on(next(), '\t');
    if (f.size() != 7) manifest_fail(line_no, "expected 7 tab-separated fields");
    UserSplit u;
    if (!parse_int(f[0], u.user) || u.user != k || f[1].empty()) manifest_fail(line_no, "bad user index or id");
    if (split.catalog.add_user(std::string(f[1])) != k) manifest_fail(line_no, "duplicate user id");
    u.train = parse_index_list(f[2], line_no, n_items);
    u.valid.prefix = parse_index_list(f[3], line_no, n_items);
    u.test.prefix = parse_index_list(f[5], line_no, n_items);
    if (!parse_int(f[4], u.valid.target) || u.valid.target == 0 || u.valid.target > n_items ||
        !parse_int(f[6], u.test.target) || u.test.target == 0 || u.test.target > n_items) {
      manifest_fail(line_no, "bad target index");
    }
    if (u.train.empty() || u.valid.prefix.empty() || u.test.prefix.empty()) manifest_fail(line_no, "empty item list");
    split.users.push_back(std::move(u));
  }
  return split;
}

DatasetSplit read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open split manifest '" + path.string() + "'");
  try {
    return read_manifest(in);
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

}  // namespace seqdn
