#include "seqdn/semantic.hpp"

#include <charconv>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "seqdn/bytes.hpp"
#include "seqdn/encoder.hpp"
#include "seqdn/errors.hpp"
#include "seqdn/fileio.hpp"

namespace seqdn {
namespace {

std::vector<std::string_view> tokens(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size() && std::isfinite(out);
}

template <typename T>
bool parse_uint(std::string_view s, T& out) {
  if (s.empty()) return false;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

// Splits text into lines with trailing '\r' removed.
std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    out.push_back(line);
    start = end + 1;
  }
  return out;
}

RawEmbeddings parse_text_embeddings(std::string_view text) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw InputError("embedding file: empty");
  const auto head = tokens(lines[0]);
  RawEmbeddings emb;
  std::size_t count = 0;
  if (head.size() != 4 || head[0] != "SEMB" || head[1] != "v1" || !parse_uint(head[2], count) ||
      !parse_uint(head[3], emb.dim) || emb.dim == 0) {
    throw InputError("embedding file: expected header 'SEMB v1 <count> <D>'");
  }
  std::unordered_set<std::string> seen;
  std::size_t row = 0;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    ++row;
    const auto tok = tokens(lines[ln]);
    if (tok.size() != emb.dim + 1) {
      throw InputError("embedding file row " + std::to_string(row) + ": expected " + std::to_string(emb.dim) +
                       " values, got " + std::to_string(tok.empty() ? 0 : tok.size() - 1));
    }
    std::string id(tok[0]);
    if (!seen.insert(id).second) {
      throw InputError("embedding file row " + std::to_string(row) + ": duplicate item id '" + id + "'");
    }
    for (std::size_t d = 0; d < emb.dim; ++d) {
      double v = 0.0;
      if (!parse_double(tok[d + 1], v)) {
        throw InputError("embedding file row " + std::to_string(row) + ": bad value '" + std::string(tok[d + 1]) + "'");
      }
      emb.values.push_back(v);
    }
    emb.ids.push_back(std::move(id));
  }
  if (row != count) {
    throw InputError("embedding file: header declares " + std::to_string(count) + " rows, found " + std::to_string(row));
  }
  return emb;
}

RawEmbeddings parse_binary_embeddings(std::string_view data) {
  bytes::Reader in(data, "embedding file");
  in.take(4);
  if (const auto v = in.u8(); v != 1) throw InputError("embedding file: unsupported binary version " + std::to_string(v));
  RawEmbeddings emb;
  const std::uint32_t count = in.u32();
  emb.dim = in.u32();
  if (emb.dim == 0) throw InputError("embedding file: zero dimension");
  std::unordered_set<std::string> seen;
  for (std::uint32_t r = 0; r < count; ++r) {
    std::string id(in.take(in.u32()));
    if (id.empty()) throw InputError("embedding file row " + std::to_string(r + 1) + ": empty id");
    if (!seen.insert(id).second) {
      throw InputError("embedding file row " + std::to_string(r + 1) + ": duplicate item id '" + id + "'");
    }
    for (std::size_t d = 0; d < emb.dim; ++d) emb.values.push_back(in.f64());
    emb.ids.push_back(std::move(id));
  }
  if (!in.done()) throw InputError("embedding file: trailing bytes");
  return emb;
}

}  // namespace

RawEmbeddings parse_embeddings(std::string_view data) {
  if (data.size() < 5 || data.substr(0, 4) != "SEMB") throw InputError("embedding file: missing SEMB magic");
  if (data[4] == '\x01') return parse_binary_embeddings(data);
  return parse_text_embeddings(data);
}

RawEmbeddings read_embeddings(const std::filesystem::path& path) {
  try {
    return parse_embeddings(read_file(path));
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

std::string encode_embeddings_text(const RawEmbeddings& emb) {
  std::string out = "SEMB v1 " + std::to_string(emb.count()) + " " + std::to_string(emb.dim) + "\n";
  for (std::size_t i = 0; i < emb.count(); ++i) {
    out += emb.ids[i];
    for (const double v : emb.row(i)) {
      out += ' ';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

std::string encode_embeddings_binary(const RawEmbeddings& emb) {
  std::string out = "SEMB";
  out.push_back('\x01');
  bytes::put_u32(out, static_cast<std::uint32_t>(emb.count()));
  bytes::put_u32(out, static_cast<std::uint32_t>(emb.dim));
  for (std::size_t i = 0; i < emb.count(); ++i) {
    bytes::put_u32(out, static_cast<std::uint32_t>(emb.ids[i].size()));
    out += emb.ids[i];
    for (const double v : emb.row(i)) bytes::put_f64(out, v);
  }
  return out;
}

void write_embeddings(const std::filesystem::path& path, const RawEmbeddings& emb, bool binary) {
  write_file_atomic(path, binary ? encode_embeddings_binary(emb) : encode_embeddings_text(emb));
}

SemanticTable::SemanticTable(std::size_t n_items, std::size_t dim)
    : n_items_(n_items), dim_(dim), values_((n_items + 1) * dim, 0.0), present_(n_items + 1, 0) {}

std::span<const double> SemanticTable::row(std::size_t item) const {
  if (item > n_items_) throw std::out_of_range("semantic table: item " + std::to_string(item) + " out of range");
  return std::span(values_).subspan(item * dim_, dim_);
}

void SemanticTable::set_row(std::size_t item, std::span<const double> v) {
  if (item == 0 || item > n_items_) throw std::out_of_range("semantic table: item " + std::to_string(item) + " out of range");
  if (v.size() != dim_) throw ShapeError("semantic table: row of length " + std::to_string(v.size()) + ", expected " + std::to_string(dim_));
  std::copy(v.begin(), v.end(), values_.begin() + static_cast<std::ptrdiff_t>(item * dim_));
  present_[item] = 1;
}

void SemanticTable::require_complete(const Catalog& catalog) const {
  if (catalog.n_items() != n_items_) throw InputError("semantic table size differs from catalog");
  for (std::size_t i = 1; i <= n_items_; ++i) {
    if (!present_[i]) throw InputError("semantic table has no vector for item '" + catalog.item_id(i) + "'");
  }
}

SemanticTable bind_embeddings(const RawEmbeddings& emb, const Catalog& catalog) {
  SemanticTable table(catalog.n_items(), emb.dim);
  for (std::size_t r = 0; r < emb.count(); ++r) {
    const auto idx = catalog.find_item(emb.ids[r]);
    if (!idx) {
      throw InputError("embedding row " + std::to_string(r + 1) + ": unknown item id '" + emb.ids[r] + "'");
    }
    if (table.has(*idx)) {
      throw InputError("embedding row " + std::to_string(r + 1) + ": duplicate item id '" + emb.ids[r] + "'");
    }
    table.set_row(*idx, emb.row(r));
  }
  return table;
}

SemanticTable load_semantic_table(const std::filesystem::path& path, const Catalog& catalog) {
  try {
    return bind_embeddings(read_embeddings(path), catalog);
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

RawEmbeddings pseudo_embeddings(const Catalog& catalog, std::size_t dim, std::uint64_t seed) {
  if (dim < 2) throw InputError("pseudo embeddings need dimension >= 2");
  RawEmbeddings emb;
  emb.dim = dim;
  emb.values.reserve(catalog.n_items() * dim);
  for (std::size_t i = 1; i <= catalog.n_items(); ++i) {
    const std::string& id = catalog.item_id(i);
    Rng rng(mix_seed(fnv1a64(id) ^ mix_seed(seed)));
    std::vector<double> v(dim);
    double ss = 0.0;
    do {
      ss = 0.0;
      for (auto& x : v) {
        x = rng.normal();
        ss += x * x;
      }
    } while (ss == 0.0);
    const double norm = std::sqrt(ss);
    for (auto& x : v) emb.values.push_back(x / norm);
    emb.ids.push_back(id);
  }
  return emb;
}

SemanticTable pseudo_embed(const Catalog& catalog, std::size_t dim, std::uint64_t seed) {
  return bind_embeddings(pseudo_embeddings(catalog, dim, seed), catalog);
}

PrefixVectors parse_prefix_file(std::string_view text) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw InputError("prefix file: empty");
  const auto head = tokens(lines[0]);
  PrefixVectors out;
  std::size_t count = 0;
  if (head.size() != 4 || head[0] != "SPFX" || head[1] != "v1" || !parse_uint(head[2], count) ||
      !parse_uint(head[3], out.dim) || out.dim == 0) {
    throw InputError("prefix file: expected header 'SPFX v1 <count> <D>'");
  }
  std::size_t row = 0;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    ++row;
    const auto tok = tokens(lines[ln]);
    std::size_t t = 0;
    if (tok.size() != out.dim + 2 || !parse_uint(tok[1], t) || t == 0) {
      throw InputError("prefix file row " + std::to_string(row) + ": expected '<user_id> <t> <" +
                       std::to_string(out.dim) + " values>'");
    }
    std::vector<double> v(out.dim);
    for (std::size_t d = 0; d < out.dim; ++d) {
      if (!parse_double(tok[d + 2], v[d])) throw InputError("prefix file row " + std::to_string(row) + ": bad value");
    }
    if (!out.rows.emplace(std::make_pair(std::string(tok[0]), t), std::move(v)).second) {
      throw InputError("prefix file row " + std::to_string(row) + ": duplicate key");
    }
  }
  if (row != count) throw InputError("prefix file: header declares " + std::to_string(count) + " rows, found " + std::to_string(row));
  return out;
}

PrefixVectors read_prefix_file(const std::filesystem::path& path) {
  try {
    return parse_prefix_file(read_file(path));
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

std::string encode_prefix_file(const PrefixVectors& prefixes) {
  std::string out = "SPFX v1 " + std::to_string(prefixes.rows.size()) + " " + std::to_string(prefixes.dim) + "\n";
  for (const auto& [key, v] : prefixes.rows) {
    out += key.first + " " + std::to_string(key.second);
    for (const double x : v) out += " " + format_double(x);
    out += '\n';
  }
  return out;
}

PrefixMode parse_prefix_mode(std::string_view name) {
  if (name == "exact_file") return PrefixMode::exact_file;
  if (name == "mean_pool") return PrefixMode::mean_pool;
  if (name == "pseudo_random") return PrefixMode::pseudo_random;
  throw InputError("unknown prefix mode '" + std::string(name) + "' (expected exact_file|mean_pool|pseudo_random)");
}

std::string_view prefix_mode_name(PrefixMode mode) {
  switch (mode) {
    case PrefixMode::exact_file: return "exact_file";
    case PrefixMode::mean_pool: return "mean_pool";
    case PrefixMode::pseudo_random: return "pseudo_random";
  }
  return "?";
}

PrefixProvider PrefixProvider::mean_pool() { return PrefixProvider{}; }

PrefixProvider PrefixProvider::pseudo_random(const Catalog& catalog, std::size_t dim, std::uint64_t seed) {
  PrefixProvider p;
  p.mode_ = PrefixMode::pseudo_random;
  p.pseudo_table_ = pseudo_embed(catalog, dim, seed);
  return p;
}

PrefixProvider PrefixProvider::exact(PrefixVectors vectors) {
  PrefixProvider p;
  p.mode_ = PrefixMode::exact_file;
  p.exact_ = std::move(vectors);
  return p;
}

std::size_t PrefixProvider::output_dim(const SemanticTable& table) const {
  switch (mode_) {
    case PrefixMode::exact_file: return exact_->dim;
    case PrefixMode::pseudo_random: return pseudo_table_->dim();
    case PrefixMode::mean_pool: break;
  }
  return table.dim();
}

std::vector<double> PrefixProvider::embed(const std::string& user_id, std::span<const std::size_t> items,
                                          const SemanticTable& table) const {
  if (items.empty()) throw std::invalid_argument("prefix_embedding: empty prefix");
  if (mode_ == PrefixMode::exact_file) {
    auto it = exact_->rows.find({user_id, items.size()});
    if (it == exact_->rows.end()) {
      throw InputError("prefix file has no vector for user '" + user_id + "' at t=" + std::to_string(items.size()));
    }
    return it->second;
  }
  const SemanticTable& src = mode_ == PrefixMode::pseudo_random ? *pseudo_table_ : table;
  std::vector<double> acc(src.dim(), 0.0);
  for (const auto item : items) {
    const auto r = src.row(item);
    for (std::size_t d = 0; d < acc.size(); ++d) acc[d] += r[d];
  }
  const double n = static_cast<double>(items.size());
  for (auto& v : acc) v /= n;
  return acc;
}

std::vector<double> PrefixProvider::embed_all_prefixes(const std::string& user_id, std::span<const std::size_t> items,
                                                       const SemanticTable& table) const {
  const std::size_t dim = output_dim(table);
  std::vector<double> out;
  out.reserve(items.size() * dim);
  if (mode_ == PrefixMode::exact_file) {
    for (std::size_t t = 1; t <= items.size(); ++t) {
      const auto v = embed(user_id, items.first(t), table);
      out.insert(out.end(), v.begin(), v.end());
    }
    return out;
  }
  // Running sums in item order match embed() bit-for-bit.
  const SemanticTable& src = mode_ == PrefixMode::pseudo_random ? *pseudo_table_ : table;
  std::vector<double> acc(dim, 0.0);
  for (std::size_t t = 0; t < items.size(); ++t) {
    const auto r = src.row(items[t]);
    for (std::size_t d = 0; d < dim; ++d) acc[d] += r[d];
    const double n = static_cast<double>(t + 1);
    for (std::size_t d = 0; d < dim; ++d) out.push_back(acc[d] / n);
  }
  return out;
}

SemanticProjection SemanticProjection::init(std::size_t sem_dim, std::size_t hidden, Rng& rng) {
  return {uniform_init({sem_dim, hidden}, sem_dim, rng), uniform_init({hidden}, sem_dim, rng)};
}

ad::Tensor project(ad::Graph& g, const SemanticProjection& proj, const ad::Tensor& v) {
  if (v.rank() == 1) {
    auto m = g.stack(std::span(&v, 1));
    return g.row(g.affine(m, proj.W, proj.b), 0);
  }
  return g.affine(v, proj.W, proj.b);
}

}  // namespace seqdn
