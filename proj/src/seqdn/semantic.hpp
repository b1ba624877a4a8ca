#pragma once

// Frozen semantic item vectors, per-prefix semantic interests and the
// learnable projection into the collaborative space.
//
// Embedding file, text form:
//   SEMB v1 <count> <D>
//   <item_id> <D space-separated decimals>        (count lines)
// Binary form: "SEMB", version byte 1, u32 count, u32 D, then per item a
// u32-length-prefixed id followed by D little-endian float64 values.
//
// Prefix file (exact mode):
//   SPFX v1 <count> <D>
//   <user_id> <t> <D decimals>    (t = prefix length, 1-based)

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "seqdn/adam.hpp"
#include "seqdn/dataio.hpp"
#include "seqdn/rng.hpp"
#include "seqdn/tensor.hpp"

namespace seqdn {

// Vectors keyed by raw item id, in file order.
struct RawEmbeddings {
  std::size_t dim = 0;
  std::vector<std::string> ids;
  std::vector<double> values;  // ids.size() * dim

  std::size_t count() const { return ids.size(); }
  std::span<const double> row(std::size_t i) const { return std::span(values).subspan(i * dim, dim); }
};

RawEmbeddings parse_embeddings(std::string_view bytes);
RawEmbeddings read_embeddings(const std::filesystem::path& path);
std::string encode_embeddings_text(const RawEmbeddings& emb);
std::string encode_embeddings_binary(const RawEmbeddings& emb);
void write_embeddings(const std::filesystem::path& path, const RawEmbeddings& emb, bool binary = false);

// Dense table indexed like the catalog; row 0 is the zero padding vector.
class SemanticTable {
 public:
  SemanticTable() = default;
  SemanticTable(std::size_t n_items, std::size_t dim);

  std::size_t dim() const { return dim_; }
  std::size_t n_items() const { return n_items_; }
  std::span<const double> row(std::size_t item) const;
  void set_row(std::size_t item, std::span<const double> v);
  bool has(std::size_t item) const { return item > 0 && item <= n_items_ && present_[item]; }
  // Throws InputError naming the first catalog item with no vector.
  void require_complete(const Catalog& catalog) const;

 private:
  std::size_t n_items_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> values_;
  std::vector<char> present_;
};

// Binds file rows to catalog indices. Ids unknown to the catalog, duplicate
// ids and ragged rows are errors.
SemanticTable bind_embeddings(const RawEmbeddings& emb, const Catalog& catalog);
SemanticTable load_semantic_table(const std::filesystem::path& path, const Catalog& catalog);

// Deterministic unit vectors seeded by a hash of each item id.
RawEmbeddings pseudo_embeddings(const Catalog& catalog, std::size_t dim, std::uint64_t seed);
SemanticTable pseudo_embed(const Catalog& catalog, std::size_t dim, std::uint64_t seed);

struct PrefixVectors {
  std::size_t dim = 0;
  std::map<std::pair<std::string, std::size_t>, std::vector<double>> rows;
};

PrefixVectors parse_prefix_file(std::string_view text);
PrefixVectors read_prefix_file(const std::filesystem::path& path);
std::string encode_prefix_file(const PrefixVectors& prefixes);

enum class PrefixMode { exact_file, mean_pool, pseudo_random };

PrefixMode parse_prefix_mode(std::string_view name);
std::string_view prefix_mode_name(PrefixMode mode);

// Source of semantic interest vectors for sequence prefixes.
class PrefixProvider {
 public:
  static PrefixProvider mean_pool();
  // Mean over a pseudo table generated from the catalog, ignoring the
  // table passed to embed().
  static PrefixProvider pseudo_random(const Catalog& catalog, std::size_t dim, std::uint64_t seed);
  static PrefixProvider exact(PrefixVectors vectors);

  PrefixMode mode() const { return mode_; }

  // Semantic vector of the prefix `items` of user `user_id`. Throws for an
  // empty prefix and, in exact mode, for a missing (user, length) key.
  std::vector<double> embed(const std::string& user_id, std::span<const std::size_t> items,
                            const SemanticTable& table) const;

  // embed() for every prefix length 1..items.size(), row-major.
  std::vector<double> embed_all_prefixes(const std::string& user_id, std::span<const std::size_t> items,
                                         const SemanticTable& table) const;

  std::size_t output_dim(const SemanticTable& table) const;

 private:
  PrefixMode mode_ = PrefixMode::mean_pool;
  std::optional<SemanticTable> pseudo_table_;
  std::optional<PrefixVectors> exact_;
};

// Affine map R^D -> R^hidden trained by the alignment loss.
struct SemanticProjection {
  ad::Tensor W;  // [D, hidden]
  ad::Tensor b;  // [hidden]

  static SemanticProjection init(std::size_t sem_dim, std::size_t hidden, Rng& rng);
};

// v is [D] or [rows, D]; result has the matching rank.
ad::Tensor project(ad::Graph& g, const SemanticProjection& proj, const ad::Tensor& v);

}  // namespace seqdn
