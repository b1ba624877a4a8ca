#include "seqdn/checkpoint.hpp"

#include <algorithm>

#include "seqdn/bytes.hpp"
#include "seqdn/errors.hpp"
#include "seqdn/fileio.hpp"

namespace seqdn {

const StoredTensor* Checkpoint::find(std::string_view name) const {
  auto it = std::find_if(tensors.begin(), tensors.end(), [&](const auto& t) { return t.name == name; });
  return it == tensors.end() ? nullptr : &*it;
}

std::string encode_checkpoint(std::string_view metadata, std::span<const NamedParameter> params) {
  std::string out(kCheckpointMagic, 4);
  out.push_back(static_cast<char>(kCheckpointVersion));
  bytes::put_u32(out, static_cast<std::uint32_t>(metadata.size()));
  out.append(metadata);
  bytes::put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    bytes::put_u32(out, static_cast<std::uint32_t>(p.name.size()));
    out.append(p.name);
    const auto& shape = p.tensor.shape();
    bytes::put_u32(out, static_cast<std::uint32_t>(shape.size()));
    for (const auto d : shape) bytes::put_u64(out, d);
    for (const double v : p.tensor.data()) bytes::put_f64(out, v);
  }
  return out;
}

Checkpoint decode_checkpoint(std::string_view data) {
  bytes::Reader in(data, "checkpoint");
  if (in.take(4) != std::string_view(kCheckpointMagic, 4)) throw InputError("checkpoint: bad magic");
  if (const auto v = in.u8(); v != kCheckpointVersion) {
    throw InputError("checkpoint: unsupported version " + std::to_string(v));
  }
  Checkpoint ck;
  ck.metadata = std::string(in.take(in.u32()));
  const std::uint32_t count = in.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    StoredTensor t;
    t.name = std::string(in.take(in.u32()));
    const std::uint32_t rank = in.u32();
    if (rank == 0 || rank > 8) throw InputError("checkpoint: tensor '" + t.name + "' has bad rank");
    for (std::uint32_t r = 0; r < rank; ++r) t.shape.push_back(in.u64());
    const std::size_t n = ad::numel_of(t.shape);
    if (n > (data.size() - in.position()) / 8) {
      throw InputError("checkpoint: tensor '" + t.name + "' exceeds file size");
    }
    t.values.resize(n);
    for (auto& v : t.values) v = in.f64();
    ck.tensors.push_back(std::move(t));
  }
  if (!in.done()) throw InputError("checkpoint: trailing bytes");
  return ck;
}

void write_checkpoint(const std::filesystem::path& path, std::string_view metadata,
                      std::span<const NamedParameter> params) {
  write_file_atomic(path, encode_checkpoint(metadata, params));
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path));
}

void restore_parameters(const Checkpoint& checkpoint, std::span<NamedParameter> params) {
  for (auto& p : params) {
    const StoredTensor* stored = checkpoint.find(p.name);
    if (!stored) throw InputError("checkpoint: missing tensor '" + p.name + "'");
    if (stored->shape != p.tensor.shape()) {
      throw InputError("checkpoint: tensor '" + p.name + "' has shape " + ad::shape_str(stored->shape) +
                       ", model expects " + ad::shape_str(p.tensor.shape()));
    }
    std::copy(stored->values.begin(), stored->values.end(), p.tensor.mutable_data().begin());
  }
}

}  // namespace seqdn
