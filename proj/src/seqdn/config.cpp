#include "seqdn/config.hpp"

#include <cstdio>
#include <cstdlib>

#include <nlohmann/json.hpp>

#include "seqdn/errors.hpp"
#include "seqdn/fileio.hpp"

namespace seqdn {
namespace {

using json = nlohmann::ordered_json;

json to_json(const Config& c) {
  json j;
  j["data"] = {{"k_core", c.data.k_core}, {"max_len", c.data.max_len}};
  const auto& t = c.train;
  j["model"] = {{"emb_dim", t.model.emb_dim}, {"hidden", t.model.hidden}, {"layers", t.model.layers},
                {"init_seed", t.model.init_seed}};
  j["align"] = {{"tau", t.align.tau}};
  j["gate"] = {{"theta", t.gate.theta},   {"tau_gumbel", t.gate.tau_gumbel},
               {"tau_final", t.gate.tau_final}, {"hard", t.gate.hard},
               {"eps", t.gate.eps},       {"warmup_epochs", t.gate.warmup_epochs}};
  j["train"] = {{"lr", t.lr},
                {"batch_size", t.batch_size},
                {"patience", t.patience},
                {"max_epochs", t.max_epochs},
                {"seed", t.seed},
                {"w_ce", t.weights.ce},
                {"w_info", t.weights.info},
                {"w_recon", t.weights.recon},
                {"disable_info", t.ablation.disable_info},
                {"disable_recon", t.ablation.disable_recon},
                {"long_only", t.ablation.long_only},
                {"short_only", t.ablation.short_only},
                {"mask_targets", t.mask_targets}};
  j["semantic"] = {{"prefix_mode", std::string(prefix_mode_name(c.semantic.prefix_mode))},
                   {"pseudo_dim", c.semantic.pseudo_dim},
                   {"pseudo_seed", c.semantic.pseudo_seed}};
  j["eval"] = {{"denoise", t.denoise_eval},
               {"bucket_mode", std::string(bucket_mode_name(c.eval.bucket_mode))},
               {"n_buckets", c.eval.n_buckets},
               {"batch_size", c.eval.batch_size}};
  const auto& s = c.synth;
  j["synth"] = {{"n_users", s.n_users},       {"n_items", s.n_items},     {"n_clusters", s.n_clusters},
                {"min_len", s.min_len},       {"max_len", s.max_len},     {"noise_rate", s.noise_rate},
                {"transition", s.transition}, {"sem_dim", s.sem_dim},     {"sem_spread", s.sem_spread},
                {"seed", s.seed}};
  j["paths"] = {{"split", c.paths.split},
                {"embeddings", c.paths.embeddings},
                {"prefix_file", c.paths.prefix_file},
                {"labels", c.paths.labels}};
  return j;
}

template <typename T>
T get(const json& j, const char* section, const char* key) {
  try {
    return j.at(section).at(key).get<T>();
  } catch (const json::exception& e) {
    throw InputError(std::string("config ") + section + "." + key + ": " + e.what());
  }
}

Config from_json(const json& j) {
  Config c;
  c.data.k_core = get<int>(j, "data", "k_core");
  c.data.max_len = get<int>(j, "data", "max_len");
  auto& t = c.train;
  t.model.emb_dim = get<std::size_t>(j, "model", "emb_dim");
  t.model.hidden = get<std::size_t>(j, "model", "hidden");
  t.model.layers = get<std::size_t>(j, "model", "layers");
  t.model.init_seed = get<std::uint64_t>(j, "model", "init_seed");
  t.align.tau = get<double>(j, "align", "tau");
  t.gate.theta = get<double>(j, "gate", "theta");
  t.gate.tau_gumbel = get<double>(j, "gate", "tau_gumbel");
  t.gate.tau_final = get<double>(j, "gate", "tau_final");
  t.gate.hard = get<bool>(j, "gate", "hard");
  t.gate.eps = get<double>(j, "gate", "eps");
  t.gate.warmup_epochs = get<int>(j, "gate", "warmup_epochs");
  t.lr = get<double>(j, "train", "lr");
  t.batch_size = get<std::size_t>(j, "train", "batch_size");
  t.patience = get<int>(j, "train", "patience");
  t.max_epochs = get<int>(j, "train", "max_epochs");
  t.seed = get<std::uint64_t>(j, "train", "seed");
  t.weights.ce = get<double>(j, "train", "w_ce");
  t.weights.info = get<double>(j, "train", "w_info");
  t.weights.recon = get<double>(j, "train", "w_recon");
  t.ablation.disable_info = get<bool>(j, "train", "disable_info");
  t.ablation.disable_recon = get<bool>(j, "train", "disable_recon");
  t.ablation.long_only = get<bool>(j, "train", "long_only");
  t.ablation.short_only = get<bool>(j, "train", "short_only");
  t.mask_targets = get<bool>(j, "train", "mask_targets");
  c.semantic.prefix_mode = parse_prefix_mode(get<std::string>(j, "semantic", "prefix_mode"));
  c.semantic.pseudo_dim = get<std::size_t>(j, "semantic", "pseudo_dim");
  c.semantic.pseudo_seed = get<std::uint64_t>(j, "semantic", "pseudo_seed");
  t.denoise_eval = get<bool>(j, "eval", "denoise");
  c.eval.bucket_mode = parse_bucket_mode(get<std::string>(j, "eval", "bucket_mode"));
  c.eval.n_buckets = get<std::size_t>(j, "eval", "n_buckets");
  c.eval.batch_size = get<std::size_t>(j, "eval", "batch_size");
  auto& s = c.synth;
  s.n_users = get<std::size_t>(j, "synth", "n_users");
  s.n_items = get<std::size_t>(j, "synth", "n_items");
  s.n_clusters = get<std::size_t>(j, "synth", "n_clusters");
  s.min_len = get<std::size_t>(j, "synth", "min_len");
  s.max_len = get<std::size_t>(j, "synth", "max_len");
  s.noise_rate = get<double>(j, "synth", "noise_rate");
  s.transition = get<double>(j, "synth", "transition");
  s.sem_dim = get<std::size_t>(j, "synth", "sem_dim");
  s.sem_spread = get<double>(j, "synth", "sem_spread");
  s.seed = get<std::uint64_t>(j, "synth", "seed");
  c.paths.split = get<std::string>(j, "paths", "split");
  c.paths.embeddings = get<std::string>(j, "paths", "embeddings");
  c.paths.prefix_file = get<std::string>(j, "paths", "prefix_file");
  c.paths.labels = get<std::string>(j, "paths", "labels");
  if (c.data.k_core < 1) throw InputError("config data.k_core must be >= 1");
  if (c.data.max_len < 2) throw InputError("config data.max_len must be >= 2");
  if (c.eval.n_buckets == 0) throw InputError("config eval.n_buckets must be >= 1");
  validate(c.train);
  validate(c.synth);
  return c;
}

// Type-compatible assignment of one leaf; `where` names it in errors.
void assign_leaf(json& slot, const json& value, const std::string& where) {
  const bool ok = (slot.is_boolean() && value.is_boolean()) || (slot.is_string() && value.is_string()) ||
                  (slot.is_number_float() && value.is_number()) ||
                  (slot.is_number_unsigned() && value.is_number_unsigned()) ||
                  (slot.is_number_integer() && !slot.is_number_unsigned() && value.is_number_integer());
  if (!ok) throw InputError("config " + where + ": expected " + std::string(slot.type_name()) + ", got " + value.dump());
  const bool was_float = slot.is_number_float();
  slot = value;
  if (was_float) slot = value.get<double>();
}

void merge(json& base, const json& user) {
  if (!user.is_object()) throw InputError("config: top level must be an object");
  for (const auto& [section, body] : user.items()) {
    if (!base.contains(section)) throw InputError("config: unknown section '" + section + "'");
    if (!body.is_object()) throw InputError("config: section '" + section + "' must be an object");
    for (const auto& [key, value] : body.items()) {
      if (!base[section].contains(key)) throw InputError("config: unknown key '" + section + "." + key + "'");
      assign_leaf(base[section][key], value, section + "." + key);
    }
  }
}

json parse_json(std::string_view text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(what + ": " + e.what());
  }
}

}  // namespace

std::string config_to_json(const Config& config) { return to_json(config).dump(2); }

Config config_from_json(std::string_view text) {
  auto base = to_json(Config{});
  merge(base, parse_json(text, "config"));
  return from_json(base);
}

Config build_config(const std::optional<std::filesystem::path>& file, std::span<const std::string> overrides) {
  auto base = to_json(Config{});
  bool seed_set = false;
  if (file) {
    const auto user = parse_json(read_file(*file), file->string());
    merge(base, user);
    seed_set = user.contains("train") && user["train"].is_object() && user["train"].contains("seed");
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    const auto dot = o.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
      throw InputError("override '" + o + "': expected section.key=value");
    }
    const std::string section = o.substr(0, dot), key = o.substr(dot + 1, eq - dot - 1), raw = o.substr(eq + 1);
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;
    merge(base, json{{section, {{key, value}}}});
    seed_set = seed_set || (section == "train" && key == "seed");
  }
  if (!seed_set) {
    if (const char* env = std::getenv("SEQDN_SEED"); env && *env) {
      char* end = nullptr;
      const unsigned long long v = std::strtoull(env, &end, 10);
      if (*end != '\0') throw InputError("SEQDN_SEED must be a non-negative integer");
      base["train"]["seed"] = static_cast<std::uint64_t>(v);
    }
  }
  return from_json(base);
}

std::uint64_t config_hash(const Config& config) { return fnv1a64(config_to_json(config)); }

std::string hash_hex(std::uint64_t hash) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

}  // namespace seqdn
