#include "seqdn/seqdn.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <new>
#include <string>
#include <vector>

#include "seqdn/config.hpp"
#include "seqdn/errors.hpp"
#include "seqdn/log.hpp"
#include "seqdn/pipeline.hpp"

struct seqdn_config {
  std::string file;
  std::vector<std::string> overrides;
  seqdn::Config value;
};

struct seqdn_report {
  seqdn::MetricsReport value;
};

namespace {

thread_local std::string last_error;

seqdn_status fail(seqdn_status code, const char* what) {
  last_error = what;
  return code;
}

template <typename F>
seqdn_status guarded(F&& body) {
  try {
    body();
    last_error.clear();
    return SEQDN_OK;
  } catch (const seqdn::InputError& e) {
    return fail(SEQDN_ERR_INPUT, e.what());
  } catch (const seqdn::NumericError& e) {
    return fail(SEQDN_ERR_NUMERIC, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(SEQDN_ERR_INPUT, e.what());
  } catch (const std::bad_alloc&) {
    return fail(SEQDN_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(SEQDN_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(SEQDN_ERR_INTERNAL, "unknown error");
  }
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void fill(seqdn_stats* out, const seqdn::DatasetStats& s) {
  if (!out) return;
  out->users = s.users;
  out->items = s.items;
  out->actions = s.actions;
  out->avg_len = s.avg_len;
  out->sparsity = s.sparsity;
}

void rebuild(seqdn_config& c) {
  c.value = seqdn::build_config(c.file.empty() ? std::nullopt : std::optional<std::filesystem::path>(c.file),
                                c.overrides);
}

#define SEQDN_REQUIRE(cond, msg) \
  if (!(cond)) return fail(SEQDN_ERR_ARGUMENT, msg)

}  // namespace

extern "C" {

const char* seqdn_version(void) { return "0.1.0"; }

const char* seqdn_last_error(void) { return last_error.c_str(); }

void seqdn_string_free(char* s) { std::free(s); }

void seqdn_set_quiet(int quiet) { seqdn::log::set_quiet(quiet != 0); }

seqdn_status seqdn_config_create(const char* path, seqdn_config** out) {
  SEQDN_REQUIRE(out, "config_create: out is NULL");
  *out = nullptr;
  return guarded([&] {
    auto c = std::make_unique<seqdn_config>();
    if (path) c->file = path;
    rebuild(*c);
    *out = c.release();
  });
}

seqdn_status seqdn_config_set(seqdn_config* config, const char* assignment) {
  SEQDN_REQUIRE(config && assignment, "config_set: NULL argument");
  return guarded([&] {
    config->overrides.emplace_back(assignment);
    try {
      rebuild(*config);
    } catch (...) {
      config->overrides.pop_back();
      throw;
    }
  });
}

seqdn_status seqdn_config_json(const seqdn_config* config, char** out) {
  SEQDN_REQUIRE(config && out, "config_json: NULL argument");
  return guarded([&] { *out = copy_string(seqdn::config_to_json(config->value)); });
}

seqdn_status seqdn_config_hash(const seqdn_config* config, uint64_t* out) {
  SEQDN_REQUIRE(config && out, "config_hash: NULL argument");
  return guarded([&] { *out = seqdn::config_hash(config->value); });
}

void seqdn_config_free(seqdn_config* config) { delete config; }

seqdn_status seqdn_prepare(const char* input, const char* format, const char* out_dir, int k_core, int max_len,
                           seqdn_stats* raw, seqdn_stats* filtered) {
  SEQDN_REQUIRE(input && format && out_dir, "prepare: NULL argument");
  return guarded([&] {
    if (k_core < 1) throw seqdn::InputError("k-core must be >= 1");
    if (max_len < 2) throw seqdn::InputError("max-len must be >= 2");
    const auto r = seqdn::prepare_dataset(input, seqdn::parse_log_format(format), out_dir, {k_core, max_len});
    fill(raw, r.raw);
    fill(filtered, r.filtered);
  });
}

seqdn_status seqdn_embed_pseudo(const char* split, size_t dim, uint64_t seed, const char* out, int binary,
                                size_t* count) {
  SEQDN_REQUIRE(split && out, "embed_pseudo: NULL argument");
  return guarded([&] {
    const auto s = seqdn::read_manifest(std::filesystem::path(split));
    const auto n = seqdn::embed_pseudo(s, dim, seed, out, binary != 0);
    if (count) *count = n;
  });
}

seqdn_status seqdn_embed_import(const char* split, const char* input, const char* out, int binary, size_t* count) {
  SEQDN_REQUIRE(split && input, "embed_import: NULL argument");
  return guarded([&] {
    const auto s = seqdn::read_manifest(std::filesystem::path(split));
    const auto n = seqdn::embed_import(s, input, out ? std::optional<std::filesystem::path>(out) : std::nullopt,
                                       binary != 0);
    if (count) *count = n;
  });
}

seqdn_status seqdn_synth(const seqdn_config* config, const char* out_dir) {
  SEQDN_REQUIRE(config && out_dir, "synth: NULL argument");
  return guarded([&] { seqdn::write_synthetic(config->value.synth, out_dir); });
}

seqdn_status seqdn_train(const seqdn_config* config, const char* out_dir, seqdn_train_summary* summary) {
  SEQDN_REQUIRE(config && out_dir, "train: NULL argument");
  return guarded([&] {
    const auto out = seqdn::train_from_config(config->value, out_dir);
    if (summary) {
      summary->epochs_run = static_cast<int>(out.result.train.history.size());
      summary->best_epoch = out.result.train.best_epoch;
      summary->best_valid_ndcg10 = out.result.train.best_metric;
      summary->stopped_early = out.result.train.stopped_early ? 1 : 0;
    }
  });
}

seqdn_status seqdn_evaluate(const char* checkpoint, const char* split, const char* embeddings, seqdn_report** out) {
  SEQDN_REQUIRE(checkpoint && split && out, "evaluate: NULL argument");
  *out = nullptr;
  return guarded([&] {
    auto r = std::make_unique<seqdn_report>();
    r->value = seqdn::evaluate_checkpoint(
        checkpoint, split, embeddings ? std::optional<std::filesystem::path>(embeddings) : std::nullopt);
    *out = r.release();
  });
}

seqdn_status seqdn_report_metric(const seqdn_report* report, const char* name, double* out) {
  SEQDN_REQUIRE(report && name && out, "report_metric: NULL argument");
  const auto& r = report->value;
  const std::string key = name;
  for (std::size_t k = 0; k < seqdn::kCutoffs.size(); ++k) {
    if (key == "HR@" + std::to_string(seqdn::kCutoffs[k])) return *out = r.hr[k], SEQDN_OK;
    if (key == "NDCG@" + std::to_string(seqdn::kCutoffs[k])) return *out = r.ndcg[k], SEQDN_OK;
  }
  if (key == "denoise_ratio") {
    if (!r.denoise_ratio) return fail(SEQDN_ERR_ARGUMENT, "report has no denoise ratio");
    *out = *r.denoise_ratio;
    return SEQDN_OK;
  }
  for (std::size_t b = 0; b < r.bucket_ndcg5.size(); ++b) {
    if (key == "bucket" + std::to_string(b + 1) + "_NDCG@5") return *out = r.bucket_ndcg5[b], SEQDN_OK;
  }
  return fail(SEQDN_ERR_ARGUMENT, "unknown metric name");
}

seqdn_status seqdn_report_format(const seqdn_report* report, int format, char** out) {
  SEQDN_REQUIRE(report && out, "report_format: NULL argument");
  SEQDN_REQUIRE(format >= 0 && format <= 2, "report_format: format must be 0, 1 or 2");
  return guarded([&] {
    const auto& r = report->value;
    *out = copy_string(format == 0 ? seqdn::format_report(r) : format == 1 ? seqdn::report_csv(r) : seqdn::bucket_csv(r));
  });
}

void seqdn_report_free(seqdn_report* report) { delete report; }

seqdn_status seqdn_report_tables(const char* history, const char* masks, const char* labels, const char* metrics,
                                 char** out) {
  SEQDN_REQUIRE(out, "report_tables: out is NULL");
  return guarded([&] {
    seqdn::ReportInputs in;
    if (history) in.history = history;
    if (masks) in.masks = masks;
    if (labels) in.labels = labels;
    if (metrics) in.metrics = metrics;
    *out = copy_string(seqdn::report_tables(in));
  });
}

seqdn_status seqdn_sweep(const seqdn_config* config, const double* thetas, size_t n_thetas, const uint64_t* seeds,
                         size_t n_seeds, char** out) {
  SEQDN_REQUIRE(config && thetas && seeds && out && n_thetas > 0 && n_seeds > 0, "sweep: invalid argument");
  return guarded([&] {
    const auto& c = config->value;
    if (c.paths.split.empty()) throw seqdn::InputError("sweep needs paths.split");
    const auto split = seqdn::read_manifest(std::filesystem::path(c.paths.split));
    const auto table = seqdn::load_table(c, split.catalog);
    const auto rows = seqdn::sweep_theta(c, split, table, std::span(thetas, n_thetas), std::span(seeds, n_seeds));
    *out = copy_string(seqdn::sweep_csv(rows));
  });
}

}  // extern "C"
