/* Public C interface of libseqdn.
 *
 * Every call returns a seqdn_status. On failure, seqdn_last_error() gives a
 * message for the calling thread that stays valid until the next call on
 * that thread. Strings returned through char** are owned by the caller and
 * released with seqdn_string_free(). Handles are opaque and released with
 * their matching *_free function; passing NULL to a free function is a
 * no-op. */
#ifndef SEQDN_SEQDN_H
#define SEQDN_SEQDN_H

#include <stddef.h>
#include <stdint.h>

#if defined(SEQDN_BUILDING_LIBRARY)
#define SEQDN_API __attribute__((visibility("default")))
#else
#define SEQDN_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum seqdn_status {
  SEQDN_OK = 0,
  SEQDN_ERR_INTERNAL = 1,
  SEQDN_ERR_INPUT = 2,    /* malformed or missing input data */
  SEQDN_ERR_NUMERIC = 3,  /* non-finite loss or score */
  SEQDN_ERR_ARGUMENT = 4  /* invalid call arguments */
} seqdn_status;

typedef struct seqdn_config seqdn_config;
typedef struct seqdn_report seqdn_report;

typedef struct seqdn_stats {
  uint64_t users;
  uint64_t items;
  uint64_t actions;
  double avg_len;
  double sparsity;
} seqdn_stats;

typedef struct seqdn_train_summary {
  int epochs_run;
  int best_epoch;
  double best_valid_ndcg10;
  int stopped_early;
} seqdn_train_summary;

SEQDN_API const char* seqdn_version(void);
SEQDN_API const char* seqdn_last_error(void);
SEQDN_API void seqdn_string_free(char* s);
/* Silences library warnings process-wide when nonzero. */
SEQDN_API void seqdn_set_quiet(int quiet);

/* Configuration. path may be NULL for defaults. */
SEQDN_API seqdn_status seqdn_config_create(const char* path, seqdn_config** out);
/* Applies "section.key=value" overrides; SEQDN_SEED is consulted again
 * after each call unless train.seed was set explicitly. */
SEQDN_API seqdn_status seqdn_config_set(seqdn_config* config, const char* assignment);
SEQDN_API seqdn_status seqdn_config_json(const seqdn_config* config, char** out);
SEQDN_API seqdn_status seqdn_config_hash(const seqdn_config* config, uint64_t* out);
SEQDN_API void seqdn_config_free(seqdn_config* config);

/* Reads an interaction log (format "tsv" or "movielens"), filters, splits
 * and writes out_dir/split.manifest and out_dir/stats.txt. raw/filtered may
 * be NULL. */
SEQDN_API seqdn_status seqdn_prepare(const char* input, const char* format, const char* out_dir, int k_core,
                                     int max_len, seqdn_stats* raw, seqdn_stats* filtered);

/* Semantic embedding files for the catalog of a split manifest. */
SEQDN_API seqdn_status seqdn_embed_pseudo(const char* split, size_t dim, uint64_t seed, const char* out, int binary,
                                          size_t* count);
/* out may be NULL to validate only. */
SEQDN_API seqdn_status seqdn_embed_import(const char* split, const char* input, const char* out, int binary,
                                          size_t* count);

/* Writes interactions.tsv, noise_labels.tsv and semantic.semb from the
 * config's synth section. */
SEQDN_API seqdn_status seqdn_synth(const seqdn_config* config, const char* out_dir);

/* Trains from paths.* of the config; writes checkpoint.sdck, history.csv,
 * masks.txt, final_masks.txt, config.json and metrics.txt. */
SEQDN_API seqdn_status seqdn_train(const seqdn_config* config, const char* out_dir, seqdn_train_summary* summary);

/* Test-stage evaluation of a checkpoint. embeddings may be NULL. */
SEQDN_API seqdn_status seqdn_evaluate(const char* checkpoint, const char* split, const char* embeddings,
                                      seqdn_report** out);
/* name: "HR@5", "HR@10", "HR@20", "NDCG@5", "NDCG@10", "NDCG@20",
 * "denoise_ratio" or "bucketN_NDCG@5". */
SEQDN_API seqdn_status seqdn_report_metric(const seqdn_report* report, const char* name, double* out);
/* format: 0 key-value text, 1 CSV, 2 bucket CSV. */
SEQDN_API seqdn_status seqdn_report_format(const seqdn_report* report, int format, char** out);
SEQDN_API void seqdn_report_free(seqdn_report* report);

/* Summary, bucket and noise-recovery tables; any path may be NULL. */
SEQDN_API seqdn_status seqdn_report_tables(const char* history, const char* masks, const char* labels,
                                           const char* metrics, char** out);

/* Test metrics per theta averaged over seeds, as CSV. */
SEQDN_API seqdn_status seqdn_sweep(const seqdn_config* config, const double* thetas, size_t n_thetas,
                                   const uint64_t* seeds, size_t n_seeds, char** out);

#ifdef __cplusplus
}
#endif

#endif
