/* C API for the long-term-fairness online optimization engine.
 *
 * Opaque handles + integer status codes. All returned strings are owned by
 * the library; copy them before the next call on the same handle or free
 * them with lf_string_free where documented.
 */
#ifndef LOTFAIR_H
#define LOTFAIR_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum lf_status {
    LF_OK = 0,
    LF_ERR_INVALID_ARG = 1,
    LF_ERR_CONFIG = 2,
    LF_ERR_IO = 3,
    LF_ERR_RUN_FAILED = 4,
    LF_ERR_INTERNAL = 5
} lf_status;

typedef struct lf_experiment lf_experiment;

/* Parse a config file. On failure returns a nonzero status; pass a non-NULL
 * errbuf to receive the message. */
lf_status lf_experiment_open(const char* config_path, lf_experiment** out,
                             char* errbuf, size_t errbuf_len);

void lf_experiment_close(lf_experiment* exp);

/* Parse + pre-flight checks only (stream constructible, output dir writable). */
lf_status lf_experiment_validate(lf_experiment* exp, char* errbuf, size_t errbuf_len);

/* Run all configured methods and write trace CSVs + summary.json to the
 * configured output directory. Returns LF_ERR_RUN_FAILED iff the LoTFair run
 * itself failed; baseline failures are recorded in summary.json. */
lf_status lf_experiment_run(lf_experiment* exp, char* errbuf, size_t errbuf_len);

/* JSON metric summary of the last successful run (valid until the next run
 * or close). NULL before any run. */
const char* lf_experiment_summary(const lf_experiment* exp);

/* Closed-form multiplier/fairness/regret bounds for the configured constants,
 * as a heap-allocated JSON string; free with lf_string_free. */
lf_status lf_experiment_bounds_json(lf_experiment* exp, char** json_out,
                                    char* errbuf, size_t errbuf_len);

void lf_string_free(char* s);

/* Library version string, static storage. */
const char* lf_version(void);

#ifdef __cplusplus
}
#endif

#endif /* LOTFAIR_H */
