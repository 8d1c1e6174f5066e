#ifndef ITEACH_ITEACH_H
#define ITEACH_ITEACH_H

/* C interface to the iteach library. Structured inputs and outputs are JSON
 * text. Strings returned through `char**` are owned by the caller and must be
 * released with iteach_string_free. On a non-OK status the out parameters are
 * left untouched, except where noted, and iteach_last_error() describes the
 * failure for the calling thread. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define ITEACH_API __declspec(dllexport)
#else
#define ITEACH_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum iteach_status {
  ITEACH_OK = 0,
  ITEACH_E_INVALID_ARGUMENT = 1,
  ITEACH_E_PARSE = 2,
  ITEACH_E_NOT_FOUND = 3,
  ITEACH_E_TRANSPORT = 4,
  ITEACH_E_GENERATION_FAILED = 5,
  ITEACH_E_NUMERIC = 6,
  ITEACH_E_IO = 7,
  ITEACH_E_SCHEMA = 8,
  ITEACH_E_EXPERIMENT = 9,
  ITEACH_E_INTERNAL = 10
} iteach_status;

typedef struct iteach_env iteach_env;         /* simulator bound to one task */
typedef struct iteach_program iteach_program; /* validated code policy */
typedef struct iteach_model iteach_model;     /* trained policy network */

ITEACH_API const char* iteach_version(void);
ITEACH_API const char* iteach_status_name(iteach_status status);
/* Message of the last failed call on this thread; "" if none. */
ITEACH_API const char* iteach_last_error(void);
ITEACH_API void iteach_string_free(char* s);

/* ---- configuration ---- */

/* Built-in task catalogue as a JSON array. */
ITEACH_API iteach_status iteach_tasks_json(char** out_json);
/* Fully defaulted trainer or experiment config. NULL or "" input means all
 * defaults; unknown keys are rejected. */
ITEACH_API iteach_status iteach_trainer_config_normalize(const char* json, char** out_json);
ITEACH_API iteach_status iteach_experiment_config_normalize(const char* json, char** out_json);

/* ---- environment ---- */

ITEACH_API iteach_status iteach_env_create(const char* task, iteach_env** out);
ITEACH_API void iteach_env_free(iteach_env* env);
/* Resets from `seed` and returns the state as JSON. */
ITEACH_API iteach_status iteach_env_reset(iteach_env* env, uint64_t seed, char** out_state_json);
/* translation in meters (clipped by the simulator); close != 0 closes the
 * gripper. `out_success` may be NULL. */
ITEACH_API iteach_status iteach_env_step(iteach_env* env, const double translation[3], int close,
                                         char** out_state_json, int* out_success);

/* ---- code policies ---- */

ITEACH_API iteach_status iteach_program_scripted(const char* task, iteach_program** out);
/* Parses and validates against `task`. */
ITEACH_API iteach_status iteach_program_parse(const char* json, const char* task, iteach_program** out);
ITEACH_API iteach_status iteach_program_to_json(const iteach_program* program, char** out_json);
ITEACH_API void iteach_program_free(iteach_program* program);
/* Generation through the endpoint described by the "llm" object of an
 * experiment config (or the scripted policy when "scripted" is true). The
 * generation record is returned through `out_record_json` on success and
 * also on ITEACH_E_TRANSPORT / ITEACH_E_GENERATION_FAILED when a transcript
 * exists. `out_record_json` may be NULL. */
ITEACH_API iteach_status iteach_program_generate(const char* task, const char* experiment_config_json,
                                                 iteach_program** out, char** out_record_json);

/* ---- training and evaluation ---- */

/* method: "iteach", "bc" or "warm-start-only". `episodes` is the interactive
 * episode count (iteach) or the number of demonstrations (bc); 0 keeps the
 * trainer value. Metrics are the run-summary metrics object. */
ITEACH_API iteach_status iteach_train(const iteach_env* env, const iteach_program* program, const char* method,
                                      const char* trainer_json, size_t episodes, uint64_t seed,
                                      iteach_model** out_model, char** out_metrics_json);
ITEACH_API iteach_status iteach_model_parse(const char* json, iteach_model** out);
ITEACH_API iteach_status iteach_model_to_json(const iteach_model* model, char** out_json);
ITEACH_API void iteach_model_free(iteach_model* model);

/* Success rate over the trainer's eval_episodes, evaluation stream of `seed`. */
ITEACH_API iteach_status iteach_evaluate(const iteach_model* model, const iteach_env* env, const char* trainer_json,
                                         uint64_t seed, double* out_success);
ITEACH_API iteach_status iteach_evaluate_teacher(const iteach_program* program, const iteach_env* env,
                                                 const char* trainer_json, uint64_t seed, double* out_success);

/* Successful teacher demonstrations as JSON. */
ITEACH_API iteach_status iteach_collect_demos(const iteach_env* env, const iteach_program* program,
                                              const char* trainer_json, size_t count, uint64_t seed,
                                              char** out_json);

ITEACH_API iteach_status iteach_beta_sweep(const iteach_env* env, const iteach_program* program,
                                           const char* trainer_json, const double* betas, size_t n_betas,
                                           const uint64_t* seeds, size_t n_seeds, char** out_rows_json);
ITEACH_API iteach_status iteach_ablation(const iteach_env* env, const iteach_program* program,
                                         const char* trainer_json, const size_t* budgets, size_t n_budgets,
                                         const uint64_t* seeds, size_t n_seeds, char** out_rows_json);

/* ---- experiments ---- */

typedef void (*iteach_progress_fn)(const char* cell, int skipped, void* user);

/* Runs or resumes the grid. Cell failures do not fail the call; they are
 * listed in the result JSON ({csv, executed, skipped, records, failures}). */
ITEACH_API iteach_status iteach_experiment_run(const char* experiment_config_json, iteach_progress_fn progress,
                                               void* user, char** out_result_json);
/* Writes the report files; returns the written paths as a JSON array. */
ITEACH_API iteach_status iteach_report(const char* const* csv_paths, size_t n_paths, const char* out_dir,
                                       char** out_written_json);

#ifdef __cplusplus
}
#endif

#endif
