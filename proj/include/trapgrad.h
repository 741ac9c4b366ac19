/* trapgrad C API: universal-trigger attacks and trapdoor honeypot defenses
 * for small text classifiers.
 *
 * All objects are opaque handles created and destroyed by this library.
 * Functions return TG_OK (0) on success or an error code; tg_last_error()
 * gives the thread-local message for the most recent failure. Strings
 * returned through char** are owned by the caller and released with
 * tg_string_free().
 */
#ifndef TRAPGRAD_H
#define TRAPGRAD_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define TG_API __declspec(dllexport)
#else
#define TG_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

enum tg_error_code {
  TG_OK = 0,
  TG_ERROR_INVALID_ARGUMENT = 1,
  TG_ERROR_EMPTY_INPUT = 2,
  TG_ERROR_IO = 3,
  TG_ERROR_PARSE = 4,
  TG_ERROR_UNSATISFIABLE = 5,
  TG_ERROR_INTERNAL = 6
};

typedef struct tg_config tg_config;
typedef struct tg_textdata tg_textdata;
typedef struct tg_model tg_model;
typedef struct tg_trigger tg_trigger;
typedef struct tg_trapdoors tg_trapdoors;
typedef struct tg_detector tg_detector;
typedef struct tg_report tg_report;

TG_API const char* tg_version(void);
TG_API const char* tg_last_error(void);
TG_API void tg_string_free(char* s);

/* -------- configuration -------- */
TG_API int tg_config_create(tg_config** out);
TG_API int tg_config_load(const char* path, tg_config** out);
/* `key=value` or separate key/value; value == NULL means key holds both. */
TG_API int tg_config_set(tg_config* config, const char* key, const char* value);
TG_API int tg_config_dump(const tg_config* config, char** out_text);
TG_API void tg_config_free(tg_config* config);

/* -------- datasets -------- */
/* Synthetic corpus or TSV file per config, already split 8:1:1. */
TG_API int tg_data_prepare(const tg_config* config, uint64_t seed, tg_textdata** out_train,
                           tg_textdata** out_attack, tg_textdata** out_test);
TG_API int tg_textdata_load(const char* path, tg_textdata** out);
TG_API int tg_textdata_save(const tg_textdata* data, const char* path);
TG_API int tg_textdata_size(const tg_textdata* data, size_t* out);
TG_API int tg_textdata_classes(const tg_textdata* data, int* out);
TG_API void tg_textdata_free(tg_textdata* data);

/* -------- classifier -------- */
TG_API int tg_train(const tg_config* config, const tg_textdata* train, uint64_t seed,
                    tg_model** out);
TG_API int tg_model_save(const tg_model* model, const char* path);
TG_API int tg_model_load(const char* path, tg_model** out);
TG_API int tg_model_evaluate(const tg_model* model, const tg_textdata* data, double* out_accuracy,
                             double* out_macro_f1);
TG_API int tg_model_predict(const tg_model* model, const char* text, int* out_label);
TG_API void tg_model_free(tg_model* model);

/* -------- attack -------- */
TG_API int tg_attack(const tg_model* model, const tg_textdata* attack_data, int target_label,
                     const tg_config* config, uint64_t seed, tg_trigger** out);
TG_API int tg_trigger_save(const tg_trigger* trigger, const char* path);
TG_API int tg_trigger_load(const char* path, tg_trigger** out);
TG_API int tg_trigger_tokens(const tg_trigger* trigger, char** out_space_joined);
TG_API int tg_trigger_target(const tg_trigger* trigger, int* out_label);
TG_API int tg_attack_accuracy(const tg_model* model, const tg_trigger* trigger,
                              const tg_textdata* data, double* out_accuracy);
TG_API void tg_trigger_free(tg_trigger* trigger);

/* -------- defense -------- */
/* Full pipeline: trapdoor search, injection training, detector training. */
TG_API int tg_defend(const tg_config* config, const tg_textdata* train, uint64_t seed,
                     tg_model** out_model, tg_detector** out_detector,
                     tg_trapdoors** out_trapdoors);
TG_API int tg_trapdoors_save(const tg_trapdoors* set, const char* path);
TG_API int tg_trapdoors_tokens(const tg_trapdoors* set, int label, char** out_space_joined);
TG_API void tg_trapdoors_free(tg_trapdoors* set);
TG_API int tg_detector_save(const tg_detector* detector, const char* path);
TG_API int tg_detector_load(const char* path, tg_detector** out);
TG_API int tg_detector_score(const tg_detector* detector, const char* text, double* out_score);
TG_API void tg_detector_free(tg_detector* detector);

/* -------- scenarios and reports -------- */
TG_API int tg_scenario_run(const tg_config* config, uint64_t seed, tg_report** out);
TG_API int tg_report_jsonl(const tg_report* report, char** out_text);
TG_API int tg_report_table(const tg_report* report, char** out_text);
TG_API int tg_report_save(const tg_report* report, const char* path);
TG_API int tg_report_load(const char* path, tg_report** out);
TG_API void tg_report_free(tg_report* report);

#ifdef __cplusplus
}
#endif

#endif /* TRAPGRAD_H */
