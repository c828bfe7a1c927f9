#ifndef SYMVALIC_H
#define SYMVALIC_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum SvcStatus {
  SVC_STATUS_OK = 0,
  SVC_STATUS_NULL_ARGUMENT = 1,
  SVC_STATUS_INVALID_UTF8 = 2,
  SVC_STATUS_PARSE = 3,
  SVC_STATUS_CONFIG = 4,
  SVC_STATUS_FACTS = 5,
  SVC_STATUS_PANIC = 6,
} SvcStatus;

typedef struct SvcContract SvcContract;

typedef struct SvcConfig SvcConfig;

typedef struct SvcResult SvcResult;

/* Message for the last failed call on this thread, or NULL. */
const char *svc_last_error_message(void);

SvcStatus svc_contract_parse(const char *source, SvcContract **out);

void svc_contract_free(SvcContract *contract);

SvcConfig *svc_config_default(void);

void svc_config_free(SvcConfig *config);

SvcStatus svc_config_set_seed(SvcConfig *config, uint64_t seed);

SvcStatus svc_config_set_tx_rounds(SvcConfig *config, uint32_t rounds);

SvcStatus svc_config_set_arith_depth(SvcConfig *config, uint32_t depth);

SvcStatus svc_config_set_dep_budget(SvcConfig *config, uint32_t args, uint32_t storage_loads, uint32_t tx_args);

/* A NULL config means the defaults. */
SvcStatus svc_analyze(const SvcContract *contract, const SvcConfig *config, SvcResult **out);

void svc_result_free(SvcResult *result);

/* 1 if a resource cap was hit, 0 if not, -1 for a NULL handle. */
int32_t svc_result_truncated(const SvcResult *result);

SvcStatus svc_result_to_json(const SvcResult *result, char **out);

/* facts_json may be NULL; warning_count may be NULL. */
SvcStatus svc_scan(const SvcResult *result, const char *facts_json, char **out, size_t *warning_count);

void svc_string_free(char *s);

#ifdef __cplusplus
}  /* extern "C" */
#endif

#endif  /* SYMVALIC_H */
