#include <stdio.h>
#include <string.h>

#include "symvalic.h"

#define CHECK(cond)                                                      \
  do {                                                                   \
    if (!(cond)) {                                                       \
      fprintf(stderr, "check failed at line %d: %s\n", __LINE__, #cond); \
      return 1;                                                          \
    }                                                                    \
  } while (0)

int main(void) {
  const char *src =
      "contract Sensitive { function sensitive(address recipient) public { "
      "selfdestruct(recipient); } }";
  SvcContract *contract = NULL;
  CHECK(svc_contract_parse(src, &contract) == SVC_STATUS_OK);

  SvcConfig *config = svc_config_default();
  CHECK(svc_config_set_dep_budget(config, 3, 1, 2) == SVC_STATUS_OK);

  SvcResult *result = NULL;
  CHECK(svc_analyze(contract, config, &result) == SVC_STATUS_OK);
  CHECK(svc_result_truncated(result) == 0);

  char *json = NULL;
  size_t count = 0;
  CHECK(svc_scan(result, NULL, &json, &count) == SVC_STATUS_OK);
  CHECK(count == 2);
  CHECK(strstr(json, "UNGUARDED_SENSITIVE") != NULL);
  svc_string_free(json);

  SvcContract *broken = NULL;
  CHECK(svc_contract_parse("contract {", &broken) == SVC_STATUS_PARSE);
  CHECK(broken == NULL);
  CHECK(svc_last_error_message() != NULL);

  svc_result_free(result);
  svc_config_free(config);
  svc_contract_free(contract);
  puts("ok");
  return 0;
}
