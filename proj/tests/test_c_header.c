/* Copyright 2026 The wkselect Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* Compiled as C to keep the public header free of C++. */
#include <stddef.h>

#include "wks/wks.h"

int main(void) {
  wks_model* model = NULL;
  wks_status s = wks_model_create("mechanical", 1, NULL, NULL, 0, &model);
  double c0 = 0.0;
  if (s != WKS_OK || wks_model_get_c0(model, &c0) != WKS_OK) return 1;
  wks_model_destroy(model);
  return wks_version()[0] == '\0';
}
