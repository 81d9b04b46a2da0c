//
// Copyright 2026 The userdp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#ifndef USERDP_STATUS_MACROS_H_
#define USERDP_STATUS_MACROS_H_

#include <utility>

#include "absl/status/status.h"
#include "absl/status/statusor.h"

#define USERDP_STATUS_CONCAT_INNER_(x, y) x##y
#define USERDP_STATUS_CONCAT_(x, y) USERDP_STATUS_CONCAT_INNER_(x, y)

#define USERDP_RETURN_IF_ERROR(expr)              \
  do {                                            \
    const ::absl::Status userdp_status_ = (expr); \
    if (!userdp_status_.ok()) {                   \
      return userdp_status_;                      \
    }                                             \
  } while (false)

#define USERDP_ASSIGN_OR_RETURN(lhs, rexpr)                              \
  USERDP_ASSIGN_OR_RETURN_IMPL_(                                         \
      USERDP_STATUS_CONCAT_(userdp_statusor_, __LINE__), lhs, rexpr)

#define USERDP_ASSIGN_OR_RETURN_IMPL_(statusor, lhs, rexpr) \
  auto statusor = (rexpr);                                  \
  if (!statusor.ok()) {                                     \
    return std::move(statusor).status();                    \
  }                                                         \
  lhs = std::move(statusor).value()

#endif  // USERDP_STATUS_MACROS_H_
