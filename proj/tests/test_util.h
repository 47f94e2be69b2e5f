/*
 * Copyright 2026 The ikp Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef IKP_TESTS_TEST_UTIL_H_
#define IKP_TESTS_TEST_UTIL_H_

#include <random>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "gtest/gtest.h"
#include "ikp/types.h"

#define IKP_CONCAT_INNER(a, b) a##b
#define IKP_CONCAT(a, b) IKP_CONCAT_INNER(a, b)

#define ASSERT_OK(expr) ASSERT_TRUE((expr).ok()) << IKP_STATUS_MSG(expr)
#define EXPECT_OK(expr) EXPECT_TRUE((expr).ok()) << IKP_STATUS_MSG(expr)

#define ASSERT_OK_AND_ASSIGN(lhs, expr) \
  ASSERT_OK_AND_ASSIGN_IMPL(IKP_CONCAT(statusor_, __LINE__), lhs, expr)
#define ASSERT_OK_AND_ASSIGN_IMPL(tmp, lhs, expr)    \
  auto tmp = (expr);                                 \
  ASSERT_TRUE(tmp.ok()) << tmp.status().ToString();  \
  lhs = std::move(*tmp)

namespace ikp::testing {

inline const absl::Status& StatusOf(const absl::Status& s) { return s; }
template <typename T>
const absl::Status& StatusOf(const absl::StatusOr<T>& s) {
  return s.status();
}

// Random keypoints strictly inside [margin, W - 1 - margin] x [...].
inline KeypointSet RandomKeypoints(int k, int width, int height, double margin,
                                   std::mt19937_64& rng) {
  std::uniform_real_distribution<double> ux(margin, width - 1 - margin);
  std::uniform_real_distribution<double> uy(margin, height - 1 - margin);
  std::vector<Point> pts;
  for (int i = 0; i < k; ++i) pts.push_back({ux(rng), uy(rng)});
  return KeypointSet(std::move(pts));
}

}  // namespace ikp::testing

#define IKP_STATUS_MSG(expr) ::ikp::testing::StatusOf(expr).ToString()

#endif  // IKP_TESTS_TEST_UTIL_H_
