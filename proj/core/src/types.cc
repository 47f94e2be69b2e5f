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

#include "ikp/types.h"

#include <algorithm>

namespace ikp {

void ClampToImage(KeypointSet& kps, int width, int height) {
  for (int i = 0; i < kps.size(); ++i) {
    if (!kps.is_visible(i)) continue;
    Point& p = kps.coords[i];
    p.x = std::clamp(p.x, 0.0, static_cast<double>(width - 1));
    p.y = std::clamp(p.y, 0.0, static_cast<double>(height - 1));
  }
}

int KeypointSet::NumVisible() const {
  return static_cast<int>(std::count_if(visible.begin(), visible.end(),
                                         [](uint8_t v) { return v != 0; }));
}

}  // namespace ikp
