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

// Interactive evaluation: MRE, simulated worst-first revision, NoC/FR and
// reports.

#ifndef IKP_EVAL_H_
#define IKP_EVAL_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "ikp/data_io.h"
#include "ikp/interaction_sim.h"
#include "ikp/keypoint_codec.h"
#include "ikp/model.h"
#include "ikp/types.h"
#include "json.hpp"

namespace ikp {

// Mean Euclidean error over keypoints visible in `gt`.
absl::StatusOr<double> MeanRadialError(const KeypointSet& pred, const KeypointSet& gt);

// Rescales working-resolution coordinates to the native image size.
KeypointSet ToNativeScale(const KeypointSet& working, int working_width,
                          int working_height, int native_width, int native_height);

enum class ClickPolicy { kWorstFirst, kRandom };
absl::StatusOr<ClickPolicy> ParseClickPolicy(std::string_view name);
std::string ClickPolicyName(ClickPolicy policy);

struct EvalConfig {
  int alpha = 5;
  std::vector<double> betas = {1.0, 2.0, 3.0, 4.0, 5.0};
  ClickPolicy policy = ClickPolicy::kWorstFirst;
  // Stop a trace once MRE <= min(betas). Off when full curves are needed.
  bool stop_at_target = true;
  uint64_t seed = 0;  // only used by kRandom

  absl::Status Validate() const;
};

struct RevisionTrace {
  std::string image_id;
  // Native-resolution MRE; index 0 is the automatic prediction.
  std::vector<double> mre_per_step;
  std::vector<double> working_mre_per_step;
  std::vector<Click> clicks;  // working-resolution click positions
  // Native-resolution keypoints after each step; front() is the automatic
  // prediction.
  std::vector<KeypointSet> keypoints_per_step;
  bool valid = true;
  std::string error;
};

// Simulated user: repeatedly clicks the keypoint with the largest native
// error (ties to the lowest index) at its groundtruth position. A model
// failure marks the trace invalid instead of failing the call.
RevisionTrace RunRevisionTrace(const Model& model, const CodecConfig& codec,
                               const Sample& sample, const EvalConfig& config);

// Traces for every sample, in sample order regardless of `num_threads`.
std::vector<RevisionTrace> RunRevisionTraces(const Model& model,
                                             const CodecConfig& codec,
                                             std::span<const Sample> samples,
                                             const EvalConfig& config,
                                             int num_threads = 1);

enum class FailureConvention {
  kCountAsAlpha,  // failed images contribute alpha clicks
  kExclude,       // failed images are left out of the mean
};

// Mean over valid traces of the first step s <= alpha with MRE <= beta.
// Returns NaN when no trace contributes.
double Noc(std::span<const RevisionTrace> traces, int alpha, double beta,
           FailureConvention convention = FailureConvention::kCountAsAlpha);
// Fraction of valid traces that never reach MRE <= beta within alpha clicks.
double FailureRate(std::span<const RevisionTrace> traces, int alpha, double beta);

// Fraction of valid traces with at least one click in which the first click
// moved some other keypoint by more than `min_shift_px`.
double PropagationRate(std::span<const RevisionTrace> traces, double min_shift_px);

// MRE after replacing the worst keypoint by its groundtruth 0..max_clicks
// times, without a model.
std::vector<double> ManualRevisionCurve(const KeypointSet& initial,
                                        const KeypointSet& gt, int max_clicks);

// Mean curve over traces with at least max_clicks + 1 steps; shorter traces
// are held at their last value, which is exact once MRE reached zero.
std::vector<double> MeanCurve(std::span<const std::vector<double>> curves,
                              int max_clicks);

struct EvalReport {
  EvalConfig config;
  int num_images = 0;
  int num_invalid = 0;
  // One row per beta.
  std::vector<double> noc;
  std::vector<double> noc_excluding_failures;
  std::vector<double> failure_rate;
  std::vector<double> model_curve;   // mean native MRE per click count
  std::vector<double> manual_curve;  // same for manual revision
  std::vector<double> working_model_curve;
  double propagation_rate = 0.0;  // first-click shift > 0.1 px elsewhere
  struct WorstCase {
    std::string image_id;
    double initial_mre = 0.0;
    double final_mre = 0.0;
  };
  std::vector<WorstCase> worst_cases;  // by final MRE, descending
};

absl::StatusOr<EvalReport> BuildReport(std::span<const RevisionTrace> traces,
                                       std::span<const Sample> samples,
                                       const EvalConfig& config,
                                       int num_worst_cases = 5);

nlohmann::json ToJson(const EvalReport& report);
absl::StatusOr<EvalReport> EvalReportFromJson(const nlohmann::json& j);
nlohmann::json ToJson(const RevisionTrace& trace);

// Writes report.json, curves.svg (model vs manual revision) and noc.svg.
absl::Status WriteReport(const EvalReport& report,
                         std::span<const RevisionTrace> traces,
                         const std::filesystem::path& dir);

// Ordered per-step records of a live session. MRE is included when `gt` is
// given (same resolution as the session).
nlohmann::json SessionTraceJson(const RevisionSession& session,
                                const KeypointSet* gt);

}  // namespace ikp

#endif  // IKP_EVAL_H_
