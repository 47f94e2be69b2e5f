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

#include "ikp/eval.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <thread>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "ikp/serialization.h"

namespace ikp {
namespace {

using nlohmann::json;

// Per-keypoint errors; -1 for keypoints invisible in gt.
std::vector<double> PointErrors(const KeypointSet& pred, const KeypointSet& gt) {
  std::vector<double> e(static_cast<size_t>(gt.size()), -1.0);
  for (int i = 0; i < gt.size(); ++i) {
    if (gt.is_visible(i)) e[i] = Distance(pred.coords[i], gt.coords[i]);
  }
  return e;
}

double MeanOfVisible(const std::vector<double>& e) {
  double sum = 0.0;
  int n = 0;
  for (double v : e) {
    if (v >= 0.0) {
      sum += v;
      ++n;
    }
  }
  return sum / n;
}

// Index of the largest error among candidates; -1 when none is positive.
int WorstIndex(const std::vector<double>& e, const std::vector<uint8_t>& done) {
  int best = -1;
  double best_err = 0.0;
  for (int i = 0; i < static_cast<int>(e.size()); ++i) {
    if (done[i] || e[i] <= best_err) continue;
    best = i;
    best_err = e[i];
  }
  return best;
}

int FirstReach(const std::vector<double>& mre, int alpha, double beta) {
  const int last = std::min<int>(alpha, static_cast<int>(mre.size()) - 1);
  for (int s = 0; s <= last; ++s) {
    if (mre[s] <= beta) return s;
  }
  return -1;
}

}  // namespace

absl::StatusOr<double> MeanRadialError(const KeypointSet& pred, const KeypointSet& gt) {
  if (pred.size() != gt.size()) {
    return absl::InvalidArgumentError(
        absl::StrCat("K mismatch: ", pred.size(), " vs ", gt.size()));
  }
  if (gt.NumVisible() == 0) {
    return absl::InvalidArgumentError("MRE undefined without visible keypoints");
  }
  return MeanOfVisible(PointErrors(pred, gt));
}

KeypointSet ToNativeScale(const KeypointSet& working, int working_width,
                          int working_height, int native_width, int native_height) {
  KeypointSet out = working;
  const double sx = static_cast<double>(native_width) / working_width;
  const double sy = static_cast<double>(native_height) / working_height;
  for (Point& p : out.coords) {
    p.x *= sx;
    p.y *= sy;
  }
  return out;
}

absl::StatusOr<ClickPolicy> ParseClickPolicy(std::string_view name) {
  if (name == "worst_first") return ClickPolicy::kWorstFirst;
  if (name == "random") return ClickPolicy::kRandom;
  return absl::InvalidArgumentError(
      absl::StrCat("unknown click policy '", std::string(name), "'"));
}

std::string ClickPolicyName(ClickPolicy policy) {
  return policy == ClickPolicy::kWorstFirst ? "worst_first" : "random";
}

absl::Status EvalConfig::Validate() const {
  if (alpha < 1) return absl::InvalidArgumentError("alpha must be >= 1");
  if (betas.empty()) return absl::InvalidArgumentError("need at least one beta");
  for (double b : betas) {
    if (!(b > 0.0)) return absl::InvalidArgumentError("betas must be > 0");
  }
  return absl::OkStatus();
}

RevisionTrace RunRevisionTrace(const Model& model, const CodecConfig& codec,
                               const Sample& sample, const EvalConfig& config) {
  RevisionTrace trace;
  trace.image_id = sample.id;
  const ModelConfig& mc = model.config();
  const KeypointSet& gt = sample.native_keypoints;
  auto native = [&](const KeypointSet& k) {
    return ToNativeScale(k, mc.width, mc.height, sample.native_width,
                         sample.native_height);
  };
  auto fail = [&](const absl::Status& s) {
    trace.valid = false;
    trace.error = std::string(s.message());
    return trace;
  };
  if (gt.NumVisible() == 0) {
    return fail(absl::InvalidArgumentError("no visible groundtruth keypoints"));
  }

  auto session = RevisionSession::Start(model, sample.image, codec);
  if (!session.ok()) return fail(session.status());
  const double target = *std::min_element(config.betas.begin(), config.betas.end());
  std::mt19937_64 rng(config.seed);
  std::vector<uint8_t> clicked(static_cast<size_t>(gt.size()), 0);

  for (int step = 0;; ++step) {
    const KeypointSet current = native(session->keypoints());
    const std::vector<double> err = PointErrors(current, gt);
    const double mre = MeanOfVisible(err);
    trace.mre_per_step.push_back(mre);
    trace.working_mre_per_step.push_back(
        MeanOfVisible(PointErrors(session->keypoints(), sample.keypoints)));
    trace.keypoints_per_step.push_back(current);
    if (step == config.alpha || (config.stop_at_target && mre <= target)) break;

    int index = -1;
    if (config.policy == ClickPolicy::kWorstFirst) {
      index = WorstIndex(err, clicked);
    } else {
      std::vector<int> open;
      for (int i = 0; i < gt.size(); ++i) {
        if (!clicked[i] && gt.is_visible(i) && err[i] > 0.0) open.push_back(i);
      }
      if (!open.empty()) {
        index = open[std::uniform_int_distribution<size_t>(0, open.size() - 1)(rng)];
      }
    }
    if (index < 0) break;  // nothing left to correct
    const Click click{index, sample.keypoints.coords[index]};
    if (auto s = session->Refine(click); !s.ok()) return fail(s);
    clicked[index] = 1;
    trace.clicks.push_back(click);
  }
  return trace;
}

std::vector<RevisionTrace> RunRevisionTraces(const Model& model,
                                             const CodecConfig& codec,
                                             std::span<const Sample> samples,
                                             const EvalConfig& config,
                                             int num_threads) {
  std::vector<RevisionTrace> out(samples.size());
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i = next++; i < samples.size(); i = next++) {
      out[i] = RunRevisionTrace(model, codec, samples[i], config);
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < num_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return out;
}

double Noc(std::span<const RevisionTrace> traces, int alpha, double beta,
           FailureConvention convention) {
  double sum = 0.0;
  int n = 0;
  for (const RevisionTrace& t : traces) {
    if (!t.valid) continue;
    const int s = FirstReach(t.mre_per_step, alpha, beta);
    if (s < 0 && convention == FailureConvention::kExclude) continue;
    sum += s < 0 ? alpha : s;
    ++n;
  }
  return n == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / n;
}

double FailureRate(std::span<const RevisionTrace> traces, int alpha, double beta) {
  int failed = 0, n = 0;
  for (const RevisionTrace& t : traces) {
    if (!t.valid) continue;
    ++n;
    if (FirstReach(t.mre_per_step, alpha, beta) < 0) ++failed;
  }
  return n == 0 ? std::numeric_limits<double>::quiet_NaN()
                : static_cast<double>(failed) / n;
}

double PropagationRate(std::span<const RevisionTrace> traces, double min_shift_px) {
  int moved = 0, n = 0;
  for (const RevisionTrace& t : traces) {
    if (!t.valid || t.clicks.empty()) continue;
    ++n;
    const KeypointSet& before = t.keypoints_per_step[0];
    const KeypointSet& after = t.keypoints_per_step[1];
    for (int i = 0; i < before.size(); ++i) {
      if (i != t.clicks[0].index &&
          Distance(before.coords[i], after.coords[i]) > min_shift_px) {
        ++moved;
        break;
      }
    }
  }
  return n == 0 ? std::numeric_limits<double>::quiet_NaN()
                : static_cast<double>(moved) / n;
}

std::vector<double> ManualRevisionCurve(const KeypointSet& initial,
                                        const KeypointSet& gt, int max_clicks) {
  std::vector<double> err = PointErrors(initial, gt);
  std::vector<uint8_t> done(err.size(), 0);
  std::vector<double> curve = {MeanOfVisible(err)};
  for (int c = 0; c < max_clicks; ++c) {
    const int worst = WorstIndex(err, done);
    if (worst >= 0) {
      err[worst] = 0.0;
      done[worst] = 1;
    }
    curve.push_back(MeanOfVisible(err));
  }
  return curve;
}

std::vector<double> MeanCurve(std::span<const std::vector<double>> curves,
                              int max_clicks) {
  std::vector<double> mean(static_cast<size_t>(max_clicks) + 1, 0.0);
  if (curves.empty()) return mean;
  for (const auto& c : curves) {
    for (int s = 0; s <= max_clicks; ++s) {
      mean[s] += c[std::min<size_t>(s, c.size() - 1)];
    }
  }
  for (double& v : mean) v /= curves.size();
  return mean;
}

absl::StatusOr<EvalReport> BuildReport(std::span<const RevisionTrace> traces,
                                       std::span<const Sample> samples,
                                       const EvalConfig& config,
                                       int num_worst_cases) {
  if (traces.empty()) return absl::InvalidArgumentError("no traces to report");
  if (traces.size() != samples.size()) {
    return absl::InvalidArgumentError("traces and samples must be parallel");
  }
  if (auto s = config.Validate(); !s.ok()) return s;
  EvalReport r;
  r.config = config;
  r.num_images = static_cast<int>(traces.size());
  std::vector<std::vector<double>> model, working, manual;
  for (size_t i = 0; i < traces.size(); ++i) {
    const RevisionTrace& t = traces[i];
    if (!t.valid) {
      ++r.num_invalid;
      continue;
    }
    model.push_back(t.mre_per_step);
    working.push_back(t.working_mre_per_step);
    manual.push_back(
        ManualRevisionCurve(t.keypoints_per_step.front(), samples[i].native_keypoints,
                            config.alpha));
    r.worst_cases.push_back({t.image_id, t.mre_per_step.front(), t.mre_per_step.back()});
  }
  for (double b : config.betas) {
    r.noc.push_back(Noc(traces, config.alpha, b));
    r.noc_excluding_failures.push_back(
        Noc(traces, config.alpha, b, FailureConvention::kExclude));
    r.failure_rate.push_back(FailureRate(traces, config.alpha, b));
  }
  r.propagation_rate = PropagationRate(traces, 0.1);
  r.model_curve = MeanCurve(model, config.alpha);
  r.working_model_curve = MeanCurve(working, config.alpha);
  r.manual_curve = MeanCurve(manual, config.alpha);
  std::stable_sort(r.worst_cases.begin(), r.worst_cases.end(),
                   [](const auto& a, const auto& b) { return a.final_mre > b.final_mre; });
  if (r.worst_cases.size() > static_cast<size_t>(num_worst_cases)) {
    r.worst_cases.resize(static_cast<size_t>(num_worst_cases));
  }
  return r;
}

json ToJson(const EvalReport& r) {
  json table = json::array();
  for (size_t i = 0; i < r.config.betas.size(); ++i) {
    table.push_back({{"beta", r.config.betas[i]},
                     {"noc", r.noc[i]},
                     {"noc_excluding_failures", r.noc_excluding_failures[i]},
                     {"failure_rate", r.failure_rate[i]}});
  }
  json worst = json::array();
  for (const auto& w : r.worst_cases) {
    worst.push_back({{"image_id", w.image_id},
                     {"initial_mre", w.initial_mre},
                     {"final_mre", w.final_mre}});
  }
  return {{"alpha", r.config.alpha},
          {"betas", r.config.betas},
          {"policy", ClickPolicyName(r.config.policy)},
          {"stop_at_target", r.config.stop_at_target},
          {"failure_convention", "count_as_alpha"},
          {"num_images", r.num_images},
          {"num_invalid", r.num_invalid},
          {"table", table},
          {"model_curve", r.model_curve},
          {"manual_curve", r.manual_curve},
          {"working_model_curve", r.working_model_curve},
          {"propagation_rate", r.propagation_rate},
          {"worst_cases", worst}};
}

absl::StatusOr<EvalReport> EvalReportFromJson(const json& j) {
  try {
    EvalReport r;
    r.config.alpha = j.at("alpha").get<int>();
    r.config.betas = j.at("betas").get<std::vector<double>>();
    auto policy = ParseClickPolicy(j.at("policy").get<std::string>());
    if (!policy.ok()) return policy.status();
    r.config.policy = *policy;
    r.config.stop_at_target = j.at("stop_at_target").get<bool>();
    r.num_images = j.at("num_images").get<int>();
    r.num_invalid = j.at("num_invalid").get<int>();
    // NaN is written as null.
    auto num = [](const json& v) {
      return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
    };
    for (const auto& row : j.at("table")) {
      r.noc.push_back(num(row.at("noc")));
      r.noc_excluding_failures.push_back(num(row.at("noc_excluding_failures")));
      r.failure_rate.push_back(num(row.at("failure_rate")));
    }
    r.model_curve = j.at("model_curve").get<std::vector<double>>();
    r.manual_curve = j.at("manual_curve").get<std::vector<double>>();
    r.working_model_curve = j.at("working_model_curve").get<std::vector<double>>();
    r.propagation_rate = num(j.at("propagation_rate"));
    for (const auto& w : j.at("worst_cases")) {
      r.worst_cases.push_back({w.at("image_id").get<std::string>(),
                               w.at("initial_mre").get<double>(),
                               w.at("final_mre").get<double>()});
    }
    if (r.noc.size() != r.config.betas.size()) {
      return absl::InvalidArgumentError("table and betas differ in length");
    }
    return r;
  } catch (const json::exception& e) {
    return absl::InvalidArgumentError(absl::StrCat("malformed report: ", e.what()));
  }
}

json ToJson(const RevisionTrace& t) {
  json clicks = json::array();
  for (const Click& c : t.clicks) {
    clicks.push_back({{"index", c.index}, {"x", c.position.x}, {"y", c.position.y}});
  }
  json j = {{"image_id", t.image_id},
            {"valid", t.valid},
            {"mre_per_step", t.mre_per_step},
            {"working_mre_per_step", t.working_mre_per_step},
            {"clicks", clicks}};
  if (!t.valid) j["error"] = t.error;
  return j;
}

namespace {

struct Series {
  std::string label;
  std::string color;
  std::vector<double> x, y;
};

// Minimal line chart; axes start at zero.
std::string LineChartSvg(const std::string& title, const std::string& xlabel,
                         const std::string& ylabel, const std::vector<Series>& series) {
  constexpr double kW = 480, kH = 320, kL = 60, kR = 20, kT = 40, kB = 50;
  double xmax = 1e-9, ymax = 1e-9;
  for (const auto& s : series) {
    for (double v : s.x) xmax = std::max(xmax, v);
    for (double v : s.y) {
      if (std::isfinite(v)) ymax = std::max(ymax, v);
    }
  }
  ymax *= 1.1;
  auto px = [&](double x) { return kL + (kW - kL - kR) * x / xmax; };
  auto py = [&](double y) { return kH - kB - (kH - kT - kB) * y / ymax; };
  std::string svg = absl::StrFormat(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n"
      "<rect width=\"100%%\" height=\"100%%\" fill=\"white\"/>\n"
      "<text x=\"%g\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">%s</text>\n"
      "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n"
      "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n"
      "<text x=\"%g\" y=\"%g\" text-anchor=\"middle\">%s</text>\n"
      "<text x=\"15\" y=\"%g\" text-anchor=\"middle\" "
      "transform=\"rotate(-90 15 %g)\">%s</text>\n",
      static_cast<int>(kW), static_cast<int>(kH), kW / 2, title, kL, kH - kB, kW - kR,
      kH - kB, kL, kT, kL, kH - kB, (kW + kL) / 2, kH - 12, xlabel, kH / 2, kH / 2,
      ylabel);
  for (int i = 0; i <= 4; ++i) {
    const double x = xmax * i / 4, y = ymax * i / 4;
    absl::StrAppendFormat(&svg,
                          "<text x=\"%g\" y=\"%g\" text-anchor=\"middle\">%.3g</text>\n"
                          "<text x=\"%g\" y=\"%g\" text-anchor=\"end\">%.3g</text>\n",
                          px(x), kH - kB + 16, x, kL - 6, py(y) + 4, y);
  }
  for (size_t k = 0; k < series.size(); ++k) {
    const Series& s = series[k];
    std::string points;
    for (size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      absl::StrAppendFormat(&points, "%g,%g ", px(s.x[i]), py(s.y[i]));
      absl::StrAppendFormat(&svg, "<circle cx=\"%g\" cy=\"%g\" r=\"3\" fill=\"%s\"/>\n",
                            px(s.x[i]), py(s.y[i]), s.color);
    }
    absl::StrAppendFormat(&svg,
                          "<polyline points=\"%s\" fill=\"none\" stroke=\"%s\" "
                          "stroke-width=\"2\"/>\n"
                          "<text x=\"%g\" y=\"%g\" fill=\"%s\">%s</text>\n",
                          points, s.color, kW - kR - 150, kT + 16.0 * k, s.color,
                          s.label);
  }
  svg += "</svg>\n";
  return svg;
}

absl::Status WriteText(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
  if (!out) return absl::UnavailableError(absl::StrCat("cannot write ", path.string()));
  return absl::OkStatus();
}

}  // namespace

absl::Status WriteReport(const EvalReport& report,
                         std::span<const RevisionTrace> traces,
                         const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) return absl::UnavailableError(absl::StrCat("cannot create ", dir.string()));
  json j = ToJson(report);
  json tj = json::array();
  for (const auto& t : traces) tj.push_back(ToJson(t));
  j["traces"] = tj;
  if (auto s = WriteText(dir / "report.json", j.dump(2) + "\n"); !s.ok()) return s;

  Series model{"interactive model", "#1f77b4", {}, report.model_curve};
  Series manual{"manual revision", "#d62728", {}, report.manual_curve};
  for (size_t i = 0; i < report.model_curve.size(); ++i) {
    model.x.push_back(static_cast<double>(i));
    manual.x.push_back(static_cast<double>(i));
  }
  if (auto s = WriteText(dir / "curves.svg",
                         LineChartSvg("Mean MRE vs clicks", "clicks", "MRE (px)",
                                      {model, manual}));
      !s.ok()) {
    return s;
  }
  Series noc{absl::StrCat("NoC", report.config.alpha), "#2ca02c", report.config.betas,
             report.noc};
  Series noc_ex{"NoC, failures excluded", "#9467bd", report.config.betas,
                report.noc_excluding_failures};
  return WriteText(dir / "noc.svg",
                   LineChartSvg("NoC vs target MRE", "target MRE (px)", "clicks",
                                {noc, noc_ex}));
}

json SessionTraceJson(const RevisionSession& session, const KeypointSet* gt) {
  const std::vector<KeypointSet> history = session.keypoint_history();
  json records = json::array();
  for (size_t s = 0; s < history.size(); ++s) {
    json r = {{"step", s}};
    if (s > 0) {
      const Click& c = session.click_log()[s - 1];
      r["click"] = {{"index", c.index}, {"x", c.position.x}, {"y", c.position.y}};
    } else {
      r["click"] = nullptr;
    }
    json coords = json::array();
    for (const Point& p : history[s].coords) coords.push_back({p.x, p.y});
    r["keypoints"] = coords;
    if (gt != nullptr) {
      auto mre = MeanRadialError(history[s], *gt);
      r["mre"] = mre.ok() ? json(*mre) : json(nullptr);
    }
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace ikp
