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

// ikp: dataset preparation, training, evaluation and serving.

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "absl/status/status.h"
#include "absl/strings/str_cat.h"
#include "glog/logging.h"
#include "ikp/checkpoint.h"
#include "ikp/data_io.h"
#include "ikp/eval.h"
#include "ikp/http_server.h"
#include "ikp/morphology.h"
#include "ikp/serialization.h"
#include "ikp/service.h"
#include "ikp/synthetic_spine.h"
#include "ikp/trainer.h"
#include "json.hpp"

namespace ikp {
namespace {

using nlohmann::json;

int Fail(const absl::Status& s) {
  std::fprintf(stderr, "error: %s\n", s.ToString().c_str());
  return 1;
}

struct RelationFlags {
  double t_d = MorphologyConfig{}.t_d;
  double t_a = MorphologyConfig{}.t_a;
  double lambda_m = MorphologyConfig{}.lambda_m;
  std::string mode = "threshold";
  int top_k = MorphologyConfig{}.top_k;
  int triple_window = MorphologyConfig{}.triple_window;

  void Register(CLI::App* app) {
    app->add_option("--t-d", t_d, "distance std threshold (diagonal units)");
    app->add_option("--t-a", t_a, "angle circular-std threshold");
    app->add_option("--lambda-m", lambda_m, "angle term weight inside L_m");
    app->add_option("--mode", mode,
                    "threshold|top_k_low_variance|top_k_high_variance|adjacent_points");
    app->add_option("--top-k", top_k, "relations per kind in top-k modes");
    app->add_option("--triple-window", triple_window,
                    "max index span of angle triples (0 = all)");
  }

  absl::StatusOr<MorphologyConfig> Config() const {
    MorphologyConfig c;
    c.t_d = t_d;
    c.t_a = t_a;
    c.lambda_m = lambda_m;
    c.top_k = top_k;
    c.triple_window = triple_window;
    auto m = ParseSelectionMode(mode);
    if (!m.ok()) return m.status();
    c.mode = *m;
    if (auto s = c.Validate(); !s.ok()) return s;
    return c;
  }
};

absl::Status WriteJson(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  out << j.dump(2) << "\n";
  if (!out) return absl::UnavailableError(absl::StrCat("cannot write ", path.string()));
  return absl::OkStatus();
}

absl::Status RunSynth(const SyntheticSpineConfig& config, const std::string& out) {
  auto m = WriteSyntheticSpine(config, out);
  if (!m.ok()) return m.status();
  std::printf("wrote %zu samples (K=%d) to %s\n", m->records.size(), m->num_keypoints,
              out.c_str());
  return absl::OkStatus();
}

absl::Status RunConvertAasce(const AasceConvertOptions& options, const std::string& out) {
  auto m = ConvertAasce(options);
  if (!m.ok()) return m.status();
  if (auto s = WriteManifest(*m, out); !s.ok()) return s;
  std::printf("wrote %zu records to %s\n", m->records.size(), out.c_str());
  return absl::OkStatus();
}

absl::Status RunValidate(const std::string& path) {
  auto m = LoadManifest(path);
  if (!m.ok()) return m.status();
  std::printf("%s: %zu records, K=%d, train/val/test = %zu/%zu/%zu\n", m->name.c_str(),
              m->records.size(), m->num_keypoints, m->RecordsInSplit(Split::kTrain).size(),
              m->RecordsInSplit(Split::kVal).size(),
              m->RecordsInSplit(Split::kTest).size());
  return absl::OkStatus();
}

absl::StatusOr<RelationSets> Relations(const DatasetManifest& m,
                                       const std::vector<Sample>& train,
                                       const MorphologyConfig& config,
                                       RelationStats* stats_out) {
  auto stats = RelationStatsFromSamples(train, config.triple_window);
  if (!stats.ok()) return stats.status();
  auto rel = SelectRelations(*stats, config, m.topology.empty() ? nullptr : &m.topology);
  if (!rel.ok()) return rel.status();
  if (stats_out != nullptr) *stats_out = std::move(*stats);
  return rel;
}

absl::Status RunStats(const std::string& manifest, const RelationFlags& flags,
                      const std::string& out) {
  auto config = flags.Config();
  if (!config.ok()) return config.status();
  auto m = LoadManifest(manifest);
  if (!m.ok()) return m.status();
  auto train = LoadSplit(*m, Split::kTrain);
  if (!train.ok()) return train.status();
  RelationStats stats;
  auto rel = Relations(*m, *train, *config, &stats);
  if (!rel.ok()) return rel.status();
  std::printf("%zu samples: selected %zu/%zu pairs, %zu/%zu triples (%s)\n",
              train->size(), rel->pairs.size(), stats.pairs.size(), rel->triples.size(),
              stats.triples.size(), flags.mode.c_str());
  if (!out.empty()) {
    return WriteJson(out, {{"config", ToJson(*config)},
                           {"stats", ToJson(stats)},
                           {"selected", ToJson(*rel)}});
  }
  return absl::OkStatus();
}

struct TrainFlags {
  std::string manifest;
  std::string out;
  TrainConfig train;
  ModelConfig model;
  CodecConfig codec;
  uint64_t model_seed = 1;
};

absl::Status RunTrain(TrainFlags& f, const RelationFlags& rf) {
  auto morph = rf.Config();
  if (!morph.ok()) return morph.status();
  auto m = LoadManifest(f.manifest);
  if (!m.ok()) return m.status();
  auto train = LoadSplit(*m, Split::kTrain);
  if (!train.ok()) return train.status();
  auto val = LoadSplit(*m, Split::kVal);
  if (!val.ok()) return val.status();
  auto rel = Relations(*m, *train, *morph, nullptr);
  if (!rel.ok()) return rel.status();

  f.model.num_keypoints = m->num_keypoints;
  f.model.width = m->target_width;
  f.model.height = m->target_height;
  auto model = Model::Create(f.model, f.model_seed);
  if (!model.ok()) return model.status();
  std::printf("%zu train / %zu val images, %zu parameters, %zu pairs + %zu triples\n",
              train->size(), val->size(), (*model)->NumParameters(), rel->pairs.size(),
              rel->triples.size());
  auto result = TrainModel(**model, *train, *val, *rel, f.codec, morph->lambda_m,
                           f.train, [](const EpochLog& e) {
                             std::printf(
                                 "epoch %3d  loss %.5f  (bce %.5f, morph %.5f)  "
                                 "val MRE %.3f  %.1fs\n",
                                 e.epoch, e.loss, e.heatmap_loss, e.morphology_loss,
                                 e.val_mre, e.seconds);
                             std::fflush(stdout);
                           });
  if (!result.ok()) return result.status();
  json history = json::array();
  for (const EpochLog& e : result->history) {
    history.push_back({{"epoch", e.epoch}, {"loss", e.loss}, {"val_mre", e.val_mre}});
  }
  CheckpointInfo info{f.codec, *morph, *rel,
                      {{"dataset", m->name},
                       {"best_epoch", result->best_epoch},
                       {"best_val_mre", result->best_val_mre},
                       {"seed", f.train.seed},
                       {"history", history}}};
  if (auto s = SaveCheckpoint(f.out, **model, info); !s.ok()) return s;
  std::printf("best epoch %d (val MRE %.3f); saved %s\n", result->best_epoch,
              result->best_val_mre, f.out.c_str());
  return absl::OkStatus();
}

struct EvalFlags {
  std::string checkpoint;
  std::string manifest;
  std::string split = "test";
  std::string out = "eval_out";
  int alpha = 5;
  std::vector<double> betas = EvalConfig{}.betas;
  std::string policy = "worst_first";
  int limit_images = 0;
  int threads = 1;
  bool stop_early = false;
  bool check = false;
  uint64_t seed = 0;
};

// The behavioural acceptance thresholds, applied to one report.
std::vector<std::pair<std::string, bool>> Checks(const EvalReport& r) {
  const auto& m = r.model_curve;
  const auto& h = r.manual_curve;
  const int last = std::min<int>(5, static_cast<int>(m.size()) - 1);
  bool below = true;
  for (int s = 1; s <= last; ++s) below = below && m[s] <= h[s];
  return {
      {"one click lowers mean MRE", m.size() > 1 && m[1] < m[0]},
      {"model curve <= manual curve at clicks 1..5", below},
      {"click-1 improvement over manual >= 10%", m.size() > 1 && m[1] <= 0.9 * h[1]},
      {"first click moves another keypoint > 0.1 px on >= 50% of images",
       r.propagation_rate >= 0.5},
  };
}

absl::Status RunEval(const EvalFlags& f, bool* checks_passed) {
  auto ck = LoadCheckpoint(f.checkpoint);
  if (!ck.ok()) return ck.status();
  auto m = LoadManifest(f.manifest);
  if (!m.ok()) return m.status();
  auto split = ParseSplit(f.split);
  if (!split.ok()) return split.status();
  auto samples = LoadSplit(*m, *split);
  if (!samples.ok()) return samples.status();
  if (f.limit_images > 0 && samples->size() > static_cast<size_t>(f.limit_images)) {
    samples->resize(static_cast<size_t>(f.limit_images));
  }
  EvalConfig config;
  config.alpha = f.alpha;
  config.betas = f.betas;
  config.stop_at_target = f.stop_early;
  config.seed = f.seed;
  auto policy = ParseClickPolicy(f.policy);
  if (!policy.ok()) return policy.status();
  config.policy = *policy;
  if (auto s = config.Validate(); !s.ok()) return s;

  const auto traces =
      RunRevisionTraces(*ck->model, ck->info.codec, *samples, config, f.threads);
  auto report = BuildReport(traces, *samples, config);
  if (!report.ok()) return report.status();
  if (auto s = WriteReport(*report, traces, f.out); !s.ok()) return s;

  std::printf("%d images (%d invalid)\n", report->num_images, report->num_invalid);
  std::printf("%8s %10s %16s %8s\n", "beta", "NoC", "NoC(excl.fail)", "FR");
  for (size_t i = 0; i < config.betas.size(); ++i) {
    std::printf("%8.2f %10.3f %16.3f %7.1f%%\n", config.betas[i], report->noc[i],
                report->noc_excluding_failures[i], 100.0 * report->failure_rate[i]);
  }
  std::printf("clicks:");
  for (size_t s = 0; s < report->model_curve.size(); ++s) std::printf(" %7zu", s);
  std::printf("\nmodel: ");
  for (double v : report->model_curve) std::printf(" %7.3f", v);
  std::printf("\nmanual:");
  for (double v : report->manual_curve) std::printf(" %7.3f", v);
  std::printf("\npropagation rate %.2f\nreport written to %s\n", report->propagation_rate,
              f.out.c_str());
  if (f.check) {
    for (const auto& [name, ok] : Checks(*report)) {
      std::printf("[%s] %s\n", ok ? "PASS" : "FAIL", name.c_str());
      *checks_passed = *checks_passed && ok;
    }
  }
  return absl::OkStatus();
}

HttpServer* g_server = nullptr;

absl::Status RunServe(const std::string& checkpoint, const std::string& host, int port,
                      int ttl_seconds) {
  auto ck = LoadCheckpoint(checkpoint);
  if (!ck.ok()) return ck.status();
  auto digest = FileDigest(checkpoint);
  if (!digest.ok()) return digest.status();
  SessionManagerOptions options;
  options.idle_ttl = std::chrono::seconds(ttl_seconds);
  SessionManager sessions(std::make_shared<LoadedCheckpoint>(std::move(*ck)), *digest,
                          options);
  HttpServer server(sessions);
  auto bound = server.Bind(host, port);
  if (!bound.ok()) return bound.status();
  g_server = &server;
  std::signal(SIGINT, [](int) { g_server->Stop(); });
  std::signal(SIGTERM, [](int) { g_server->Stop(); });

  std::atomic<bool> done{false};
  std::thread sweeper([&] {
    while (!done) {
      std::this_thread::sleep_for(std::chrono::seconds(1));
      sessions.Sweep();
    }
  });
  std::printf("serving model %s on http://%s:%d\n", digest->c_str(), host.c_str(), *bound);
  std::fflush(stdout);
  absl::Status s = server.Run();
  done = true;
  sweeper.join();
  g_server = nullptr;
  return s;
}

}  // namespace
}  // namespace ikp

int main(int argc, char** argv) {
  google::InitGoogleLogging(argv[0]);
  FLAGS_logtostderr = true;
  using namespace ikp;

  CLI::App app{"Interactive keypoint estimation toolkit"};
  app.require_subcommand(1);

  CLI::App* data = app.add_subcommand("data", "dataset utilities");
  data->require_subcommand(1);

  SyntheticSpineConfig synth;
  std::string synth_out;
  CLI::App* synth_cmd = data->add_subcommand("synth", "write a synthetic-spine dataset");
  synth_cmd->add_option("--out", synth_out, "output directory")->required();
  synth_cmd->add_option("--samples", synth.num_samples);
  synth_cmd->add_option("--seed", synth.seed);
  synth_cmd->add_option("--vertebrae", synth.num_vertebrae);
  synth_cmd->add_option("--corners", synth.corners_per_vertebra, "4 or 5");
  synth_cmd->add_option("--width", synth.width);
  synth_cmd->add_option("--height", synth.height);
  synth_cmd->add_option("--train-fraction", synth.train_fraction);
  synth_cmd->add_option("--val-fraction", synth.val_fraction);
  synth_cmd->add_option("--noise", synth.noise_std);

  AasceConvertOptions aasce;
  std::string aasce_out;
  CLI::App* aasce_cmd = data->add_subcommand(
      "convert-aasce", "convert SpineWeb/AASCE landmark CSVs into a manifest");
  aasce_cmd->add_option("--images", aasce.image_dir, "directory of PNG images")->required();
  aasce_cmd->add_option("--filenames", aasce.filenames_csv, "filenames.csv")->required();
  aasce_cmd->add_option("--landmarks", aasce.landmarks_csv, "landmarks.csv")->required();
  aasce_cmd->add_option("--split", aasce.split, "train|val|test|auto");
  aasce_cmd->add_option("--seed", aasce.seed);
  aasce_cmd->add_option("--width", aasce.target_width);
  aasce_cmd->add_option("--height", aasce.target_height);
  aasce_cmd->add_option("--out", aasce_out, "manifest path")->required();

  std::string validate_path;
  CLI::App* validate_cmd = data->add_subcommand("validate", "check a manifest");
  validate_cmd->add_option("manifest", validate_path)->required();

  CLI::App* morph = app.add_subcommand("morphology", "relation statistics");
  morph->require_subcommand(1);
  RelationFlags stats_flags;
  std::string stats_manifest, stats_out;
  CLI::App* stats_cmd = morph->add_subcommand("stats", "compute and select relations");
  stats_cmd->add_option("--manifest", stats_manifest)->required();
  stats_cmd->add_option("--out", stats_out, "JSON output");
  stats_flags.Register(stats_cmd);

  TrainFlags train;
  RelationFlags train_rel;
  CLI::App* train_cmd = app.add_subcommand("train", "train an interactive model");
  train_cmd->add_option("--manifest", train.manifest)->required();
  train_cmd->add_option("--out", train.out, "checkpoint path")->required();
  train_cmd->add_option("--epochs", train.train.max_epochs);
  train_cmd->add_option("--patience", train.train.patience);
  train_cmd->add_option("--batch-size", train.train.batch_size);
  train_cmd->add_option("--lr", train.train.learning_rate);
  train_cmd->add_option("--click-decay", train.train.simulation.click_decay);
  train_cmd->add_option("--click-noise", train.train.simulation.click_noise_std);
  train_cmd->add_option("--seed", train.train.seed, "training stream seed");
  train_cmd->add_option("--model-seed", train.model_seed, "weight init seed");
  train_cmd->add_option("--lambda-total", train.model.lambda_total);
  train_cmd->add_flag("!--no-gate", train.model.gate_enabled, "disable the gate");
  train_cmd->add_option("--sigma", train.codec.sigma);
  train_cmd->add_option("--temperature", train.codec.temperature);
  train_rel.Register(train_cmd);

  EvalFlags eval;
  CLI::App* eval_cmd = app.add_subcommand("eval", "simulated interactive evaluation");
  eval_cmd->add_option("--checkpoint", eval.checkpoint)->required();
  eval_cmd->add_option("--manifest", eval.manifest)->required();
  eval_cmd->add_option("--split", eval.split);
  eval_cmd->add_option("--out", eval.out, "report directory");
  eval_cmd->add_option("--alpha", eval.alpha, "click budget");
  eval_cmd->add_option("--beta", eval.betas, "target MREs (px)")->delimiter(',');
  eval_cmd->add_option("--policy", eval.policy, "worst_first|random");
  eval_cmd->add_option("--limit-images", eval.limit_images);
  eval_cmd->add_option("--threads", eval.threads);
  eval_cmd->add_option("--seed", eval.seed, "seed for the random policy");
  eval_cmd->add_flag("--stop-early", eval.stop_early,
                     "stop traces at min(beta); curves then hold the last value");
  eval_cmd->add_flag("--check", eval.check, "exit nonzero if acceptance checks fail");

  std::string serve_ckpt, serve_host = "127.0.0.1";
  int serve_port = 8080, serve_ttl = 1800;
  CLI::App* serve_cmd = app.add_subcommand("serve", "run the HTTP session API");
  serve_cmd->add_option("--checkpoint", serve_ckpt)->required();
  serve_cmd->add_option("--host", serve_host);
  serve_cmd->add_option("--port", serve_port);
  serve_cmd->add_option("--session-ttl", serve_ttl, "idle seconds before expiry");

  CLI11_PARSE(app, argc, argv);

  absl::Status status;
  bool checks_passed = true;
  if (synth_cmd->parsed()) {
    status = RunSynth(synth, synth_out);
  } else if (aasce_cmd->parsed()) {
    status = RunConvertAasce(aasce, aasce_out);
  } else if (validate_cmd->parsed()) {
    status = RunValidate(validate_path);
  } else if (stats_cmd->parsed()) {
    status = RunStats(stats_manifest, stats_flags, stats_out);
  } else if (train_cmd->parsed()) {
    status = RunTrain(train, train_rel);
  } else if (eval_cmd->parsed()) {
    status = RunEval(eval, &checks_passed);
  } else if (serve_cmd->parsed()) {
    status = RunServe(serve_ckpt, serve_host, serve_port, serve_ttl);
  }
  if (!status.ok()) return Fail(status);
  return checks_passed ? 0 : 2;
}
