// Copyright 2026  The smoothnce Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// simctl: command line front end.
//
//   simctl gen-data --out DIR [--files 200] [--seed 0]
//   simctl train --data DIR --out CKPT [--config run.cfg] [--variant sim] [--reduced]
//   simctl probe --ckpt F --data DIR --task vowel|syllable --layer 1|2|3|context [--no-bias]
//   simctl decode-train --ckpt F --data DIR --layer N --out DEC
//   simctl report --ckpts F1,F2 --data DIR --out DIR [--decoders D1,D2]
//   simctl serve --ckpt F --decoders D1,D2,D3 --data DIR [--bind 127.0.0.1:8787]
//   simctl monitor --runlog F [--threshold 1e-3]

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"

#include "sim/checkpoint.hpp"
#include "sim/kernels.hpp"
#include "sim/probes.hpp"
#include "sim/service.hpp"
#include "sim/trainer.hpp"

namespace fs = std::filesystem;
using namespace sim;

namespace {

std::vector<std::string> split_list(const std::string &s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

}  // namespace

int main(int argc, char **argv) {
  kernels::select_blas_core(argv);
  CLI::App app{"Greedy contrastive learning with Gaussian latents: data, training, analysis"};
  app.require_subcommand(1);

  // gen-data
  std::string gen_out;
  std::size_t gen_files = 200;
  std::uint64_t gen_seed = 0;
  double gen_ratio = 0.8;
  auto *gen = app.add_subcommand("gen-data", "Synthesize the syllable corpus");
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--files", gen_files, "Number of clips (>= 10)");
  gen->add_option("--seed", gen_seed, "Corpus seed");
  gen->add_option("--train-ratio", gen_ratio, "Fraction of clips in the train split");

  // train
  std::string tr_config, tr_data, tr_out, tr_variant;
  bool tr_reduced = false;
  std::size_t tr_epochs = 0;
  auto *tr = app.add_subcommand("train", "Train a model on the train split");
  tr->add_option("--config", tr_config, "key=value config file");
  tr->add_option("--data", tr_data, "Corpus directory")->required();
  tr->add_option("--out", tr_out, "Checkpoint path")->required();
  tr->add_option("--variant", tr_variant, "sim|gim|cpc|supervised");
  tr->add_flag("--reduced", tr_reduced, "Desk-scale defaults: 64 channels, 60 epochs");
  tr->add_option("--epochs", tr_epochs, "Override the epoch count");

  // probe
  std::string pr_ckpt, pr_data, pr_task = "vowel", pr_layer = "context";
  bool pr_no_bias = false;
  std::uint64_t pr_seed = 0;
  auto *pr = app.add_subcommand("probe", "Train a linear probe on frozen features");
  pr->add_option("--ckpt", pr_ckpt, "Checkpoint")->required();
  pr->add_option("--data", pr_data, "Corpus directory")->required();
  pr->add_option("--task", pr_task, "vowel|syllable");
  pr->add_option("--layer", pr_layer, "1|2|3|context");
  pr->add_flag("--no-bias", pr_no_bias, "Probe without a bias term");
  pr->add_option("--seed", pr_seed, "Probe seed");

  // decode-train
  std::string dt_ckpt, dt_data, dt_out;
  std::size_t dt_layer = 3;
  DecoderTrainConfig dt_cfg;
  auto *dt = app.add_subcommand("decode-train", "Train a mirror decoder on a frozen encoder");
  dt->add_option("--ckpt", dt_ckpt, "Checkpoint")->required();
  dt->add_option("--data", dt_data, "Corpus directory")->required();
  dt->add_option("--layer", dt_layer, "Encoder module 1|2|3");
  dt->add_option("--out", dt_out, "Decoder path")->required();
  dt->add_option("--epochs", dt_cfg.epochs, "Epochs");
  dt->add_option("--batch-size", dt_cfg.batch_size, "Batch size");
  dt->add_option("--lr", dt_cfg.lr, "Learning rate");

  // report
  std::string rp_ckpts, rp_decoders, rp_data, rp_out;
  ReportConfig rp_cfg;
  auto *rp = app.add_subcommand("report", "Probe accuracies, weight concentration and delta tables");
  rp->add_option("--ckpts", rp_ckpts, "Comma separated checkpoints")->required();
  rp->add_option("--decoders", rp_decoders, "Comma separated decoders (any checkpoint)");
  rp->add_option("--data", rp_data, "Corpus directory")->required();
  rp->add_option("--out", rp_out, "Report directory")->required();
  rp->add_option("--probe-seeds", rp_cfg.probe_seeds, "Probe seeds per cell");
  rp->add_option("--pairs", rp_cfg.delta_pairs, "Clip pairs for delta");

  // serve
  std::string sv_ckpt, sv_decoders, sv_data, sv_bind = "127.0.0.1:8787";
  auto *sv = app.add_subcommand("serve", "Run the inspection HTTP service");
  sv->add_option("--ckpt", sv_ckpt, "Checkpoint")->required();
  sv->add_option("--decoders", sv_decoders, "Comma separated decoders")->required();
  sv->add_option("--data", sv_data, "Corpus directory")->required();
  sv->add_option("--bind", sv_bind, "host:port");

  // monitor
  std::string mo_runlog;
  double mo_threshold = 1e-3;
  auto *mo = app.add_subcommand("monitor", "Check a run log for posterior collapse");
  mo->add_option("--runlog", mo_runlog, "Run log")->required();
  mo->add_option("--threshold", mo_threshold, "Mean per-dimension KL threshold");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      Corpus corpus = generate_corpus(gen_files, gen_seed);
      split_corpus(corpus, gen_ratio, gen_seed);
      write_corpus(corpus, gen_out);
      std::printf("wrote %zu clips (%zu train, %zu test) to %s\n", corpus.clips.size(),
                  corpus.count(Split::train), corpus.count(Split::test), gen_out.c_str());
    } else if (*tr) {
      TrainConfig cfg;
      if (tr_reduced) {
        cfg.model = ModelConfig::reduced(cfg.model.variant, cfg.model.seed);
        cfg.epochs = 60;
      }
      if (!tr_config.empty()) cfg = load_train_config(tr_config, cfg);
      if (!tr_variant.empty()) cfg.model.variant = parse_variant(tr_variant);
      if (tr_epochs) cfg.epochs = tr_epochs;
      const Corpus corpus = read_corpus(tr_data);
      std::fprintf(stderr, "config %s\n%s", cfg.hash().c_str(), cfg.to_text().c_str());
      TrainResult r = train(cfg, corpus, tr_out, [](const EpochSummary &s) {
        std::fprintf(stderr, "epoch %zu (%.1fs)", s.epoch, s.seconds);
        for (const auto &row : s.rows) std::fprintf(stderr, "  %s=%.4f", row.module.c_str(), row.loss);
        std::fprintf(stderr, "\n");
      });
      for (const auto &w : r.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
      std::printf("%s\n", r.checkpoint.string().c_str());
    } else if (*pr) {
      const Model model = load_checkpoint(pr_ckpt);
      const Corpus corpus = read_corpus(pr_data);
      const ProbeTask task = parse_task(pr_task);
      const std::size_t layer = parse_layer(pr_layer);
      const SyllableData data = syllable_dataset(corpus);
      const auto features = pooled_features_all_layers(model, data.waveforms);
      const auto &labels = task == ProbeTask::vowel ? data.vowel : data.syllable;
      std::vector<std::size_t> tri, tei;
      split_indices(labels.size(), pr_seed, tri, tei);
      std::vector<int> ytr, yte;
      for (auto i : tri) ytr.push_back(labels[i]);
      for (auto i : tei) yte.push_back(labels[i]);
      ProbeConfig pc;
      pc.seed = pr_seed;
      pc.has_bias = !pr_no_bias;
      const ProbeResult r = train_probe(gather_rows(features[layer], tri), ytr,
                                        gather_rows(features[layer], tei), yte,
                                        task_classes(task), pc);
      const Concentration c = weight_concentration(r.weights);
      std::printf("task\tlayer\tbias\ttrain_acc\ttest_acc\tnear_zero_fraction\n");
      std::printf("%s\t%s\t%s\t%.4f\t%.4f\t%.4f\n", std::string(task_name(task)).c_str(),
                  pr_layer.c_str(), pr_no_bias ? "no" : "yes", r.train_accuracy, r.test_accuracy,
                  c.near_zero_fraction);
    } else if (*dt) {
      const Model model = load_checkpoint(dt_ckpt);
      const Corpus corpus = read_corpus(dt_data);
      auto r = train_decoder(model, dt_layer, corpus, dt_cfg, [](std::size_t e, double loss) {
        std::fprintf(stderr, "epoch %zu mse %.6g\n", e, loss);
      });
      save_decoder(r.decoder, dt_out);
      std::printf("%s\n", dt_out.c_str());
    } else if (*rp) {
      const Corpus corpus = read_corpus(rp_data);
      std::vector<Model> models;
      std::vector<std::string> names;
      for (const auto &p : split_list(rp_ckpts)) {
        models.push_back(load_checkpoint(p));
        names.push_back(fs::path(p).stem().string());
      }
      std::vector<Decoder> decoders;
      std::vector<std::string> decoder_owner;
      for (const auto &p : split_list(rp_decoders)) {
        decoders.push_back(load_decoder(p));
        decoder_owner.push_back(fs::path(p).stem().string());
      }
      std::vector<ReportInput> inputs;
      for (std::size_t i = 0; i < models.size(); ++i) {
        ReportInput in{names[i], &models[i], {}};
        // A decoder belongs to the checkpoint whose stem prefixes its own.
        for (std::size_t j = 0; j < decoders.size(); ++j)
          if (decoder_owner[j].rfind(names[i], 0) == 0 &&
              decoders[j].config() == models[i].config())
            in.decoders[decoders[j].module_index()] = &decoders[j];
        inputs.push_back(in);
      }
      const Report report = run_report(inputs, corpus, rp_out, rp_cfg);
      for (const auto &n : report.notes) std::printf("note: %s\n", n.c_str());
      std::printf("report written to %s\n", rp_out.c_str());
    } else if (*sv) {
      std::vector<fs::path> decs;
      for (const auto &p : split_list(sv_decoders)) decs.emplace_back(p);
      auto service = InspectService::open(sv_ckpt, decs, sv_data);
      serve(*service, sv_bind, [&](auto &, int port) {
        std::fprintf(stderr, "listening on %s (port %d)\n", sv_bind.c_str(), port);
      });
    } else if (*mo) {
      const auto warnings = monitor_kl(read_runlog(mo_runlog), mo_threshold);
      for (const auto &w : warnings) std::printf("warning: %s\n", w.c_str());
      if (warnings.empty()) std::printf("no collapse detected\n");
      return warnings.empty() ? 0 : 3;
    }
  } catch (const std::exception &e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
