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

#include <filesystem>
#include <fstream>

#include "doctest.h"

#include "sim/checkpoint.hpp"
#include "sim/optim.hpp"
#include "sim/trainer.hpp"

using namespace sim;

TEST_CASE("config text parsing") {
  const TrainConfig c = parse_train_config(
      "# desk run\nvariant = gim\nchannels=32\n\ngru_dim=16\nepochs=3\nK=4\nbeta=0.5\nschedule=sequential\n");
  CHECK(c.model.variant == Variant::gim);
  CHECK(c.model.channels == 32);
  CHECK(c.model.gru_dim == 16);
  CHECK(c.epochs == 3);
  CHECK(c.model.prediction_steps == 4);
  CHECK(c.model.beta == 0.5);
  CHECK(c.schedule == Schedule::sequential);
  CHECK(c.lr == 2e-4);
  CHECK(parse_train_config(c.to_text()).to_text() == c.to_text());
  CHECK(parse_train_config(c.to_text()).hash() == c.hash());
  CHECK(c.hash().size() == 16);
  CHECK(c.hash() != TrainConfig{}.hash());
  CHECK_THROWS_AS(parse_train_config("colour=red\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_train_config("epochs=3\nepochs=4\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_train_config("lr=fast\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_train_config("just words\n"), std::invalid_argument);
}

TEST_CASE("runlog rows") {
  CHECK(runlog_header() == "config_hash\tepoch\tmodule\tloss\tkl\tkl_per_dim\tmi_bound");
  RunLogRow row{"abc", 3, "ar", 1.5, std::nullopt, std::nullopt, 1.2};
  const std::string line = format_runlog_row(row);
  CHECK(line.find("\tNA\tNA\t") != std::string::npos);

  const auto path = std::filesystem::temp_directory_path() / "smoothnce_runlog.tsv";
  {
    std::ofstream f(path);
    f << runlog_header() << "\n" << line << "\n"
      << format_runlog_row({"abc", 3, "1", 2.0, 0.25, 0.125, 0.7}) << "\n";
  }
  const auto rows = read_runlog(path);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].module == "ar");
  CHECK_FALSE(rows[0].kl.has_value());
  CHECK(*rows[1].kl_per_dim == 0.125);
  std::filesystem::remove(path);
}

TEST_CASE("collapse monitor") {
  std::vector<RunLogRow> rows;
  for (std::size_t e = 1; e <= 6; ++e) {
    rows.push_back({"h", e, "1", 1.0, 0.01, e >= 2 ? 1e-4 : 0.5, 0.0});
    rows.push_back({"h", e, "2", 1.0, 0.01, e % 2 ? 1e-4 : 0.5, 0.0});
    rows.push_back({"h", e, "ar", 1.0, std::nullopt, std::nullopt, 0.0});
  }
  const auto w = monitor_kl(rows);
  REQUIRE(w.size() == 1);
  CHECK(w[0].find("1") != std::string::npos);
  CHECK(monitor_kl(rows, 1e-3, 6).empty());
  CHECK(monitor_kl(rows, 1e-5).empty());
}

TEST_CASE("step losses touch only their own module") {
  Model model(ModelConfig::reduced(Variant::sim));
  const Corpus corpus = generate_corpus(10, 0);
  const std::vector<std::size_t> idx{0, 1};
  const StepLosses s = build_step_losses(model, stack_clips(corpus, idx), 0);
  REQUIRE(s.losses.size() == 4);
  REQUIRE(s.rows.size() == 4);
  CHECK(s.rows[3].module == "ar");
  CHECK(s.rows[0].kl_per_dim.has_value());
  backward(s.losses[1]);
  auto nonzero = [](const Parameter *p) {
    for (float v : p->grad().data())
      if (v != 0.0f) return true;
    return false;
  };
  CHECK_FALSE(nonzero(model.find("module1.conv0.weight")));
  CHECK(nonzero(model.find("module2.conv0.weight")));
  CHECK_FALSE(nonzero(model.find("module3.mu.weight")));

  const StepLosses again = build_step_losses(model, stack_clips(corpus, idx), 0);
  CHECK(again.rows[2].loss == s.rows[2].loss);
  CHECK(build_step_losses(model, stack_clips(corpus, idx), 1).rows[2].loss != s.rows[2].loss);
}

TEST_CASE("tiny training run is reproducible") {
  TrainConfig cfg;
  cfg.model = ModelConfig::reduced(Variant::sim);
  cfg.model.channels = 8;
  cfg.model.gru_dim = 8;
  cfg.model.prediction_steps = 3;
  cfg.epochs = 2;
  cfg.batch_size = 4;
  Corpus corpus = generate_corpus(12, 1);
  split_corpus(corpus, 0.8, 1);
  const auto dir = std::filesystem::temp_directory_path();
  const TrainResult a = train(cfg, corpus, dir / "smoothnce_a.ckpt");
  const TrainResult b = train(cfg, corpus, dir / "smoothnce_b.ckpt");
  CHECK(read_file(a.runlog) == read_file(b.runlog));
  CHECK(read_file(a.checkpoint) == read_file(b.checkpoint));
  CHECK(a.rows.size() == 2 * 4);
  CHECK(std::filesystem::exists(dir / "smoothnce_a.ckpt.timing.tsv"));
  for (const auto &p : {"smoothnce_a.ckpt", "smoothnce_b.ckpt"}) {
    std::filesystem::remove(dir / p);
    std::filesystem::remove(dir / (std::string(p) + ".runlog.tsv"));
    std::filesystem::remove(dir / (std::string(p) + ".timing.tsv"));
  }

  cfg.model.variant = Variant::cpc;
  std::vector<RunLogRow> rows;
  train_model(cfg, corpus, &rows);
  CHECK(rows.size() == 2);
  CHECK(rows[0].module == "cpc");

  cfg.model.variant = Variant::supervised;
  rows.clear();
  train_model(cfg, corpus, &rows);
  REQUIRE_FALSE(rows.empty());
  CHECK(rows[0].module == "supervised");
  CHECK_FALSE(rows[0].mi_bound.has_value());
}

TEST_CASE("huge beta collapses the posterior") {
  ModelConfig cfg = ModelConfig::reduced(Variant::sim);
  cfg.channels = 4;
  cfg.gru_dim = 4;
  cfg.prediction_steps = 3;
  cfg.beta = 1e6;
  Model model(cfg);
  Corpus corpus = generate_corpus(10, 4);
  const std::vector<std::size_t> idx{0, 1};
  const Tensor x = stack_clips(corpus, idx);
  std::vector<Adam> opts;
  for (auto &g : model.parameter_groups()) opts.emplace_back(g, AdamConfig{3e-3});
  double kl = 1.0;
  std::size_t steps = 0;
  for (; steps < 200 && kl >= 1e-3; ++steps) {
    StepLosses s = build_step_losses(model, x, steps);
    for (auto &o : opts) o.zero_grad();
    for (auto &l : s.losses) backward(l);
    for (auto &o : opts) o.step();
    kl = 0.0;
    for (std::size_t m = 0; m < 3; ++m) kl = std::max(kl, *s.rows[m].kl_per_dim);
  }
  MESSAGE("max per-dim KL " << kl << " after " << steps << " steps");
  CHECK(kl < 1e-3);
}

TEST_CASE("monitor on an all-zero KL stream") {
  std::vector<RunLogRow> rows;
  for (std::size_t e = 0; e < 4; ++e) rows.push_back({"h", e, "1", 1.0, 0.0, 0.0, 0.0});
  CHECK(monitor_kl(rows).empty());
  rows.push_back({"h", 4, "1", 1.0, 0.0, 0.0, 0.0});
  CHECK(monitor_kl(rows).size() == 1);
}
