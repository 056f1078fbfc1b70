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

// Acceptance run: one PASS/FAIL line per criterion 1-15.
//
//   acceptance [out_dir] [--known-red 7,11]
//
// Criteria 1-6 are numerics on tiny or untrained models. Criteria 7-13 train
// the desk-scale run (200 clips, 64 channels, 60 epochs) for SIM and GIM and
// analyse the result. 14-15 cover checkpoints, WAV, reproducibility and the
// inspection service. Exit status is non-zero when a blocking criterion fails,
// unless it is listed with --known-red; those still print FAIL and are counted
// in the summary.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <future>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "httplib.h"
#include "json.hpp"

#include "sim/checkpoint.hpp"
#include "sim/kernels.hpp"
#include "sim/losses.hpp"
#include "sim/probes.hpp"
#include "sim/service.hpp"
#include "sim/trainer.hpp"
#include "sim/wav.hpp"

#include "../common/tiny_oracle.hpp"

namespace fs = std::filesystem;
using namespace sim;
using json = nlohmann::json;

namespace {

// Pinned tolerances.
constexpr double kFdStep = 1e-3;
constexpr double kFdMaxRelError = 1e-3;
constexpr double kFdDenominatorFloor = 1e-4;
constexpr std::size_t kKlCases = 20;
constexpr std::size_t kKlSamples = 1000000;
constexpr double kKlRelTolerance = 0.01;
constexpr double kNceTolerance = 1e-6;
constexpr double kVowelMin = 75.0;
constexpr double kVowelOverRandom = 25.0;
constexpr double kSyllableOverChance = 15.0;
constexpr double kKlLow = 1e-3;
constexpr double kKlHigh = 10.0;
constexpr double kCollapseBeta = 1e6;
constexpr std::size_t kCollapseEpochs = 8;
constexpr double kMonotoneMin = 0.95;
constexpr std::size_t kInterpSteps = 20;
constexpr double kInterpJumpFactor = 4.0;
constexpr double kConcentrationAccuracyBand = 2.0;
constexpr double kWavLsb = 1.0 / 32768.0;

// Desk-scale run.
constexpr std::size_t kDeskClips = 200;
constexpr std::size_t kDeskEpochs = 60;
constexpr std::uint64_t kDeskSeed = 0;
constexpr std::size_t kDecoderEpochs = 60;
constexpr std::size_t kDecoderBatch = 16;
constexpr std::size_t kProbeSeeds = 5;
constexpr std::size_t kDeltaPairs = 20;

struct Line {
  int id = 0;
  bool pass = false;
  bool blocking = true;
  std::string detail;
};

std::vector<Line> g_lines;

void report(int id, bool pass, std::string detail, bool blocking = true) {
  g_lines.push_back({id, pass, pass || blocking, detail});
  std::printf("criterion %2d: %s  %s%s\n", id, pass ? "PASS" : "FAIL", detail.c_str(),
              !pass && !blocking ? " [non-blocking]" : "");
  std::fflush(stdout);
}

template <class... A>
std::string fmt(const char *f, A... a) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, a...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool all_zero(const Tensor &g) {
  return std::all_of(g.data().begin(), g.data().end(), [](float v) { return v == 0.0f; });
}

// ---------------------------------------------------------------- numerics

void criterion_gradient() {
  ModelConfig c;
  c.channels = 4;
  c.gru_dim = 4;
  c.modules = {c.modules[0], c.modules[1]};
  c.prediction_steps = 3;
  c.beta = 0.5;
  c.seed = 3;
  Model model(c);
  // 960 samples -> 48 frames after module 1 and 12 after module 2.
  const std::size_t batch = 2, len = 960;
  Tensor x({batch, 1, len});
  RngStream src(5, 0);
  for (auto &v : x.data()) v = static_cast<float>(src.uniform(-1.0, 1.0));
  std::vector<std::vector<double>> waves(batch);
  for (std::size_t b = 0; b < batch; ++b)
    waves[b].assign(x.data().begin() + b * len, x.data().begin() + (b + 1) * len);
  const RngStream eps(7, 1), neg(7, 2);

  RngStream e = eps;
  ForwardResult fr = forward_full(model, x, EncodeMode::sample, &e, true);
  std::vector<double> lib_loss;
  for (std::size_t m = 0; m < fr.modules.size(); ++m) {
    const LatentFrames &lat = fr.modules[m];
    RngStream ng = neg.derive(m);
    const CandidateSet cs = draw_negatives(lat.batch(), lat.frames(), c.prediction_steps,
                                           kCandidates - 1, ng);
    std::vector<Var> w;
    for (auto &p : model.modules()[m].score) w.push_back(p.var);
    LossBreakdown lb = smooth_info_nce(lat, w, c.beta, cs);
    lib_loss.push_back(lb.total_value);
    backward(lb.total);
  }

  const oracle::Params base_params = oracle::params_of(model);
  const oracle::Evaluation base = oracle::evaluate(c, base_params, waves, eps, neg);
  double value_gap = 0.0;
  for (std::size_t m = 0; m < lib_loss.size(); ++m)
    value_gap = std::max(value_gap, std::fabs(lib_loss[m] - base.module_loss[m]));

  double worst = 0.0;
  std::string worst_id;
  std::size_t checked = 0, kinks = 0;
  for (const Parameter *p : model.parameters()) {
    if (p->id.rfind("module", 0) != 0) continue;
    const std::size_t m = static_cast<std::size_t>(p->id[6] - '1');
    for (std::size_t i = 0; i < p->value().numel(); ++i) {
      oracle::Params q = base_params;
      q[p->id][i] += kFdStep;
      const auto up = oracle::evaluate(c, q, waves, eps, neg);
      q[p->id][i] -= 2.0 * kFdStep;
      const auto down = oracle::evaluate(c, q, waves, eps, neg);
      // A perturbation that flips a ReLU makes the central difference invalid.
      if (up.pattern != base.pattern || down.pattern != base.pattern) {
        ++kinks;
        continue;
      }
      const double fd = (up.module_loss[m] - down.module_loss[m]) / (2.0 * kFdStep);
      const double an = p->grad().empty() ? 0.0 : p->grad()[i];
      const double rel =
          std::fabs(an - fd) / std::max({std::fabs(an), std::fabs(fd), kFdDenominatorFloor});
      ++checked;
      if (rel > worst) {
        worst = rel;
        worst_id = p->id + "[" + std::to_string(i) + "]";
      }
    }
  }
  report(1, worst < kFdMaxRelError && checked > 100,
         fmt("max rel error %.2e at %s over %zu coords (h=%g, %zu ReLU-crossing coords "
             "skipped, oracle value gap %.1e)",
             worst, worst_id.c_str(), checked, kFdStep, kinks, value_gap));
}

void criterion_kl() {
  RngStream rng = RngStream::named(11, "kl-oracle");
  const std::size_t dims = 3;
  double worst = 0.0;
  for (std::size_t c = 0; c < kKlCases; ++c) {
    Tensor mu({1, dims}), sigma({1, dims});
    for (std::size_t d = 0; d < dims; ++d) {
      mu[d] = static_cast<float>(rng.uniform(-2.0, 2.0));
      sigma[d] = static_cast<float>(rng.uniform(0.4, 2.0));
    }
    const double closed = kl_standard_normal(mu, sigma);
    // E_q[log q(z) - log p(z)] with z = mu + sigma * eps.
    double acc = 0.0;
    for (std::size_t s = 0; s < kKlSamples; ++s)
      for (std::size_t d = 0; d < dims; ++d) {
        const double e = rng.normal();
        const double z = mu[d] + sigma[d] * e;
        acc += -std::log(static_cast<double>(sigma[d])) - 0.5 * e * e + 0.5 * z * z;
      }
    const double mc = acc / static_cast<double>(kKlSamples);
    worst = std::max(worst, std::fabs(closed - mc) / std::fabs(mc));
  }
  const double zero = kl_standard_normal(Tensor({4, 5}, 0.0f), Tensor({4, 5}, 1.0f));
  report(2, worst < kKlRelTolerance && zero == 0.0,
         fmt("worst MC relative gap %.3e over %zu cases x %zu samples; KL(0,1) = %g", worst,
             kKlCases, kKlSamples, zero));
}

void criterion_infonce() {
  const std::size_t rows = 37;
  const double uniform = info_nce_from_logits(Tensor({rows, kCandidates}, 0.0f));
  // Same through the full loss: all-zero latents give all-zero logits.
  const std::size_t batch = 2, frames = 8, dims = 3, steps = 2;
  Var z = Var::leaf(Tensor({batch, frames, dims}, 0.0f), true);
  std::vector<Var> w{Var::leaf(Tensor({dims, dims}, 0.5f), true),
                     Var::leaf(Tensor({dims, dims}, -0.25f), true)};
  RngStream rng(3, 3);
  const CandidateSet cs = draw_negatives(batch, frames, steps, kCandidates - 1, rng);
  const double full = info_nce(z, z, w, cs).value;

  RngStream src(4, 4);
  Tensor logits({rows, kCandidates});
  for (auto &v : logits.data()) v = static_cast<float>(src.uniform(-3.0, 3.0));
  Tensor shifted = logits;
  for (auto &v : shifted.data()) v += 37.5f;
  const double drift =
      std::fabs(info_nce_from_logits(logits) - info_nce_from_logits(shifted));
  const double ln16 = std::log(16.0);
  const double bound = mi_lower_bound(ln16, kCandidates);
  const bool ok = std::fabs(uniform - ln16) < kNceTolerance &&
                  std::fabs(full - ln16) < kNceTolerance && drift < kNceTolerance && bound == 0.0;
  report(3, ok,
         fmt("uniform %.9f, full-loss uniform %.9f (ln16 %.9f), shift drift %.1e, "
             "mi_lower_bound(ln16,16) = %g",
             uniform, full, ln16, drift, bound));
}

void criterion_shapes() {
  const ModelConfig full;
  Model model(full);
  std::vector<LayerTrace> trace;
  {
    NoGradGuard no_grad;
    RngStream rng(1, 1);
    forward_full(model, Tensor({1, 1, kClipSamples}, 0.1f), EncodeMode::sample, &rng, false,
                 &trace);
  }
  const std::vector<LayerTrace> expected = {
      {"module1.conv0", 2047, 512}, {"module1.conv1", 511, 512}, {"module1.mu", 511, 512},
      {"module1.sigma", 511, 512},  {"module2.conv0", 256, 512}, {"module2.conv1", 129, 512},
      {"module2.mu", 129, 512},     {"module2.sigma", 129, 512}, {"module3.conv0", 64, 512},
      {"module3.mu", 64, 512},      {"module3.sigma", 64, 512},  {"ar.gru", 64, 256}};
  std::string mismatch;
  if (trace.size() != expected.size()) mismatch = "row count " + std::to_string(trace.size());
  for (std::size_t i = 0; mismatch.empty() && i < expected.size(); ++i)
    if (trace[i].layer != expected[i].layer || trace[i].frames != expected[i].frames ||
        trace[i].channels != expected[i].channels)
      mismatch = trace[i].layer + " " + std::to_string(trace[i].frames) + "x" +
                 std::to_string(trace[i].channels);
  const auto chain = frame_chain(full, kClipSamples);
  const bool ok = mismatch.empty() && full.downsampling() == 160 && chain.back() == 64 &&
                  kClipSamples / chain.back() == 160;
  report(4, ok,
         mismatch.empty() ? fmt("%zu rows match (10240 -> 2047 -> 511 -> 256 -> 129 -> 64), "
                                "downsampling %zu",
                                trace.size(), full.downsampling())
                          : "mismatch at " + mismatch);
}

Tensor two_clips(const Corpus &corpus) {
  const std::vector<std::size_t> idx{0, 1};
  return stack_clips(corpus, idx);
}

void criterion_beta_zero(const Corpus &corpus) {
  Model model(ModelConfig::reduced(Variant::sim, 2));
  RngStream rng(9, 9);
  ForwardResult fr = forward_full(model, two_clips(corpus), EncodeMode::sample, &rng, true);
  bool ok = true;
  std::string detail;
  for (std::size_t m = 0; m < fr.modules.size(); ++m) {
    const LatentFrames &lat = fr.modules[m];
    RngStream ng(9, 100 + m);
    const CandidateSet cs = draw_negatives(lat.batch(), lat.frames(), 10, kCandidates - 1, ng);
    std::vector<Var> w;
    for (auto &p : model.modules()[m].score) w.push_back(p.var);
    const LossBreakdown smooth = smooth_info_nce(lat, w, 0.0, cs);
    const NceResult plain = info_nce(lat.z, lat.z, w, cs);
    const bool values = std::memcmp(&smooth.total_value, &plain.value, sizeof(double)) == 0 &&
                        smooth.total.value()[0] == plain.loss.value()[0];
    // Gradients of the two losses must agree bit for bit as well.
    auto params = model.module_parameters(m);
    zero_grad(params);
    backward(smooth.total);
    std::vector<Tensor> gs;
    for (auto *p : params) gs.push_back(p->grad());
    zero_grad(params);
    backward(plain.loss);
    bool grads = true;
    for (std::size_t i = 0; i < params.size(); ++i) {
      const Tensor &a = gs[i], &b = params[i]->grad();
      if (a.numel() != b.numel() ||
          (a.numel() && std::memcmp(a.ptr(), b.ptr(), a.numel() * sizeof(float)) != 0))
        grads = false;
    }
    zero_grad(params);
    ok = ok && values && grads;
    detail += fmt("m%zu %.9f%s ", m + 1, plain.value, values && grads ? "" : " differs");
  }
  report(5, ok, "smooth(beta=0) == info_nce, values and grads bitwise: " + detail);
}

// Counts parameters outside `own` with a non-zero gradient after backward(loss).
std::size_t leaked(Model &model, const Var &loss, const std::vector<Parameter *> &own,
                   bool *own_nonzero) {
  zero_grad(model.parameters());
  backward(loss);
  std::size_t n = 0;
  *own_nonzero = false;
  for (Parameter *p : model.parameters()) {
    const bool mine = std::find(own.begin(), own.end(), p) != own.end();
    const bool zero = p->grad().empty() || all_zero(p->grad());
    if (mine && !zero) *own_nonzero = true;
    if (!mine && !zero) ++n;
  }
  zero_grad(model.parameters());
  return n;
}

void criterion_isolation(const Corpus &corpus) {
  const Tensor x = two_clips(corpus);
  bool ok = true;
  std::string detail;
  for (Variant v : {Variant::sim, Variant::gim}) {
    Model model(ModelConfig::reduced(v, 4));
    StepLosses sl = build_step_losses(model, x, 0);
    auto groups = model.parameter_groups();
    std::size_t cross = 0;
    bool trained = true;
    for (std::size_t i = 0; i < sl.losses.size(); ++i) {
      bool own = false;
      cross += leaked(model, sl.losses[i], groups[i], &own);
      trained = trained && own;
    }
    ok = ok && cross == 0 && trained && sl.losses.size() == 4;
    detail += fmt("%s: %zu losses, %zu cross-module non-zero grads; ",
                  std::string(variant_name(v)).c_str(), sl.losses.size(), cross);
  }
  Model cpc(ModelConfig::reduced(Variant::cpc, 4));
  StepLosses sl = build_step_losses(cpc, x, 0);
  zero_grad(cpc.parameters());
  backward(sl.losses.at(0));
  const Parameter *first = cpc.find("module1.conv0.weight");
  const bool reaches = first && !first->grad().empty() && !all_zero(first->grad());
  zero_grad(cpc.parameters());
  ok = ok && reaches;
  detail += std::string("cpc: module1.conv0 grad ") + (reaches ? "non-zero" : "zero");
  report(6, ok, detail);
}

// ---------------------------------------------------------------- desk run

struct DeskRun {
  fs::path dir;
  Corpus corpus;
  std::map<std::string, fs::path> ckpt;
  std::map<std::string, TrainResult> results;
};

TrainResult train_logged(const std::string &name, const TrainConfig &cfg, const Corpus &corpus,
                         const fs::path &out) {
  const auto t0 = std::chrono::steady_clock::now();
  TrainResult r = train(cfg, corpus, out, [&](const EpochSummary &s) {
    if ((s.epoch + 1) % 10 != 0 && s.epoch + 1 != cfg.epochs) return;
    std::fprintf(stderr, "[%s] epoch %zu", name.c_str(), s.epoch + 1);
    for (const auto &row : s.rows) std::fprintf(stderr, " %s=%.3f", row.module.c_str(), row.loss);
    std::fprintf(stderr, " (%.0fs)\n", seconds_since(t0));
  });
  return r;
}

std::optional<double> accuracy_of(const Report &rep, const std::string &variant,
                                  const std::string &layer, ProbeTask task) {
  for (const auto &r : rep.accuracy)
    if (r.variant == variant && r.layer == layer && r.task == task) return r.mean;
  return std::nullopt;
}

const DeltaRow *delta_row(const Report &rep, const std::string &variant, std::size_t module,
                          std::size_t n) {
  for (const auto &r : rep.delta)
    if (r.variant == variant && r.module == module && r.n == n) return &r;
  return nullptr;
}

// ---------------------------------------------------------------- service

struct HttpReply {
  int status = 0;
  std::string body;
  std::string metadata;
};

HttpReply post(httplib::Client &cli, const std::string &path, const json &body) {
  auto res = cli.Post(path, body.dump(), "application/json");
  if (!res) return {};
  return {res->status, res->body, res->get_header_value("X-Metadata")};
}

// The service holds a single decoder here; its module index is the layer.
std::size_t decoder_module_index(InspectService &s) {
  for (std::size_t m = 1; m <= s.model().config().num_modules(); ++m)
    if (s.decoder(m)) return m;
  return 1;
}

void criterion_service(const fs::path &ckpt, const fs::path &decoder, const fs::path &data,
                       const Corpus &corpus) {
  auto service = InspectService::open(ckpt, {decoder}, data);
  std::promise<std::pair<httplib::Server *, int>> ready;
  auto ready_future = ready.get_future();
  std::thread th([&] {
    serve(*service, "127.0.0.1:0",
          [&](httplib::Server &s, int port) { ready.set_value({&s, port}); });
  });
  auto [server, port] = ready_future.get();
  httplib::Client cli("127.0.0.1", port);
  cli.set_read_timeout(120, 0);

  const auto test = corpus.indices(Split::test);
  const std::string a = corpus.clips[test[0]].id, b = corpus.clips[test[1]].id;
  const std::size_t layer = decoder_module_index(*service);

  bool idempotent = true;
  auto clips1 = cli.Get("/clips"), clips2 = cli.Get("/clips");
  idempotent = idempotent && clips1 && clips2 && clips1->status == 200 &&
               clips1->body == clips2->body;
  const json enc_req{{"clip_id", a}, {"layer", layer}};
  const HttpReply e1 = post(cli, "/encode", enc_req), e2 = post(cli, "/encode", enc_req);
  idempotent = idempotent && e1.status == 200 && e1.body == e2.body;
  const json swap_req{{"clip_a", a}, {"clip_b", b}, {"layer", layer}, {"n", 8}};
  const HttpReply s1 = post(cli, "/partial_swap", swap_req),
                  s2 = post(cli, "/partial_swap", swap_req);
  idempotent = idempotent && s1.status == 200 && s1.body == s2.body && s1.metadata == s2.metadata;
  const json interp_req{{"clip_a", a}, {"clip_b", b}, {"layer", layer}, {"alpha", 0.0}};
  const HttpReply i1 = post(cli, "/interpolate", interp_req),
                  i2 = post(cli, "/interpolate", interp_req);
  idempotent = idempotent && i1.status == 200 && i1.body == i2.body;

  const json mu = json::parse(e1.body.empty() ? "{}" : e1.body).value("mu", json::array());
  const HttpReply d1 = post(cli, "/decode", {{"layer", layer}, {"latent", mu}}),
                  d2 = post(cli, "/decode", {{"layer", layer}, {"latent", mu}});
  idempotent = idempotent && d1.status == 200 && d1.body == d2.body;
  const bool alpha_zero = d1.status == 200 && !i1.body.empty() && i1.body == d1.body;

  const std::size_t dims = service->model().config().channels;
  const HttpReply full = post(cli, "/partial_swap",
                              {{"clip_a", a}, {"clip_b", b}, {"layer", layer}, {"n", dims}});
  const json meta = json::parse(full.metadata.empty() ? "{}" : full.metadata);
  const bool swap_zero = full.status == 200 && meta.contains("delta") &&
                         meta["delta"].is_number() && meta["delta"].get<double>() == 0.0;

  server->stop();
  th.join();
  report(15, idempotent && alpha_zero && swap_zero,
         fmt("repeat requests byte-identical: %s; /interpolate(alpha=0) == /decode(mu of A): %s "
             "(%zu bytes); /partial_swap n=D delta = 0: %s; explorer-ui not built",
             idempotent ? "yes" : "no", alpha_zero ? "yes" : "no", i1.body.size(),
             swap_zero ? "yes" : "no"));
}

}  // namespace

int main(int argc, char **argv) {
  kernels::select_blas_core(argv);
  std::string out_arg = "acceptance_out";
  std::vector<int> known_red;
  CLI::App app{"Acceptance criteria 1-15"};
  app.add_option("out_dir", out_arg, "Directory for corpus, checkpoints and report");
  app.add_option("--known-red", known_red, "Criteria whose failure does not fail the run")
      ->delimiter(',');
  CLI11_PARSE(app, argc, argv);
  const fs::path out(out_arg);
  fs::create_directories(out);
  const auto t_start = std::chrono::steady_clock::now();
  std::printf("acceptance: BLAS core %s, output %s\n", kernels::blas_core().c_str(),
              out.string().c_str());

  DeskRun run;
  run.dir = out;
  run.corpus = generate_corpus(kDeskClips, kDeskSeed);
  split_corpus(run.corpus, 0.8, kDeskSeed);
  const fs::path data = out / "data";
  write_corpus(run.corpus, data);

  // Numerics.
  const auto t_num = std::chrono::steady_clock::now();
  criterion_gradient();
  criterion_kl();
  criterion_infonce();
  criterion_shapes();
  criterion_beta_zero(run.corpus);
  criterion_isolation(run.corpus);
  std::printf("numerics suite: %.1fs\n", seconds_since(t_num));
  std::fflush(stdout);

  // Desk-scale training.
  std::map<std::string, Model> models;
  for (Variant v : {Variant::sim, Variant::gim}) {
    const std::string name(variant_name(v));
    TrainConfig cfg;
    cfg.model = ModelConfig::reduced(v, kDeskSeed);
    cfg.epochs = kDeskEpochs;
    run.ckpt[name] = out / (name + ".ckpt");
    run.results[name] = train_logged(name, cfg, run.corpus, run.ckpt[name]);
    models.emplace(name, load_checkpoint(run.ckpt[name]));
  }
  models.emplace("random", Model(ModelConfig::reduced(Variant::sim, kDeskSeed)));

  TrainConfig control;
  control.model = ModelConfig::reduced(Variant::sim, kDeskSeed);
  control.model.beta = kCollapseBeta;
  control.epochs = kCollapseEpochs;
  const TrainResult control_run =
      train_logged("collapse-control", control, run.corpus, out / "collapse_control.ckpt");

  std::map<std::string, Decoder> decoders;
  std::map<std::string, fs::path> decoder_path;
  const std::size_t deepest = models.at("sim").config().num_modules();
  for (const std::string name : {"sim", "gim"}) {
    DecoderTrainConfig dc;
    dc.epochs = kDecoderEpochs;
    dc.batch_size = kDecoderBatch;
    dc.seed = kDeskSeed;
    const auto t0 = std::chrono::steady_clock::now();
    auto r = train_decoder(models.at(name), deepest, run.corpus, dc);
    std::fprintf(stderr, "[%s] decoder module %zu: mse %.5f -> %.5f (%.0fs)\n", name.c_str(),
                 deepest, r.loss_history.front(), r.loss_history.back(), seconds_since(t0));
    decoder_path[name] = out / (name + "-m" + std::to_string(deepest) + ".dec");
    save_decoder(r.decoder, decoder_path[name]);
    decoders.emplace(name, std::move(r.decoder));
  }

  ReportConfig rc;
  rc.probe_seeds = kProbeSeeds;
  rc.delta_pairs = kDeltaPairs;
  rc.seed = kDeskSeed;
  std::vector<ReportInput> inputs;
  for (const std::string name : {"sim", "gim", "random"}) {
    ReportInput in{name, &models.at(name), {}};
    if (decoders.count(name)) in.decoders[deepest] = &decoders.at(name);
    inputs.push_back(in);
  }
  const auto t_rep = std::chrono::steady_clock::now();
  const Report rep = run_report(inputs, run.corpus, out / "report", rc);
  std::fprintf(stderr, "report: %.0fs\n", seconds_since(t_rep));

  // 7. Context vowel probe against the random-init backbone.
  {
    const double sim = accuracy_of(rep, "sim", "context", ProbeTask::vowel).value_or(0.0);
    const double rnd = accuracy_of(rep, "random", "context", ProbeTask::vowel).value_or(100.0);
    report(7, sim >= kVowelMin && sim - rnd >= kVowelOverRandom,
           fmt("SIM context vowel %.2f%% (need >= %.0f), random-init %.2f%% (gap %.2f, need >= "
               "%.0f), %zu probe seeds",
               sim, kVowelMin, rnd, sim - rnd, kVowelOverRandom, kProbeSeeds));
  }
  // 8. Syllable probe above chance, and the vowel >> syllable gap is flagged.
  {
    const double syl = accuracy_of(rep, "sim", "context", ProbeTask::syllable).value_or(0.0);
    const double vow = accuracy_of(rep, "sim", "context", ProbeTask::vowel).value_or(0.0);
    const double chance = 100.0 / 9.0;
    const bool flagged =
        std::any_of(rep.notes.begin(), rep.notes.end(),
                    [](const std::string &n) { return n.rfind("sim: vowel accuracy exceeds", 0) == 0; });
    report(8, syl >= chance + kSyllableOverChance && flagged,
           fmt("SIM context syllable %.2f%% (chance %.2f, need >= %.2f); vowel-syllable gap "
               "%.2f points, flagged in report: %s",
               syl, chance, chance + kSyllableOverChance, vow - syl, flagged ? "yes" : "no"));
  }
  // 9. Posterior health and the collapse control.
  {
    const auto &rows = run.results.at("sim").rows;
    std::size_t last = 0;
    for (const auto &r : rows) last = std::max(last, r.epoch);
    bool healthy = true;
    std::string kl;
    for (const auto &r : rows)
      if (r.epoch == last && r.kl_per_dim) {
        healthy = healthy && *r.kl_per_dim > kKlLow && *r.kl_per_dim < kKlHigh;
        kl += fmt("m%s %.4f ", r.module.c_str(), *r.kl_per_dim);
      }
    const auto warnings = monitor_kl(control_run.rows);
    const bool sim_quiet = monitor_kl(rows).empty();
    report(9, healthy && !kl.empty() && !warnings.empty() && sim_quiet,
           "final KL/dim " + kl + fmt("in (%g, %g); beta=%g control: %zu collapse warnings%s",
                                      kKlLow, kKlHigh, kCollapseBeta, warnings.size(),
                                      warnings.empty() ? "" : (" (" + warnings[0] + ")").c_str()));
  }
  // 10. delta(N = D) == 0 for every pair; soft monotonicity of mean delta in N.
  {
    const Model &sim = models.at("sim");
    const auto pairs = delta_pairs(run.corpus, kDeltaPairs, rc.seed);
    const std::size_t dims = sim.config().channels;
    std::size_t zero = 0;
    for (const auto &[a, b] : pairs) {
      const auto z = encode_clips(sim, {run.corpus.clips[a].samples, run.corpus.clips[b].samples},
                                  deepest);
      const auto d = delta(decoders.at("sim"), z[0], z[1], dims);
      if (d && *d == 0.0) ++zero;
    }
    std::vector<DeltaRow> rows;
    for (const auto &r : rep.delta)
      if (r.variant == "sim" || r.variant == "gim") rows.push_back(r);
    const double mono = delta_monotone_fraction(rows);
    report(10, zero == pairs.size() && pairs.size() == kDeltaPairs && mono >= kMonotoneMin,
           fmt("delta(N=%zu) == 0 for %zu/%zu pairs; monotone adjacent-N fraction %.3f (need >= "
               "%.2f) over SIM and GIM module %zu",
               dims, zero, pairs.size(), mono, kMonotoneMin, deepest));
  }
  // 11. SIM entangles less than GIM at N = D/8 in the deepest module.
  {
    const std::size_t n = models.at("sim").config().channels / 8;
    const DeltaRow *s = delta_row(rep, "sim", deepest, n), *g = delta_row(rep, "gim", deepest, n);
    if (!s || !g) {
      report(11, false, "delta rows missing");
    } else {
      const double gap = g->delta - s->delta;
      const double se = std::sqrt(s->delta_std * s->delta_std / std::max<std::size_t>(1, s->pairs) +
                                  g->delta_std * g->delta_std / std::max<std::size_t>(1, g->pairs));
      // A gap inside two standard errors counts as noise and does not block.
      report(11, s->delta < g->delta,
             fmt("module %zu N=%zu: SIM %.2f%% vs GIM %.2f%% (GIM - SIM = %.2f, 2 s.e. = %.2f)",
                 deepest, n, s->delta, g->delta, gap, 2.0 * se),
             std::fabs(gap) >= 2.0 * se);
    }
  }
  // 12. Interpolation strips have no abrupt jumps.
  {
    const Model &sim = models.at("sim");
    const auto pairs = delta_pairs(run.corpus, kDeltaPairs, rc.seed);
    double worst = 0.0;
    for (const auto &[a, b] : pairs) {
      const auto z = encode_clips(sim, {run.corpus.clips[a].samples, run.corpus.clips[b].samples},
                                  deepest);
      std::vector<double> steps = interpolation_steps(decoders.at("sim"), z[0], z[1], kInterpSteps);
      std::vector<double> sorted = steps;
      std::sort(sorted.begin(), sorted.end());
      const double median = 0.5 * (sorted[(sorted.size() - 1) / 2] + sorted[sorted.size() / 2]);
      for (double s : steps) worst = std::max(worst, median > 0.0 ? s / median : INFINITY);
    }
    report(12, worst <= kInterpJumpFactor,
           fmt("max adjacent-alpha MAE / strip median = %.3f (need <= %.1f) over %zu strips of %zu "
               "steps, SIM module %zu",
               worst, kInterpJumpFactor, pairs.size(), kInterpSteps, deepest));
  }
  // 13. Probe-weight concentration, SIM vs GIM at modules 2-3.
  {
    bool higher = true;
    double max_acc_gap = 0.0;
    std::string detail;
    for (std::size_t m = 2; m <= deepest; ++m) {
      const double s = rep.concentration.at({"sim", m}).near_zero_fraction;
      const double g = rep.concentration.at({"gim", m}).near_zero_fraction;
      const double as = rep.concentration_accuracy.at({"sim", m});
      const double ag = rep.concentration_accuracy.at({"gim", m});
      higher = higher && s > g;
      max_acc_gap = std::max(max_acc_gap, std::fabs(as - ag));
      detail += fmt("m%zu near-zero SIM %.3f vs GIM %.3f (probe acc %.1f / %.1f); ", m, s, g, as, ag);
    }
    report(13, higher, detail, max_acc_gap >= kConcentrationAccuracyBand);
  }

  // 14. Checkpoint, WAV and run reproducibility.
  {
    const auto first = read_file(run.ckpt.at("sim"));
    const fs::path again = out / "sim.resaved.ckpt";
    save_checkpoint(load_checkpoint(run.ckpt.at("sim")), again);
    const bool ckpt_same = first == read_file(again);

    double wav_err = 0.0;
    for (const Clip &c : run.corpus.clips) {
      const auto back = decode_wav(encode_wav(c.samples.data()));
      for (std::size_t i = 0; i < back.size(); ++i)
        wav_err = std::max(wav_err, std::fabs(static_cast<double>(back[i]) - c.samples[i]));
    }

    Corpus small = generate_corpus(24, 5);
    split_corpus(small, 0.8, 5);
    TrainConfig tiny;
    tiny.model = ModelConfig::reduced(Variant::sim, 5);
    tiny.epochs = 2;
    const TrainResult r1 = train(tiny, small, out / "repro_a.ckpt");
    const TrainResult r2 = train(tiny, small, out / "repro_b.ckpt");
    const bool runlog_same = read_file(r1.runlog) == read_file(r2.runlog) &&
                             read_file(r1.checkpoint) == read_file(r2.checkpoint);
    report(14, ckpt_same && wav_err <= kWavLsb && runlog_same,
           fmt("save-load-save identical: %s (%zu bytes); WAV round trip max error %.2e (1 LSB "
               "%.2e); fixed-seed rerun RunLog and checkpoint identical: %s",
               ckpt_same ? "yes" : "no", first.size(), wav_err, kWavLsb,
               runlog_same ? "yes" : "no"));
  }

  // 15. Inspection service.
  criterion_service(run.ckpt.at("sim"), decoder_path.at("sim"), data, run.corpus);

  std::size_t passed = 0, blocking = 0, red = 0;
  for (const Line &l : g_lines) {
    const bool listed = std::find(known_red.begin(), known_red.end(), l.id) != known_red.end();
    passed += l.pass;
    if (!l.pass && l.blocking) ++(listed ? red : blocking);
    if (l.pass && listed) std::printf("note: criterion %d is listed as known red but passed\n", l.id);
  }
  std::printf("summary: %zu/%zu PASS, %zu blocking failures, %zu known red, %.0fs total\n",
              passed, g_lines.size(), blocking, red, seconds_since(t_start));
  return blocking == 0 ? 0 : 1;
}
