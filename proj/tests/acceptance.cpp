/*
 * Copyright 2026 The mmcae Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails.
//
//   acceptance <config.json> <work-dir>

#include "cli.hpp"
#include "contrastive_oracle.hpp"
#include "mmcae/evaluation.hpp"
#include "mmcae/nn/gradcheck.hpp"
#include "mmcae/runtime.hpp"
#include "run_config.hpp"
#include "shapes_oracle.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <unordered_map>

namespace fs = std::filesystem;
using namespace mmcae;
using mmcae::cli::json;
using mmcae::cli::RunConfig;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void log(const std::string& s) { std::cerr << "[acceptance] " << s << std::endl; }

// --- 1 ---------------------------------------------------------------------------

Verdict shapes() {
  const MultiModalAE model(paper_architecture());
  const auto check = testing::check_table_shapes(model);
  Verdict v;
  v.pass = check.mismatches.empty() && check.cells == 4 * 16 + 3;
  v.detail = fmt("%zu size cells compared, %zu mismatches", check.cells, check.mismatches.size());
  for (const auto& m : check.mismatches) v.detail += "; " + m;
  return v;
}

// --- 2 ---------------------------------------------------------------------------

Batch<double> random_batch(Index n, Index c, Index l, Rng& rng) {
  Batch<double> b(n, c, l);
  for (Index i = 0; i < b.data.size(); ++i) b.data.data()[i] = rng.uniform(-1.0, 1.0);
  return b;
}

MatrixXr random_matrix(Rng& rng, Index r, Index c) {
  return MatrixXr::NullaryExpr(r, c, [&] { return rng.normal(); });
}

// Central differences of f at x against g (analytic), max relative error.
double latent_gradient_error(MatrixXr x, const MatrixXr& g, const std::function<double(const MatrixXr&)>& f) {
  const double h = 1e-6;
  const double scale = g.cwiseAbs().maxCoeff();
  double worst = 0.0;
  for (Index i = 0; i < x.size(); ++i) {
    const double saved = x.data()[i];
    x.data()[i] = saved + h;
    const double up = f(x);
    x.data()[i] = saved - h;
    const double down = f(x);
    x.data()[i] = saved;
    worst = std::max(worst, nn::relative_error(g.data()[i], (up - down) / (2 * h), scale));
  }
  return worst;
}

Verdict gradients() {
  const double tol = 1e-3;
  double worst = 0.0;
  std::vector<std::string> failures;
  auto record = [&](const std::string& what, double err) {
    worst = std::max(worst, err);
    if (!(err < tol)) failures.push_back(what + fmt(" (%.2e)", err));
  };

  // Every layer kind, each on a small instance with non-zero biases.
  struct Case {
    const char* name;
    Shape in;
    std::vector<nn::LayerSpec> layers;
  };
  using nn::LayerSpec;
  const std::vector<Case> cases = {
      {"conv1d", {2, 16}, {LayerSpec::conv1d(3, 2, 2, 3)}},
      {"deconv1d", {2, 6}, {LayerSpec::deconv1d(4, 2, 2, 3)}},
      {"dense", {8, 1}, {LayerSpec::dense(8, 4)}},
      {"relu", {8, 1}, {LayerSpec::dense(8, 8), LayerSpec::relu()}},
      {"maxpool1d", {2, 10}, {LayerSpec::conv1d(1, 1, 2, 2), LayerSpec::maxpool1d(2)}},
      {"unpool1d", {2, 5}, {LayerSpec::conv1d(1, 1, 2, 2), LayerSpec::unpool1d(2)}},
      {"flatten/reshape",
       {2, 4},
       {LayerSpec::flatten(), LayerSpec::dense(8, 8), LayerSpec::reshape(2, 4), LayerSpec::conv1d(2, 1, 2, 1)}},
  };
  std::set<nn::LayerKind> covered;
  for (const auto& c : cases) {
    nn::ParameterStore<double> store;
    nn::Stack stack("s", c.in, c.layers, store);
    Rng rng(91);
    stack.initialize(store, rng);
    for (auto& b : store)
      if (b.name.ends_with(".bias"))
        for (Index i = 0; i < b.value.size(); ++i) b.value.data()[i] = rng.uniform(-0.2, 0.2);
    store.touch();
    const auto x = random_batch(4, c.in.channels, c.in.length, rng);
    const auto rep = nn::check_gradients(stack, store, x, tol, 5);
    for (const auto& b : rep.blocks) record(std::string(c.name) + " " + b.name, b.max_relative_error);
    record(std::string(c.name) + " input", nn::check_input_gradient(stack, store, x, 5));
    for (const auto& l : c.layers) covered.insert(l.kind);
  }
  if (covered.size() != 8) failures.push_back("not every layer kind exercised");

  // Contrastive and correlation terms with respect to the latents.
  {
    Rng rng(92);
    const MatrixXr ha = random_matrix(rng, 4, 4), hv = random_matrix(rng, 4, 4);
    const std::vector<int> c = {0, 1, 0, 2};
    for (std::optional<double> margin : {std::optional<double>{}, std::optional<double>{3.0}}) {
      MatrixXr gj = MatrixXr::Zero(4, 4), ga = gj, gv = gj;
      joint_contrastive(ha, c, margin, 1.0, &gj);
      single_contrastive(ha, hv, c, margin, 1.0, &ga, &gv);
      record("j2", latent_gradient_error(ha, gj, [&](const MatrixXr& x) { return joint_contrastive(x, c, margin); }));
      record("j3 a", latent_gradient_error(ha, ga, [&](const MatrixXr& x) { return single_contrastive(x, hv, c, margin); }));
      record("j3 v", latent_gradient_error(hv, gv, [&](const MatrixXr& x) { return single_contrastive(ha, x, c, margin); }));
    }
    MatrixXr ga = MatrixXr::Zero(4, 4), gv = ga;
    correlation_term(ha, hv, 1.0, &ga, &gv);
    record("corr a", latent_gradient_error(ha, ga, [&](const MatrixXr& x) { return correlation_term(x, hv); }));
    record("corr v", latent_gradient_error(hv, gv, [&](const MatrixXr& x) { return correlation_term(ha, x); }));
  }

  // Full objective, every variant, through the mini network (batch 4).
  for (Variant variant : kAllVariants)
    for (bool margin : {false, true}) {
      Rng rng(93);
      auto model = MultiModalAE::init(mini_architecture(), 94);
      for (auto& b : model.params())
        if (b.name.ends_with(".bias"))
          for (Index i = 0; i < b.value.size(); ++i) b.value(i) = rng.uniform(-0.1, 0.1);
      model.params().touch();
      SignalBatch a(4, 1, 64), v(4, 1, 64);
      for (Index i = 0; i < a.data.size(); ++i) a.data.data()[i] = rng.normal();
      for (Index i = 0; i < v.data.size(); ++i) v.data.data()[i] = rng.normal();
      const std::vector<int> c = {0, 1, 0, 2};
      LossConfig cfg;
      cfg.variant = variant;
      cfg.lambda1 = 0.3;
      cfg.lambda2 = 0.2;
      cfg.alpha1 = 0.4;
      cfg.delta1 = 0.7;
      cfg.delta2 = 1.3;
      cfg.corr_weight = 0.5;
      if (margin) cfg.margin = 3.0;
      auto loss = [&] {
        Rng noise(95);
        return evaluate_objective(model, a, v, c, cfg, &noise, false).total / 4.0;
      };
      auto analytic = [&] {
        model.params().zero_grad();
        Rng noise(95);
        evaluate_objective(model, a, v, c, cfg, &noise, true);
      };
      const auto rep = nn::check_gradients<double>(model.params(), loss, analytic, tol);
      for (const auto& b : rep.blocks)
        record(std::string(cli_name(variant)) + (margin ? "+margin " : " ") + b.name, b.max_relative_error);
    }

  Verdict v;
  v.pass = failures.empty();
  v.detail = fmt("max relative error %.2e over 7 layer cases, 3 latent terms, 4 variants x 2 (limit 1e-3)", worst);
  for (const auto& f : failures) v.detail += "; " + f;
  return v;
}

// --- 3 ---------------------------------------------------------------------------

Verdict contrastive_oracle() {
  Rng rng(31);
  double worst = 0.0;
  int batches = 0;
  for (int t = 0; t < 200; ++t, ++batches) {
    const Index n = t == 0 ? 1 : t == 1 ? 64 : 1 + static_cast<Index>(rng.index(64));
    const Index d = 1 + static_cast<Index>(rng.index(8));
    const MatrixXr ha = random_matrix(rng, d, n), hv = random_matrix(rng, d, n);
    std::vector<int> c(static_cast<std::size_t>(n));
    const int classes = 1 + static_cast<int>(rng.index(4));
    for (auto& x : c) x = static_cast<int>(rng.index(static_cast<std::size_t>(classes)));
    const std::optional<double> margin = t % 2 ? std::optional<double>{1.5} : std::nullopt;
    const auto rel = [](double got, double want) { return std::abs(got - want) / std::max(1.0, std::abs(want)); };
    worst = std::max(worst, rel(joint_contrastive(ha, c, margin), testing::naive_j2(ha, c, margin)));
    worst = std::max(worst, rel(single_contrastive(ha, hv, c, margin), testing::naive_j3(ha, hv, c, margin)));
  }
  // The m = n, i = j exclusion: one sample whose two latents coincide.
  MatrixXr one = MatrixXr::Constant(3, 1, 0.5);
  const double self = single_contrastive(one, one, std::vector<int>{0});
  Verdict v;
  v.pass = worst <= 1e-9 && std::abs(self - 2.0 * smoothed_distance(0.0)) <= 1e-15;
  v.detail = fmt("%d batches (N <= 64), max relative deviation %.2e (limit 1e-9); single-sample self term %.1e", batches,
                 worst, self);
  return v;
}

// --- 4 to 8 -------------------------------------------------------------------------

const CellSummary& cell(const VariantReport& r, ExperimentId e, InputMode m) {
  return r.cells[static_cast<std::size_t>(e)][static_cast<std::size_t>(m)];
}

double acc(const VariantReport& r, ExperimentId e, InputMode m) { return cell(r, e, m).mean.accuracy; }

Verdict missing_modality(const EvaluationReport& rep) {
  const auto& p = rep.at(Variant::Proposed);
  const double j = acc(p, ExperimentId::TrainOnJoint, InputMode::Joint);
  const double a = acc(p, ExperimentId::TrainOnJoint, InputMode::SingleA);
  const double v = acc(p, ExperimentId::TrainOnJoint, InputMode::SingleV);
  Verdict out;
  out.pass = !p.folds.empty() && j >= 0.90 && j - a <= 0.20 && j - v <= 0.20;
  out.detail = fmt("Proposed exp1: joint %.2f%%, h(a) %.2f%% (gap %.2f pp), h(v) %.2f%% (gap %.2f pp); need joint >= "
                   "90%%, gaps <= 20 pp",
                   100 * j, 100 * a, 100 * (j - a), 100 * v, 100 * (j - v));
  return out;
}

double single_modal_mean(const VariantReport& r) {
  return 0.5 * (acc(r, ExperimentId::TrainOnJoint, InputMode::SingleA) +
                acc(r, ExperimentId::TrainOnJoint, InputMode::SingleV));
}

Verdict baseline_ordering(const EvaluationReport& rep) {
  const double p = single_modal_mean(rep.at(Variant::Proposed));
  const double c = single_modal_mean(rep.at(Variant::CorrNetStyle));
  const double n = single_modal_mean(rep.at(Variant::ContrastiveNoMissing));
  Verdict v;
  v.pass = p > c && c > n && p - n >= 0.15;
  v.detail = fmt("mean single-modal exp1 accuracy: Proposed %.2f%% > CorrNetStyle %.2f%% > ContrastiveNoMissing %.2f%%; "
                 "Proposed - NoMissing = %.2f pp (need >= 15)",
                 100 * p, 100 * c, 100 * n, 100 * (p - n));
  return v;
}

Verdict probe_transfer(const EvaluationReport& rep) {
  const auto drop = [&](Variant var) {
    const auto& r = rep.at(var);
    return acc(r, ExperimentId::TrainOnA, InputMode::SingleA) - acc(r, ExperimentId::TrainOnA, InputMode::SingleV);
  };
  const double p = drop(Variant::Proposed), van = drop(Variant::VanillaMissing);
  Verdict v;
  v.pass = p <= 0.25 && p <= van;
  v.detail = fmt("probe trained on h(a), h(a) -> h(v) drop: Proposed %.2f pp (need <= 25 and <= VanillaMissing), "
                 "VanillaMissing %.2f pp",
                 100 * p, 100 * van);
  return v;
}

Verdict band_claim(const RunConfig& rc, const Dataset& ds, const EvaluationReport& rep, const fs::path& ckpt_dir,
                   BandReport* out) {
  const fs::path ckpt = ckpt_dir / "proposed-fold0.ckpt";
  Verdict v;
  if (!fs::exists(ckpt) || rep.folds.empty()) {
    v.pass = false;
    v.detail = "no trained Proposed model for fold 0";
    return v;
  }
  const MultiModalAE model = load_checkpoint(ckpt);
  std::unordered_map<std::string, const MultiModalSample*> by_id;
  for (const auto& s : ds.samples) by_id[s.id] = &s;
  std::vector<MultiModalSample> test;
  for (const auto& id : rep.folds[0].test) test.push_back(*by_id.at(id));
  const BandReport b = reconstruction_band_report(model, test, rc.cutoff_hz(), rc.band_sample_rate());
  *out = b;
  const auto& cross_v = b.at(InputMode::SingleA, true);   // vibration rebuilt from acoustic
  const auto& cross_a = b.at(InputMode::SingleV, false);  // acoustic rebuilt from vibration
  const auto& joint_a = b.at(InputMode::Joint, false);
  const auto& joint_v = b.at(InputMode::Joint, true);
  v.pass = cross_v.low_relative < cross_v.high_relative && cross_a.low_relative < cross_a.high_relative &&
           joint_v.total_relative < cross_v.total_relative && joint_a.total_relative < cross_a.total_relative;
  v.detail = fmt("Proposed fold-0 model, %ld test samples, cutoff %.0f Hz: cross V low/high rel %.3f/%.3f, cross A "
                 "low/high rel %.3f/%.3f; total rel joint vs cross: V %.3f vs %.3f, A %.3f vs %.3f",
                 static_cast<long>(test.size()), rc.cutoff_hz(), cross_v.low_relative, cross_v.high_relative,
                 cross_a.low_relative, cross_a.high_relative, joint_v.total_relative, cross_v.total_relative,
                 joint_a.total_relative, cross_a.total_relative);
  return v;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "mmcae");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  if (code != 0) log("mmcae " + args[1] + " exited " + std::to_string(code) + ": " + err.str());
  return code;
}

Verdict protocol(const Dataset& ds, const EvaluationReport& rep, const fs::path& config, const fs::path& work) {
  std::vector<std::string> problems;
  const auto counts = class_counts(ds);
  const int k = static_cast<int>(rep.folds.size());

  // Holdout: 10 per class.
  std::unordered_map<std::string, int> label_of;
  for (const auto& s : ds.samples) label_of[s.id] = s.label;
  std::vector<Index> held(counts.size(), 0);
  for (const auto& id : rep.validation_ids) ++held[static_cast<std::size_t>(label_of.at(id))];
  for (Index h : held)
    if (h != 10) problems.push_back("holdout is not 10 per class");
  const std::size_t pool = ds.samples.size() - rep.validation_ids.size();
  if (pool != 665) problems.push_back(fmt("pool has %zu samples", pool));
  if (k != 7) problems.push_back(fmt("%d folds", k));

  // Fold sizes and id-set disjointness.
  const std::set<std::string> validation(rep.validation_ids.begin(), rep.validation_ids.end());
  std::set<std::string> tested;
  for (const auto& f : rep.folds) {
    if (f.test.size() != 95) problems.push_back(fmt("fold test size %zu", f.test.size()));
    if (f.train.size() + f.test.size() != pool) problems.push_back("fold does not partition the pool");
    const std::set<std::string> train(f.train.begin(), f.train.end());
    for (const auto& id : f.test) {
      if (train.count(id) || validation.count(id)) problems.push_back("leak: " + id);
      if (!tested.insert(id).second) problems.push_back("tested twice: " + id);
    }
    for (const auto& id : f.train)
      if (validation.count(id)) problems.push_back("validation id in training: " + id);
  }
  if (tested.size() != pool) problems.push_back("folds do not cover the pool");
  try {
    check_no_leakage(rep);
  } catch (const std::exception& e) {
    problems.push_back(e.what());
  }

  // Weighted recall equals accuracy in every fold and every averaged cell.
  double recall_gap = 0.0;
  std::size_t cells = 0;
  for (const auto& v : rep.variants) {
    for (const auto& f : v.folds)
      for (const auto& e : f.experiments)
        for (const auto& m : e.by_mode) recall_gap = std::max(recall_gap, std::abs(m.recall - m.accuracy));
    for (const auto& row : v.cells)
      for (const auto& c : row) {
        recall_gap = std::max(recall_gap, std::abs(c.mean.recall - c.mean.accuracy));
        if (!c.failed) ++cells;
      }
  }
  if (recall_gap > 1e-12) problems.push_back(fmt("weighted recall differs from accuracy by %.1e", recall_gap));
  if (cells != 12 * rep.variants.size()) problems.push_back("report grid incomplete");

  // Byte identity through the command line: two runs with one job and one
  // with four, each with a single training epoch.
  const auto t0 = std::chrono::steady_clock::now();
  const std::string data = (work / "determinism" / "dataset.mmds").string();
  bool identical = false;
  if (cli({"--config", config.string(), "--out", (work / "determinism").string(), "gen-data"}) == 0) {
    const std::vector<std::string> common = {"--config", config.string(), "cross-validate", "--data", data,
                                             "--epochs", "1"};
    std::vector<std::string> names;
    bool ok = true;
    for (const char* jobs : {"1", "1", "4"}) {
      const std::string name = "run" + std::to_string(names.size()) + "-jobs" + jobs;
      auto args = common;
      args.insert(args.end(), {"--jobs", jobs, "--out", (work / "determinism" / name).string()});
      ok = ok && cli(args) == 0;
      names.push_back(name);
    }
    if (ok) {
      const auto first = slurp(work / "determinism" / names[0] / "cv_report.json");
      identical = !first.empty();
      for (const auto& n : names) identical = identical && slurp(work / "determinism" / n / "cv_report.json") == first;
    }
  }
  if (!identical) problems.push_back("reports differ across runs or job counts");

  Verdict v;
  v.pass = problems.empty();
  v.detail = fmt("holdout 10/class, %d folds x 95 on a %zu pool, disjoint id sets, max |recall - accuracy| %.1e, "
                 "report bytes %s across 2 runs and jobs 1 vs 4 (%.0f s)",
                 k, pool, recall_gap, identical ? "identical" : "DIFFER", seconds_since(t0));
  for (std::size_t i = 0; i < problems.size() && i < 5; ++i) v.detail += "; " + problems[i];
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  if (argc != 3) {
    std::cerr << "usage: acceptance <config.json> <work-dir>\n";
    return 2;
  }
  const fs::path config = argv[1];
  const fs::path work = argv[2];
  fs::create_directories(work);

  std::vector<std::pair<int, Verdict>> verdicts;
  auto run = [&](int id, auto&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    log(fmt("criterion %d evaluated in %.1f s", id, seconds_since(t0)));
    verdicts.emplace_back(id, v);
  };

  run(1, shapes);
  run(2, gradients);
  run(3, contrastive_oracle);

  try {
    const RunConfig rc = RunConfig::load(config, json::object());
    const Dataset ds = generate_synthetic(rc.synthetic());
    CrossValidationConfig cv = rc.cross_validation();
    cv.checkpoint_dir = work / "models";
    const auto variants = rc.variants();
    log("cross-validating " + std::to_string(variants.size()) + " variants on " + std::to_string(ds.size()) +
        " samples");
    const auto t0 = std::chrono::steady_clock::now();
    EvaluationReport rep = cross_validate(ds, variants, cv);
    log(fmt("cross-validation took %.0f s", seconds_since(t0)));
    rep.config_echo = json{{"run", rc.echo()}, {"cross_validation", json::parse(rep.config_echo)}}.dump();
    {
      std::ofstream(work / "cv_report.json") << report_to_json(rep);
      std::ofstream(work / "cv_report.txt") << report_to_text(rep);
    }
    std::cout << report_to_text(rep) << "\n";
    for (const auto& v : rep.variants)
      for (const auto& f : v.folds)
        if (!f.ok) log("failed job: " + std::string(cli_name(v.variant)) + " fold " + std::to_string(f.fold) + ": " + f.error);

    run(4, [&] { return missing_modality(rep); });
    run(5, [&] { return baseline_ordering(rep); });
    run(6, [&] { return probe_transfer(rep); });
    BandReport band;
    run(7, [&] { return band_claim(rc, ds, rep, *cv.checkpoint_dir, &band); });
    if (band.samples > 0) {
      std::ofstream(work / "band_report.txt") << band.to_text();
      std::cout << band.to_text() << "\n";
    }
    run(8, [&] { return protocol(ds, rep, config, work); });
  } catch (const std::exception& e) {
    for (int id = 4; id <= 8; ++id)
      if (std::none_of(verdicts.begin(), verdicts.end(), [&](const auto& p) { return p.first == id; }))
        verdicts.emplace_back(id, Verdict{false, std::string("exception: ") + e.what()});
  }

  int failed = 0;
  for (const auto& [id, v] : verdicts) {
    std::cout << "criterion " << id << ": " << (v.pass ? "PASS" : "FAIL") << "  " << v.detail << "\n";
    failed += !v.pass;
  }
  std::cout << (failed ? std::to_string(failed) + " of 8 criteria failed" : std::string("all 8 criteria passed"))
            << std::endl;
  return failed ? 1 : 0;
}
