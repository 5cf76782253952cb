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

#include "cli.hpp"

#include "mmcae/code_hash.hpp"
#include "run_config.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <set>
#include <sstream>

namespace mmcae::cli {

namespace {

// A flag that overrides one key of the run configuration.
struct Override {
  CLI::Option* option = nullptr;
  std::string pointer;
  std::string value;
};

class Overrides {
 public:
  void add(CLI::App* app, const std::string& flag, const std::string& pointer, const std::string& help) {
    auto o = std::make_unique<Override>();
    o->pointer = pointer;
    o->option = app->add_option(flag, o->value, help + " [" + pointer.substr(1) + "]");
    items_.push_back(std::move(o));
  }

  json collect() const {
    const json defaults = default_run_config();
    json overlay = json::object();
    for (const auto& o : items_)
      if (o->option->count() > 0)
        overlay[json::json_pointer(o->pointer)] = parse_flag_value(defaults, o->pointer, o->value);
    return overlay;
  }

 private:
  std::vector<std::unique_ptr<Override>> items_;
};

json provenance(const RunConfig& rc) { return json{{"code_hash", kCodeHash}, {"config", rc.echo()}}; }

std::filesystem::path output_path(const RunConfig& rc, const std::string& name) {
  const auto dir = rc.out_dir();
  std::filesystem::create_directories(dir);
  return dir / name;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw Error("failed writing " + path.string());
}

MultiModalAE load_model_for(const std::filesystem::path& path, Index signal_length) {
  MultiModalAE model = load_checkpoint(path);
  if (signal_length > 0 && model.signal_length() != signal_length)
    throw ShapeError("model expects " + std::to_string(model.signal_length()) + "-sample signals, the data has " +
                     std::to_string(signal_length));
  return model;
}

// Text files hold numbers separated by whitespace or commas; .f32 files are
// raw float32; anything else is raw float64.
VectorXr read_signal_file(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".txt" || ext == ".csv" || ext == ".tsv") {
    std::ifstream is(path);
    if (!is) throw Error("cannot open signal file " + path.string());
    std::vector<double> values;
    std::string token;
    while (is >> token) {
      std::stringstream parts(token);
      std::string item;
      while (std::getline(parts, item, ','))
        if (!item.empty()) {
          try {
            std::size_t used = 0;
            values.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
          } catch (const std::exception&) {
            throw Error(path.string() + ": '" + item + "' is not a number");
          }
        }
    }
    return Eigen::Map<const VectorXr>(values.data(), static_cast<Index>(values.size()));
  }
  if (!std::filesystem::exists(path)) throw Error("signal file " + path.string() + " does not exist");
  return read_signal(path, ext == ".f32" ? Precision::F32 : Precision::F64);
}

void print_counts(std::ostream& out, const Dataset& ds) {
  const auto counts = class_counts(ds);
  out << std::left << std::setw(14) << "Class" << "Samples\n";
  Index total = 0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    out << std::left << std::setw(14) << ds.class_names[c] << counts[c] << "\n";
    total += counts[c];
  }
  out << std::left << std::setw(14) << "Total" << total << "\n";
}

// --- commands -------------------------------------------------------------------

int cmd_show_config(const RunConfig& rc, std::ostream& out) {
  out << rc.doc().dump(2) << "\n";
  return kExitOk;
}

int cmd_gen_data(const RunConfig& rc, const std::string& name, std::ostream& out) {
  const SyntheticConfig sc = rc.synthetic();
  Dataset ds = generate_synthetic(sc);
  ds.config_echo = json{{"code_hash", kCodeHash}, {"config", rc.echo()}, {"generator", json::parse(to_json(sc))}}.dump();
  const auto path = output_path(rc, name);
  write_dataset(ds, path, rc.precision());
  print_counts(out, ds);
  out << "wrote " << path.string() << "\n";
  return kExitOk;
}

int cmd_gen_recordings(const RunConfig& rc, const std::string& name, std::ostream& out) {
  RecordingConfig base = rc.recording();
  std::vector<RawRecording> recs;
  for (int c = 0; c < rc.recording_classes(); ++c)
    for (int i = 0; i < rc.recordings_per_class(); ++i) {
      RecordingConfig cfg = base;
      cfg.label = c;
      cfg.seed = derive_seed(base.signal.seed, {0x4ec, static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(i)});
      recs.push_back(generate_recording(cfg));
    }
  const auto dir = output_path(rc, name);
  write_recording_directory(recs, dir, rc.precision());
  write_text(dir / "provenance.json", provenance(rc).dump(1) + "\n");
  out << "wrote " << recs.size() << " recordings to " << dir.string() << "\n";
  return kExitOk;
}

int cmd_ingest(const RunConfig& rc, const std::filesystem::path& input, const std::string& name, std::ostream& out) {
  if (!std::filesystem::is_directory(input)) throw Error("recording directory " + input.string() + " does not exist");
  const auto recs = read_recording_directory(input);
  if (recs.empty()) throw Error("no recordings found in " + input.string());
  const SegmentConfig seg = rc.segment();
  std::vector<MultiModalSample> windows;
  json per_rec = json::array();
  int max_label = 0;
  std::size_t id_width = 12;
  for (const auto& rec : recs) id_width = std::max(id_width, rec.id.size() + 2);
  const int idw = static_cast<int>(id_width);
  out << std::left << std::setw(idw) << "recording" << std::setw(7) << "label" << std::setw(7) << "marks"
      << "windows\n";
  for (const auto& rec : recs) {
    const auto marks = detect_revolution_marks(rec.trigger, seg.hysteresis);
    auto w = segment_recording(rec, marks, seg);
    out << std::left << std::setw(idw) << rec.id << std::setw(7) << rec.label << std::setw(7) << marks.size()
        << w.size() << "\n";
    per_rec.push_back(json{{"id", rec.id}, {"label", rec.label}, {"marks", marks.size()}, {"windows", w.size()}});
    max_label = std::max(max_label, rec.label);
    windows.insert(windows.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
  }
  OutlierReport report;
  auto kept = remove_outliers(windows, rc.outlier_z(), &report);
  standardize(kept);
  out << "outliers dropped: " << report.dropped.size() << " (robust z > " << report.threshold << "), kept "
      << report.kept << "\n";
  json dropped = json::array();
  for (const auto& d : report.dropped) {
    out << "  dropped " << d.id << " (class " << d.label << ", z = " << d.score << ")\n";
    dropped.push_back(json{{"id", d.id}, {"label", d.label}, {"score", d.score}});
  }

  Dataset ds;
  ds.samples = std::move(kept);
  ds.signal_length = seg.signal_length;
  ds.provenance = Provenance::Segmented;
  for (int c = 0; c <= max_label; ++c) ds.class_names.push_back("class" + std::to_string(c));
  json rep = provenance(rc);
  rep["recordings"] = per_rec;
  rep["outlier_threshold"] = std::isinf(report.threshold) ? json("inf") : json(report.threshold);
  rep["dropped"] = dropped;
  rep["kept"] = report.kept;
  ds.config_echo = json{{"code_hash", kCodeHash}, {"config", rc.echo()}, {"source", input.string()}}.dump();
  const auto path = output_path(rc, name);
  write_dataset(ds, path, rc.precision());
  write_text(output_path(rc, path.stem().string() + ".ingest.json"), rep.dump(1) + "\n");
  print_counts(out, ds);
  out << "wrote " << path.string() << "\n";
  return kExitOk;
}

int cmd_train(const RunConfig& rc, const std::filesystem::path& data, const std::string& prefix, std::ostream& out) {
  const Dataset ds = read_dataset(data);
  const Architecture arch = architecture_by_name(rc.architecture());
  if (arch.signal_length != ds.signal_length)
    throw ShapeError("architecture '" + arch.name + "' expects " + std::to_string(arch.signal_length) +
                     "-sample signals, the dataset has " + std::to_string(ds.signal_length));
  const auto cv = rc.cross_validation();
  const HoldoutSplit split = split_holdout(ds, cv.holdout_per_class, rc.seed());
  const auto pool = subset(ds, split.pool).samples;
  const auto validation = subset(ds, split.validation).samples;

  MultiModalAE model = MultiModalAE::init(arch, rc.init_seed());
  const TrainHistory hist = train_autoencoder(model, pool, validation, rc.train());

  const ProbeSet set = rc.probe_set();
  LinearClassifier clf;
  if (set == ProbeSet::Union) {
    clf = train_classifier_union(encode(model, pool, InputMode::SingleA), encode(model, pool, InputMode::SingleV),
                                 ds.num_classes(), rc.probe());
  } else {
    const InputMode mode = set == ProbeSet::Joint ? InputMode::Joint
                           : set == ProbeSet::SingleA ? InputMode::SingleA
                                                      : InputMode::SingleV;
    const auto reps = encode(model, pool, mode);
    clf = train_classifier(reps.values, reps.labels, ds.num_classes(), rc.probe(), set);
  }

  json meta = provenance(rc);
  meta["class_names"] = ds.class_names;
  meta["signal_length"] = ds.signal_length;
  meta["architecture"] = describe(arch);
  meta["best_epoch"] = hist.best_epoch;
  meta["epochs_run"] = hist.epochs.size() - 1;
  meta["best_val_metric"] = hist.best_metric;
  meta["lambda1"] = hist.loss.lambda1 ? json(*hist.loss.lambda1) : json(nullptr);
  meta["lambda2"] = hist.loss.lambda2 ? json(*hist.loss.lambda2) : json(nullptr);
  meta["alpha1"] = hist.loss.alpha1 ? json(*hist.loss.alpha1) : json(nullptr);
  meta["parameter_hash"] = model.parameter_hash();
  meta["validation_ids"] = json::array();
  for (const auto& s : validation) meta["validation_ids"].push_back(s.id);

  save_checkpoint(model, output_path(rc, prefix + ".ckpt"));
  write_text(output_path(rc, prefix + ".json"), meta.dump(1) + "\n");
  write_text(output_path(rc, prefix + ".history.tsv"),
             "# mmcae code " + std::string(kCodeHash) + " config " + rc.echo_text() + "\n" + hist.to_table('\t'));
  json clf_echo = provenance(rc);
  clf_echo["class_names"] = ds.class_names;
  save_classifier(clf, output_path(rc, prefix + ".classifier.json"), clf_echo.dump());

  out << "variant " << to_string(rc.train().loss.variant) << ": " << hist.epochs.size() - 1 << " epochs, best epoch "
      << hist.best_epoch << " (" << to_string(rc.train().validation_metric) << " " << hist.best_metric << ")\n";
  out << "probe on " << to_string(set) << ": " << clf.iterations << " iterations, training loss " << clf.final_loss
      << "\n";
  out << "wrote " << output_path(rc, prefix + ".ckpt").string() << "\n";
  return kExitOk;
}

int cmd_cross_validate(const RunConfig& rc, const std::filesystem::path& data, const std::string& prefix,
                       bool save_models, std::ostream& out, std::ostream& err) {
  const Dataset ds = read_dataset(data);
  CrossValidationConfig cv = rc.cross_validation();
  if (save_models) cv.checkpoint_dir = output_path(rc, prefix + ".models");
  const auto variants = rc.variants();
  EvaluationReport report = cross_validate(ds, variants, cv);
  report.config_echo = json{{"run", rc.echo()}, {"cross_validation", json::parse(report.config_echo)}}.dump();
  check_no_leakage(report);

  const std::string text = report_to_text(report);
  write_text(output_path(rc, prefix + ".json"), report_to_json(report));
  write_text(output_path(rc, prefix + ".txt"), text);
  out << text;
  out << "wrote " << output_path(rc, prefix + ".json").string() << "\n";
  if (!report.any_failure()) return kExitOk;
  for (const auto& v : report.variants) {
    for (const auto& f : v.folds)
      if (!f.ok) err << "failed: " << cli_name(v.variant) << " fold " << f.fold << ": " << f.error << "\n";
    for (ExperimentId e : kAllExperiments)
      for (InputMode m : kAllModes)
        if (v.cells[static_cast<std::size_t>(e)][static_cast<std::size_t>(m)].failed)
          err << "failed cell: " << cli_name(v.variant) << " " << to_string(e) << " " << to_string(m) << "\n";
  }
  return kExitPartial;
}

int cmd_predict(const RunConfig& rc, const std::filesystem::path& model_path, const std::filesystem::path& clf_path,
                const std::string& acoustic, const std::string& vibration, const std::string& mode_text,
                const std::string& json_out, std::ostream& out) {
  const InputMode mode = parse_input_mode(mode_text);
  const bool need_a = mode != InputMode::SingleV;
  const bool need_v = mode != InputMode::SingleA;
  if (mode == InputMode::Joint && (acoustic.empty() || vibration.empty()))
    throw Error("joint mode needs both --acoustic and --vibration; request a single modality with --mode a or --mode v");
  if (need_a && acoustic.empty()) throw Error("--mode a needs --acoustic");
  if (need_v && vibration.empty()) throw Error("--mode v needs --vibration");

  const MultiModalAE model = load_checkpoint(model_path);
  const LinearClassifier clf = load_classifier(clf_path);
  MultiModalSample s;
  s.id = "input";
  if (need_a) s.acoustic = read_signal_file(acoustic);
  if (need_v) s.vibration = read_signal_file(vibration);
  for (const auto* x : {&s.acoustic, &s.vibration})
    if (x->size() != 0 && x->size() != model.signal_length())
      throw ShapeError("signal has " + std::to_string(x->size()) + " samples, the model expects " +
                       std::to_string(model.signal_length()));

  std::vector<std::string> names;
  try {
    std::ifstream is(clf_path);
    const json j = json::parse(is);
    if (j.contains("config") && j["config"].contains("class_names"))
      names = j["config"]["class_names"].get<std::vector<std::string>>();
  } catch (const json::exception&) {
  }

  const auto reps = encode(model, std::span(&s, 1), mode);
  const MatrixXr p = clf.probabilities(reps.values);
  const int label = clf.predict(reps.values).front();
  out << "mode: " << to_string(mode) << "\n";
  out << "predicted: " << label;
  if (static_cast<std::size_t>(label) < names.size()) out << " (" << names[static_cast<std::size_t>(label)] << ")";
  out << "\nprobabilities:";
  out << std::setprecision(6);
  for (Index c = 0; c < p.cols(); ++c) out << " " << p(0, c);
  out << "\n";
  if (!json_out.empty()) {
    json j = provenance(rc);
    j["mode"] = to_string(mode);
    j["predicted"] = label;
    j["probabilities"] = std::vector<double>(p.data(), p.data() + p.size());
    write_text(output_path(rc, json_out), j.dump(1) + "\n");
  }
  return kExitOk;
}

int cmd_export_embeddings(const RunConfig& rc, const std::filesystem::path& model_path,
                          const std::filesystem::path& data, const std::string& name, std::ostream& out) {
  const Dataset ds = read_dataset(data);
  const MultiModalAE model = load_model_for(model_path, ds.signal_length);
  const auto path = output_path(rc, name);
  export_embeddings(model, ds.samples, path, "mmcae code " + std::string(kCodeHash) + " config " + rc.echo_text());
  out << "wrote " << 3 * ds.size() << " rows to " << path.string() << "\n";
  return kExitOk;
}

int cmd_band_report(const RunConfig& rc, const std::filesystem::path& model_path, const std::filesystem::path& data,
                    int limit, const std::string& prefix, std::ostream& out) {
  const Dataset ds = read_dataset(data);
  const MultiModalAE model = load_model_for(model_path, ds.signal_length);
  std::span<const MultiModalSample> samples(ds.samples);
  if (limit > 0 && static_cast<std::size_t>(limit) < samples.size()) samples = samples.first(static_cast<std::size_t>(limit));
  const BandReport rep = reconstruction_band_report(model, samples, rc.cutoff_hz(), rc.band_sample_rate());
  json j = provenance(rc);
  j["cutoff_hz"] = rep.cutoff_hz;
  j["sample_rate"] = rep.sample_rate;
  j["samples"] = rep.samples;
  json rows = json::array();
  for (InputMode m : kAllModes)
    for (bool v : {false, true}) {
      const auto& e = rep.at(m, v);
      rows.push_back(json{{"input_mode", to_string(m)},
                          {"modality", v ? "vibration" : "acoustic"},
                          {"low_mse", e.low_mse},
                          {"high_mse", e.high_mse},
                          {"total_mse", e.total_mse},
                          {"low_relative", e.low_relative},
                          {"high_relative", e.high_relative},
                          {"total_relative", e.total_relative}});
    }
  j["errors"] = rows;
  const std::string text = rep.to_text();
  write_text(output_path(rc, prefix + ".json"), j.dump(1) + "\n");
  write_text(output_path(rc, prefix + ".txt"), text);
  out << text;
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"mmcae: multi-modal contrastive autoencoder pipeline"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_file;
  app.add_option("--config", config_file, "JSON run configuration (flags override its values)")
      ->check(CLI::ExistingFile);
  Overrides ov;
  ov.add(&app, "--out", "/out", "output directory; artifact names are relative to it");

  auto training_flags = [&](CLI::App* s) {
    ov.add(s, "--seed", "/seed", "run seed");
    ov.add(s, "--architecture", "/model/architecture", "paper | compact | mini");
    ov.add(s, "--variant", "/loss/variant", "proposed | vanilla | no-missing | corrnet");
    ov.add(s, "--epochs", "/train/max_epochs", "maximum epochs");
    ov.add(s, "--patience", "/train/patience", "early-stopping patience");
    ov.add(s, "--batch-size", "/train/batch_size", "mini-batch size");
    ov.add(s, "--lr", "/train/learning_rate", "ADAM learning rate");
    ov.add(s, "--weight-decay", "/train/weight_decay", "decoupled weight decay");
    ov.add(s, "--validation-metric", "/train/validation_metric", "val_loss | val_accuracy");
    ov.add(s, "--lambda1", "/loss/lambda1", "joint contrastive weight (none = calibrate)");
    ov.add(s, "--lambda2", "/loss/lambda2", "single-modal contrastive weight (none = calibrate)");
    ov.add(s, "--alpha1", "/loss/alpha1", "no-missing baseline contrastive weight (none = calibrate)");
    ov.add(s, "--margin", "/loss/margin", "repulsion margin (none = unbounded)");
    ov.add(s, "--corr-weight", "/loss/corr_weight", "corrnet correlation weight");
    ov.add(s, "--holdout", "/evaluation/holdout_per_class", "validation samples per class");
    ov.add(s, "--probe-iterations", "/probe/max_iterations", "probe iteration cap");
  };

  auto* show = app.add_subcommand("show-config", "Print the effective configuration");

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  std::string gen_name = "dataset.mmds";
  gen->add_option("-o,--output", gen_name, "dataset file name");
  ov.add(gen, "--preset", "/data/preset", "easy | moderate | hard");
  ov.add(gen, "--seed", "/data/seed", "generator seed");
  ov.add(gen, "--classes", "/data/n_classes", "number of classes");
  ov.add(gen, "--counts", "/data/per_class_counts", "comma-separated samples per class");
  ov.add(gen, "--signal-length", "/data/signal_length", "samples per signal");
  ov.add(gen, "--snr", "/data/shared_snr_db", "class bursts over shared nuisance (dB)");
  ov.add(gen, "--noise-db", "/data/modality_noise_db", "modality signal over white noise (dB)");
  ov.add(gen, "--coupling", "/data/cross_correlation", "shared-source weight in [0, 1]");
  ov.add(gen, "--separation", "/data/class_separation", "class separation");
  ov.add(gen, "--jitter", "/data/jitter", "per-sample jitter");
  ov.add(gen, "--precision", "/data/precision", "f32 | f64");

  auto* genrec = app.add_subcommand("gen-recordings", "Generate synthetic raw recordings with a trigger channel");
  std::string genrec_name = "recordings";
  genrec->add_option("-o,--output", genrec_name, "recording directory name");
  ov.add(genrec, "--per-class", "/recordings/per_class", "recordings per class");
  ov.add(genrec, "--classes", "/recordings/n_classes", "number of classes");
  ov.add(genrec, "--duration", "/recordings/duration_s", "seconds per recording");
  ov.add(genrec, "--rpm", "/recordings/rpm", "engine speed");
  ov.add(genrec, "--seed", "/data/seed", "generator seed");
  ov.add(genrec, "--preset", "/data/preset", "signal difficulty preset");
  ov.add(genrec, "--precision", "/data/precision", "f32 | f64");

  auto* ingest = app.add_subcommand("ingest", "Segment recordings into a dataset");
  std::string ingest_in;
  std::string ingest_name = "dataset.mmds";
  ingest->add_option("--input", ingest_in, "recording directory")->required();
  ingest->add_option("-o,--output", ingest_name, "dataset file name");
  ov.add(ingest, "--outlier-z", "/ingest/outlier_z", "robust z threshold (inf keeps everything)");
  ov.add(ingest, "--signal-length", "/ingest/signal_length", "samples per window after resampling");
  ov.add(ingest, "--stride", "/ingest/stride_revolutions", "revolutions between window starts");
  ov.add(ingest, "--hysteresis", "/ingest/hysteresis", "trigger hysteresis fraction");
  ov.add(ingest, "--precision", "/data/precision", "f32 | f64");

  auto* train = app.add_subcommand("train", "Train an autoencoder and a linear probe");
  std::string train_data;
  std::string train_prefix = "model";
  train->add_option("--data", train_data, "dataset file")->required()->check(CLI::ExistingFile);
  train->add_option("-o,--output", train_prefix, "artifact name prefix");
  training_flags(train);
  ov.add(train, "--probe", "/probe/train_on", "joint | a | v | union");

  auto* cvc = app.add_subcommand("cross-validate", "k-fold evaluation of one or more variants");
  std::string cv_data;
  std::string cv_prefix = "cv_report";
  bool save_models = false;
  cvc->add_option("--data", cv_data, "dataset file")->required()->check(CLI::ExistingFile);
  cvc->add_option("-o,--output", cv_prefix, "report name prefix");
  cvc->add_flag("--save-models", save_models, "keep every trained autoencoder");
  training_flags(cvc);
  ov.add(cvc, "--variants", "/evaluation/variants", "comma-separated variants");
  ov.add(cvc, "--folds", "/evaluation/folds", "number of folds");
  ov.add(cvc, "--jobs", "/evaluation/jobs", "parallel jobs (results do not depend on it)");
  ov.add(cvc, "--averaging", "/evaluation/averaging", "weighted | macro");

  auto* pred = app.add_subcommand("predict", "Classify one sample");
  std::string pred_model, pred_clf, pred_a, pred_v, pred_mode = "joint", pred_json;
  pred->add_option("--model", pred_model, "autoencoder checkpoint")->required()->check(CLI::ExistingFile);
  pred->add_option("--classifier", pred_clf, "classifier file")->required()->check(CLI::ExistingFile);
  pred->add_option("--acoustic", pred_a, "acoustic signal (.txt/.csv text, .f32 or raw float64)");
  pred->add_option("--vibration", pred_v, "vibration signal");
  pred->add_option("--mode", pred_mode, "joint | a | v");
  pred->add_option("--json", pred_json, "also write the result as JSON");

  auto* emb = app.add_subcommand("export-embeddings", "Write joint and single-modal representations");
  std::string emb_model, emb_data, emb_name = "embeddings.tsv";
  emb->add_option("--model", emb_model, "autoencoder checkpoint")->required()->check(CLI::ExistingFile);
  emb->add_option("--data", emb_data, "dataset file")->required()->check(CLI::ExistingFile);
  emb->add_option("-o,--output", emb_name, "table file name");

  auto* band = app.add_subcommand("band-report", "Low/high-band reconstruction error");
  std::string band_model, band_data, band_prefix = "band_report";
  int band_limit = 0;
  band->add_option("--model", band_model, "autoencoder checkpoint")->required()->check(CLI::ExistingFile);
  band->add_option("--data", band_data, "dataset file")->required()->check(CLI::ExistingFile);
  band->add_option("-o,--output", band_prefix, "report name prefix");
  band->add_option("--limit", band_limit, "use only the first N samples");
  ov.add(band, "--cutoff", "/evaluation/cutoff_hz", "band edge in Hz");
  ov.add(band, "--sample-rate", "/evaluation/sample_rate", "sample rate in Hz");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  try {
    const RunConfig rc = RunConfig::load(
        config_file.empty() ? std::nullopt : std::optional<std::filesystem::path>(config_file), ov.collect());
    if (show->parsed()) return cmd_show_config(rc, out);
    if (gen->parsed()) return cmd_gen_data(rc, gen_name, out);
    if (genrec->parsed()) return cmd_gen_recordings(rc, genrec_name, out);
    if (ingest->parsed()) return cmd_ingest(rc, ingest_in, ingest_name, out);
    if (train->parsed()) return cmd_train(rc, train_data, train_prefix, out);
    if (cvc->parsed()) return cmd_cross_validate(rc, cv_data, cv_prefix, save_models, out, err);
    if (pred->parsed()) return cmd_predict(rc, pred_model, pred_clf, pred_a, pred_v, pred_mode, pred_json, out);
    if (emb->parsed()) return cmd_export_embeddings(rc, emb_model, emb_data, emb_name, out);
    if (band->parsed()) return cmd_band_report(rc, band_model, band_data, band_limit, band_prefix, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitUsage;
}

}  // namespace mmcae::cli
