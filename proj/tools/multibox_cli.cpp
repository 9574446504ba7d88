// Command-line front end: gen, priors, train, train-classifier, infer, eval.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "multibox/datagen.hpp"
#include "multibox/error.hpp"
#include "multibox/evalkit.hpp"
#include "multibox/io.hpp"
#include "multibox/network.hpp"
#include "multibox/postprocess.hpp"
#include "multibox/priors.hpp"
#include "multibox/training.hpp"

namespace fs = std::filesystem;
using namespace multibox;

namespace {

constexpr const char* kRef = " (reference value)";

std::string raster_path(const std::string& scenes) { return scenes + ".raster"; }

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void ensure_parent(const std::string& path) {
  if (const fs::path parent = fs::path(path).parent_path(); !parent.empty()) {
    std::error_code ec;
    fs::create_directories(parent, ec);
  }
}

std::ofstream open_out(const std::string& path) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  return out;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::InvalidConfig, what);
}

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidConfig:
    case ErrorCode::ShapeMismatch:
      return 2;
    case ErrorCode::IoError:
      return 3;
    case ErrorCode::InfeasibleMatch:
    case ErrorCode::MissingPriors:
    case ErrorCode::TooFewBoxes:
    case ErrorCode::LabelOutOfRange:
    case ErrorCode::DuplicateClassInTopK:
      return 4;
  }
  return 1;
}

std::vector<Scene> subset(const std::vector<Scene>& scenes, const std::vector<std::size_t>& idx) {
  std::vector<Scene> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(scenes[i]);
  return out;
}

// ---------------------------------------------------------------- gen

struct GenArgs {
  std::string out;
  SceneConfig scene;
};

void add_gen(CLI::App& app, GenArgs& a) {
  auto* c = app.add_subcommand("gen", "Generate a synthetic scene set");
  c->add_option("--out", a.out, "Scenes file (pixels go to <out>.raster)")->required();
  c->add_option("--n", a.scene.n_scenes, "Number of scenes")->capture_default_str();
  c->add_option("--classes", a.scene.num_classes, "Number of shape classes")->capture_default_str();
  c->add_option("--max-objects", a.scene.max_objects, "Objects per scene, at most")->capture_default_str();
  c->add_option("--size", a.scene.size, "Raster side in pixels")->capture_default_str();
  c->add_option("--min-side", a.scene.min_side, "Smallest object side (normalized)")->capture_default_str();
  c->add_option("--max-side", a.scene.max_side, "Largest object side (normalized)")->capture_default_str();
  c->add_option("--noise", a.scene.noise_sd, "Background noise standard deviation")->capture_default_str();
  c->add_option("--first-id", a.scene.first_id, "image_id of the first scene")->capture_default_str();
  c->add_option("--seed", a.scene.seed, "Random seed")->required();
}

void run_gen(const GenArgs& a) {
  const SceneConfig& s = a.scene;
  require(s.n_scenes >= 1, "--n must be >= 1");
  require(s.num_classes >= 1, "--classes must be >= 1");
  require(s.max_objects >= 1, "--max-objects must be >= 1");
  require(s.size >= 8, "--size must be >= 8");
  require(0.0 < s.min_side && s.min_side <= s.max_side && s.max_side <= 1.0, "need 0 < min-side <= max-side <= 1");
  require(s.noise_sd >= 0.0, "--noise must be >= 0");
  const auto scenes = generate_scenes(s);
  ensure_parent(a.out);
  save_scenes(a.out, raster_path(a.out), scenes);
  std::vector<std::size_t> hist(static_cast<std::size_t>(s.num_classes), 0);
  std::size_t objects = 0;
  for (const auto& sc : scenes) {
    for (const auto& o : sc.objects) {
      ++hist[static_cast<std::size_t>(o.class_label)];
      ++objects;
    }
  }
  std::cout << "scenes " << scenes.size() << " objects " << objects << '\n';
  for (std::size_t c = 0; c < hist.size(); ++c) std::cout << "class " << c << ' ' << hist[c] << '\n';
}

// ---------------------------------------------------------------- priors

struct PriorsArgs {
  std::string scenes, out;
  int k = 16;
  std::uint64_t seed = 0;
  KMeansOptions kmeans;
};

void add_priors(CLI::App& app, PriorsArgs& a) {
  auto* c = app.add_subcommand("priors", "Cluster ground-truth boxes into priors");
  c->add_option("--scenes", a.scenes, "Scenes file")->required();
  c->add_option("--out", a.out, "Priors file")->required();
  c->add_option("--k", a.k, "Number of priors")->capture_default_str();
  c->add_option("--restarts", a.kmeans.restarts, "k-means restarts")->capture_default_str();
  c->add_option("--max-iterations", a.kmeans.max_iterations, "Lloyd iterations per run")->capture_default_str();
  c->add_option("--seed", a.seed, "Random seed")->required();
}

void run_priors(const PriorsArgs& a) {
  require(a.k >= 1, "--k must be >= 1");
  require(a.kmeans.restarts >= 1, "--restarts must be >= 1");
  const auto scenes = load_scenes(a.scenes, raster_path(a.scenes));
  std::vector<NormBox> boxes;
  for (const auto& s : scenes) {
    for (const auto& b : s.boxes()) boxes.push_back(b);
  }
  const PriorSet priors = fit_priors(boxes, a.k, a.seed, a.kmeans);
  ensure_parent(a.out);
  save_priors(a.out, priors);
  std::cout << "priors " << priors.priors.size() << " from " << boxes.size() << " boxes, objective "
            << fmt(kmeans_objective(boxes, priors.priors)) << '\n';
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string scenes, priors, out, log, report;
  TrainConfig train;
  std::string mode = "prior_matching";
  LocalizerTopology topology;
  int crops_per_bucket = 0;
  double min_visible = 0.5;
  double holdout = 0.1;
  bool deterministic = false;
};

void add_train(CLI::App& app, TrainArgs& a) {
  auto* c = app.add_subcommand("train", "Train the box localizer");
  c->add_option("--scenes", a.scenes, "Scenes file")->required();
  c->add_option("--priors", a.priors, "Priors file")->required();
  c->add_option("--out", a.out, "Checkpoint to write")->required();
  c->add_option("--log", a.log, "Training log CSV (default <out>.log.csv)");
  c->add_option("--report", a.report, "Holdout loss report (default <out>.holdout.csv)");
  c->add_option("--alpha", a.train.alpha, std::string("Location loss weight") + kRef)->capture_default_str();
  c->add_option("--lr", a.train.lr, "Adagrad learning rate")->capture_default_str();
  c->add_option("--batch-size", a.train.batch_size, std::string("Mini-batch size") + kRef)->capture_default_str();
  c->add_option("--steps", a.train.steps, "Optimizer steps")->capture_default_str();
  c->add_option("--mode", a.mode, "Matching: prior_matching or direct")
      ->capture_default_str()
      ->check(CLI::IsMember({"prior_matching", "direct"}));
  c->add_option("--input-side", a.topology.input_side, "Crop side fed to the network")->capture_default_str();
  c->add_option("--hidden1", a.topology.hidden1, "First hidden width")->capture_default_str();
  c->add_option("--hidden2", a.topology.hidden2, "Second hidden width")->capture_default_str();
  c->add_option("--crops-per-bucket", a.crops_per_bucket, "Extra coverage-bucketed crops per scene and bucket")
      ->capture_default_str();
  c->add_option("--min-visible", a.min_visible, "Visible fraction for a truncated object to stay a target")
      ->capture_default_str();
  c->add_option("--holdout", a.holdout, std::string("Holdout fraction of scenes") + kRef)->capture_default_str();
  c->add_option("--threads", a.train.threads, "Gradient worker threads")->capture_default_str();
  c->add_flag("--deterministic", a.deterministic, "Serial gradient reduction");
  c->add_option("--seed", a.train.seed, "Random seed")->required();
}

void write_report(const std::string& path, const TrainLogRow& before, const TrainLogRow& after, std::size_t n) {
  auto out = open_out(path);
  out << "metric,value\n";
  out << "holdout_examples," << n << '\n';
  out << "init_f_total," << fmt(before.f_total) << '\n';
  out << "init_f_match," << fmt(before.f_match) << '\n';
  out << "init_f_conf," << fmt(before.f_conf) << '\n';
  out << "final_f_total," << fmt(after.f_total) << '\n';
  out << "final_f_match," << fmt(after.f_match) << '\n';
  out << "final_f_conf," << fmt(after.f_conf) << '\n';
}

void run_train(TrainArgs a) {
  require(a.train.alpha > 0.0, "--alpha must be > 0");
  require(a.train.lr > 0.0, "--lr must be > 0");
  require(a.train.batch_size >= 1, "--batch-size must be >= 1");
  require(a.train.steps >= 0, "--steps must be >= 0");
  require(a.holdout >= 0.0 && a.holdout < 1.0, "--holdout must lie in [0, 1)");
  require(a.min_visible > 0.0 && a.min_visible <= 1.0, "--min-visible must lie in (0, 1]");
  require(a.crops_per_bucket >= 0, "--crops-per-bucket must be >= 0");
  require(a.train.threads >= 1, "--threads must be >= 1");
  if (a.deterministic) a.train.threads = 1;
  a.train.mode = a.mode == "direct" ? MatchMode::direct : MatchMode::prior_matching;
  if (a.log.empty()) a.log = a.out + ".log.csv";
  if (a.report.empty()) a.report = a.out + ".holdout.csv";

  const auto scenes = load_scenes(a.scenes, raster_path(a.scenes));
  require(!scenes.empty(), "scenes file is empty");
  const PriorSet priors = load_priors(a.priors);
  a.topology.num_slots = static_cast<int>(priors.priors.size());

  const auto [train_idx, hold_idx] = split_holdout(scenes.size(), a.holdout, a.train.seed);
  const auto train_scenes = subset(scenes, train_idx);
  const auto hold_scenes = subset(scenes, hold_idx);
  LocalizerSetConfig lc;
  lc.crops_per_bucket = a.crops_per_bucket;
  lc.min_visible = a.min_visible;
  lc.seed = a.train.seed;
  const auto train_examples = make_localizer_examples(train_scenes, lc);
  LocalizerSetConfig hc = lc;
  hc.crops_per_bucket = 0;
  const auto hold_examples = make_localizer_examples(hold_scenes, hc);

  const ModelParams init = ModelParams::init(a.topology, a.train.seed);
  const auto run = train_localizer(train_scenes, train_examples, priors, init, a.train);
  ensure_parent(a.out);
  save_checkpoint(a.out, run.params);

  auto log = open_out(a.log);
  log << "step,f_total,f_match,f_conf\n";
  for (const auto& r : run.log) {
    log << r.step << ',' << fmt(r.f_total) << ',' << fmt(r.f_match) << ',' << fmt(r.f_conf) << '\n';
  }
  TrainLogRow before, after;
  if (!hold_examples.empty()) {
    before = evaluate_localizer(init, hold_scenes, hold_examples, priors, a.train.alpha, a.train.mode);
    after = evaluate_localizer(run.params, hold_scenes, hold_examples, priors, a.train.alpha, a.train.mode);
  }
  write_report(a.report, before, after, hold_examples.size());
  std::cout << "trained " << run.log.size() << " steps on " << train_examples.size() << " examples; holdout f_total "
            << fmt(before.f_total) << " -> " << fmt(after.f_total) << '\n';
}

// ---------------------------------------------------------------- train-classifier

struct ClassifierArgs {
  std::string scenes, out, log, report;
  ClassifierTrainConfig train;
  ClassifierCropConfig crops;
  ClassifierTopology topology;
  std::string context = "maximum";
  double holdout = 0.1;
  bool deterministic = false;
};

void add_train_classifier(CLI::App& app, ClassifierArgs& a) {
  auto* c = app.add_subcommand("train-classifier", "Train the crop classifier");
  c->add_option("--scenes", a.scenes, "Scenes file")->required();
  c->add_option("--out", a.out, "Checkpoint to write")->required();
  c->add_option("--log", a.log, "Training log CSV (default <out>.log.csv)");
  c->add_option("--report", a.report, "Holdout report (default <out>.holdout.csv)");
  c->add_option("--classes", a.topology.num_classes, "Number of object classes")->capture_default_str();
  c->add_option("--lr", a.train.lr, "Adagrad learning rate")->capture_default_str();
  c->add_option("--batch-size", a.train.batch_size, std::string("Mini-batch size") + kRef)->capture_default_str();
  c->add_option("--steps", a.train.steps, "Optimizer steps")->capture_default_str();
  c->add_option("--hidden1", a.topology.hidden1, "First hidden width")->capture_default_str();
  c->add_option("--hidden2", a.topology.hidden2, "Second hidden width")->capture_default_str();
  c->add_option("--pos-iou", a.crops.pos_iou, std::string("Minimum overlap of a positive crop") + kRef)
      ->capture_default_str();
  c->add_option("--neg-iou", a.crops.neg_iou, std::string("Maximum overlap of a background crop") + kRef)
      ->capture_default_str();
  c->add_option("--negatives-per-positive", a.crops.negatives_per_positive,
                std::string("Background crops per positive") + kRef)
      ->capture_default_str();
  c->add_option("--jitter", a.crops.jitter, "Corner jitter of positive crops, relative to box side")
      ->capture_default_str();
  c->add_option("--context", a.context, "Square context around a box: maximum or minimum")
      ->capture_default_str()
      ->check(CLI::IsMember({"maximum", "minimum"}));
  c->add_option("--holdout", a.holdout, std::string("Holdout fraction of scenes") + kRef)->capture_default_str();
  c->add_flag("--deterministic", a.deterministic, "Serial reductions (training is always serial)");
  c->add_option("--seed", a.train.seed, "Random seed")->required();
}

Eigen::MatrixXd crop_inputs(const std::vector<Scene>& scenes, const std::vector<ClassifierCrop>& crops, int side,
                            SquareContext context) {
  Eigen::MatrixXd x(side * side, static_cast<Eigen::Index>(crops.size()));
  for (std::size_t i = 0; i < crops.size(); ++i) {
    extract_crop(scenes[crops[i].scene].image, context_square(crops[i].box, context), side,
                 std::span<double>(x.col(static_cast<Eigen::Index>(i)).data(), static_cast<std::size_t>(side * side)));
  }
  return x;
}

void run_train_classifier(ClassifierArgs a) {
  require(a.topology.num_classes >= 1, "--classes must be >= 1");
  require(a.train.lr > 0.0, "--lr must be > 0");
  require(a.train.batch_size >= 1, "--batch-size must be >= 1");
  require(a.train.steps >= 0, "--steps must be >= 0");
  require(a.holdout >= 0.0 && a.holdout < 1.0, "--holdout must lie in [0, 1)");
  require(a.crops.jitter >= 0.0, "--jitter must be >= 0");
  a.train.context = a.context == "minimum" ? SquareContext::minimum : SquareContext::maximum;
  a.crops.seed = a.train.seed;
  if (a.log.empty()) a.log = a.out + ".log.csv";
  if (a.report.empty()) a.report = a.out + ".holdout.csv";

  const auto scenes = load_scenes(a.scenes, raster_path(a.scenes));
  require(!scenes.empty(), "scenes file is empty");
  const auto [train_idx, hold_idx] = split_holdout(scenes.size(), a.holdout, a.train.seed);
  const auto train_scenes = subset(scenes, train_idx);
  const auto hold_scenes = subset(scenes, hold_idx);
  const auto train_crops = make_classifier_crops(train_scenes, a.topology.num_classes, a.crops);
  const auto hold_crops = make_classifier_crops(hold_scenes, a.topology.num_classes, a.crops);
  require(!train_crops.empty(), "no classifier crops could be drawn");

  const ClassifierParams init = ClassifierParams::init(a.topology, a.train.seed);
  const auto run = train_classifier(train_scenes, train_crops, init, a.train);
  ensure_parent(a.out);
  save_checkpoint(a.out, run.params);

  auto log = open_out(a.log);
  log << "step,cross_entropy\n";
  for (std::size_t i = 0; i < run.log.size(); ++i) log << i << ',' << fmt(run.log[i]) << '\n';

  auto report = open_out(a.report);
  report << "metric,value\n";
  report << "holdout_crops," << hold_crops.size() << '\n';
  if (!hold_crops.empty()) {
    const auto x = crop_inputs(hold_scenes, hold_crops, a.topology.input_side, a.train.context);
    std::vector<int> labels;
    for (const auto& c : hold_crops) labels.push_back(c.label);
    const Eigen::MatrixXd probs = classify_batch(run.params, x);
    std::size_t correct = 0;
    for (Eigen::Index i = 0; i < probs.cols(); ++i) {
      Eigen::Index arg = 0;
      probs.col(i).maxCoeff(&arg);
      if (arg == labels[static_cast<std::size_t>(i)]) ++correct;
    }
    report << "init_cross_entropy," << fmt(classifier_loss(init, x, labels, nullptr)) << '\n';
    report << "final_cross_entropy," << fmt(classifier_loss(run.params, x, labels, nullptr)) << '\n';
    report << "final_accuracy," << fmt(static_cast<double>(correct) / static_cast<double>(hold_crops.size())) << '\n';
  }
  std::cout << "trained classifier on " << train_crops.size() << " crops\n";
}

// ---------------------------------------------------------------- infer

struct InferArgs {
  std::string scenes, priors, checkpoint, classifier, out;
  std::string strategy = "max_center";
  std::string context = "maximum";
  LocalizeOptions options;
};

void add_infer(CLI::App& app, InferArgs& a) {
  auto* c = app.add_subcommand("infer", "Detect boxes in a scene set");
  c->add_option("--scenes", a.scenes, "Scenes file")->required();
  c->add_option("--priors", a.priors, "Priors file")->required();
  c->add_option("--checkpoint", a.checkpoint, "Localizer checkpoint")->required();
  c->add_option("--classifier", a.classifier, "Optional classifier checkpoint for labelled detections");
  c->add_option("--out", a.out, "Detections file")->required();
  c->add_option("--strategy", a.strategy, "Crop strategy: max_center or two_scale")
      ->capture_default_str()
      ->check(CLI::IsMember({"max_center", "two_scale"}));
  c->add_option("--top-n", a.options.top_n, std::string("Detections kept per image") + kRef)->capture_default_str();
  c->add_option("--nms", a.options.nms_threshold, std::string("Suppression overlap threshold") + kRef)
      ->capture_default_str();
  c->add_option("--context", a.context, "Classifier context square: maximum or minimum")
      ->capture_default_str()
      ->check(CLI::IsMember({"maximum", "minimum"}));
  c->add_flag("--deterministic", "Accepted for symmetry; inference is always serial");
}

void run_infer(InferArgs a) {
  require(a.options.top_n >= 0, "--top-n must be >= 0");
  require(a.options.nms_threshold >= 0.0 && a.options.nms_threshold <= 1.0, "--nms must lie in [0, 1]");
  a.options.strategy = a.strategy == "two_scale" ? CropStrategy::two_scale : CropStrategy::max_center;
  const auto scenes = load_scenes(a.scenes, raster_path(a.scenes));
  const PriorSet priors = load_priors(a.priors);
  const ModelParams params = load_localizer(a.checkpoint);
  if (static_cast<std::size_t>(params.topology.num_slots) != priors.priors.size()) {
    throw Error(ErrorCode::ShapeMismatch, "checkpoint slot count differs from the priors file");
  }
  std::optional<ClassifierParams> classifier;
  if (!a.classifier.empty()) classifier = load_classifier(a.classifier);
  const SquareContext context = a.context == "minimum" ? SquareContext::minimum : SquareContext::maximum;

  std::vector<DetectionRecord> records;
  for (const auto& s : scenes) {
    auto dets = localize_image(params, priors, s.image, a.options);
    if (classifier) dets = score_detections(dets, *classifier, s.image, context);
    for (const auto& d : dets) records.push_back({s.image_id, d});
  }
  auto out = open_out(a.out);
  write_detections(out, records);
  std::cout << "detections " << records.size() << " over " << scenes.size() << " scenes\n";
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string scenes, detections, out_dir;
  EvalOptions options;
  std::string style = "voc2007_11pt";
};

void add_eval(CLI::App& app, EvalArgs& a) {
  auto* c = app.add_subcommand("eval", "Score detections against ground truth");
  c->add_option("--scenes", a.scenes, "Scenes file with ground truth")->required();
  c->add_option("--detections", a.detections, "Detections file")->required();
  c->add_option("--out-dir", a.out_dir, "Directory for the metric CSVs")->required();
  c->add_option("--iou", a.options.iou_threshold, std::string("Match overlap threshold") + kRef)
      ->capture_default_str();
  c->add_option("--max-budget", a.options.max_budget, "Largest box budget on the detection-rate curve")
      ->capture_default_str();
  c->add_option("--classes", a.options.num_classes, "Number of classes (default: inferred from ground truth)");
  c->add_option("--style", a.style, "AP style: voc2007_11pt or auc")
      ->capture_default_str()
      ->check(CLI::IsMember({"voc2007_11pt", "auc"}));
  c->add_flag("--deterministic", "Accepted for symmetry; evaluation is always serial");
}

void run_eval(EvalArgs a) {
  require(a.options.iou_threshold > 0.0 && a.options.iou_threshold <= 1.0, "--iou must lie in (0, 1]");
  require(a.options.max_budget >= 1, "--max-budget must be >= 1");
  a.options.style = a.style == "auc" ? ApStyle::auc : ApStyle::voc2007_11pt;
  const auto scenes = load_scenes(a.scenes, raster_path(a.scenes));
  std::ifstream in(a.detections);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + a.detections);
  const auto records = read_detections(in);

  std::map<std::uint64_t, std::size_t> index;
  std::vector<ImageGroundTruth> gt(scenes.size());
  int max_label = -1;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    index[scenes[i].image_id] = i;
    for (const auto& o : scenes[i].objects) {
      gt[i].push_back({o.box, o.class_label});
      max_label = std::max(max_label, o.class_label);
    }
  }
  if (a.options.num_classes == 0) a.options.num_classes = max_label + 1;
  std::vector<ImageDetections> dets(scenes.size());
  for (const auto& r : records) {
    const auto it = index.find(r.image_id);
    if (it == index.end()) {
      throw Error(ErrorCode::ShapeMismatch, "detection for unknown image_id " + std::to_string(r.image_id));
    }
    dets[it->second].push_back(r.detection);
  }

  const EvalSummary s = evaluate(dets, gt, a.options);
  std::error_code ec;
  fs::create_directories(a.out_dir, ec);
  const fs::path dir(a.out_dir);
  {
    auto out = open_out((dir / "budget_curve.csv").string());
    write_budget_csv(out, s.budget);
  }
  if (s.agnostic) {
    auto out = open_out((dir / "pr_agnostic.csv").string());
    write_pr_csv(out, *s.agnostic);
  }
  for (const auto& c : s.per_class) {
    if (!c.curve) {
      std::cerr << "warning: class " << c.class_label << " has no ground truth, AP absent\n";
      continue;
    }
    auto out = open_out((dir / ("pr_" + std::to_string(c.class_label) + ".csv")).string());
    write_pr_csv(out, *c.curve);
  }
  auto out = open_out((dir / "summary.csv").string());
  write_summary_csv(out, s);
  std::cout << "evaluated " << records.size() << " detections over " << scenes.size() << " scenes\n";
}

// Values from `--config FILE` are placed ahead of the command-line
// arguments so explicit flags win.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    std::string path;
    std::size_t erase = 0;
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
      erase = 2;
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      erase = 1;
    } else {
      continue;
    }
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot read config " + path);
    const auto kv = read_key_values(in);
    args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i + erase));
    std::vector<std::string> injected;
    for (const auto& [k, v] : kv) injected.push_back("--" + k + "=" + v);
    // after the subcommand name, which is the first argument
    const std::size_t at = args.empty() ? 0 : 1;
    args.insert(args.begin() + static_cast<std::ptrdiff_t>(at), injected.begin(), injected.end());
    break;
  }
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Class-agnostic multi-box detection: data, priors, training, inference, evaluation"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.footer(
      "Every subcommand also accepts --config FILE with `key = value` lines (keys are long option names);\n"
      "flags given on the command line override the file. Defaults marked (reference value) follow the\n"
      "original method; the rest are choices of this implementation.");

  GenArgs gen;
  PriorsArgs priors;
  TrainArgs train;
  ClassifierArgs classifier;
  InferArgs infer;
  EvalArgs eval;
  add_gen(app, gen);
  add_priors(app, priors);
  add_train(app, train);
  add_train_classifier(app, classifier);
  add_infer(app, infer);
  add_eval(app, eval);
  for (auto* sub : app.get_subcommands({})) {
    sub->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    sub->add_option("--config", "Key-value file with option defaults");
  }

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = expand_config(std::move(args));
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: InvalidConfig: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << '\n';
    return exit_code(e.code());
  }

  try {
    if (app.got_subcommand("gen")) run_gen(gen);
    if (app.got_subcommand("priors")) run_priors(priors);
    if (app.got_subcommand("train")) run_train(train);
    if (app.got_subcommand("train-classifier")) run_train_classifier(classifier);
    if (app.got_subcommand("infer")) run_infer(infer);
    if (app.got_subcommand("eval")) run_eval(eval);
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: IoError: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
