// SPDX-License-Identifier: Apache-2.0
//
// pct: dataset generation, training, evaluation and diagnostics.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pct/pct.hpp"

namespace fs = std::filesystem;
using namespace pct;

namespace {

/// CLI values that override the config file only when given on the command line.
class Overrides {
 public:
  template <class T>
  CLI::Option* bind(CLI::App* app, const std::string& flags, T RunConfig::*field, const std::string& help) {
    auto holder = std::make_shared<T>();
    CLI::Option* opt = app->add_option(flags, *holder, help);
    items_.push_back({opt, [holder, field](RunConfig& c) { c.*field = *holder; }});
    return opt;
  }

  CLI::Option* flag(CLI::App* app, const std::string& flags, bool RunConfig::*field, const std::string& help) {
    auto holder = std::make_shared<bool>(false);
    CLI::Option* opt = app->add_flag(flags, *holder, help);
    items_.push_back({opt, [holder, field](RunConfig& c) { c.*field = *holder; }});
    return opt;
  }

  /// default < `--config` file < explicit flags.
  RunConfig resolve(RunConfig base) const {
    if (!config_path.empty()) base = load_run_config(config_path, std::move(base));
    for (const auto& [opt, apply] : items_) {
      if (opt->count() > 0) apply(base);
    }
    base.validate();
    return base;
  }

  std::string config_path;

 private:
  std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&)>>> items_;
};

void apply_threads(const RunConfig& c) { set_num_threads(c.deterministic ? 1 : c.threads); }

std::string manifest_path(const std::string& data) {
  if (data.empty()) throw ValidationError("config 'data': no dataset given (use --data)");
  return fs::is_directory(data) ? (fs::path(data) / "manifest.json").string() : data;
}

AugmentConfig augment_for(const RunConfig& c) {
  return c.augment ? default_augment(parse_task(c.task)) : AugmentConfig::none();
}

TrainConfig train_config(const RunConfig& c) {
  TrainConfig t;
  t.batch = c.batch;
  t.epochs = c.epochs;
  t.lr = c.lr;
  t.lr_min = c.lr_min;
  t.momentum = c.momentum;
  t.weight_decay = c.weight_decay;
  t.label_smoothing = c.label_smoothing;
  t.augment = augment_for(c);
  t.seed = c.seed;
  t.out_dir = c.out;
  t.unsigned_normals = c.unsigned_normals;
  return t;
}

std::uint64_t model_seed(const RunConfig& c) { return stream_seed(c.seed, 0x1417); }

std::string metric_name(Task t) {
  switch (t) {
    case Task::classify: return "accuracy";
    case Task::segment: return "part_iou";
    case Task::normals: return "cosine_error";
  }
  return "metric";
}

/// Model rebuilt from `<run>/config.json` with weights from `<run>/checkpoint.bin`.
PctModel load_run(const std::string& run, RunConfig& cfg) {
  PctModel model(model_config(cfg), model_seed(cfg));
  load_checkpoint(model.parameters(), (fs::path(run) / "checkpoint.bin").string());
  model.set_mode(Mode::inference);
  return model;
}

int cmd_gen_data(const RunConfig& c) {
  apply_threads(c);
  DatasetConfig d;
  d.kinds.clear();
  for (const auto& k : c.classes) d.kinds.push_back(parse_shape_kind(k));
  d.per_class = c.per_class;
  d.points = c.points;
  d.noise = c.noise;
  d.train_fraction = c.train_fraction;
  const auto m = make_dataset(d, c.seed, c.out);
  std::size_t train = 0;
  for (const auto& e : m.entries) train += e.split == Split::train;
  std::cout << "wrote " << m.entries.size() << " shapes (" << train << " train, " << m.entries.size() - train
            << " test) to " << c.out << "\n";
  return 0;
}

int cmd_train(RunConfig c) {
  apply_threads(c);
  const std::string manifest = manifest_path(c.data);
  const auto m = read_manifest(manifest);
  auto train_set = load_split(manifest, Split::train);
  auto test_set = load_split(manifest, Split::test);
  if (train_set.empty() || test_set.empty()) throw CountError("train: dataset needs both train and test shapes");
  c.points = train_set.front().size();
  const Task task = parse_task(c.task);
  const std::size_t classes = m.class_names.empty() ? 1 : m.class_names.size();
  if (!m.class_names.empty()) c.classes = m.class_names;
  c.n_categories = classes;
  if (task == Task::classify) {
    c.n_outputs = classes;
  } else if (task == Task::segment) {
    int top = 0;
    for (const auto* set : {&train_set, &test_set}) {
      for (const auto& cl : *set) {
        if (!cl.labels) throw ValidationError("train: segmentation data must carry part labels");
        for (int l : *cl.labels) top = std::max(top, l);
      }
    }
    c.n_outputs = static_cast<std::size_t>(top) + 1;
  } else {
    c.n_outputs = 3;
  }

  fs::create_directories(c.out);
  save_run_config(c, (fs::path(c.out) / "config.json").string());
  PctModel model(model_config(c), model_seed(c));
  const Task t = task;
  const auto result = train(model, train_set, test_set, train_config(c), [&](const EpochLog& e) {
    std::cout << "epoch " << e.epoch << " lr " << e.lr << " loss " << e.train_loss << " " << metric_name(t) << " "
              << e.eval_metric << std::endl;
  });
  std::cout << "best " << metric_name(task) << " " << result.best_metric << " at epoch " << result.best_epoch << "\n";
  return 0;
}

int cmd_eval(RunConfig c, const std::string& run, const std::string& split, bool multi_scale) {
  apply_threads(c);
  PctModel model = load_run(run, c);
  const Task task = parse_task(c.task);
  const auto clouds = load_split(manifest_path(c.data), parse_split(split));
  if (clouds.empty()) throw CountError("eval: no shapes in split '" + split + "'");
  std::vector<Matrix> scores;
  if (multi_scale) {
    if (task == Task::normals) throw ValidationError("eval: --multi-scale applies to classify and segment");
    for (const auto& cl : clouds) {
      scores.push_back(multi_scale_eval([&](const PointCloud& s) { return model.predict(s); }, cl, default_test_scales()));
    }
  } else {
    TrainConfig t;
    t.batch = c.batch;
    scores = predict_all(model, clouds, t.batch);
  }
  // Part sets as seen in training: both splits.
  std::vector<PointCloud> all;
  if (task == Task::segment) {
    all = load_split(manifest_path(c.data), Split::train);
    const auto test = load_split(manifest_path(c.data), Split::test);
    all.insert(all.end(), test.begin(), test.end());
  }
  const double metric = score_predictions(scores, clouds, task, observed_part_sets(all), c.unsigned_normals);
  nlohmann::ordered_json j;
  j["split"] = split;
  j["multi_scale"] = multi_scale;
  j["shapes"] = clouds.size();
  j[metric_name(task)] = metric;
  std::ofstream(fs::path(run) / "eval.json") << j.dump(2) << '\n';
  std::cout << metric_name(task) << " " << std::setprecision(6) << metric << " (" << clouds.size() << " shapes, "
            << split << (multi_scale ? ", multi-scale" : "") << ")\n";
  return 0;
}

int cmd_infer(RunConfig c, const std::string& run, const std::string& input, std::string output, int category) {
  apply_threads(c);
  PctModel model = load_run(run, c);
  const Task task = parse_task(c.task);
  PointCloud cloud = load_points(input);
  cloud.category = category;
  const Matrix scores = model.predict(cloud);
  if (output.empty()) output = (fs::path(run) / "predictions.csv").string();
  std::ofstream os(output);
  if (!os) throw FormatError("cannot write " + output);
  os.precision(9);
  const bool gt_normals = task == Task::normals && cloud.normals;
  const bool gt_labels = task == Task::segment && cloud.labels;
  os << "x,y,z";
  if (task == Task::normals) {
    os << ",nx,ny,nz" << (gt_normals ? ",gt_nx,gt_ny,gt_nz" : "");
  } else {
    os << ",pred" << (gt_labels ? ",gt" : "");
  }
  os << '\n';
  const auto labels = argmax_rows(scores);
  const Matrix unit = task == Task::normals ? normalize_normals(scores).unit : Matrix();
  for (Eigen::Index i = 0; i < cloud.coords.rows(); ++i) {
    os << cloud.coords(i, 0) << ',' << cloud.coords(i, 1) << ',' << cloud.coords(i, 2);
    if (task == Task::normals) {
      os << ',' << unit(i, 0) << ',' << unit(i, 1) << ',' << unit(i, 2);
      if (gt_normals) os << ',' << (*cloud.normals)(i, 0) << ',' << (*cloud.normals)(i, 1) << ',' << (*cloud.normals)(i, 2);
    } else {
      os << ',' << (task == Task::classify ? labels.front() : labels[static_cast<std::size_t>(i)]);
      if (gt_labels) os << ',' << (*cloud.labels)[static_cast<std::size_t>(i)];
    }
    os << '\n';
  }
  if (task == Task::classify) std::cout << "class " << labels.front() << "\n";
  std::cout << "wrote " << output << "\n";
  return 0;
}

int cmd_gradcheck(const RunConfig& c) {
  apply_threads(c);
  constexpr double kTolerance = 1e-4;
  double worst = 0.0;
  GradSuiteOptions opt;
  opt.seed = c.seed;
  std::cout << "eps " << opt.eps << ", smoothness margin >= " << opt.min_margin << "\n";
  for (const auto& r : run_grad_suites(opt)) {
    std::cout << std::left << std::setw(28) << r.name << std::scientific << std::setprecision(3) << r.max_error
              << "  margin " << r.margin << (r.max_error <= kTolerance ? "" : "  FAIL") << "\n";
    worst = std::max(worst, r.max_error);
  }
  std::cout << "worst " << worst << "\n";
  return worst <= kTolerance ? 0 : 1;
}

int cmd_params(RunConfig c, std::size_t classes) {
  c.n_outputs = classes;
  const PctModel model(model_config(c), 0);
  const ParamList p = model.parameters();
  for (const auto& [group, count] : parameter_summary(p)) std::cout << std::left << std::setw(28) << group << count << "\n";
  const std::size_t total = count_trainable(p);
  std::cout << std::left << std::setw(28) << "total" << total << " (" << std::fixed << std::setprecision(2)
            << static_cast<double>(total) / 1e6 << "M)\n";
  return 0;
}

int cmd_dump_attention(RunConfig c, const std::string& run, const std::string& input, const std::string& shape,
                       const std::vector<std::size_t>& queries) {
  apply_threads(c);
  PointCloud cloud;
  if (!input.empty()) {
    cloud = load_points(input);
  } else {
    Rng rng(stream_seed(c.seed, 0x5A));
    ShapeSpec spec;
    spec.kind = parse_shape_kind(shape);
    spec.size = random_size(spec.kind, rng);
    spec.points = c.points;
    cloud = generate_shape(spec, rng);
  }
  c.points = cloud.size();
  std::unique_ptr<PctModel> model;
  if (!run.empty()) {
    model = std::make_unique<PctModel>(load_run(run, c));
  } else {
    model = std::make_unique<PctModel>(model_config(c), model_seed(c));
    model->set_mode(Mode::inference);
  }
  NoGradGuard no_grad;
  const auto trace = model->trace({&cloud});
  PointCloud embedded;
  embedded.coords = trace.embedding.coords;
  fs::create_directories(c.out);
  for (std::size_t l = 0; l < trace.layer_inputs.size(); ++l) {
    const AttentionMap map = model->encoder.layers[l].attention_map(trace.layer_inputs[l]);
    const std::string stem = (fs::path(c.out) / ("attention_layer" + std::to_string(l))).string();
    export_attention_map(map.normalized, stem);
    for (std::size_t q : queries) {
      if (q >= static_cast<std::size_t>(map.normalized.rows())) {
        throw RangeError("dump-attention: query " + std::to_string(q) + " outside [0, " +
                         std::to_string(map.normalized.rows()) + ")");
      }
      write_query_attention(embedded, map.normalized, static_cast<Eigen::Index>(q), stem + "_query" + std::to_string(q) + ".csv");
    }
  }
  std::cout << "wrote " << trace.layer_inputs.size() << " attention maps to " << c.out << "\n";
  return 0;
}

int cmd_bench(const RunConfig& c, const std::vector<std::size_t>& sizes, int repeats) {
  apply_threads(c);
  using clock = std::chrono::steady_clock;
  auto time_ms = [&](const std::function<void()>& fn) {
    fn();
    const auto t0 = clock::now();
    for (int r = 0; r < repeats; ++r) fn();
    return std::chrono::duration<double, std::milli>(clock::now() - t0).count() / repeats;
  };
  Rng rng(c.seed);
  std::cout << std::left << std::setw(8) << "N" << std::setw(14) << "fps(N/4) ms" << std::setw(14) << "knn(32) ms"
            << std::setw(14) << "OA(128) ms" << "\n";
  for (std::size_t n : sizes) {
    const Matrix pts = detail::gaussian(static_cast<Eigen::Index>(n), 3, rng);
    const auto centers = farthest_point_sample(pts, std::max<std::size_t>(n / 4, 1));
    Matrix queries(static_cast<Eigen::Index>(centers.size()), 3);
    for (std::size_t i = 0; i < centers.size(); ++i) queries.row(static_cast<Eigen::Index>(i)) = pts.row(centers[i]);
    AttentionLayer layer(128, AttentionKind::offset, rng);
    layer.set_mode(Mode::inference);
    const Tensor f = Tensor::from(detail::gaussian(static_cast<Eigen::Index>(n), 128, rng));
    NoGradGuard no_grad;
    const double fps = time_ms([&] { farthest_point_sample(pts, std::max<std::size_t>(n / 4, 1)); });
    const double nn = time_ms([&] { knn(pts, queries, std::min<std::size_t>(32, n)); });
    const double oa = time_ms([&] { layer.forward(f); });
    std::cout << std::fixed << std::setprecision(3) << std::setw(8) << n << std::setw(14) << fps << std::setw(14) << nn
              << std::setw(14) << oa << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Point cloud transformer toolkit"};
  app.require_subcommand(1);
  Overrides ov;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", ov.config_path, "JSON config file")->check(CLI::ExistingFile);
    ov.bind(sub, "--seed", &RunConfig::seed, "Seed for every random stream");
    ov.flag(sub, "--deterministic", &RunConfig::deterministic, "Single-threaded, bit-reproducible numerics");
    ov.bind(sub, "--threads", &RunConfig::threads, "Worker threads (0: PCT_THREADS or default)");
    ov.bind(sub, "--out", &RunConfig::out, "Output directory");
  };
  auto model_opts = [&](CLI::App* sub) {
    ov.bind(sub, "--model", &RunConfig::model, "npct | spct | pct | pct3l");
    ov.bind(sub, "--task", &RunConfig::task, "classify | segment | normals");
    ov.bind(sub, "--widths", &RunConfig::widths, "desk | paper");
    ov.bind(sub, "--points", &RunConfig::points, "Points per cloud");
    ov.bind(sub, "--k", &RunConfig::k, "Neighbors per SG group (0: preset)");
  };

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic shape dataset");
  common(gen);
  ov.bind(gen, "--classes", &RunConfig::classes, "Shape kinds, one category each");
  ov.bind(gen, "--per-class", &RunConfig::per_class, "Shapes per category");
  ov.bind(gen, "--points", &RunConfig::points, "Points per shape");
  ov.bind(gen, "--noise", &RunConfig::noise, "Noise sigma as a fraction of the bbox diagonal");
  ov.bind(gen, "--train-fraction", &RunConfig::train_fraction, "Share of each class in the train split");

  auto* tr = app.add_subcommand("train", "Train a model");
  common(tr);
  model_opts(tr);
  ov.bind(tr, "--data", &RunConfig::data, "Dataset directory or manifest");
  ov.bind(tr, "--epochs", &RunConfig::epochs, "Training epochs");
  ov.bind(tr, "--batch", &RunConfig::batch, "Mini-batch size");
  ov.bind(tr, "--lr", &RunConfig::lr, "Initial learning rate");
  ov.bind(tr, "--lr-min", &RunConfig::lr_min, "Final learning rate");
  ov.bind(tr, "--momentum", &RunConfig::momentum, "SGD momentum");
  ov.bind(tr, "--weight-decay", &RunConfig::weight_decay, "L2 weight decay");
  ov.bind(tr, "--label-smoothing", &RunConfig::label_smoothing, "Soft cross-entropy epsilon");
  ov.bind(tr, "--augment", &RunConfig::augment, "Training augmentation on/off");
  ov.flag(tr, "--unsigned-normals", &RunConfig::unsigned_normals, "Treat n and -n as equal when scoring");

  std::string run_dir, split = "test", input, output, shape = "torus";
  bool multi_scale = false;
  int category = 0;
  std::size_t param_classes = 40;
  std::vector<std::size_t> queries{0};
  std::vector<std::size_t> sizes{256, 512, 1024, 2048};
  int repeats = 5;

  auto* ev = app.add_subcommand("eval", "Score a trained run on a dataset split");
  common(ev);
  ev->add_option("--run", run_dir, "Training output directory")->required()->check(CLI::ExistingDirectory);
  ov.bind(ev, "--data", &RunConfig::data, "Dataset directory or manifest (default: the training data)");
  ev->add_option("--split", split, "train | test");
  ev->add_flag("--multi-scale", multi_scale, "Average probabilities over scales 0.7 .. 1.4");
  ov.flag(ev, "--unsigned-normals", &RunConfig::unsigned_normals, "Treat n and -n as equal");

  auto* inf = app.add_subcommand("infer", "Predict one point file");
  common(inf);
  inf->add_option("--run", run_dir, "Training output directory")->required()->check(CLI::ExistingDirectory);
  inf->add_option("--input", input, "Point file")->required()->check(CLI::ExistingFile);
  inf->add_option("--output", output, "Prediction CSV (default: <run>/predictions.csv)");
  inf->add_option("--category", category, "Shape category for segmentation");

  auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  common(gc);

  auto* pr = app.add_subcommand("params", "Trainable parameter counts");
  model_opts(pr);
  pr->add_option("--classes", param_classes, "Output classes");

  auto* da = app.add_subcommand("dump-attention", "Write attention maps for one cloud");
  common(da);
  model_opts(da);
  da->add_option("--run", run_dir, "Training output directory (default: untrained model)");
  da->add_option("--input", input, "Point file (default: generated shape)");
  da->add_option("--shape", shape, "Shape kind when no input is given");
  da->add_option("--query", queries, "Query point indices");

  auto* be = app.add_subcommand("bench", "Time FPS, kNN and attention kernels");
  common(be);
  be->add_option("--sizes", sizes, "Point counts");
  be->add_option("--repeats", repeats, "Timed repetitions")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig base;
    if (pr->parsed()) base.widths = "paper", base.points = 1024;
    if (gc->parsed()) base.seed = GradSuiteOptions{}.seed;
    if ((ev->parsed() || inf->parsed() || (da->parsed() && !run_dir.empty()))) {
      base = load_run_config((fs::path(run_dir) / "config.json").string());
    }
    const RunConfig cfg = ov.resolve(base);
    if (gen->parsed()) return cmd_gen_data(cfg);
    if (tr->parsed()) return cmd_train(cfg);
    if (ev->parsed()) return cmd_eval(cfg, run_dir, split, multi_scale);
    if (inf->parsed()) return cmd_infer(cfg, run_dir, input, output, category);
    if (gc->parsed()) return cmd_gradcheck(cfg);
    if (pr->parsed()) return cmd_params(cfg, param_classes);
    if (da->parsed()) return cmd_dump_attention(cfg, run_dir, input, shape, queries);
    if (be->parsed()) return cmd_bench(cfg, sizes, repeats);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
