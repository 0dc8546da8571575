#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dgm/data.hpp"
#include "dgm/densenet.hpp"
#include "dgm/metrics.hpp"
#include "dgm/serialize.hpp"
#include "dgm/train.hpp"

namespace dgm {

// ---- key = value config text -----------------------------------------------
// Flat lines with '#' comments and dotted sections, e.g. `optimizer.kind = adam`.

class ConfigMap {
 public:
  static ConfigMap parse(const std::string& text) {
    ConfigMap c;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      size_t hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      size_t b = line.find_first_not_of(" \t\r");
      if (b == std::string::npos) continue;
      size_t e = line.find_last_not_of(" \t\r");
      line = line.substr(b, e - b + 1);
      size_t eq = line.find('=');
      if (eq == std::string::npos)
        fail(ErrorCode::kConfig, "config line " + std::to_string(lineno) + ": expected key = value");
      auto trim = [](std::string s) {
        size_t b2 = s.find_first_not_of(" \t");
        if (b2 == std::string::npos) return std::string();
        size_t e2 = s.find_last_not_of(" \t");
        return s.substr(b2, e2 - b2 + 1);
      };
      std::string key = trim(line.substr(0, eq));
      std::string value = trim(line.substr(eq + 1));
      if (key.empty()) fail(ErrorCode::kConfig, "config line " + std::to_string(lineno) + ": empty key");
      c.values_[key] = value;
    }
    return c;
  }

  static ConfigMap parse_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) fail(ErrorCode::kConfig, "cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse(ss.str());
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::optional<std::string> take(const std::string& key) {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    consumed_.insert(key);
    return it->second;
  }

  void reject_unknown() const {
    for (const auto& [k, v] : values_)
      if (!consumed_.count(k)) fail(ErrorCode::kConfig, "unknown config key '" + k + "'");
  }

 private:
  std::map<std::string, std::string> values_;
  std::set<std::string> consumed_;
};

namespace detail {

inline int to_int(const std::string& v, const std::string& key) {
  try {
    size_t pos = 0;
    int r = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (...) {
    fail(ErrorCode::kConfig, "config key '" + key + "': '" + v + "' is not an integer");
  }
}

inline float to_float(const std::string& v, const std::string& key) {
  try {
    size_t pos = 0;
    float r = std::stof(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (...) {
    fail(ErrorCode::kConfig, "config key '" + key + "': '" + v + "' is not a number");
  }
}

inline bool to_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  fail(ErrorCode::kConfig, "config key '" + key + "': '" + v + "' is not a boolean");
}

inline std::vector<int> to_int_list(const std::string& v, const std::string& key) {
  std::vector<int> out;
  std::istringstream is(v);
  std::string tok;
  while (is >> tok) out.push_back(to_int(tok, key));
  if (out.empty()) fail(ErrorCode::kConfig, "config key '" + key + "': empty list");
  return out;
}

}  // namespace detail

// ---- Experiment configuration ----------------------------------------------

struct ExperimentConfig {
  std::string data_root;
  bool synthetic = false;
  int synthetic_per_class = 60;
  SynthTask synthetic_task = SynthTask::kA;
  std::string eval_root;       // optional separate test directory
  std::string init_backbone;   // optional model to take the frozen backbone from
  int input_size = 0;          // 0: use the preset's input size
  int epochs = 100;
  int batch_size = 64;
  float train_fraction = 0.8f;
  uint64_t seed = 0;
  std::string preset = "densenet201";
  DenseNetConfig densenet = DenseNetConfig::densenet201();
  HeadConfig head;
  OptimizerHyper optimizer;
  bool freeze = true;
  AugmentSpec augment{20.0f, 0.5f, 0.5f};
  std::string out_dir = "runs/out";

  static ExperimentConfig from_map(ConfigMap& c) {
    ExperimentConfig e;
    if (auto v = c.take("data_root")) e.data_root = *v;
    if (auto v = c.take("synthetic")) e.synthetic = detail::to_bool(*v, "synthetic");
    if (auto v = c.take("synthetic.per_class"))
      e.synthetic_per_class = detail::to_int(*v, "synthetic.per_class");
    if (auto v = c.take("synthetic.task")) {
      if (*v == "a")
        e.synthetic_task = SynthTask::kA;
      else if (*v == "b")
        e.synthetic_task = SynthTask::kB;
      else
        fail(ErrorCode::kConfig, "synthetic.task must be 'a' or 'b'");
    }
    if (auto v = c.take("eval_root")) e.eval_root = *v;
    if (auto v = c.take("init_backbone")) e.init_backbone = *v;
    if (auto v = c.take("input_size")) e.input_size = detail::to_int(*v, "input_size");
    if (auto v = c.take("epochs")) e.epochs = detail::to_int(*v, "epochs");
    if (auto v = c.take("batch_size")) e.batch_size = detail::to_int(*v, "batch_size");
    if (auto v = c.take("train_fraction")) e.train_fraction = detail::to_float(*v, "train_fraction");
    if (auto v = c.take("seed")) e.seed = static_cast<uint64_t>(std::stoull(*v));
    if (auto v = c.take("out")) e.out_dir = *v;
    if (auto v = c.take("freeze")) e.freeze = detail::to_bool(*v, "freeze");

    if (auto v = c.take("model.preset")) e.preset = *v;
    if (e.preset == "densenet201")
      e.densenet = DenseNetConfig::densenet201();
    else if (e.preset == "toy")
      e.densenet = DenseNetConfig::toy();
    else
      fail(ErrorCode::kConfig, "model.preset must be 'densenet201' or 'toy'");
    if (auto v = c.take("model.block_layers"))
      e.densenet.block_layers = detail::to_int_list(*v, "model.block_layers");
    if (auto v = c.take("model.growth_rate")) {
      e.densenet.growth_rate = detail::to_int(*v, "model.growth_rate");
      e.densenet.bottleneck_width = 4 * e.densenet.growth_rate;
    }
    if (auto v = c.take("model.bottleneck_width"))
      e.densenet.bottleneck_width = detail::to_int(*v, "model.bottleneck_width");
    if (auto v = c.take("model.compression"))
      e.densenet.compression = detail::to_float(*v, "model.compression");
    if (auto v = c.take("model.stem_channels"))
      e.densenet.stem_channels = detail::to_int(*v, "model.stem_channels");

    if (auto v = c.take("head.neurons")) e.head.neurons = detail::to_int(*v, "head.neurons");
    if (auto v = c.take("head.dropout")) e.head.dropout_rate = detail::to_float(*v, "head.dropout");
    if (auto v = c.take("head.classes")) e.head.n_classes = detail::to_int(*v, "head.classes");

    OptKind kind = OptKind::kAdam;
    if (auto v = c.take("optimizer.kind")) kind = opt_kind_from_name(*v);
    e.optimizer = OptimizerHyper::defaults_for(kind);
    if (auto v = c.take("optimizer.learning_rate"))
      e.optimizer.learning_rate = detail::to_float(*v, "optimizer.learning_rate");
    if (auto v = c.take("optimizer.beta1")) e.optimizer.beta1 = detail::to_float(*v, "optimizer.beta1");
    if (auto v = c.take("optimizer.beta2")) e.optimizer.beta2 = detail::to_float(*v, "optimizer.beta2");
    if (auto v = c.take("optimizer.momentum"))
      e.optimizer.momentum = detail::to_float(*v, "optimizer.momentum");
    if (auto v = c.take("optimizer.rho")) e.optimizer.rho = detail::to_float(*v, "optimizer.rho");
    if (auto v = c.take("optimizer.epsilon"))
      e.optimizer.epsilon = detail::to_float(*v, "optimizer.epsilon");

    if (auto v = c.take("augment.rotation_degrees"))
      e.augment.rotation_degrees = detail::to_float(*v, "augment.rotation_degrees");
    if (auto v = c.take("augment.hflip_prob"))
      e.augment.hflip_prob = detail::to_float(*v, "augment.hflip_prob");
    if (auto v = c.take("augment.vflip_prob"))
      e.augment.vflip_prob = detail::to_float(*v, "augment.vflip_prob");

    c.reject_unknown();
    e.validate();
    return e;
  }

  void validate() const {
    if (epochs < 0) fail(ErrorCode::kConfig, "epochs must be >= 0");
    if (batch_size < 1) fail(ErrorCode::kConfig, "batch_size must be >= 1");
    if (!(train_fraction > 0.0f && train_fraction < 1.0f))
      fail(ErrorCode::kConfig, "train_fraction must be in (0,1)");
    if (input_size < 0) fail(ErrorCode::kConfig, "input_size must be positive");
    if (synthetic_per_class < 1) fail(ErrorCode::kConfig, "synthetic.per_class must be >= 1");
    if (!synthetic && data_root.empty() && init_backbone.empty() && eval_root.empty())
      fail(ErrorCode::kConfig, "either data_root or synthetic = true is required");
    densenet.validate();
    head.validate();
    optimizer.validate();
    augment.validate();
  }

  int resolved_input_size() const { return input_size > 0 ? input_size : densenet.input_h; }

  // Canonical echo of every resolved value; identical configs produce
  // identical text, which keeps reports and model files byte-stable.
  std::string echo() const {
    std::ostringstream os;
    char buf[64];
    auto f = [&buf](float v) {
      std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
      return std::string(buf);
    };
    os << "augment.hflip_prob = " << f(augment.hflip_prob) << "\n";
    os << "augment.rotation_degrees = " << f(augment.rotation_degrees) << "\n";
    os << "augment.vflip_prob = " << f(augment.vflip_prob) << "\n";
    os << "batch_size = " << batch_size << "\n";
    if (!data_root.empty()) os << "data_root = " << data_root << "\n";
    os << "epochs = " << epochs << "\n";
    if (!eval_root.empty()) os << "eval_root = " << eval_root << "\n";
    os << "freeze = " << (freeze ? "true" : "false") << "\n";
    os << "head.classes = " << head.n_classes << "\n";
    os << "head.dropout = " << f(head.dropout_rate) << "\n";
    os << "head.neurons = " << head.neurons << "\n";
    if (!init_backbone.empty()) os << "init_backbone = " << init_backbone << "\n";
    os << "input_size = " << resolved_input_size() << "\n";
    os << "model.block_layers =";
    for (int b : densenet.block_layers) os << " " << b;
    os << "\n";
    os << "model.bottleneck_width = " << densenet.bottleneck_width << "\n";
    os << "model.compression = " << f(densenet.compression) << "\n";
    os << "model.growth_rate = " << densenet.growth_rate << "\n";
    os << "model.preset = " << preset << "\n";
    os << "model.stem_channels = " << densenet.stem_channels << "\n";
    os << "optimizer.beta1 = " << f(optimizer.beta1) << "\n";
    os << "optimizer.beta2 = " << f(optimizer.beta2) << "\n";
    os << "optimizer.epsilon = " << f(optimizer.epsilon) << "\n";
    os << "optimizer.kind = " << opt_kind_name(optimizer.kind) << "\n";
    os << "optimizer.learning_rate = " << f(optimizer.learning_rate) << "\n";
    os << "optimizer.momentum = " << f(optimizer.momentum) << "\n";
    os << "optimizer.rho = " << f(optimizer.rho) << "\n";
    os << "seed = " << seed << "\n";
    os << "synthetic = " << (synthetic ? "true" : "false") << "\n";
    if (synthetic) {
      os << "synthetic.per_class = " << synthetic_per_class << "\n";
      os << "synthetic.task = " << (synthetic_task == SynthTask::kA ? "a" : "b") << "\n";
    }
    os << "train_fraction = " << f(train_fraction) << "\n";
    return os.str();
  }
};

// ---- Reports ----------------------------------------------------------------

struct RunReport {
  std::vector<EpochStats> curve;
  EvalResult final_eval;
  MetricReport metrics;
  double wall_seconds = 0.0;  // console only, never written to files
  std::string config_echo;
  std::string model_path;
};

struct SweepRow {
  std::string axis_value;
  RunReport report;
};

struct SweepReport {
  std::string axis_name;
  std::vector<SweepRow> rows;
};

namespace detail {

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorCode::kIo, "cannot open '" + path + "' for writing");
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!f) fail(ErrorCode::kIo, "short write to '" + path + "'");
}

inline std::string g9(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace detail

inline std::string curves_csv(const RunReport& r) {
  std::string out = "epoch,train_loss,train_acc,val_loss,val_acc\n";
  for (const EpochStats& e : r.curve) {
    out += std::to_string(e.epoch) + "," + detail::g9(e.train_loss) + "," +
           detail::g9(e.train_acc) + "," + detail::g9(e.val_loss) + "," + detail::g9(e.val_acc) +
           "\n";
  }
  return out;
}

inline std::string run_report_text(const RunReport& r) {
  std::string out = "# run report\n\n## config\n" + r.config_echo + "\n## result\n";
  if (!r.curve.empty()) {
    out += "final_train_acc = " + format_pct(r.curve.back().train_acc) + "\n";
    out += "final_val_acc = " + format_pct(r.curve.back().val_acc) + "\n";
  }
  out += "cm_acc = " + format_pct(r.metrics.accuracy) + "\n";
  out += "precision = " + format_pct(r.metrics.precision_macro) + "\n";
  out += "recall = " + format_pct(r.metrics.recall_macro) + "\n";
  out += "f1 = " + format_pct(r.metrics.f1_macro) + "\n";
  out += "correct = " + std::to_string(r.metrics.correct) + " of " +
         std::to_string(r.metrics.total) + "\n";
  if (!r.model_path.empty())
    out += "model = " + std::filesystem::path(r.model_path).filename().string() + "\n";
  out += "\n## confusion matrix\n" + render_confusion(r.final_eval.cm);
  return out;
}

inline std::string sweep_csv(const SweepReport& s) {
  std::string out = "axis_value,train_acc,val_acc,cm_acc,precision,recall,f1\n";
  for (const SweepRow& row : s.rows) {
    const RunReport& r = row.report;
    double train_acc = r.curve.empty() ? 0.0 : r.curve.back().train_acc;
    double val_acc = r.curve.empty() ? 0.0 : r.curve.back().val_acc;
    out += row.axis_value + "," + format_pct(train_acc) + "," + format_pct(val_acc) + "," +
           format_pct(r.metrics.accuracy) + "," + format_pct(r.metrics.precision_macro) + "," +
           format_pct(r.metrics.recall_macro) + "," + format_pct(r.metrics.f1_macro) + "\n";
  }
  return out;
}

inline std::string sweep_table_text(const SweepReport& s) {
  std::string out = s.axis_name + "\tTraining\tValidation\tAccuracy\tPrecision\tRecall\tF1-Score\n";
  for (const SweepRow& row : s.rows) {
    const RunReport& r = row.report;
    double train_acc = r.curve.empty() ? 0.0 : r.curve.back().train_acc;
    double val_acc = r.curve.empty() ? 0.0 : r.curve.back().val_acc;
    out += row.axis_value + "\t" + format_pct(train_acc) + "\t" + format_pct(val_acc) + "\t" +
           format_pct(r.metrics.accuracy) + "\t" + format_pct(r.metrics.precision_macro) + "\t" +
           format_pct(r.metrics.recall_macro) + "\t" + format_pct(r.metrics.f1_macro) + "\n";
  }
  return out;
}

// ---- Orchestration -----------------------------------------------------------

namespace detail {

inline Dataset load_training_data(const ExperimentConfig& cfg) {
  int hw = cfg.resolved_input_size();
  Dataset ds;
  if (cfg.synthetic) {
    ds = make_synthetic_dataset(cfg.synthetic_per_class, hw, cfg.synthetic_task, cfg.seed);
  } else {
    ds = load_dataset(cfg.data_root);
    for (ImageRecord& r : ds.records) r = resize(r, hw, hw);
  }
  return ds;
}

// Model per config: fresh build, or a saved backbone re-headed for transfer.
inline ModelSpec make_model(const ExperimentConfig& cfg, const Dataset& ds) {
  DenseNetConfig net = cfg.densenet;
  net.input_h = net.input_w = cfg.resolved_input_size();
  HeadConfig head = cfg.head;
  head.n_classes = ds.n_classes();

  ModelSpec m;
  if (!cfg.init_backbone.empty()) {
    LoadedModel loaded = load_model_file(cfg.init_backbone);
    m = std::move(loaded.model);
    if (m.input_h != net.input_h)
      fail(ErrorCode::kConfig, "init_backbone input size " + std::to_string(m.input_h) +
                                   " != configured " + std::to_string(net.input_h));
    m.layers.resize(static_cast<size_t>(m.backbone_len));  // drop the old head
    // Re-enable gradients in case the saved model was frozen; freezing is
    // re-applied below per the current config.
    for (Layer& l : m.layers) {
      l.trainable = true;
      visit_params(l, [](Layer&, Tensor& t, bool is_stat) {
        if (!is_stat) t = t.with_requires_grad(true);
      });
    }
    detail::InitContext init{cfg.seed, count_param_layers(m)};
    int c_gap = m.trace.back().channels;
    for (Layer& l : build_head(c_gap, head, init)) m.layers.push_back(std::move(l));
    m.seed = cfg.seed;
  } else {
    m = build_model(net, head, cfg.seed);
  }
  m.class_names = ds.class_names;
  m.config_echo = cfg.echo();
  if (cfg.freeze) freeze_backbone(m);
  return m;
}

}  // namespace detail

inline RunReport run_training(const ExperimentConfig& cfg) {
  cfg.validate();
  auto t0 = std::chrono::steady_clock::now();
  namespace fs = std::filesystem;

  Dataset all = detail::load_training_data(cfg);
  auto [train_ds, val_ds] = split(all, cfg.train_fraction, cfg.seed);
  ModelSpec model = detail::make_model(cfg, all);

  RunReport report;
  report.config_echo = cfg.echo();

  Trainer trainer(model, cfg.optimizer);
  const AugmentSpec* aug = cfg.augment.is_noop() ? nullptr : &cfg.augment;
  for (int e = 0; e < cfg.epochs; ++e) {
    auto [tl, ta] = trainer.run_epoch(train_ds, e, cfg.batch_size, cfg.seed, aug);
    EvalResult ev = evaluate(model, val_ds, cfg.batch_size);
    report.curve.push_back({e, tl, ta, ev.loss, ev.acc});
  }

  // Final confusion matrix on the validation split, or on the separate
  // held-out directory when one is configured.
  if (!cfg.eval_root.empty()) {
    Dataset test = load_dataset(cfg.eval_root);
    int hw = cfg.resolved_input_size();
    for (ImageRecord& r : test.records) r = resize(r, hw, hw);
    report.final_eval = evaluate(model, test, cfg.batch_size);
  } else {
    report.final_eval = evaluate(model, val_ds, cfg.batch_size);
  }
  report.metrics = summarize(report.final_eval.cm);

  if (!cfg.out_dir.empty()) {
    fs::create_directories(cfg.out_dir);
    report.model_path = (fs::path(cfg.out_dir) / "model.dgm").string();
    save_model(model, report.model_path);
    detail::write_text_file((fs::path(cfg.out_dir) / "curves.csv").string(), curves_csv(report));
    detail::write_text_file((fs::path(cfg.out_dir) / "report.txt").string(),
                            run_report_text(report));
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

inline std::vector<std::string> default_axis_values(const std::string& axis) {
  if (axis == "dropout") return {"0.1", "0.2", "0.3", "0.4", "0.5", "0.6"};
  if (axis == "optimizer") return {"adam", "sgd", "rmsprop"};
  fail(ErrorCode::kConfig, "sweep axis must be 'dropout' or 'optimizer'");
}

// One run per axis value with everything else pinned: same seed, same split,
// same backbone init. Emits sweep.csv and sweep.txt under cfg.out.
inline SweepReport run_sweep(const ExperimentConfig& cfg, const std::string& axis,
                             std::vector<std::string> values = {}) {
  if (values.empty()) values = default_axis_values(axis);
  namespace fs = std::filesystem;
  SweepReport sweep;
  sweep.axis_name = axis;
  for (const std::string& value : values) {
    ExperimentConfig row_cfg = cfg;
    if (axis == "dropout") {
      row_cfg.head.dropout_rate = detail::to_float(value, "sweep dropout value");
    } else if (axis == "optimizer") {
      OptimizerHyper base = OptimizerHyper::defaults_for(opt_kind_from_name(value));
      row_cfg.optimizer = base;
    } else {
      fail(ErrorCode::kConfig, "sweep axis must be 'dropout' or 'optimizer'");
    }
    row_cfg.out_dir = cfg.out_dir.empty()
                          ? ""
                          : (fs::path(cfg.out_dir) / (axis + "_" + value)).string();
    try {
      sweep.rows.push_back({value, run_training(row_cfg)});
    } catch (const Error& e) {
      fail(e.code(), "sweep " + axis + " = " + value + " failed: " + e.what());
    }
  }
  if (!cfg.out_dir.empty()) {
    fs::create_directories(cfg.out_dir);
    detail::write_text_file((fs::path(cfg.out_dir) / "sweep.csv").string(), sweep_csv(sweep));
    detail::write_text_file((fs::path(cfg.out_dir) / "sweep.txt").string(),
                            sweep_table_text(sweep));
  }
  return sweep;
}

// ---- Prediction ---------------------------------------------------------------

struct Prediction {
  std::string source;
  int pred = -1;
  std::vector<float> probs;
};

struct PredictionReport {
  std::vector<std::string> class_names;
  std::vector<Prediction> items;
  bool has_labels = false;
  int64_t correct = 0;
  ConfusionMatrix cm;
  MetricReport metrics;
};

namespace detail {

inline PredictionReport predict_records(ModelSpec& model, const std::vector<ImageRecord>& records,
                                        bool labeled) {
  PredictionReport out;
  out.class_names = model.class_names;
  int k = static_cast<int>(model.class_names.size());
  if (k < 2) fail(ErrorCode::kData, "predict: model carries no class names");
  std::vector<int> preds, labels;
  for (const ImageRecord& rec : records) {
    ImageRecord sized = resize(rec, model.input_h, model.input_w);
    Tensor x = normalize(sized).reshaped_view({1, 3, model.input_h, model.input_w});
    Tensor probs = forward(model, x, Mode::kEval);
    if (probs.ndim() != 2 || probs.dim(1) != k)
      fail(ErrorCode::kData, "predict: model output width does not match its class list");
    Prediction p;
    p.source = rec.source_id;
    p.probs.assign(probs.data(), probs.data() + k);
    p.pred = argmax_rows(probs)[0];
    out.items.push_back(std::move(p));
    preds.push_back(out.items.back().pred);
    if (labeled) labels.push_back(rec.label);
  }
  if (labeled) {
    out.has_labels = true;
    out.correct = correct_count(preds, labels);
    out.cm = confusion(preds, labels, k);
    out.cm.class_names = model.class_names;
    out.metrics = summarize(out.cm);
  }
  return out;
}

}  // namespace detail

inline PredictionReport predict_files(ModelSpec& model, const std::vector<std::string>& paths) {
  std::vector<ImageRecord> records;
  for (const std::string& p : paths) {
    ImageRecord img = load_image_file(p);
    img.source_id = p;
    records.push_back(std::move(img));
  }
  return detail::predict_records(model, records, false);
}

inline PredictionReport predict_dataset(ModelSpec& model, const Dataset& ds) {
  if (static_cast<int>(model.class_names.size()) != ds.n_classes())
    fail(ErrorCode::kData, "predict: model has " + std::to_string(model.class_names.size()) +
                               " classes, dataset has " + std::to_string(ds.n_classes()));
  return detail::predict_records(model, ds.records, true);
}

}  // namespace dgm
