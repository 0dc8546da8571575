// dgm command line: config-driven training runs, dropout/optimizer sweeps,
// prediction, evaluation, and model inspection.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dgm/densenet.hpp"
#include "dgm/experiment.hpp"
#include "dgm/serialize.hpp"

namespace {

int exit_code_for(dgm::ErrorCode c) {
  using dgm::ErrorCode;
  switch (c) {
    case ErrorCode::kConfig: return 2;
    case ErrorCode::kData: return 3;
    case ErrorCode::kIo: return 4;
    case ErrorCode::kBadMagic:
    case ErrorCode::kBadVersion:
    case ErrorCode::kTruncated:
    case ErrorCode::kChecksum: return 5;
    default: return 6;
  }
}

struct CommonFlags {
  std::string config_path;
  std::string data_dir;
  std::string out;
  std::string seed, epochs, batch_size, dropout, optimizer, preset;
  bool synthetic = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "key = value config file");
    cmd->add_option("--data-dir", data_dir, "directory-per-class dataset root");
    cmd->add_option("--out", out, "output directory");
    cmd->add_option("--seed", seed, "global seed");
    cmd->add_option("--epochs", epochs, "training epochs");
    cmd->add_option("--batch-size", batch_size, "batch size");
    cmd->add_option("--dropout", dropout, "head dropout rate");
    cmd->add_option("--optimizer", optimizer, "adam | sgd | rmsprop");
    cmd->add_option("--preset", preset, "densenet201 | toy");
    cmd->add_flag("--synthetic", synthetic, "use the built-in synthetic dataset");
  }

  dgm::ExperimentConfig resolve() const {
    dgm::ConfigMap map = config_path.empty() ? dgm::ConfigMap::parse("")
                                             : dgm::ConfigMap::parse_file(config_path);
    if (!data_dir.empty()) map.set("data_root", data_dir);
    if (!out.empty()) map.set("out", out);
    if (!seed.empty()) map.set("seed", seed);
    if (!epochs.empty()) map.set("epochs", epochs);
    if (!batch_size.empty()) map.set("batch_size", batch_size);
    if (!dropout.empty()) map.set("head.dropout", dropout);
    if (!optimizer.empty()) map.set("optimizer.kind", optimizer);
    if (!preset.empty()) map.set("model.preset", preset);
    if (synthetic) map.set("synthetic", "true");
    return dgm::ExperimentConfig::from_map(map);
  }
};

void print_run_summary(const dgm::RunReport& r) {
  if (!r.curve.empty()) {
    const dgm::EpochStats& last = r.curve.back();
    std::printf("final epoch %d: train_loss %.4f train_acc %s%% val_loss %.4f val_acc %s%%\n",
                last.epoch, last.train_loss, dgm::format_pct(last.train_acc).c_str(),
                last.val_loss, dgm::format_pct(last.val_acc).c_str());
  }
  std::printf("confusion accuracy %s%% precision %s%% recall %s%% f1 %s%% (%lld of %lld)\n",
              dgm::format_pct(r.metrics.accuracy).c_str(),
              dgm::format_pct(r.metrics.precision_macro).c_str(),
              dgm::format_pct(r.metrics.recall_macro).c_str(),
              dgm::format_pct(r.metrics.f1_macro).c_str(),
              static_cast<long long>(r.metrics.correct), static_cast<long long>(r.metrics.total));
  if (!r.model_path.empty()) std::printf("model saved to %s\n", r.model_path.c_str());
  std::printf("wall time %.1fs\n", r.wall_seconds);
}

dgm::Dataset eval_dataset_for(const dgm::ModelSpec& model, const CommonFlags& flags) {
  if (flags.synthetic) {
    uint64_t seed = flags.seed.empty() ? 0 : std::stoull(flags.seed);
    return dgm::make_synthetic_dataset(20, model.input_h, dgm::SynthTask::kA, seed);
  }
  if (flags.data_dir.empty())
    dgm::fail(dgm::ErrorCode::kConfig, "need --data-dir or --synthetic");
  dgm::Dataset ds = dgm::load_dataset(flags.data_dir);
  for (dgm::ImageRecord& r : ds.records) r = dgm::resize(r, model.input_h, model.input_w);
  return ds;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dgm: a small deterministic deep-learning engine"};
  app.require_subcommand(1);

  CommonFlags train_flags, sweep_flags, eval_flags, predict_flags;
  std::string sweep_axis;
  std::string model_path;
  std::vector<std::string> predict_inputs;

  CLI::App* train_cmd = app.add_subcommand("train", "run one training experiment");
  train_flags.attach(train_cmd);

  CLI::App* sweep_cmd = app.add_subcommand("sweep", "run a dropout or optimizer sweep");
  sweep_flags.attach(sweep_cmd);
  sweep_cmd->add_option("--axis", sweep_axis, "dropout | optimizer")->required();

  CLI::App* predict_cmd = app.add_subcommand("predict", "classify images with a saved model");
  predict_cmd->add_option("--model", model_path, "model file (.dgm)")->required();
  predict_cmd->add_option("inputs", predict_inputs, "image files");
  predict_flags.attach(predict_cmd);

  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a saved model on a dataset");
  eval_cmd->add_option("--model", model_path, "model file (.dgm)")->required();
  eval_flags.attach(eval_cmd);

  CLI::App* inspect_cmd = app.add_subcommand("inspect", "print a saved model's structure");
  inspect_cmd->add_option("--model", model_path, "model file (.dgm)")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_cmd->parsed()) {
      dgm::RunReport r = dgm::run_training(train_flags.resolve());
      print_run_summary(r);
    } else if (sweep_cmd->parsed()) {
      dgm::ExperimentConfig cfg = sweep_flags.resolve();
      dgm::SweepReport s = dgm::run_sweep(cfg, sweep_axis);
      std::printf("%s", dgm::sweep_table_text(s).c_str());
      if (!cfg.out_dir.empty()) std::printf("reports under %s\n", cfg.out_dir.c_str());
    } else if (predict_cmd->parsed()) {
      dgm::LoadedModel loaded = dgm::load_model_file(model_path);
      dgm::PredictionReport report;
      if (!predict_flags.data_dir.empty()) {
        dgm::Dataset ds = dgm::load_dataset(predict_flags.data_dir);
        report = dgm::predict_dataset(loaded.model, ds);
      } else {
        if (predict_inputs.empty())
          dgm::fail(dgm::ErrorCode::kConfig, "predict needs image paths or --data-dir");
        report = dgm::predict_files(loaded.model, predict_inputs);
      }
      for (const dgm::Prediction& p : report.items) {
        std::printf("%s -> %s [", p.source.c_str(),
                    report.class_names[static_cast<size_t>(p.pred)].c_str());
        for (size_t i = 0; i < p.probs.size(); ++i)
          std::printf("%s%.4f", i ? " " : "", p.probs[i]);
        std::printf("]\n");
      }
      if (report.has_labels) {
        std::printf("correct %lld of %zu, accuracy %s%%\n",
                    static_cast<long long>(report.correct), report.items.size(),
                    dgm::format_pct(report.metrics.accuracy).c_str());
        std::printf("%s", dgm::render_confusion(report.cm).c_str());
      }
    } else if (eval_cmd->parsed()) {
      dgm::LoadedModel loaded = dgm::load_model_file(model_path);
      dgm::Dataset ds = eval_dataset_for(loaded.model, eval_flags);
      dgm::EvalResult ev = dgm::evaluate(loaded.model, ds, 64);
      dgm::MetricReport m = dgm::summarize(ev.cm);
      std::printf("loss %.4f accuracy %s%% precision %s%% recall %s%% f1 %s%%\n", ev.loss,
                  dgm::format_pct(m.accuracy).c_str(), dgm::format_pct(m.precision_macro).c_str(),
                  dgm::format_pct(m.recall_macro).c_str(), dgm::format_pct(m.f1_macro).c_str());
      std::printf("%s", dgm::render_confusion(ev.cm).c_str());
    } else if (inspect_cmd->parsed()) {
      dgm::LoadedModel loaded = dgm::load_model_file(model_path);
      dgm::ModelSpec& m = loaded.model;
      std::printf("input: %dx%dx%d, seed %llu, backbone layers %d of %zu\n", m.input_c, m.input_h,
                  m.input_w, static_cast<unsigned long long>(m.seed), m.backbone_len,
                  m.layers.size());
      dgm::ParamCount pc = dgm::param_count(m);
      std::printf("parameters: %lld trainable, %lld total\n",
                  static_cast<long long>(pc.trainable), static_cast<long long>(pc.total));
      std::printf("classes:");
      for (const std::string& c : m.class_names) std::printf(" %s", c.c_str());
      std::printf("\ntrace:");
      for (const dgm::StageShape& s : m.trace)
        std::printf(" %s=%dx%dx%d", s.label.c_str(), s.channels, s.height, s.width);
      std::printf("\nlayers:\n");
      for (size_t i = 0; i < m.layers.size(); ++i)
        std::printf("  %3zu %-12s %s%s\n", i, dgm::layer_kind_name(m.layers[i].kind),
                    m.layers[i].name.c_str(), m.layers[i].trainable ? "" : " [frozen]");
      if (!m.config_echo.empty()) std::printf("config:\n%s", m.config_echo.c_str());
    }
  } catch (const dgm::Error& e) {
    std::fprintf(stderr, "error [%s]: %s\n", dgm::error_code_name(e.code()), e.what());
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
