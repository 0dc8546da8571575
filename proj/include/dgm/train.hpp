#pragma once

#include <utility>
#include <vector>

#include "dgm/data.hpp"
#include "dgm/metrics.hpp"
#include "dgm/model.hpp"
#include "dgm/optim.hpp"

namespace dgm {

inline std::vector<int> argmax_rows(const Tensor& probs) {
  int n = probs.dim(0), k = probs.dim(1);
  std::vector<int> out(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const float* row = probs.data() + static_cast<int64_t>(i) * k;
    int best = 0;
    for (int j = 1; j < k; ++j)
      if (row[j] > row[best]) best = j;
    out[static_cast<size_t>(i)] = best;
  }
  return out;
}

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0, train_acc = 0.0;
  double val_loss = 0.0, val_acc = 0.0;
};

struct EvalResult {
  double loss = 0.0;
  double acc = 0.0;
  ConfusionMatrix cm;
};

// Evaluation pass: eval mode, no tape, no dropout randomness, original
// dataset order. Mutates nothing on the model.
inline EvalResult evaluate(ModelSpec& m, const Dataset& ds, int batch_size) {
  BatchIterator it(ds, {batch_size, false, 0, 0, nullptr});
  Batch b;
  double loss_sum = 0.0;
  int64_t n = 0;
  std::vector<int> preds, labels;
  while (it.next(b)) {
    Tensor logits = forward_logits(m, b.input, Mode::kEval);
    SoftmaxLossResult r = softmax_cross_entropy(nullptr, logits, b.labels_onehot);
    loss_sum += r.loss.scalar_f64() * b.input.dim(0);
    std::vector<int> am = argmax_rows(r.probs);
    preds.insert(preds.end(), am.begin(), am.end());
    labels.insert(labels.end(), b.labels.begin(), b.labels.end());
    n += b.input.dim(0);
  }
  EvalResult out;
  out.loss = loss_sum / static_cast<double>(n);
  out.cm = confusion(preds, labels, ds.n_classes());
  out.cm.class_names = ds.class_names;
  out.acc = static_cast<double>(out.cm.trace()) / static_cast<double>(n);
  return out;
}

// Owns the optimizer state for one model's trainable parameters. Epoch
// randomness (shuffle, augmentation, dropout) is keyed by (seed, epoch), so
// a run resumed from a checkpoint at an epoch boundary replays the exact
// stream of the uninterrupted run.
class Trainer {
 public:
  Trainer(ModelSpec& model, const OptimizerHyper& hyper) : model_(model) {
    collect_params();
    state_ = init_state(params_, hyper);
  }

  // Resume with previously serialized optimizer state.
  Trainer(ModelSpec& model, OptimizerState state) : model_(model) {
    collect_params();
    if (state.m.size() != params_.size())
      fail(ErrorCode::kShapeMismatch, "trainer: optimizer state does not match trainable set");
    for (size_t i = 0; i < params_.size(); ++i)
      if (!state.m[i].same_shape(*params_[i]))
        fail(ErrorCode::kShapeMismatch, "trainer: optimizer buffer shape mismatch");
    state_ = std::move(state);
  }

  std::pair<double, double> run_epoch(const Dataset& ds, int epoch, int batch_size, uint64_t seed,
                                      const AugmentSpec* aug) {
    BatchIterator it(ds, {batch_size, true, seed, epoch, aug});
    RngStream drop_rng(mix64(seed, kStreamDropout, static_cast<uint64_t>(epoch)));
    Batch b;
    double loss_sum = 0.0;
    int64_t correct = 0, n = 0;
    while (it.next(b)) {
      Tape tape;
      Tensor logits = forward_logits(model_, b.input, Mode::kTrain, &tape, &drop_rng);
      SoftmaxLossResult r = softmax_cross_entropy(&tape, logits, b.labels_onehot);
      Gradients grads = tape.backward(r.loss);
      std::vector<Tensor> gs;
      gs.reserve(params_.size());
      for (Tensor* p : params_) gs.push_back(grads.grad_for(*p));
      step(state_, params_, gs);
      loss_sum += r.loss.scalar_f64() * b.input.dim(0);
      std::vector<int> am = argmax_rows(r.probs);
      for (size_t i = 0; i < am.size(); ++i)
        if (am[i] == b.labels[i]) ++correct;
      n += b.input.dim(0);
    }
    return {loss_sum / static_cast<double>(n), static_cast<double>(correct) / static_cast<double>(n)};
  }

  const OptimizerState& state() const { return state_; }

 private:
  void collect_params() {
    model_.for_each_param([this](Layer& l, Tensor& t, bool is_stat) {
      if (l.trainable && !is_stat) params_.push_back(&t);
    });
    if (params_.empty()) fail(ErrorCode::kInvalidArgument, "trainer: no trainable parameters");
  }

  ModelSpec& model_;
  std::vector<Tensor*> params_;
  OptimizerState state_;
};

}  // namespace dgm
