#pragma once

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include "dgm/image.hpp"
#include "dgm/rng.hpp"
#include "dgm/tensor.hpp"

namespace dgm {

// Labeled image collection. Record order is stable: lexicographic by path
// for directory loads, construction order otherwise.
struct Dataset {
  std::vector<ImageRecord> records;
  std::vector<std::string> class_names;

  int n_classes() const { return static_cast<int>(class_names.size()); }
  size_t size() const { return records.size(); }
};

// Directory-per-class layout: root/<class_name>/<image files>. Class names
// are the sorted subdirectory names; every regular file must decode.
inline Dataset load_dataset(const std::string& root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) fail(ErrorCode::kData, root + ": not a directory");
  Dataset ds;
  std::vector<fs::path> class_dirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) class_dirs.push_back(e.path());
  if (class_dirs.empty()) fail(ErrorCode::kData, root + ": no class subdirectories");
  std::sort(class_dirs.begin(), class_dirs.end());

  for (size_t label = 0; label < class_dirs.size(); ++label) {
    ds.class_names.push_back(class_dirs[label].filename().string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(class_dirs[label])) {
      if (!e.is_regular_file())
        fail(ErrorCode::kData, e.path().string() + ": unexpected non-file entry");
      files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const fs::path& f : files) {
      ImageRecord img = load_image_file(f.string());
      img.label = static_cast<int>(label);
      img.source_id = fs::relative(f, root).string();
      ds.records.push_back(std::move(img));
    }
  }
  return ds;
}

// Augmentation bounds: rotation angle is drawn from U(-r, +r), flips fire
// independently with their probabilities.
struct AugmentSpec {
  float rotation_degrees = 0.0f;
  float hflip_prob = 0.0f;
  float vflip_prob = 0.0f;

  void validate() const {
    if (rotation_degrees < 0.0f) fail(ErrorCode::kInvalidArgument, "augment: rotation must be >= 0");
    if (hflip_prob < 0.0f || hflip_prob > 1.0f || vflip_prob < 0.0f || vflip_prob > 1.0f)
      fail(ErrorCode::kInvalidArgument, "augment: flip probabilities must be in [0,1]");
  }

  bool is_noop() const {
    return rotation_degrees == 0.0f && hflip_prob == 0.0f && vflip_prob == 0.0f;
  }
};

// Draw order is fixed (rotation, hflip, vflip) and parameters with zero
// weight draw nothing, so a (0,0,0) spec consumes no randomness.
inline ImageRecord augment(const ImageRecord& img, const AugmentSpec& spec, RngStream& rng) {
  spec.validate();
  ImageRecord out = img;
  if (spec.rotation_degrees > 0.0f) {
    float angle = rng.next_uniform(-spec.rotation_degrees, spec.rotation_degrees);
    out = rotate(out, angle);
  }
  if (spec.hflip_prob > 0.0f && rng.next_u01() < spec.hflip_prob) out = hflip(out);
  if (spec.vflip_prob > 0.0f && rng.next_u01() < spec.vflip_prob) out = vflip(out);
  return out;
}

// Stratified split: per class, a seeded shuffle then a round-half-up cut at
// the training fraction. Disjoint and exhaustive by construction.
inline std::pair<Dataset, Dataset> split(const Dataset& ds, float train_fraction, uint64_t seed) {
  if (!(train_fraction > 0.0f && train_fraction < 1.0f))
    fail(ErrorCode::kInvalidArgument, "split: train fraction must be in (0,1)");
  Dataset train, val;
  train.class_names = val.class_names = ds.class_names;
  for (int c = 0; c < ds.n_classes(); ++c) {
    std::vector<size_t> idx;
    for (size_t i = 0; i < ds.records.size(); ++i)
      if (ds.records[i].label == c) idx.push_back(i);
    if (idx.empty())
      fail(ErrorCode::kData, "split: class '" + ds.class_names[static_cast<size_t>(c)] +
                                 "' has no records");
    RngStream rng(mix64(seed, kStreamSplit, static_cast<uint64_t>(c)));
    rng.shuffle(idx);
    size_t n_train = static_cast<size_t>(
        std::floor(train_fraction * static_cast<float>(idx.size()) + 0.5f));
    for (size_t i = 0; i < idx.size(); ++i)
      (i < n_train ? train : val).records.push_back(ds.records[idx[i]]);
  }
  return {std::move(train), std::move(val)};
}

struct Batch {
  Tensor input;          // N x 3 x H x W
  Tensor labels_onehot;  // N x K
  std::vector<int> labels;
  std::vector<size_t> record_indices;
};

struct BatchOptions {
  int batch_size = 64;
  bool shuffle = true;
  uint64_t seed = 0;
  int epoch = 0;
  const AugmentSpec* augment = nullptr;  // applied per record when set
};

// Deterministic batch stream over one epoch. The permutation is keyed by
// (seed, epoch); augmentation randomness by (seed, epoch, record index), so
// neither emission order nor prefetching can change the pixels.
class BatchIterator {
 public:
  BatchIterator(const Dataset& ds, BatchOptions opts) : ds_(ds), opts_(opts) {
    if (ds.records.empty()) fail(ErrorCode::kData, "batches: empty dataset");
    if (opts.batch_size < 1) fail(ErrorCode::kInvalidArgument, "batches: batch_size must be >= 1");
    perm_.resize(ds.records.size());
    for (size_t i = 0; i < perm_.size(); ++i) perm_[i] = i;
    if (opts.shuffle) {
      RngStream rng(mix64(opts.seed, kStreamShuffle, static_cast<uint64_t>(opts.epoch)));
      rng.shuffle(perm_);
    }
  }

  bool next(Batch& out) {
    if (pos_ >= perm_.size()) return false;
    size_t n = std::min(static_cast<size_t>(opts_.batch_size), perm_.size() - pos_);
    int k = ds_.n_classes();
    const ImageRecord& first = ds_.records[perm_[pos_]];
    int h = first.height, w = first.width;
    out.input = Tensor::zeros({static_cast<int>(n), 3, h, w});
    out.labels_onehot = Tensor::zeros({static_cast<int>(n), k});
    out.labels.assign(n, 0);
    out.record_indices.assign(n, 0);
    int64_t sample_sz = static_cast<int64_t>(3) * h * w;
    for (size_t i = 0; i < n; ++i) {
      size_t ri = perm_[pos_ + i];
      const ImageRecord& rec = ds_.records[ri];
      if (rec.height != h || rec.width != w)
        fail(ErrorCode::kData, "batches: record " + rec.source_id + " has mismatched size");
      Tensor px;
      if (opts_.augment && !opts_.augment->is_noop()) {
        RngStream rng(mix64(opts_.seed, kStreamAugment, static_cast<uint64_t>(opts_.epoch),
                            static_cast<uint64_t>(ri)));
        px = normalize(augment(rec, *opts_.augment, rng));
      } else {
        px = normalize(rec);
      }
      std::memcpy(out.input.mutable_data() + static_cast<int64_t>(i) * sample_sz, px.data(),
                  sizeof(float) * static_cast<size_t>(sample_sz));
      if (rec.label < 0 || rec.label >= k)
        fail(ErrorCode::kData, "batches: record " + rec.source_id + " has label out of range");
      out.labels_onehot.mutable_data()[i * static_cast<size_t>(k) + static_cast<size_t>(rec.label)] = 1.0f;
      out.labels[i] = rec.label;
      out.record_indices[i] = ri;
    }
    pos_ += n;
    return true;
  }

 private:
  const Dataset& ds_;
  BatchOptions opts_;
  std::vector<size_t> perm_;
  size_t pos_ = 0;
};

// ---- Synthetic fixture data -------------------------------------------------

enum class SynthTask { kA, kB };

// Separable three-class blob images: each class paints a filled disc in its
// own color over low noise. Task B remaps the class colors so a backbone
// pretrained on task A transfers but the head must relearn.
inline Dataset make_synthetic_dataset(int per_class, int hw, SynthTask task, uint64_t seed) {
  if (per_class < 1 || hw < 8) fail(ErrorCode::kInvalidArgument, "synthetic: bad size");
  static const uint8_t colors_a[3][3] = {{220, 40, 40}, {40, 220, 40}, {40, 40, 220}};
  static const uint8_t colors_b[3][3] = {{220, 220, 40}, {40, 220, 220}, {220, 40, 220}};
  Dataset ds;
  ds.class_names = {"synthetic_0", "synthetic_1", "synthetic_2"};
  uint64_t task_tag = task == SynthTask::kA ? 0xA : 0xB;
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < per_class; ++i) {
      RngStream rng(mix64(seed, kStreamSynthetic, task_tag,
                          static_cast<uint64_t>(c) * 1000003ull + static_cast<uint64_t>(i)));
      ImageRecord img = ImageRecord::blank(hw, hw);
      for (size_t p = 0; p < img.pixels.size(); ++p)
        img.pixels[p] = static_cast<uint8_t>(rng.next_below(40));
      float cx = rng.next_uniform(0.3f, 0.7f) * static_cast<float>(hw);
      float cy = rng.next_uniform(0.3f, 0.7f) * static_cast<float>(hw);
      float r = rng.next_uniform(0.18f, 0.3f) * static_cast<float>(hw);
      const uint8_t* base = task == SynthTask::kA ? colors_a[c] : colors_b[c];
      for (int y = 0; y < hw; ++y) {
        for (int x = 0; x < hw; ++x) {
          float dy = static_cast<float>(y) - cy, dx = static_cast<float>(x) - cx;
          if (dy * dy + dx * dx <= r * r) {
            for (int ch = 0; ch < 3; ++ch) {
              int v = static_cast<int>(base[ch]) + static_cast<int>(rng.next_below(31)) - 15;
              img.set(y, x, ch, static_cast<uint8_t>(std::clamp(v, 0, 255)));
            }
          }
        }
      }
      img.label = c;
      img.source_id = "synthetic/" + std::string(task == SynthTask::kA ? "a" : "b") + "/class" +
                      std::to_string(c) + "/" + std::to_string(i);
      ds.records.push_back(std::move(img));
    }
  }
  return ds;
}

}  // namespace dgm
