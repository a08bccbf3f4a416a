/* Copyright 2026 The GradPrune Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "gradprune/data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "gradprune/errors.hpp"
#include "gradprune/io.hpp"

namespace gradprune {

namespace {

constexpr std::uint64_t kPatternSeed = 0x9e3779b97f4a7c15ULL;
constexpr std::size_t kPatternGrid = 4;
constexpr double kPatternLow = 0.1;
constexpr double kPatternHigh = 0.7;
constexpr double kNoiseSigma = 0.12;

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

ImageShape LabeledDataset::image_shape() const {
  if (images.rank() != 4) return {};
  return {images.dim(1), images.dim(2), images.dim(3)};
}

Tensor LabeledDataset::image(std::size_t index) const {
  if (index >= size()) {
    throw InputError("sample " + std::to_string(index) + " out of range");
  }
  return images.rows(index, index + 1).reshaped(image_shape().chw());
}

Tensor LabeledDataset::batch(std::size_t begin, std::size_t end) const {
  return images.rows(begin, end);
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> indices) const {
  const ImageShape shape = image_shape();
  const std::size_t stride = shape.size();
  LabeledDataset out;
  out.num_classes = num_classes;
  if (indices.empty()) return out;
  std::vector<double> pixels;
  pixels.reserve(indices.size() * stride);
  out.labels.reserve(indices.size());
  for (std::size_t idx : indices) {
    if (idx >= size()) {
      throw InputError("subset index " + std::to_string(idx) + " out of range");
    }
    auto src = images.data().subspan(idx * stride, stride);
    pixels.insert(pixels.end(), src.begin(), src.end());
    out.labels.push_back(labels[idx]);
  }
  out.images = Tensor({indices.size(), shape.channels, shape.height, shape.width},
                      std::move(pixels));
  return out;
}

void LabeledDataset::validate() const {
  if (!empty() && (images.rank() != 4 || images.dim(0) != labels.size())) {
    throw DimensionError("dataset has " + std::to_string(labels.size()) +
                         " labels but images of shape " +
                         shape_to_string(images.shape()));
  }
  for (std::size_t label : labels) {
    if (label >= num_classes) {
      throw InputError("label " + std::to_string(label) + " outside [0, " +
                       std::to_string(num_classes) + ")");
    }
  }
  for (double v : images.data()) {
    if (!(v >= 0.0 && v <= 1.0)) throw InputError("pixel value outside [0,1]");
  }
}

LabeledDataset concat(const LabeledDataset& a, const LabeledDataset& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  if (!(a.image_shape() == b.image_shape()) || a.num_classes != b.num_classes) {
    throw DimensionError("cannot concatenate datasets of different shapes");
  }
  std::vector<double> pixels(a.images.data().begin(), a.images.data().end());
  pixels.insert(pixels.end(), b.images.data().begin(), b.images.data().end());
  const ImageShape s = a.image_shape();
  LabeledDataset out;
  out.num_classes = a.num_classes;
  out.images = Tensor({a.size() + b.size(), s.channels, s.height, s.width},
                      std::move(pixels));
  out.labels = a.labels;
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  return out;
}

TriggerSpec TriggerSpec::bottom_right_patch(const ImageShape& shape,
                                            std::size_t target, std::size_t size,
                                            double fill) {
  if (size == 0 || size > shape.height || size > shape.width) {
    throw InputError("patch of size " + std::to_string(size) +
                     " does not fit the image");
  }
  TriggerSpec t;
  t.kind = TriggerKind::patch;
  t.patch = {shape.height - size, shape.width - size, size, size, fill};
  t.target = target;
  return t;
}

TriggerSpec TriggerSpec::noise_blend(const ImageShape& shape, double ratio,
                                     std::uint64_t pattern_seed,
                                     std::size_t target) {
  TriggerSpec t;
  t.kind = TriggerKind::blended;
  t.blend.ratio = ratio;
  t.blend.image = Tensor(shape.chw());
  std::mt19937_64 rng(pattern_seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double& v : t.blend.image.data()) v = u(rng);
  t.target = target;
  return t;
}

void TriggerSpec::validate(const ImageShape& shape) const {
  if (kind == TriggerKind::patch) {
    if (patch.height == 0 || patch.width == 0 ||
        patch.row + patch.height > shape.height ||
        patch.col + patch.width > shape.width) {
      throw InputError("patch rectangle (" + std::to_string(patch.row) + "," +
                       std::to_string(patch.col) + ") " +
                       std::to_string(patch.height) + "x" +
                       std::to_string(patch.width) + " outside a " +
                       std::to_string(shape.height) + "x" +
                       std::to_string(shape.width) + " image");
    }
    if (!(patch.fill >= 0.0 && patch.fill <= 1.0)) {
      throw InputError("patch fill must lie in [0,1]");
    }
  } else {
    if (!(blend.ratio >= 0.0 && blend.ratio <= 1.0)) {
      throw InputError("blend ratio must lie in [0,1]");
    }
    if (blend.image.shape() != shape.chw()) {
      throw DimensionError("blend trigger image " +
                           shape_to_string(blend.image.shape()) +
                           " does not match image shape " +
                           shape_to_string(shape.chw()));
    }
  }
}

std::string TriggerSpec::describe() const {
  std::ostringstream out;
  out.precision(17);
  if (kind == TriggerKind::patch) {
    out << "patch:" << patch.row << ',' << patch.col << ',' << patch.height
        << ',' << patch.width << ',' << patch.fill;
  } else {
    out << "blended:" << blend.ratio << ':'
        << hex64(fnv1a64(std::string_view(
               reinterpret_cast<const char*>(blend.image.data().data()),
               blend.image.size() * sizeof(double))));
  }
  out << ":target=" << target;
  return out.str();
}

Tensor apply_trigger(const Tensor& image, const TriggerSpec& trigger) {
  if (image.rank() != 3) {
    throw DimensionError("apply_trigger expects a C x H x W image, got " +
                         shape_to_string(image.shape()));
  }
  const ImageShape shape{image.dim(0), image.dim(1), image.dim(2)};
  trigger.validate(shape);
  Tensor out = image;
  if (trigger.kind == TriggerKind::patch) {
    const auto& p = trigger.patch;
    for (std::size_t c = 0; c < shape.channels; ++c) {
      for (std::size_t r = p.row; r < p.row + p.height; ++r) {
        for (std::size_t k = p.col; k < p.col + p.width; ++k) {
          out[(c * shape.height + r) * shape.width + k] = p.fill;
        }
      }
    }
  } else {
    const double lambda = trigger.blend.ratio;
    const auto pattern = trigger.blend.image.data();
    auto px = out.data();
    for (std::size_t i = 0; i < px.size(); ++i) {
      px[i] = clamp01((1.0 - lambda) * px[i] + lambda * pattern[i]);
    }
  }
  return out;
}

LabeledDataset apply_trigger(const LabeledDataset& data,
                             const TriggerSpec& trigger) {
  LabeledDataset out = data;
  const ImageShape shape = data.image_shape();
  const std::size_t stride = shape.size();
  for (std::size_t i = 0; i < data.size(); ++i) {
    Tensor triggered = apply_trigger(data.image(i), trigger);
    std::copy(triggered.data().begin(), triggered.data().end(),
              out.images.data().begin() + static_cast<std::ptrdiff_t>(i * stride));
  }
  return out;
}

LabeledDataset generate_synthetic(std::size_t num_classes, std::size_t per_class,
                                  const ImageShape& shape, std::uint64_t seed) {
  if (num_classes < 2) throw InputError("synthetic data needs >= 2 classes");
  if (per_class < 1) throw InputError("per_class must be >= 1");
  if (shape.size() == 0) throw InputError("image shape has a zero axis");

  std::vector<Tensor> patterns;
  for (std::size_t c = 0; c < num_classes; ++c) {
    std::mt19937_64 pattern_rng(kPatternSeed + c);
    std::uniform_real_distribution<double> level(kPatternLow, kPatternHigh);
    std::vector<double> grid(shape.channels * kPatternGrid * kPatternGrid);
    for (double& g : grid) g = level(pattern_rng);
    Tensor p(shape.chw());
    for (std::size_t ch = 0; ch < shape.channels; ++ch) {
      for (std::size_t r = 0; r < shape.height; ++r) {
        for (std::size_t k = 0; k < shape.width; ++k) {
          const std::size_t gr = r * kPatternGrid / shape.height;
          const std::size_t gc = k * kPatternGrid / shape.width;
          p[(ch * shape.height + r) * shape.width + k] =
              grid[(ch * kPatternGrid + gr) * kPatternGrid + gc];
        }
      }
    }
    patterns.push_back(std::move(p));
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, kNoiseSigma);
  LabeledDataset out;
  out.num_classes = num_classes;
  const std::size_t n = num_classes * per_class;
  std::vector<double> pixels;
  pixels.reserve(n * shape.size());
  for (std::size_t c = 0; c < num_classes; ++c) {
    for (std::size_t i = 0; i < per_class; ++i) {
      for (double base : patterns[c].data()) pixels.push_back(clamp01(base + noise(rng)));
      out.labels.push_back(c);
    }
  }
  out.images = Tensor({n, shape.channels, shape.height, shape.width}, std::move(pixels));
  return out;
}

namespace {

std::uint32_t read_be32(const std::string& bytes, std::size_t offset,
                        const std::string& what) {
  if (bytes.size() < offset + 4) throw FormatError(what + ": truncated header");
  std::uint32_t v = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    v = (v << 8) | static_cast<unsigned char>(bytes[offset + i]);
  }
  return v;
}

std::string read_or_format_error(const std::filesystem::path& path) {
  try {
    return read_file(path);
  } catch (const PersistenceError& e) {
    throw FormatError(e.what());
  }
}

}  // namespace

LabeledDataset load_idx(const std::filesystem::path& images_path,
                        const std::filesystem::path& labels_path,
                        std::size_t num_classes) {
  const std::string img = read_or_format_error(images_path);
  const std::string lab = read_or_format_error(labels_path);
  const std::string img_name = images_path.string();
  const std::string lab_name = labels_path.string();

  if (const auto magic = read_be32(img, 0, img_name); magic != 0x00000803) {
    throw FormatError(img_name + ": bad IDX image magic " + hex64(magic));
  }
  if (const auto magic = read_be32(lab, 0, lab_name); magic != 0x00000801) {
    throw FormatError(lab_name + ": bad IDX label magic " + hex64(magic));
  }
  const std::size_t count = read_be32(img, 4, img_name);
  const std::size_t rows = read_be32(img, 8, img_name);
  const std::size_t cols = read_be32(img, 12, img_name);
  const std::size_t label_count = read_be32(lab, 4, lab_name);
  if (count != label_count) {
    throw ConsistencyError("IDX image count " + std::to_string(count) +
                           " != label count " + std::to_string(label_count));
  }
  if (count == 0 || rows == 0 || cols == 0) {
    throw FormatError(img_name + ": empty IDX image file");
  }
  const std::size_t pixels = count * rows * cols;
  if (img.size() < 16 + pixels) throw FormatError(img_name + ": truncated pixel data");
  if (lab.size() < 8 + count) throw FormatError(lab_name + ": truncated label data");

  LabeledDataset out;
  std::vector<double> values(pixels);
  for (std::size_t i = 0; i < pixels; ++i) {
    values[i] = static_cast<unsigned char>(img[16 + i]) / 255.0;
  }
  out.images = Tensor({count, 1, rows, cols}, std::move(values));
  std::size_t max_label = 0;
  for (std::size_t i = 0; i < count; ++i) {
    out.labels.push_back(static_cast<unsigned char>(lab[8 + i]));
    max_label = std::max(max_label, out.labels.back());
  }
  out.num_classes = num_classes == 0 ? max_label + 1 : num_classes;
  out.validate();
  return out;
}

PoisonedDataset poison_training_set(const LabeledDataset& clean,
                                    const TriggerSpec& trigger,
                                    double poison_ratio, std::uint64_t seed) {
  if (!(poison_ratio > 0.0 && poison_ratio < 1.0)) {
    throw InputError("poison ratio must lie in (0,1)");
  }
  if (clean.empty()) throw InputError("cannot poison an empty dataset");
  if (trigger.target >= clean.num_classes) {
    throw InputError("target class " + std::to_string(trigger.target) +
                     " outside the label range");
  }
  trigger.validate(clean.image_shape());

  const std::size_t n = clean.size();
  const auto poisoned_count = static_cast<std::size_t>(
      std::ceil(poison_ratio * static_cast<double>(n) - 1e-9));
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<bool> is_poisoned(n, false);
  for (std::size_t i = 0; i < poisoned_count; ++i) is_poisoned[order[i]] = true;

  std::vector<std::size_t> output_order(n);
  std::iota(output_order.begin(), output_order.end(), 0);
  std::shuffle(output_order.begin(), output_order.end(), rng);

  PoisonedDataset out;
  out.data = clean.subset(output_order);
  out.source = output_order;
  out.triggered.resize(n);
  const std::size_t stride = clean.image_shape().size();
  for (std::size_t row = 0; row < n; ++row) {
    const std::size_t src = output_order[row];
    out.triggered[row] = is_poisoned[src];
    if (!is_poisoned[src]) continue;
    Tensor t = apply_trigger(clean.image(src), trigger);
    std::copy(t.data().begin(), t.data().end(),
              out.data.images.data().begin() + static_cast<std::ptrdiff_t>(row * stride));
    out.data.labels[row] = trigger.target;
  }
  return out;
}

std::size_t validation_per_class(std::size_t spc) {
  return std::max<std::size_t>(1, (spc + 9) / 10);
}

DefenderDataset make_defender_split(const LabeledDataset& pool, std::size_t spc,
                                    const TriggerSpec& trigger,
                                    std::uint64_t seed) {
  if (spc < 2) throw InputError("samples per class must be >= 2");
  trigger.validate(pool.image_shape());
  std::vector<std::vector<std::size_t>> by_class(pool.num_classes);
  for (std::size_t i = 0; i < pool.size(); ++i) by_class[pool.labels[i]].push_back(i);

  const std::size_t val_per_class = validation_per_class(spc);
  std::mt19937_64 rng(seed);
  DefenderDataset out;
  for (std::size_t c = 0; c < pool.num_classes; ++c) {
    auto& members = by_class[c];
    if (members.size() < spc) {
      throw DataError("class " + std::to_string(c) + " has " +
                      std::to_string(members.size()) +
                      " pool samples, need " + std::to_string(spc));
    }
    std::shuffle(members.begin(), members.end(), rng);
    out.val_indices.insert(out.val_indices.end(), members.begin(),
                           members.begin() + static_cast<std::ptrdiff_t>(val_per_class));
    out.train_indices.insert(out.train_indices.end(),
                             members.begin() + static_cast<std::ptrdiff_t>(val_per_class),
                             members.begin() + static_cast<std::ptrdiff_t>(spc));
  }
  out.clean_train = pool.subset(out.train_indices);
  out.clean_val = pool.subset(out.val_indices);
  out.backdoor_train = apply_trigger(out.clean_train, trigger);
  out.backdoor_val = apply_trigger(out.clean_val, trigger);
  return out;
}

}  // namespace gradprune
