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

#include "gradprune/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <string_view>

#include "gradprune/errors.hpp"
#include "gradprune/io.hpp"

namespace gradprune {

namespace {

class Writer {
 public:
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_ += s;
  }
  void raw(const char* bytes, std::size_t n) { out_.append(bytes, n); }
  std::string take() { return std::move(out_); }

 private:
  void put(std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(get(8)); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(bytes_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::string_view raw(std::size_t n) {
    need(n);
    auto view = bytes_.substr(pos_, n);
    pos_ += n;
    return view;
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw PersistenceError("checkpoint truncated at byte " + std::to_string(pos_));
    }
  }
  std::uint64_t get(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i]))
           << (8 * i);
    }
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_model(const Model& model) {
  Writer w;
  w.raw(kCheckpointMagic, sizeof(kCheckpointMagic));
  w.u32(kCheckpointVersion);
  w.str(model.arch());
  w.u32(static_cast<std::uint32_t>(model.num_classes()));
  w.u32(static_cast<std::uint32_t>(model.input_shape().channels));
  w.u32(static_cast<std::uint32_t>(model.input_shape().height));
  w.u32(static_cast<std::uint32_t>(model.input_shape().width));
  w.u64(model.seed());
  const auto params = model.parameters();
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    w.str(p.name);
    w.u32(static_cast<std::uint32_t>(p.tensor->rank()));
    for (std::size_t d : p.tensor->shape()) w.u32(static_cast<std::uint32_t>(d));
  }
  for (const auto& p : params) {
    for (double v : p.tensor->data()) w.f64(v);
  }
  w.u32(static_cast<std::uint32_t>(model.mask().size()));
  for (const auto& id : model.mask()) {
    w.u32(static_cast<std::uint32_t>(id.layer));
    w.u32(static_cast<std::uint32_t>(id.filter));
  }
  return w.take();
}

Model deserialize_model(const std::string& bytes) {
  Reader r(bytes);
  if (bytes.size() < sizeof(kCheckpointMagic) ||
      std::memcmp(bytes.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
    throw VersionError("not a checkpoint: bad magic bytes");
  }
  r.raw(sizeof(kCheckpointMagic));
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw VersionError("unsupported checkpoint version " + std::to_string(version) +
                       " (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  const std::string arch = r.str();
  const std::size_t classes = r.u32();
  ImageShape input;
  input.channels = r.u32();
  input.height = r.u32();
  input.width = r.u32();
  const std::uint64_t seed = r.u64();

  Model model = [&] {
    try {
      return build_model(arch, classes, input, seed);
    } catch (const ConfigError& e) {
      throw PersistenceError(std::string("checkpoint header invalid: ") + e.what());
    }
  }();

  auto params = model.parameters();
  const std::uint32_t count = r.u32();
  if (count != params.size()) {
    throw PersistenceError("checkpoint holds " + std::to_string(count) +
                           " tensors, architecture " + arch + " has " +
                           std::to_string(params.size()));
  }
  for (const auto& p : params) {
    const std::string name = r.str();
    Shape shape(r.u32());
    for (auto& d : shape) d = r.u32();
    if (name != p.name || shape != p.tensor->shape()) {
      throw PersistenceError("checkpoint tensor " + name + " " +
                             shape_to_string(shape) + " does not match " +
                             p.name + " " + shape_to_string(p.tensor->shape()));
    }
  }
  for (auto& p : params) {
    for (double& v : p.tensor->data()) v = r.f64();
  }
  const std::uint32_t masked = r.u32();
  for (std::uint32_t i = 0; i < masked; ++i) {
    FilterId id;
    id.layer = r.u32();
    id.filter = r.u32();
    try {
      model.prune_filter(id);
    } catch (const Error& e) {
      throw PersistenceError(std::string("checkpoint mask invalid: ") + e.what());
    }
  }
  if (!r.at_end()) throw PersistenceError("checkpoint has trailing bytes");
  return model;
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_model(model));
}

Model load_checkpoint(const std::filesystem::path& path) {
  return deserialize_model(read_file(path));
}

}  // namespace gradprune
