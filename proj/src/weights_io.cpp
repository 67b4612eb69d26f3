// SPDX-License-Identifier: Apache-2.0
#include "gim/weights_io.hpp"

#include <bit>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace gim {

static_assert(std::endian::native == std::endian::little,
              "weight blob IO assumes a little-endian host");

namespace {

constexpr const char* kMagic = "GIMWEIGHTS";

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void save_weights(const Weights& weights, const std::string& path) {
  weights.config.validate();
  const ModelConfig& c = weights.config;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw WeightFormatError("cannot open weight file for writing: " + path);

  std::ostringstream manifest;
  manifest << kMagic << " " << kWeightFormatVersion << "\n";
  manifest << "vocab_size " << c.vocab_size << "\n";
  manifest << "d_model " << c.d_model << "\n";
  manifest << "n_heads " << c.n_heads << "\n";
  manifest << "d_head " << c.d_head << "\n";
  manifest << "n_layers " << c.n_layers << "\n";
  manifest << "d_mlp " << c.d_mlp << "\n";
  manifest << "max_seq_len " << c.max_seq_len << "\n";
  manifest << "eps_ln " << format_double(c.eps_ln) << "\n";
  manifest << "use_final_ln " << (c.use_final_ln ? 1 : 0) << "\n";
  for (const std::string& name : weight_names(c)) {
    const Tensor& t = weights.get(name);
    auto expected = weight_shape(c, name);
    if (t.shape() != expected) {
      throw WeightFormatError("tensor " + name + " has shape " +
                              t.shape_string() + ", expected another");
    }
    manifest << "tensor " << name << " " << t.rank();
    for (int64_t d : t.shape()) manifest << " " << d;
    manifest << "\n";
  }
  manifest << "blob\n";
  out << manifest.str();
  for (const std::string& name : weight_names(c)) {
    const Tensor& t = weights.get(name);
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
  if (!out) throw WeightFormatError("short write to weight file: " + path);
}

Weights load_weights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw WeightFormatError("cannot open weight file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw WeightFormatError("empty weight file");
  {
    std::istringstream header(line);
    std::string magic;
    int version = -1;
    header >> magic >> version;
    if (magic != kMagic) {
      throw WeightFormatError("bad magic in weight file header");
    }
    if (version != kWeightFormatVersion) {
      throw WeightFormatError("unsupported weight format version " +
                              std::to_string(version));
    }
  }

  ModelConfig c;
  struct Entry {
    std::string name;
    std::vector<int64_t> shape;
  };
  std::vector<Entry> entries;
  bool saw_blob = false;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "blob") {
      saw_blob = true;
      break;
    } else if (key == "vocab_size") {
      ls >> c.vocab_size;
    } else if (key == "d_model") {
      ls >> c.d_model;
    } else if (key == "n_heads") {
      ls >> c.n_heads;
    } else if (key == "d_head") {
      ls >> c.d_head;
    } else if (key == "n_layers") {
      ls >> c.n_layers;
    } else if (key == "d_mlp") {
      ls >> c.d_mlp;
    } else if (key == "max_seq_len") {
      ls >> c.max_seq_len;
    } else if (key == "eps_ln") {
      ls >> c.eps_ln;
    } else if (key == "use_final_ln") {
      int v = 1;
      ls >> v;
      c.use_final_ln = (v != 0);
    } else if (key == "tensor") {
      Entry e;
      int rank = 0;
      ls >> e.name >> rank;
      if (!ls || rank < 1 || rank > 4) {
        throw WeightFormatError("malformed tensor line: " + line);
      }
      e.shape.resize(static_cast<size_t>(rank));
      for (auto& d : e.shape) ls >> d;
      if (!ls) throw WeightFormatError("malformed tensor line: " + line);
      entries.push_back(std::move(e));
    } else {
      throw WeightFormatError("unknown manifest field: " + key);
    }
    if (ls.fail()) throw WeightFormatError("malformed manifest line: " + line);
  }
  if (!saw_blob) throw WeightFormatError("weight file has no blob section");

  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw WeightFormatError(std::string("invalid config in weight file: ") +
                            e.what());
  }

  // Manifest must list exactly the canonical tensors, in order.
  auto names = weight_names(c);
  if (entries.size() != names.size()) {
    throw WeightFormatError("manifest lists " +
                            std::to_string(entries.size()) + " tensors, " +
                            "expected " + std::to_string(names.size()));
  }
  Weights w;
  w.config = c;
  for (size_t i = 0; i < names.size(); ++i) {
    if (entries[i].name != names[i]) {
      throw WeightFormatError("unexpected tensor " + entries[i].name +
                              " at manifest position " + std::to_string(i));
    }
    auto expected = weight_shape(c, names[i]);
    if (entries[i].shape != expected) {
      throw WeightFormatError("shape mismatch for tensor " + entries[i].name);
    }
    int64_t count = shape_product(entries[i].shape);
    std::vector<double> data(static_cast<size_t>(count));
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (in.gcount() != static_cast<std::streamsize>(count * sizeof(double))) {
      throw WeightFormatError("truncated blob for tensor " + entries[i].name);
    }
    try {
      w.tensors.emplace(names[i],
                        Tensor::from_external(entries[i].shape, std::move(data)));
    } catch (const std::invalid_argument& e) {
      throw WeightFormatError("tensor " + names[i] + ": " + e.what());
    }
  }
  // Anything left over means the manifest disagrees with the blob.
  char extra;
  if (in.read(&extra, 1); in.gcount() != 0) {
    throw WeightFormatError("blob longer than manifest describes");
  }
  return w;
}

}  // namespace gim
