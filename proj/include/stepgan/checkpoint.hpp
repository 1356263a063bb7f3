// Copyright 2026 The StepGAN Workbench Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Checkpoint container, version 1.
//
//   stepgan-checkpoint 1\n
//   section <kind> key=value ...\n
//   tensor <name> <float32|float64> <rows> <cols>\n<raw little-endian data>\n
//   ...
//   endsection\n
//
// Headers are text; tensor payloads are the exact in-memory bytes, so a
// load reproduces every parameter bit for bit.

#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "stepgan/generator.hpp"
#include "stepgan/optimizer.hpp"
#include "stepgan/scorer.hpp"

namespace stepgan {

static_assert(std::endian::native == std::endian::little, "checkpoint payloads are little-endian");

inline constexpr int kCheckpointVersion = 1;

struct TensorBlob {
  std::string name;
  std::string scalar;
  Index rows = 0;
  Index cols = 0;
  std::string bytes;
};

struct CheckpointSection {
  std::string kind;
  std::map<std::string, std::string> attrs;
  std::vector<TensorBlob> tensors;

  const std::string& attr(const std::string& key) const {
    auto it = attrs.find(key);
    if (it == attrs.end()) throw std::runtime_error("checkpoint section '" + kind + "' lacks attribute " + key);
    return it->second;
  }
};

/// Exact text form of a double.
inline std::string hex_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

inline double parse_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw std::invalid_argument("not a number: '" + s + "'");
  return v;
}

template <typename T>
TensorBlob to_blob(const std::string& name, const Matrix<T>& m) {
  TensorBlob b{name, ScalarName<T>::value, m.rows(), m.cols(), {}};
  b.bytes.assign(reinterpret_cast<const char*>(m.data()), static_cast<std::size_t>(m.size()) * sizeof(T));
  return b;
}

template <typename T>
Matrix<T> from_blob(const TensorBlob& b) {
  if (b.scalar != ScalarName<T>::value) {
    throw std::runtime_error("tensor " + b.name + " is " + b.scalar + ", expected " + ScalarName<T>::value);
  }
  Matrix<T> m(b.rows, b.cols);
  if (b.bytes.size() != static_cast<std::size_t>(m.size()) * sizeof(T)) throw std::runtime_error("tensor size mismatch: " + b.name);
  std::memcpy(m.data(), b.bytes.data(), b.bytes.size());
  return m;
}

/// Opaque text carried as a 1 x n "bytes" tensor (e.g. RNG state).
inline TensorBlob text_blob(const std::string& name, const std::string& text) {
  return TensorBlob{name, "bytes", 1, static_cast<Index>(text.size()), text};
}

inline void write_checkpoint(const std::filesystem::path& path, const std::vector<CheckpointSection>& sections) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write checkpoint " + path.string());
    os << "stepgan-checkpoint " << kCheckpointVersion << '\n';
    for (const auto& s : sections) {
      os << "section " << s.kind;
      for (const auto& [k, v] : s.attrs) os << ' ' << k << '=' << v;
      os << '\n';
      for (const auto& t : s.tensors) {
        os << "tensor " << t.name << ' ' << t.scalar << ' ' << t.rows << ' ' << t.cols << '\n';
        os.write(t.bytes.data(), static_cast<std::streamsize>(t.bytes.size()));
        os << '\n';
      }
      os << "endsection\n";
    }
    if (!os) throw std::runtime_error("checkpoint write failed: " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::vector<CheckpointSection> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read checkpoint " + path.string());
  std::string line;
  std::getline(is, line);
  if (line != "stepgan-checkpoint " + std::to_string(kCheckpointVersion)) {
    throw std::runtime_error("not a version-" + std::to_string(kCheckpointVersion) + " checkpoint: " + path.string());
  }
  std::vector<CheckpointSection> out;
  CheckpointSection* current = nullptr;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::string head;
    ls >> head;
    if (head == "section") {
      out.emplace_back();
      current = &out.back();
      ls >> current->kind;
      std::string kv;
      while (ls >> kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw std::runtime_error("bad section attribute: " + kv);
        current->attrs[kv.substr(0, eq)] = kv.substr(eq + 1);
      }
    } else if (head == "tensor") {
      if (!current) throw std::runtime_error("tensor outside section");
      TensorBlob b;
      ls >> b.name >> b.scalar >> b.rows >> b.cols;
      if (!ls || b.rows < 0 || b.cols < 0) throw std::runtime_error("bad tensor header: " + line);
      const std::size_t width = b.scalar == "float32" ? 4 : b.scalar == "float64" ? 8 : b.scalar == "bytes" ? 1 : 0;
      if (width == 0) throw std::runtime_error("unknown scalar type " + b.scalar);
      b.bytes.resize(static_cast<std::size_t>(b.rows * b.cols) * width);
      is.read(b.bytes.data(), static_cast<std::streamsize>(b.bytes.size()));
      if (is.get() != '\n' || !is) throw std::runtime_error("truncated tensor " + b.name);
      current->tensors.push_back(std::move(b));
    } else if (head == "endsection") {
      current = nullptr;
    } else if (!head.empty()) {
      throw std::runtime_error("unexpected checkpoint line: " + line);
    }
  }
  return out;
}

inline const CheckpointSection& find_section(const std::vector<CheckpointSection>& sections, const std::string& kind,
                                             const std::string& name) {
  for (const auto& s : sections) {
    auto it = s.attrs.find("name");
    if (s.kind == kind && it != s.attrs.end() && it->second == name) return s;
  }
  throw std::runtime_error("checkpoint has no " + kind + " section named " + name);
}

inline bool has_section(const std::vector<CheckpointSection>& sections, const std::string& kind,
                        const std::string& name) {
  for (const auto& s : sections) {
    auto it = s.attrs.find("name");
    if (s.kind == kind && it != s.attrs.end() && it->second == name) return true;
  }
  return false;
}

// -- models -----------------------------------------------------------------

inline void put_config(CheckpointSection& s, const ModelConfig& c) {
  s.attrs["vocab_size"] = std::to_string(c.vocab_size);
  s.attrs["bos_id"] = std::to_string(c.bos_id);
  s.attrs["eos_id"] = std::to_string(c.eos_id);
  s.attrs["embed_dim"] = std::to_string(c.embed_dim);
  s.attrs["hidden_dim"] = std::to_string(c.hidden_dim);
  s.attrs["init_scale"] = hex_double(c.init_scale);
}

inline ModelConfig get_config(const CheckpointSection& s) {
  ModelConfig c;
  c.vocab_size = std::stoi(s.attr("vocab_size"));
  c.bos_id = std::stoi(s.attr("bos_id"));
  c.eos_id = std::stoi(s.attr("eos_id"));
  c.embed_dim = std::stoi(s.attr("embed_dim"));
  c.hidden_dim = std::stoi(s.attr("hidden_dim"));
  c.init_scale = parse_double(s.attr("init_scale"));
  c.validate();
  return c;
}

template <typename T>
CheckpointSection model_section(const std::string& name, const Seq2SeqNet<T>& net) {
  CheckpointSection s;
  s.kind = "model";
  s.attrs["name"] = name;
  s.attrs["scalar"] = ScalarName<T>::value;
  put_config(s, net.config());
  for (const auto& t : net.params().tensors()) s.tensors.push_back(to_blob(t.name, *t.value));
  return s;
}

template <typename T>
void load_params(const CheckpointSection& s, Seq2SeqNet<T>& net) {
  auto tensors = net.params().tensors();
  if (tensors.size() != s.tensors.size()) throw std::runtime_error("parameter count mismatch in checkpoint");
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (tensors[i].name != s.tensors[i].name) throw std::runtime_error("unexpected tensor " + s.tensors[i].name);
    Matrix<T> m = from_blob<T>(s.tensors[i]);
    if (m.rows() != tensors[i].value->rows() || m.cols() != tensors[i].value->cols()) {
      throw std::runtime_error("shape mismatch for " + tensors[i].name);
    }
    *tensors[i].value = std::move(m);
  }
}

template <typename T>
Generator<T> generator_from(const CheckpointSection& s) {
  Generator<T> g(get_config(s), 0);
  load_params(s, g);
  return g;
}

template <typename T>
StepScorer<T> scorer_from(const CheckpointSection& s, ScorerRole role) {
  StepScorer<T> d(get_config(s), role, 0);
  load_params(s, d);
  return d;
}

template <typename T>
CheckpointSection optimizer_section(const std::string& name, const Optimizer<T>& opt) {
  CheckpointSection s;
  s.kind = "optimizer";
  s.attrs["name"] = name;
  s.attrs["kind"] = to_string(opt.config().kind);
  s.attrs["steps"] = std::to_string(opt.steps());
  for (std::size_t i = 0; i < opt.first_moments().size(); ++i) {
    s.tensors.push_back(to_blob("first." + std::to_string(i), opt.first_moments()[i]));
  }
  for (std::size_t i = 0; i < opt.second_moments().size(); ++i) {
    s.tensors.push_back(to_blob("second." + std::to_string(i), opt.second_moments()[i]));
  }
  return s;
}

template <typename T>
void load_optimizer(const CheckpointSection& s, Optimizer<T>& opt) {
  if (s.attr("kind") != to_string(opt.config().kind)) throw std::runtime_error("optimizer kind mismatch");
  opt.set_steps(std::stol(s.attr("steps")));
  opt.first_moments().clear();
  opt.second_moments().clear();
  for (const auto& t : s.tensors) {
    if (t.name.rfind("first.", 0) == 0) {
      opt.first_moments().push_back(from_blob<T>(t));
    } else {
      opt.second_moments().push_back(from_blob<T>(t));
    }
  }
}

/// Scalar type recorded for the generator of a checkpoint file.
inline std::string checkpoint_scalar(const std::vector<CheckpointSection>& sections) {
  return find_section(sections, "model", "generator").attr("scalar");
}

}  // namespace stepgan
