/*
 * Copyright 2026 The hcnn Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// `tcnn v1` checkpoint files.
//
//   tcnn v1
//   window_sizes=3,4,5            config, one key=value per line
//   ...
//   class_labels=8500/3,8520/3
//   vocab_hash=<16 hex digits>
//   params=<count>
//   param <name> <d0>x<d1>...     then prod(dims) little-endian float32, row-major
//   ...
//   <8 bytes>                     little-endian FNV-1a 64 of every preceding byte

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "hcnn/error.hpp"
#include "hcnn/hash.hpp"
#include "hcnn/textcnn.hpp"

namespace hcnn {

namespace detail {

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string join_sizes(const std::vector<std::size_t>& v, char sep) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += sep;
    s += std::to_string(v[i]);
  }
  return s;
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline void put_u32_le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint32_t get_u32_le(const unsigned char* p) {
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) | (std::uint32_t{p[3]} << 24);
}

}  // namespace detail

struct Checkpoint {
  TextCnnModel model;
  std::string vocab_hash;
};

inline std::string serialize_checkpoint(const TextCnnModel& model, const std::string& vocab_hash) {
  const auto& c = model.config;
  for (const auto& l : model.class_labels)
    if (l.find_first_of(",\n") != std::string::npos) throw InvalidConfig("class label '" + l + "' contains ',' or newline");

  std::string out = "tcnn v1\n";
  auto kv = [&](const std::string& k, const std::string& v) { out += k + "=" + v + "\n"; };
  kv("window_sizes", detail::join_sizes(c.window_sizes, ','));
  kv("maps_per_window", std::to_string(c.maps_per_window));
  kv("embedding_dim", std::to_string(c.embedding_dim));
  kv("dropout_rate", detail::fmt_double(c.dropout_rate));
  kv("hidden_size", std::to_string(c.hidden_size));
  kv("num_classes", std::to_string(c.num_classes));
  kv("epochs", std::to_string(c.epochs));
  kv("batch_size", std::to_string(c.batch_size));
  kv("adadelta_rho", detail::fmt_double(c.adadelta_rho));
  kv("adadelta_eps", detail::fmt_double(c.adadelta_eps));
  kv("seed", std::to_string(c.seed));
  kv("max_len", std::to_string(c.max_len));
  kv("vocab_size", std::to_string(model.vocab_size));
  std::string labels;
  for (std::size_t i = 0; i < model.class_labels.size(); ++i) labels += (i ? "," : "") + model.class_labels[i];
  kv("class_labels", labels);
  kv("vocab_hash", vocab_hash);
  const auto params = model.parameters();
  kv("params", std::to_string(params.size()));
  for (const auto* p : params) {
    out += "param " + p->name + " " + detail::join_sizes(p->shape(), 'x') + "\n";
    for (double v : p->value.values()) detail::put_u32_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  const std::uint64_t sum = fnv1a64(out);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((sum >> (8 * i)) & 0xff));
  return out;
}

inline Checkpoint parse_checkpoint(std::string_view bytes) {
  if (bytes.size() < 8) throw CheckpointError("checkpoint truncated");
  const auto payload = bytes.substr(0, bytes.size() - 8);
  std::uint64_t stored = 0;
  for (int i = 7; i >= 0; --i)
    stored = (stored << 8) | static_cast<unsigned char>(bytes[bytes.size() - 8 + static_cast<std::size_t>(i)]);
  if (stored != fnv1a64(payload)) throw CheckpointError("checkpoint checksum mismatch");

  std::size_t pos = 0;
  auto next_line = [&]() -> std::string {
    const auto nl = payload.find('\n', pos);
    if (nl == std::string_view::npos) throw CheckpointError("checkpoint header truncated");
    std::string line(payload.substr(pos, nl - pos));
    pos = nl + 1;
    return line;
  };
  if (next_line() != "tcnn v1") throw CheckpointError("not a 'tcnn v1' checkpoint");

  std::map<std::string, std::string> kv;
  while (true) {
    auto line = next_line();
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw CheckpointError("malformed header line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
    if (line.rfind("params=", 0) == 0) break;
  }
  auto get = [&](const std::string& k) {
    const auto it = kv.find(k);
    if (it == kv.end()) throw CheckpointError("checkpoint header lacks '" + k + "'");
    return it->second;
  };

  Checkpoint ck;
  TextCnnConfig c;
  std::size_t vocab_size = 0, nparams = 0;
  try {
    c.window_sizes.clear();
    for (const auto& w : detail::split(get("window_sizes"), ',')) c.window_sizes.push_back(std::stoull(w));
    c.maps_per_window = std::stoull(get("maps_per_window"));
    c.embedding_dim = std::stoull(get("embedding_dim"));
    c.dropout_rate = std::stod(get("dropout_rate"));
    c.hidden_size = std::stoull(get("hidden_size"));
    c.num_classes = std::stoull(get("num_classes"));
    c.epochs = std::stoull(get("epochs"));
    c.batch_size = std::stoull(get("batch_size"));
    c.adadelta_rho = std::stod(get("adadelta_rho"));
    c.adadelta_eps = std::stod(get("adadelta_eps"));
    c.seed = std::stoull(get("seed"));
    c.max_len = std::stoull(get("max_len"));
    vocab_size = std::stoull(get("vocab_size"));
    nparams = std::stoull(get("params"));
  } catch (const std::logic_error&) {
    throw CheckpointError("checkpoint header holds a malformed number");
  }
  ck.vocab_hash = get("vocab_hash");

  Rng dummy(0);
  ck.model = build_model(c, vocab_size, dummy, detail::split(get("class_labels"), ','));
  auto params = ck.model.parameters();
  if (nparams != params.size()) throw CheckpointError("checkpoint parameter count does not match its config");

  for (auto* p : params) {
    const auto line = next_line();
    const auto expect = "param " + p->name + " " + detail::join_sizes(p->shape(), 'x');
    if (line != expect) throw CheckpointError("shape mismatch: expected '" + expect + "', found '" + line + "'");
    const std::size_t n = p->size();
    if (pos + 4 * n > payload.size()) throw CheckpointError("checkpoint payload truncated");
    const auto* raw = reinterpret_cast<const unsigned char*>(payload.data() + pos);
    for (std::size_t i = 0; i < n; ++i)
      p->value[i] = static_cast<double>(std::bit_cast<float>(detail::get_u32_le(raw + 4 * i)));
    pos += 4 * n;
  }
  if (pos != payload.size()) throw CheckpointError("trailing bytes after the last parameter");
  if (!ck.model.all_finite()) throw CheckpointError("checkpoint holds non-finite parameters");
  return ck;
}

inline void save_checkpoint(const TextCnnModel& model, const std::string& vocab_hash, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint '" + path + "'");
  const auto bytes = serialize_checkpoint(model, vocab_hash);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint '" + path + "'");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_checkpoint(bytes);
}

}  // namespace hcnn
