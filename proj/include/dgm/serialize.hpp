#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dgm/densenet.hpp"
#include "dgm/model.hpp"
#include "dgm/optim.hpp"

namespace dgm {

// Container layout: magic "DGM1", u32 LE version, u64 LE header length,
// UTF-8 key=value header, raw little-endian float32 tensor payloads in
// header-declared order, trailing u32 LE CRC-32 (IEEE) of header + payloads.
namespace container {

constexpr char kMagic[4] = {'D', 'G', 'M', '1'};
constexpr uint32_t kVersion = 1;

inline uint32_t crc32(const uint8_t* data, size_t len, uint32_t seed = 0) {
  static const auto table = [] {
    std::array<uint32_t, 256> t{};
    for (uint32_t i = 0; i < 256; ++i) {
      uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  uint32_t c = seed ^ 0xffffffffu;
  for (size_t i = 0; i < len; ++i) c = table[(c ^ data[i]) & 0xffu] ^ (c >> 8);
  return c ^ 0xffffffffu;
}

inline void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline std::string fmt_float(float v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
  return buf;
}

// Header lines in emission order plus a lookup; duplicate keys rejected.
struct Header {
  std::vector<std::pair<std::string, std::string>> lines;
  std::map<std::string, std::string> by_key;

  void add(const std::string& key, const std::string& value) {
    lines.emplace_back(key, value);
    if (!by_key.emplace(key, value).second)
      fail(ErrorCode::kInvalidArgument, "container: duplicate header key " + key);
  }

  const std::string* find(const std::string& key) const {
    auto it = by_key.find(key);
    return it == by_key.end() ? nullptr : &it->second;
  }

  const std::string& get(const std::string& key) const {
    const std::string* v = find(key);
    if (!v) fail(ErrorCode::kInvalidArgument, "container: missing header key " + key);
    return *v;
  }

  std::string text() const {
    std::string out;
    for (const auto& [k, v] : lines) {
      out += k;
      out += " = ";
      out += v;
      out += '\n';
    }
    return out;
  }

  static Header parse(const std::string& text) {
    Header h;
    size_t pos = 0;
    while (pos < text.size()) {
      size_t eol = text.find('\n', pos);
      if (eol == std::string::npos) eol = text.size();
      std::string line = text.substr(pos, eol - pos);
      pos = eol + 1;
      if (line.empty()) continue;
      size_t sep = line.find(" = ");
      if (sep == std::string::npos)
        fail(ErrorCode::kInvalidArgument, "container: malformed header line '" + line + "'");
      h.add(line.substr(0, sep), line.substr(sep + 3));
    }
    return h;
  }
};

inline std::string shape_to_value(const Shape& s) {
  std::string out;
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(s[i]);
  }
  return out;
}

inline Shape shape_from_value(const std::string& v) {
  Shape s;
  std::istringstream is(v);
  int d;
  while (is >> d) s.push_back(d);
  if (s.empty()) fail(ErrorCode::kInvalidArgument, "container: empty shape value");
  return s;
}

inline void write_layer_header(Header& h, const std::string& prefix, const Layer& l) {
  h.add(prefix + ".kind", layer_kind_name(l.kind));
  h.add(prefix + ".name", l.name);
  h.add(prefix + ".trainable", l.trainable ? "1" : "0");
  switch (l.kind) {
    case LayerKind::kConv2d:
      h.add(prefix + ".stride", std::to_string(l.stride));
      h.add(prefix + ".pad", std::to_string(l.pad));
      h.add(prefix + ".weight", shape_to_value(l.weight.shape()));
      break;
    case LayerKind::kDense:
      h.add(prefix + ".weight", shape_to_value(l.weight.shape()));
      h.add(prefix + ".bias", shape_to_value(l.bias.shape()));
      break;
    case LayerKind::kBatchNorm:
      h.add(prefix + ".bn.momentum", fmt_float(l.bn.momentum));
      h.add(prefix + ".bn.epsilon", fmt_float(l.bn.epsilon));
      h.add(prefix + ".bn.gamma", shape_to_value(l.bn.gamma.shape()));
      h.add(prefix + ".bn.beta", shape_to_value(l.bn.beta.shape()));
      h.add(prefix + ".bn.running_mean", shape_to_value(l.bn.running_mean.shape()));
      h.add(prefix + ".bn.running_var", shape_to_value(l.bn.running_var.shape()));
      break;
    case LayerKind::kMaxPool:
    case LayerKind::kAvgPool:
      h.add(prefix + ".pool_k", std::to_string(l.pool_k));
      h.add(prefix + ".pool_stride", std::to_string(l.pool_stride));
      h.add(prefix + ".pool_pad", std::to_string(l.pool_pad));
      break;
    case LayerKind::kDropout:
      h.add(prefix + ".rate", fmt_float(l.rate));
      break;
    default:
      break;
  }
  if (l.kind == LayerKind::kDenseUnit) {
    h.add(prefix + ".sub_count", std::to_string(l.sub.size()));
    for (size_t j = 0; j < l.sub.size(); ++j)
      write_layer_header(h, prefix + ".sub." + std::to_string(j), l.sub[j]);
  }
}

inline Layer read_layer_header(const Header& h, const std::string& prefix) {
  Layer l;
  l.kind = layer_kind_from_name(h.get(prefix + ".kind"));
  l.name = h.get(prefix + ".name");
  l.trainable = h.get(prefix + ".trainable") == "1";
  bool rg = l.trainable;
  switch (l.kind) {
    case LayerKind::kConv2d:
      l.stride = std::stoi(h.get(prefix + ".stride"));
      l.pad = std::stoi(h.get(prefix + ".pad"));
      l.weight = Tensor::zeros(shape_from_value(h.get(prefix + ".weight")), rg);
      break;
    case LayerKind::kDense:
      l.weight = Tensor::zeros(shape_from_value(h.get(prefix + ".weight")), rg);
      l.bias = Tensor::zeros(shape_from_value(h.get(prefix + ".bias")), rg);
      break;
    case LayerKind::kBatchNorm:
      l.bn.momentum = std::stof(h.get(prefix + ".bn.momentum"));
      l.bn.epsilon = std::stof(h.get(prefix + ".bn.epsilon"));
      l.bn.gamma = Tensor::zeros(shape_from_value(h.get(prefix + ".bn.gamma")), rg);
      l.bn.beta = Tensor::zeros(shape_from_value(h.get(prefix + ".bn.beta")), rg);
      l.bn.running_mean = Tensor::zeros(shape_from_value(h.get(prefix + ".bn.running_mean")));
      l.bn.running_var = Tensor::zeros(shape_from_value(h.get(prefix + ".bn.running_var")));
      break;
    case LayerKind::kMaxPool:
    case LayerKind::kAvgPool:
      l.pool_k = std::stoi(h.get(prefix + ".pool_k"));
      l.pool_stride = std::stoi(h.get(prefix + ".pool_stride"));
      l.pool_pad = std::stoi(h.get(prefix + ".pool_pad"));
      break;
    case LayerKind::kDropout:
      l.rate = std::stof(h.get(prefix + ".rate"));
      break;
    default:
      break;
  }
  if (l.kind == LayerKind::kDenseUnit) {
    int nsub = std::stoi(h.get(prefix + ".sub_count"));
    for (int j = 0; j < nsub; ++j)
      l.sub.push_back(read_layer_header(h, prefix + ".sub." + std::to_string(j)));
  }
  return l;
}

inline void append_tensor_bytes(std::string& out, const Tensor& t) {
  // float32 is stored little-endian; this build targets little-endian hosts.
  const char* p = reinterpret_cast<const char*>(t.data());
  out.append(p, sizeof(float) * static_cast<size_t>(t.numel()));
}

}  // namespace container

// Serializes the model (and optionally optimizer state) to container bytes.
inline std::string serialize_model(ModelSpec& m, const OptimizerState* opt = nullptr) {
  container::Header h;
  h.add("format", "dgm-model");
  h.add("layer_count", std::to_string(m.layers.size()));
  for (size_t i = 0; i < m.layers.size(); ++i)
    container::write_layer_header(h, "layer." + std::to_string(i), m.layers[i]);
  h.add("meta.backbone_len", std::to_string(m.backbone_len));
  h.add("meta.input",
        std::to_string(m.input_c) + " " + std::to_string(m.input_h) + " " + std::to_string(m.input_w));
  h.add("meta.seed", std::to_string(m.seed));
  {
    std::string names;
    for (size_t i = 0; i < m.class_names.size(); ++i) {
      if (i) names += ',';
      names += m.class_names[i];
    }
    h.add("meta.class_names", names);
  }
  for (size_t i = 0; i < m.trace.size(); ++i) {
    const StageShape& s = m.trace[i];
    h.add("meta.trace." + std::to_string(i),
          s.label + " " + std::to_string(s.channels) + " " + std::to_string(s.height) + " " +
              std::to_string(s.width));
  }
  {
    // Config echo embeds line-by-line so the header stays one key per line.
    std::istringstream is(m.config_echo);
    std::string line;
    int i = 0;
    while (std::getline(is, line)) h.add("config." + std::to_string(i++), line);
  }
  if (opt) {
    h.add("opt.kind", opt_kind_name(opt->hyper.kind));
    h.add("opt.t", std::to_string(opt->t));
    h.add("opt.learning_rate", container::fmt_float(opt->hyper.learning_rate));
    h.add("opt.beta1", container::fmt_float(opt->hyper.beta1));
    h.add("opt.beta2", container::fmt_float(opt->hyper.beta2));
    h.add("opt.momentum", container::fmt_float(opt->hyper.momentum));
    h.add("opt.rho", container::fmt_float(opt->hyper.rho));
    h.add("opt.epsilon", container::fmt_float(opt->hyper.epsilon));
    h.add("opt.buffers", std::to_string(opt->m.size()));
    for (size_t i = 0; i < opt->m.size(); ++i) {
      h.add("opt.m." + std::to_string(i), container::shape_to_value(opt->m[i].shape()));
      h.add("opt.v." + std::to_string(i), container::shape_to_value(opt->v[i].shape()));
    }
  }

  std::string header_text = h.text();
  std::string payload;
  m.for_each_param([&payload](Layer&, Tensor& t, bool) {
    container::append_tensor_bytes(payload, t);
  });
  if (opt) {
    for (size_t i = 0; i < opt->m.size(); ++i) {
      container::append_tensor_bytes(payload, opt->m[i]);
      container::append_tensor_bytes(payload, opt->v[i]);
    }
  }

  std::string out;
  out.append(container::kMagic, 4);
  container::put_u32(out, container::kVersion);
  container::put_u64(out, header_text.size());
  out += header_text;
  out += payload;
  uint32_t crc = container::crc32(reinterpret_cast<const uint8_t*>(header_text.data()),
                                  header_text.size());
  crc = container::crc32(reinterpret_cast<const uint8_t*>(payload.data()), payload.size(), crc);
  container::put_u32(out, crc);
  return out;
}

struct LoadedModel {
  ModelSpec model;
  std::optional<OptimizerState> opt;
};

inline LoadedModel deserialize_model(const std::string& bytes) {
  using namespace container;
  if (bytes.size() < 4) fail(ErrorCode::kTruncated, "container: shorter than the magic");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0)
    fail(ErrorCode::kBadMagic, "container: bad magic bytes");
  if (bytes.size() < 16) fail(ErrorCode::kTruncated, "container: truncated preamble");
  uint32_t version = 0;
  for (int i = 0; i < 4; ++i)
    version |= static_cast<uint32_t>(static_cast<uint8_t>(bytes[4 + static_cast<size_t>(i)])) << (8 * i);
  if (version != kVersion)
    fail(ErrorCode::kBadVersion,
         "container: version " + std::to_string(version) + ", expected " + std::to_string(kVersion));
  uint64_t header_len = 0;
  for (int i = 0; i < 8; ++i)
    header_len |= static_cast<uint64_t>(static_cast<uint8_t>(bytes[8 + static_cast<size_t>(i)])) << (8 * i);
  if (bytes.size() < 16 + header_len + 4)
    fail(ErrorCode::kTruncated, "container: truncated header");
  std::string header_text = bytes.substr(16, header_len);
  Header h = Header::parse(header_text);

  LoadedModel out;
  ModelSpec& m = out.model;
  int layer_count = std::stoi(h.get("layer_count"));
  for (int i = 0; i < layer_count; ++i)
    m.layers.push_back(read_layer_header(h, "layer." + std::to_string(i)));
  m.backbone_len = std::stoi(h.get("meta.backbone_len"));
  {
    std::istringstream is(h.get("meta.input"));
    is >> m.input_c >> m.input_h >> m.input_w;
  }
  m.seed = std::stoull(h.get("meta.seed"));
  {
    const std::string& names = h.get("meta.class_names");
    size_t pos = 0;
    while (pos <= names.size() && !names.empty()) {
      size_t comma = names.find(',', pos);
      if (comma == std::string::npos) {
        m.class_names.push_back(names.substr(pos));
        break;
      }
      m.class_names.push_back(names.substr(pos, comma - pos));
      pos = comma + 1;
    }
  }
  for (int i = 0;; ++i) {
    const std::string* v = h.find("meta.trace." + std::to_string(i));
    if (!v) break;
    std::istringstream is(*v);
    StageShape s;
    is >> s.label >> s.channels >> s.height >> s.width;
    m.trace.push_back(s);
  }
  {
    std::string echo;
    for (int i = 0;; ++i) {
      const std::string* v = h.find("config." + std::to_string(i));
      if (!v) break;
      echo += *v;
      echo += '\n';
    }
    m.config_echo = echo;
  }

  if (h.find("opt.kind")) {
    OptimizerState st;
    st.hyper.kind = opt_kind_from_name(h.get("opt.kind"));
    st.hyper.learning_rate = std::stof(h.get("opt.learning_rate"));
    st.hyper.beta1 = std::stof(h.get("opt.beta1"));
    st.hyper.beta2 = std::stof(h.get("opt.beta2"));
    st.hyper.momentum = std::stof(h.get("opt.momentum"));
    st.hyper.rho = std::stof(h.get("opt.rho"));
    st.hyper.epsilon = std::stof(h.get("opt.epsilon"));
    st.t = std::stoll(h.get("opt.t"));
    int nbuf = std::stoi(h.get("opt.buffers"));
    for (int i = 0; i < nbuf; ++i) {
      st.m.push_back(Tensor::zeros(shape_from_value(h.get("opt.m." + std::to_string(i)))));
      st.v.push_back(Tensor::zeros(shape_from_value(h.get("opt.v." + std::to_string(i)))));
    }
    out.opt = std::move(st);
  }

  // Fill tensor data sequentially in declaration order, then the optimizer
  // buffers, then verify the trailing checksum.
  size_t pos = 16 + header_len;
  size_t payload_start = pos;
  auto read_into = [&bytes, &pos](Tensor& t) {
    size_t n = sizeof(float) * static_cast<size_t>(t.numel());
    if (pos + n > bytes.size() - 4)
      fail(ErrorCode::kTruncated, "container: truncated tensor payload");
    std::memcpy(t.mutable_data(), bytes.data() + pos, n);
    pos += n;
  };
  if (bytes.size() < payload_start + 4)
    fail(ErrorCode::kTruncated, "container: missing checksum");
  m.for_each_param([&read_into](Layer&, Tensor& t, bool) { read_into(t); });
  if (out.opt) {
    for (size_t i = 0; i < out.opt->m.size(); ++i) {
      read_into(out.opt->m[i]);
      read_into(out.opt->v[i]);
    }
  }
  if (pos + 4 != bytes.size())
    fail(ErrorCode::kTruncated, "container: payload length mismatch");
  uint32_t stored = 0;
  for (int i = 0; i < 4; ++i)
    stored |= static_cast<uint32_t>(static_cast<uint8_t>(bytes[pos + static_cast<size_t>(i)])) << (8 * i);
  uint32_t crc = crc32(reinterpret_cast<const uint8_t*>(header_text.data()), header_text.size());
  crc = crc32(reinterpret_cast<const uint8_t*>(bytes.data() + payload_start), pos - payload_start, crc);
  if (crc != stored) fail(ErrorCode::kChecksum, "container: checksum mismatch");
  return out;
}

inline void save_model(ModelSpec& m, const std::string& path, const OptimizerState* opt = nullptr) {
  std::string bytes = serialize_model(m, opt);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorCode::kIo, "cannot open '" + path + "' for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) fail(ErrorCode::kIo, "short write to '" + path + "'");
}

inline LoadedModel load_model_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::kIo, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return deserialize_model(ss.str());
}

}  // namespace dgm
