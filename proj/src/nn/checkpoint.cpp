#include "fq/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <stdexcept>

namespace fq::nn {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

void put_bytes(std::vector<std::uint8_t>& out, const void* p, std::size_t n) {
  const auto* b = static_cast<const std::uint8_t*>(p);
  out.insert(out.end(), b, b + n);
}

void put_matrix(std::vector<std::uint8_t>& out, const Matrix<float>& m) {
  put_bytes(out, m.data(), static_cast<std::size_t>(m.size()) * sizeof(float));
}

Matrix<float> get_matrix(std::span<const std::uint8_t> in, std::size_t& pos, Eigen::Index rows, Eigen::Index cols) {
  const auto n = static_cast<std::size_t>(rows * cols) * sizeof(float);
  if (pos + n > in.size()) throw std::runtime_error("checkpoint truncated");
  Matrix<float> m(rows, cols);
  std::memcpy(m.data(), in.data() + pos, n);
  pos += n;
  return m;
}

}  // namespace

nlohmann::json topology_to_json(const Topology& t) {
  return {{"trunk", to_string(t.trunk)},
          {"mlp_widths", t.mlp_widths},
          {"lstm_hidden", t.lstm_hidden},
          {"head", to_string(t.head)},
          {"n_classes", t.n_classes},
          {"memory", t.memory},
          {"features", t.features}};
}

Topology topology_from_json(const nlohmann::json& j) {
  Topology t;
  t.trunk = trunk_from_string(j.at("trunk").get<std::string>());
  t.mlp_widths = j.at("mlp_widths").get<std::array<int, 3>>();
  t.lstm_hidden = j.at("lstm_hidden").get<int>();
  t.head = head_from_string(j.at("head").get<std::string>());
  t.n_classes = j.at("n_classes").get<int>();
  t.memory = j.at("memory").get<int>();
  t.features = j.at("features").get<int>();
  t.validate();
  return t;
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& c) {
  nlohmann::json h;
  h["topology"] = topology_to_json(c.topology);
  h["params"] = nlohmann::json::array();
  for (const auto& p : c.params) h["params"].push_back({{"name", p.name}, {"shape", {p.value.rows(), p.value.cols()}}});
  h["adam"] = {{"step", c.adam.step},
               {"beta1", c.adam.beta1},
               {"beta2", c.adam.beta2},
               {"epsilon", c.adam.epsilon},
               {"has_moments", !c.adam.m.empty()}};
  h["rng_state"] = c.rng_state;
  h["epoch"] = c.epoch;
  h["extra"] = c.extra;
  h["extra_tensors"] = nlohmann::json::array();
  for (const auto& m : c.extra_tensors) h["extra_tensors"].push_back({m.rows(), m.cols()});
  const std::string header = h.dump();

  std::vector<std::uint8_t> out;
  put_bytes(out, "FQCK", 4);
  const std::uint16_t version = kCheckpointVersion;
  put_bytes(out, &version, sizeof version);
  const std::uint64_t len = header.size();
  put_bytes(out, &len, sizeof len);
  put_bytes(out, header.data(), header.size());
  for (const auto& p : c.params) put_matrix(out, p.value);
  for (const auto& m : c.adam.m) put_matrix(out, m);
  for (const auto& v : c.adam.v) put_matrix(out, v);
  for (const auto& m : c.extra_tensors) put_matrix(out, m);
  return out;
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 14 || std::memcmp(bytes.data(), "FQCK", 4) != 0) throw std::runtime_error("not an FQCK checkpoint");
  std::uint16_t version;
  std::memcpy(&version, bytes.data() + 4, sizeof version);
  if (version != kCheckpointVersion) throw std::runtime_error("unsupported checkpoint version");
  std::uint64_t len;
  std::memcpy(&len, bytes.data() + 6, sizeof len);
  std::size_t pos = 14;
  if (pos + len > bytes.size()) throw std::runtime_error("checkpoint truncated");
  const auto h = nlohmann::json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                                       bytes.begin() + static_cast<std::ptrdiff_t>(pos + len));
  pos += len;

  Checkpoint c;
  c.topology = topology_from_json(h.at("topology"));
  std::vector<std::pair<Eigen::Index, Eigen::Index>> shapes;
  for (const auto& p : h.at("params")) {
    const auto s = p.at("shape");
    shapes.emplace_back(s[0].get<Eigen::Index>(), s[1].get<Eigen::Index>());
    c.params.push_back({p.at("name").get<std::string>(), {}, {}});
  }
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    c.params[i].value = get_matrix(bytes, pos, shapes[i].first, shapes[i].second);
    c.params[i].grad = Matrix<float>::Zero(shapes[i].first, shapes[i].second);
  }
  const auto& a = h.at("adam");
  c.adam.step = a.at("step").get<std::int64_t>();
  c.adam.beta1 = a.at("beta1").get<double>();
  c.adam.beta2 = a.at("beta2").get<double>();
  c.adam.epsilon = a.at("epsilon").get<double>();
  if (a.at("has_moments").get<bool>()) {
    for (const auto& s : shapes) c.adam.m.push_back(get_matrix(bytes, pos, s.first, s.second));
    for (const auto& s : shapes) c.adam.v.push_back(get_matrix(bytes, pos, s.first, s.second));
  }
  c.rng_state = h.at("rng_state").get<std::string>();
  c.epoch = h.at("epoch").get<int>();
  c.extra = h.at("extra");
  for (const auto& s : h.at("extra_tensors")) {
    c.extra_tensors.push_back(get_matrix(bytes, pos, s[0].get<Eigen::Index>(), s[1].get<Eigen::Index>()));
  }
  if (pos != bytes.size()) throw std::runtime_error("checkpoint has trailing bytes");
  return c;
}

}  // namespace fq::nn
