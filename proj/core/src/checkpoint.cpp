#include "crlprune/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace crlprune {

namespace {

using json = nlohmann::ordered_json;

constexpr int kNetworkFormatVersion = 1;
constexpr int kAgentFormatVersion = 1;

json tensor_to_json(const Tensor& t) { return json{{"shape", t.shape}, {"data", t.data}}; }

Tensor tensor_from_json(const json& j) {
  return Tensor(j.at("shape").get<std::vector<int>>(), j.at("data").get<std::vector<double>>());
}

void write_json_file(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("write failed: " + path);
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw std::runtime_error("corrupt JSON in " + path + ": " + e.what());
  }
  return j;
}

void check_version(const json& j, int expected, const std::string& path) {
  if (!j.contains("format_version") || j.at("format_version").get<int>() != expected) {
    throw std::runtime_error(path + ": unsupported format_version (expected " +
                             std::to_string(expected) + ")");
  }
}

json mlp_to_json(const Mlp& mlp) {
  json layers = json::array();
  for (const DenseLayer& d : mlp.layers()) {
    layers.push_back({{"in_features", d.in_features},
                      {"out_features", d.out_features},
                      {"weight", tensor_to_json(d.weight)},
                      {"bias", tensor_to_json(d.bias)}});
  }
  return json{{"dims", mlp.dims()}, {"layers", layers}};
}

Mlp mlp_from_json(const json& j) {
  Rng scratch(0);
  Mlp mlp(j.at("dims").get<std::vector<int>>(), false, scratch);
  const json& layers = j.at("layers");
  if (layers.size() != mlp.layers().size()) throw std::runtime_error("mlp layer count mismatch");
  for (std::size_t i = 0; i < mlp.layers().size(); ++i) {
    mlp.layers()[i].weight = tensor_from_json(layers[i].at("weight"));
    mlp.layers()[i].bias = tensor_from_json(layers[i].at("bias"));
  }
  return mlp;
}

}  // namespace

void save_network(const Network& net, const std::string& path) {
  json j;
  j["format_version"] = kNetworkFormatVersion;
  const InputShape in = net.input_shape();
  j["input"] = {{"channels", in.channels}, {"height", in.height}, {"width", in.width}};
  j["class_count"] = net.class_count();

  json convs = json::array();
  for (const ConvLayer& l : net.conv_layers()) {
    convs.push_back({{"index", l.spec.index},
                     {"kind", to_string(l.spec.kind)},
                     {"in_channels", l.spec.in_channels},
                     {"num_filters", l.spec.num_filters},
                     {"kernel_size", l.spec.kernel_size},
                     {"stride", l.spec.stride},
                     {"padding", l.spec.padding},
                     {"weight", tensor_to_json(l.weight)},
                     {"bias", tensor_to_json(l.bias)},
                     {"mask", l.mask}});
  }
  j["conv_layers"] = std::move(convs);

  json head = json::array();
  for (const DenseLayer& d : net.head()) {
    head.push_back({{"in_features", d.in_features},
                    {"out_features", d.out_features},
                    {"weight", tensor_to_json(d.weight)},
                    {"bias", tensor_to_json(d.bias)}});
  }
  j["head"] = std::move(head);

  write_json_file(j, path);
}

Network load_network(const std::string& path) {
  const json j = read_json_file(path);
  check_version(j, kNetworkFormatVersion, path);

  InputShape input{j.at("input").at("channels").get<int>(),
                   j.at("input").at("height").get<int>(),
                   j.at("input").at("width").get<int>()};

  std::vector<ConvSpec> conv_specs;
  for (const json& l : j.at("conv_layers")) {
    conv_specs.push_back(ConvSpec{l.at("num_filters").get<int>(), l.at("kernel_size").get<int>(),
                                  l.at("stride").get<int>(), l.at("padding").get<int>()});
  }
  std::vector<int> hidden;
  const json& head = j.at("head");
  for (std::size_t i = 0; i + 1 < head.size(); ++i) {
    hidden.push_back(head[i].at("out_features").get<int>());
  }

  Rng scratch(0);
  Network net(input, conv_specs, hidden, j.at("class_count").get<int>(), scratch);

  std::vector<double> flat;
  Masks masks;
  for (const json& l : j.at("conv_layers")) {
    const Tensor w = tensor_from_json(l.at("weight"));
    const Tensor b = tensor_from_json(l.at("bias"));
    flat.insert(flat.end(), w.data.begin(), w.data.end());
    flat.insert(flat.end(), b.data.begin(), b.data.end());
    masks.push_back(l.at("mask").get<std::vector<std::uint8_t>>());
  }
  for (const json& d : head) {
    const Tensor w = tensor_from_json(d.at("weight"));
    const Tensor b = tensor_from_json(d.at("bias"));
    flat.insert(flat.end(), w.data.begin(), w.data.end());
    flat.insert(flat.end(), b.data.begin(), b.data.end());
  }
  net.set_parameters(flat);
  net.apply_mask(masks);
  return net;
}

void save_agent(const GaussianPolicy& policy, const ValueNet& value_r, const ValueNet& value_c,
                const std::string& path) {
  json j;
  j["format_version"] = kAgentFormatVersion;
  j["policy"] = {{"mean_net", mlp_to_json(policy.mean_net())},
                 {"log_sigma", policy.log_sigma()}};
  j["value_r"] = {{"net", mlp_to_json(value_r.net())}, {"discount", value_r.discount()}};
  j["value_c"] = {{"net", mlp_to_json(value_c.net())}, {"discount", value_c.discount()}};
  write_json_file(j, path);
}

AgentCheckpoint load_agent(const std::string& path) {
  const json j = read_json_file(path);
  check_version(j, kAgentFormatVersion, path);

  AgentCheckpoint ck;
  Rng scratch(0);

  const Mlp mean_net = mlp_from_json(j.at("policy").at("mean_net"));
  const auto log_sigma = j.at("policy").at("log_sigma").get<std::vector<double>>();
  std::vector<int> hidden(mean_net.dims().begin() + 1, mean_net.dims().end() - 1);
  ck.policy = GaussianPolicy(mean_net.input_dim(), mean_net.output_dim(), hidden, scratch);
  ck.policy.mean_net() = mean_net;
  ck.policy.log_sigma() = log_sigma;

  auto load_value = [&](const json& vj) {
    const Mlp net = mlp_from_json(vj.at("net"));
    std::vector<int> vh(net.dims().begin() + 1, net.dims().end() - 1);
    ValueNet v(net.input_dim(), vh, vj.at("discount").get<double>(), scratch);
    v.net() = net;
    return v;
  };
  ck.value_r = load_value(j.at("value_r"));
  ck.value_c = load_value(j.at("value_c"));
  return ck;
}

}  // namespace crlprune
