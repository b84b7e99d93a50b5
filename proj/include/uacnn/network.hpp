#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "uacnn/error.hpp"
#include "uacnn/json_io.hpp"
#include "uacnn/linear_layers.hpp"
#include "uacnn/moment_tensor.hpp"
#include "uacnn/nonlinear_layers.hpp"

namespace uacnn {

enum class LayerKind { AvgPool2d, Conv2d, Linear, Relu, Sigmoid, Flatten };

inline const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::AvgPool2d: return "avg_pool2d";
    case LayerKind::Conv2d: return "conv2d";
    case LayerKind::Linear: return "linear";
    case LayerKind::Relu: return "relu";
    case LayerKind::Sigmoid: return "sigmoid";
    case LayerKind::Flatten: return "flatten";
  }
  return "?";
}

inline std::optional<LayerKind> parse_layer_kind(std::string_view name) {
  for (LayerKind k : {LayerKind::AvgPool2d, LayerKind::Conv2d, LayerKind::Linear,
                      LayerKind::Relu, LayerKind::Sigmoid, LayerKind::Flatten}) {
    if (name == to_string(k)) return k;
  }
  return std::nullopt;
}

/// One layer of a sequential network. `geometry` is set for pooling,
/// `params` for conv2d/linear, `lambda` optionally for sigmoid.
struct LayerSpec {
  LayerKind kind = LayerKind::Flatten;
  std::optional<FilterGeometry> geometry;
  std::variant<std::monostate, ConvParams, LinearParams> params;
  std::optional<double> lambda;

  static LayerSpec avg_pool2d(FilterGeometry g) {
    return {LayerKind::AvgPool2d, g, std::monostate{}, std::nullopt};
  }
  static LayerSpec conv2d(ConvParams p) {
    auto g = p.geometry();
    return {LayerKind::Conv2d, g, std::move(p), std::nullopt};
  }
  static LayerSpec linear(LinearParams p) {
    return {LayerKind::Linear, std::nullopt, std::move(p), std::nullopt};
  }
  static LayerSpec relu() { return {LayerKind::Relu, std::nullopt, std::monostate{}, std::nullopt}; }
  static LayerSpec sigmoid(std::optional<double> lambda = std::nullopt) {
    return {LayerKind::Sigmoid, std::nullopt, std::monostate{}, lambda};
  }
  static LayerSpec flatten() {
    return {LayerKind::Flatten, std::nullopt, std::monostate{}, std::nullopt};
  }

  const ConvParams& conv() const { return std::get<ConvParams>(params); }
  const LinearParams& fc() const { return std::get<LinearParams>(params); }

  SigmoidApproxConfig sigmoid_config() const {
    return lambda ? SigmoidApproxConfig::with_lambda(*lambda) : SigmoidApproxConfig{};
  }
};

/// Shape a layer produces from `in`, or a human-readable reason it cannot.
/// Layers with fixed geometry are checked against it; the returned layer has
/// geometry bound to the actual input size.
struct ShapeStep {
  std::optional<Shape> out;
  std::string expected;
};

namespace detail {

inline ShapeStep infer_shape(LayerSpec& layer, const Shape& in) {
  switch (layer.kind) {
    case LayerKind::AvgPool2d:
    case LayerKind::Conv2d: {
      const FilterGeometry& g = *layer.geometry;
      const bool is_conv = layer.kind == LayerKind::Conv2d;
      const std::size_t channels = is_conv ? layer.conv().in_channels() : 0;
      std::string expected = "[N," + (is_conv ? std::to_string(channels) : std::string("C")) +
                             ",n,n] with n+2p >= k (k=" + std::to_string(g.k()) +
                             ", p=" + std::to_string(g.p()) + ")";
      if (in.size() != 4 || in[2] != in[3] || in[2] == 0 || in[2] + 2 * g.p() < g.k() ||
          (is_conv && in[1] != channels)) {
        return {std::nullopt, expected};
      }
      const FilterGeometry bound = g.with_input(in[2]);
      layer.geometry = bound;
      if (is_conv) layer.params = layer.conv().with_input(in[2]);
      const std::size_t out_channels = is_conv ? layer.conv().out_channels() : in[1];
      return {Shape{in[0], out_channels, bound.d(), bound.d()}, expected};
    }
    case LayerKind::Linear: {
      const std::size_t features = layer.fc().in_features();
      std::string expected = "[N," + std::to_string(features) + "]";
      if (in.size() != 2 || in[1] != features) return {std::nullopt, expected};
      return {Shape{in[0], layer.fc().out_features()}, expected};
    }
    case LayerKind::Relu:
    case LayerKind::Sigmoid:
      return {in, "any shape"};
    case LayerKind::Flatten: {
      if (in.size() < 2) return {std::nullopt, "rank >= 2"};
      const Shape rest(in.begin() + 1, in.end());
      return {Shape{in[0], element_count(rest)}, "rank >= 2"};
    }
  }
  return {std::nullopt, "?"};
}

}  // namespace detail

/// A validated sequential network: `output_shapes[i]` is what layer i
/// produces from the chain starting at `input_shape`.
class NetworkSpec {
 public:
  static NetworkSpec make(Shape input_shape, std::vector<LayerSpec> layers) {
    if (input_shape.empty() || element_count(input_shape) == 0) {
      fail(ErrorKind::ShapeChain, "input shape " + to_string(input_shape) + " is empty");
    }
    std::vector<Shape> shapes;
    Shape current = input_shape;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      ShapeStep step = detail::infer_shape(layers[i], current);
      if (!step.out) {
        fail(ErrorKind::ShapeChain, "at layer " + std::to_string(i) + " (" +
                                        to_string(layers[i].kind) + "): expected " +
                                        step.expected + ", got " + to_string(current));
      }
      current = *step.out;
      shapes.push_back(current);
    }
    return NetworkSpec(std::move(input_shape), std::move(layers), std::move(shapes));
  }

  const Shape& input_shape() const noexcept { return input_shape_; }
  const std::vector<LayerSpec>& layers() const noexcept { return layers_; }
  const std::vector<Shape>& output_shapes() const noexcept { return output_shapes_; }
  const Shape& output_shape() const {
    return output_shapes_.empty() ? input_shape_ : output_shapes_.back();
  }

 private:
  NetworkSpec(Shape input_shape, std::vector<LayerSpec> layers, std::vector<Shape> shapes)
      : input_shape_(std::move(input_shape)),
        layers_(std::move(layers)),
        output_shapes_(std::move(shapes)) {}

  Shape input_shape_;
  std::vector<LayerSpec> layers_;
  std::vector<Shape> output_shapes_;
};

namespace detail {

inline LayerSpec layer_from_json(const Json& obj, std::size_t index) {
  using namespace json_detail;
  const std::string where = "layer " + std::to_string(index);
  const Json& kind_field = require(obj, "kind", where);
  if (!kind_field.is_string()) fail(ErrorKind::Parse, where + ".kind must be a string");
  const auto kind = parse_layer_kind(kind_field.get<std::string>());
  if (!kind) {
    fail(ErrorKind::UnknownLayer, where + ": '" + kind_field.get<std::string>() + "'");
  }

  auto size_or = [&](const char* key, std::size_t fallback) {
    auto it = obj.find(key);
    return it == obj.end() ? fallback : as_size(*it, where + "." + key);
  };
  // Geometry is bound to the real input size by NetworkSpec::make; until then
  // n is a placeholder large enough for any kernel.
  auto geometry = [&](std::size_t default_stride) {
    const std::size_t k = as_size(require(obj, "k", where), where + ".k");
    const std::size_t s = size_or("s", default_stride);
    const std::size_t p = size_or("p", 0);
    try {
      return FilterGeometry::make(std::max<std::size_t>(k, 1), k, s, p);
    } catch (const Error& e) {
      fail(ErrorKind::InvalidGeometry, where + ": " + e.what());
    }
  };

  try {
    switch (*kind) {
      case LayerKind::AvgPool2d: {
        const std::size_t k = as_size(require(obj, "k", where), where + ".k");
        return LayerSpec::avg_pool2d(geometry(k));
      }
      case LayerKind::Conv2d: {
        const FilterGeometry g = geometry(1);
        return LayerSpec::conv2d(ConvParams::make(
            as_size(require(obj, "in_channels", where), where + ".in_channels"),
            as_size(require(obj, "out_channels", where), where + ".out_channels"), g,
            as_reals(require(obj, "weights", where), where + ".weights"),
            as_reals(require(obj, "bias", where), where + ".bias")));
      }
      case LayerKind::Linear:
        return LayerSpec::linear(LinearParams::make(
            as_size(require(obj, "in_features", where), where + ".in_features"),
            as_size(require(obj, "out_features", where), where + ".out_features"),
            as_reals(require(obj, "weights", where), where + ".weights"),
            as_reals(require(obj, "bias", where), where + ".bias")));
      case LayerKind::Relu:
        return LayerSpec::relu();
      case LayerKind::Sigmoid: {
        auto it = obj.find("lambda");
        if (it == obj.end()) return LayerSpec::sigmoid();
        const double lambda = as_real(*it, where + ".lambda");
        SigmoidApproxConfig::with_lambda(lambda);
        return LayerSpec::sigmoid(lambda);
      }
      case LayerKind::Flatten:
        return LayerSpec::flatten();
    }
  } catch (const Error& e) {
    if (std::string_view(e.what()).find(where) != std::string_view::npos) throw;
    throw Error(e.kind(), where + ": " + e.what());
  }
  fail(ErrorKind::UnknownLayer, where);
}

}  // namespace detail

inline NetworkSpec network_from_json(const Json& doc) {
  using namespace json_detail;
  const Shape input_shape = as_shape(require(doc, "input_shape", "network"), "input_shape");
  const Json& layers = require(doc, "layers", "network");
  if (!layers.is_array()) fail(ErrorKind::Parse, "network.layers must be an array");
  std::vector<LayerSpec> specs;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    specs.push_back(detail::layer_from_json(layers[i], i));
  }
  return NetworkSpec::make(input_shape, std::move(specs));
}

/// Parse and fully shape-check a network document.
inline NetworkSpec load_network(std::string_view document) {
  return network_from_json(parse_json(document));
}

inline Json to_json(const LayerSpec& layer) {
  Json out{{"kind", to_string(layer.kind)}};
  switch (layer.kind) {
    case LayerKind::AvgPool2d:
      out["k"] = layer.geometry->k();
      out["s"] = layer.geometry->s();
      out["p"] = layer.geometry->p();
      break;
    case LayerKind::Conv2d: {
      const ConvParams& c = layer.conv();
      out["in_channels"] = c.in_channels();
      out["out_channels"] = c.out_channels();
      out["k"] = c.geometry().k();
      out["s"] = c.geometry().s();
      out["p"] = c.geometry().p();
      out["weights"] = std::vector<double>(c.weights().begin(), c.weights().end());
      out["bias"] = std::vector<double>(c.bias().begin(), c.bias().end());
      break;
    }
    case LayerKind::Linear: {
      const LinearParams& l = layer.fc();
      out["in_features"] = l.in_features();
      out["out_features"] = l.out_features();
      out["weights"] = std::vector<double>(l.weights().begin(), l.weights().end());
      out["bias"] = std::vector<double>(l.bias().begin(), l.bias().end());
      break;
    }
    case LayerKind::Sigmoid:
      if (layer.lambda) out["lambda"] = *layer.lambda;
      break;
    case LayerKind::Relu:
    case LayerKind::Flatten:
      break;
  }
  return out;
}

inline Json to_json(const NetworkSpec& net) {
  Json layers = Json::array();
  for (const auto& layer : net.layers()) layers.push_back(to_json(layer));
  return Json{{"input_shape", net.input_shape()}, {"layers", std::move(layers)}};
}

/// Moments after a single layer.
inline MomentTensor apply_layer(const LayerSpec& layer, const MomentTensor& input) {
  switch (layer.kind) {
    case LayerKind::AvgPool2d: return ua_avg_pool2d(input, *layer.geometry);
    case LayerKind::Conv2d: return ua_conv2d(input, layer.conv());
    case LayerKind::Linear: return ua_linear(input, layer.fc());
    case LayerKind::Relu: return ua_relu(input);
    case LayerKind::Sigmoid: return ua_sigmoid(input, layer.sigmoid_config());
    case LayerKind::Flatten: {
      if (input.rank() < 2) {
        fail(ErrorKind::ShapeMismatch, "flatten needs rank >= 2, got " + to_string(input.shape()));
      }
      return input.reshaped({input.shape()[0], input.size() / input.shape()[0]});
    }
  }
  fail(ErrorKind::UnknownLayer, "unhandled layer kind");
}

/// Moments after every layer, in order. Empty for an empty network.
inline std::vector<MomentTensor> forward_trace(const NetworkSpec& net, const MomentTensor& input) {
  if (input.shape() != net.input_shape()) {
    fail(ErrorKind::ShapeMismatch, "network input: expected " + to_string(net.input_shape()) +
                                       ", got " + to_string(input.shape()));
  }
  std::vector<MomentTensor> trace;
  trace.reserve(net.layers().size());
  for (std::size_t i = 0; i < net.layers().size(); ++i) {
    const MomentTensor& current = trace.empty() ? input : trace.back();
    try {
      trace.push_back(apply_layer(net.layers()[i], current));
    } catch (const Error& e) {
      throw Error(e.kind(), "layer " + std::to_string(i) + ": " + e.what());
    }
  }
  return trace;
}

inline MomentTensor forward(const NetworkSpec& net, const MomentTensor& input) {
  auto trace = forward_trace(net, input);
  return trace.empty() ? input : std::move(trace.back());
}

}  // namespace uacnn
