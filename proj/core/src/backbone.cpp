#include "rsisc/backbone.hpp"

#include <sstream>

#include "rsisc/error.hpp"

namespace rsisc {

Tensor gaussian_tensor(Shape shape, double variance, Rng& rng) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> dist(0.0, std::sqrt(variance));
  for (double& v : t.data()) v = dist(rng);
  return t;
}

BackboneConfig BackboneConfig::desk() { return BackboneConfig{{{16, 3, 2}, {32, 3, 2}, {32, 4, 1}}, 3}; }
BackboneConfig BackboneConfig::compact() { return BackboneConfig{{{16, 3, 1}, {32, 3, 2}, {32, 3, 1}}, 3}; }

std::size_t BackboneConfig::feature_channels() const {
  if (stages.empty()) throw ConfigError("backbone has no stages");
  return stages.back().channels;
}

std::size_t BackboneConfig::output_extent(std::size_t input) const {
  if (stages.empty()) throw ConfigError("backbone has no stages");
  std::size_t extent = input;
  for (const ConvStage& s : stages) {
    if (s.channels == 0 || s.kernel == 0 || s.stride == 0) throw ConfigError("backbone stage with zero field");
    if (s.kernel > extent)
      throw ShapeError("input size " + std::to_string(input) + " too small for backbone stages " +
                       stages_to_string(stages));
    extent = (extent - s.kernel) / s.stride + 1;
  }
  if (extent < 2)
    throw ShapeError("backbone maps input size " + std::to_string(input) + " to spatial extent " +
                     std::to_string(extent) + "; at least 2 is required");
  return extent;
}

std::string stages_to_string(const std::vector<ConvStage>& stages) {
  std::ostringstream os;
  for (std::size_t i = 0; i < stages.size(); ++i)
    os << (i ? "," : "") << stages[i].channels << 'x' << stages[i].kernel << 's' << stages[i].stride;
  return os.str();
}

// "16x3s2,32x3s2,32x4s1"
std::vector<ConvStage> parse_stages(const std::string& text) {
  std::vector<ConvStage> out;
  std::istringstream is(text);
  std::string item;
  while (std::getline(is, item, ',')) {
    ConvStage s;
    char x = 0, sep = 0;
    std::istringstream it(item);
    if (!(it >> s.channels >> x >> s.kernel >> sep >> s.stride) || x != 'x' || sep != 's')
      throw ConfigError("cannot parse backbone stage '" + item + "', expected e.g. 16x3s2");
    std::string rest;
    if (it >> rest) throw ConfigError("trailing text in backbone stage '" + item + "'");
    out.push_back(s);
  }
  if (out.empty()) throw ConfigError("empty backbone stage list");
  return out;
}

namespace {

std::string stage_name(std::size_t i, const char* leaf) {
  return "backbone.conv" + std::to_string(i) + "." + leaf;
}

}  // namespace

void init_backbone(ModelParams& params, const BackboneConfig& cfg, Rng& rng, const InitOptions& init) {
  std::size_t in = cfg.in_channels;
  for (std::size_t i = 0; i < cfg.stages.size(); ++i) {
    const ConvStage& s = cfg.stages[i];
    params.add(stage_name(i, "kernel"), gaussian_tensor({s.kernel, s.kernel, in, s.channels}, init.variance, rng));
    params.add(stage_name(i, "bias"),
               init.zero_bias ? Tensor({s.channels}) : gaussian_tensor({s.channels}, init.variance, rng));
    in = s.channels;
  }
}

Var backbone_forward(Tape& tape, const Var& images, ModelParams& params, const BackboneConfig& cfg) {
  const Shape& shape = images.shape();
  if (shape.size() != 4 || shape[1] != shape[2] || shape[3] != cfg.in_channels)
    throw ShapeError("backbone expects square [B, S, S, " + std::to_string(cfg.in_channels) + "] images, got " +
                     shape_string(shape));
  cfg.output_extent(shape[1]);
  Var x = images;
  for (std::size_t i = 0; i < cfg.stages.size(); ++i) {
    Var kernel = tape.param(params.at(stage_name(i, "kernel")));
    Var bias = tape.param(params.at(stage_name(i, "bias")));
    x = ag::relu(ag::conv2d(x, kernel, bias, cfg.stages[i].stride));
  }
  return x;
}

}  // namespace rsisc
