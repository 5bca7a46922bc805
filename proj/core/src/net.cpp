#include "edngtm/net.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "edngtm/rng.hpp"

namespace edngtm::net {

NetSpec NetSpec::toy() {
  NetSpec spec;
  spec.depth = 3;
  spec.base_width = 8;
  return spec;
}

void NetSpec::validate() const {
  require(depth >= 1, "NetSpec: depth must be >= 1, got ", depth);
  require(base_width >= 1, "NetSpec: base_width must be >= 1, got ", base_width);
  require(out_channels >= 1, "NetSpec: out_channels must be >= 1, got ", out_channels);
  require(in_channels == (guidance ? 4 : 3), "NetSpec: in_channels must be ", guidance ? 4 : 3, " when guidance is ",
          guidance ? "on" : "off", ", got ", in_channels);
  if (use_spp) {
    require(!spp_kernels.empty(), "NetSpec: spp enabled with no kernels");
    std::set<int> seen;
    for (int k : spp_kernels) {
      require(k >= 1 && k % 2 == 1, "NetSpec: spp kernels must be odd, got ", k);
      require(seen.insert(k).second, "NetSpec: spp kernels must be distinct, got ", k, " twice");
    }
  }
}

std::string NetSpec::serialize() const {
  std::ostringstream os;
  os << "in_channels=" << in_channels << " out_channels=" << out_channels << " depth=" << depth
     << " base_width=" << base_width << " spp_kernels=";
  for (std::size_t i = 0; i < spp_kernels.size(); ++i) os << (i ? "," : "") << spp_kernels[i];
  os << " use_spp=" << use_spp << " guidance=" << guidance << " instance_norm=" << instance_norm
     << " upsample=" << (upsample == UpsampleMode::NearestConv ? "nearest_conv" : "transposed");
  return os.str();
}

NetSpec NetSpec::parse(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string token;
  while (is >> token) {
    const auto eq = token.find('=');
    require(eq != std::string::npos, "NetSpec::parse: malformed token '", token, "'");
    kv[token.substr(0, eq)] = token.substr(eq + 1);
  }
  auto get = [&](const std::string& key) {
    auto it = kv.find(key);
    require(it != kv.end(), "NetSpec::parse: missing key '", key, "'");
    return it->second;
  };
  NetSpec spec;
  spec.in_channels = std::stoi(get("in_channels"));
  spec.out_channels = std::stoi(get("out_channels"));
  spec.depth = std::stoi(get("depth"));
  spec.base_width = std::stoi(get("base_width"));
  spec.spp_kernels.clear();
  std::istringstream ks(get("spp_kernels"));
  for (std::string k; std::getline(ks, k, ',');)
    if (!k.empty()) spec.spp_kernels.push_back(std::stoi(k));
  spec.use_spp = get("use_spp") == "1";
  spec.guidance = get("guidance") == "1";
  spec.instance_norm = get("instance_norm") == "1";
  const std::string up = get("upsample");
  require(up == "nearest_conv" || up == "transposed", "NetSpec::parse: unknown upsample mode '", up, "'");
  spec.upsample = up == "transposed" ? UpsampleMode::Transposed : UpsampleMode::NearestConv;
  spec.validate();
  return spec;
}

namespace {

void add_conv(ParamStore<float>& params, const std::string& name, int in, int out, int k, Rng& rng) {
  params.add(name + ".weight", kaiming_normal<float>({out, in, k, k}, in * k * k, rng));
  params.add(name + ".bias", Tensor<float>({out}));
}

std::string enc(int s, int k) { return "enc" + std::to_string(s) + ".conv" + std::to_string(k); }
std::string dec(int s, const char* part) { return "dec" + std::to_string(s) + "." + part; }

void add_encoder(ParamStore<float>& params, const NetSpec& spec, int in_channels, Rng& rng) {
  int in = in_channels;
  for (int s = 0; s < spec.depth; ++s) {
    const int w = spec.stage_width(s);
    add_conv(params, enc(s, 1), in, w, 3, rng);
    add_conv(params, enc(s, 2), w, w, 3, rng);
    add_conv(params, enc(s, 3), w, w, 3, rng);  // extra conv before the downscale
    in = w;
  }
}

template <typename T>
Var param(const Bindings& b, const std::string& name) {
  auto it = b.find(name);
  require(it != b.end(), "network: missing parameter '", name, "'");
  return it->second;
}

template <typename T>
Var conv_swish(Tape<T>& tape, const Bindings& b, const std::string& name, Var x, bool norm) {
  Var y = conv2d(tape, x, param<T>(b, name + ".weight"), param<T>(b, name + ".bias"), 1);
  if (norm) y = instance_norm(tape, y);
  return swish(tape, y);
}

template <typename T>
void check_extent(const Tensor<T>& x, const NetSpec& spec, const char* who) {
  require(x.rank() == 4, who, ": input must be N x C x H x W, got ", to_string(x.shape()));
  const int m = spec.required_multiple();
  require(x.dim(2) % m == 0 && x.dim(3) % m == 0, who, ": input extents ", x.dim(2), "x", x.dim(3),
          " must be multiples of ", m, " (2^depth)");
}

/// Runs the encoder; returns the pooled output and appends each stage's pre-pool feature map.
template <typename T>
Var encoder_forward(Tape<T>& tape, const NetSpec& spec, const Bindings& b, Var x, std::vector<Var>* skips) {
  for (int s = 0; s < spec.depth; ++s) {
    x = conv_swish(tape, b, enc(s, 1), x, spec.instance_norm);
    x = conv_swish(tape, b, enc(s, 2), x, spec.instance_norm);
    x = conv_swish(tape, b, enc(s, 3), x, spec.instance_norm);
    if (skips) skips->push_back(x);
    x = maxpool2d(tape, x, 2, 2);
  }
  return x;
}

}  // namespace

GeneratorState<float> build_generator(const NetSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(Rng::mix(seed, 0x6E));
  GeneratorState<float> g{spec, {}};
  auto& p = g.params;
  add_encoder(p, spec, spec.in_channels, rng);
  const int top = spec.stage_width(spec.depth - 1);
  const int bott = spec.bottleneck_width();
  add_conv(p, "bottleneck.conv1", top, bott, 3, rng);
  add_conv(p, "bottleneck.conv2", bott, bott, 3, rng);
  if (spec.use_spp) {
    const int branches = static_cast<int>(spec.spp_kernels.size()) + 1;
    add_conv(p, "bottleneck.spp", bott * branches, bott, 1, rng);
  }
  for (int s = spec.depth - 1; s >= 0; --s) {
    const int w = spec.stage_width(s);
    const int below = spec.stage_width(s + 1);
    add_conv(p, dec(s, "pre"), below, below, 3, rng);  // extra conv before the upscale
    if (spec.upsample == UpsampleMode::NearestConv) {
      add_conv(p, dec(s, "up"), below, w, 3, rng);
    } else {
      p.add(dec(s, "up") + ".weight", kaiming_normal<float>({below, w, 2, 2}, below, rng));
      p.add(dec(s, "up") + ".bias", Tensor<float>({w}));
    }
    add_conv(p, dec(s, "conv1"), 2 * w, w, 3, rng);
    add_conv(p, dec(s, "conv2"), w, w, 3, rng);
  }
  add_conv(p, "head", spec.stage_width(0), spec.out_channels, 1, rng);
  return g;
}

DiscriminatorState<float> build_discriminator(const NetSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(Rng::mix(seed, 0xD1));
  DiscriminatorState<float> d{spec, {}};
  add_encoder(d.params, spec, 3, rng);
  const int features = spec.stage_width(spec.depth - 1);
  d.params.add("head.weight", kaiming_normal<float>({1, features}, features, rng));
  d.params.add("head.bias", Tensor<float>({1}));
  return d;
}

template <typename T>
Var spp_block(Tape<T>& tape, Var input, std::span<const int> kernels, const Bindings& bindings,
              const std::string& prefix, bool norm) {
  std::vector<Var> branches{input};
  for (int k : kernels) {
    require(k >= 1 && k % 2 == 1, "spp_block: kernels must be odd, got ", k);
    branches.push_back(maxpool2d(tape, input, k, 1));
  }
  Var merged = concat_channels<T>(tape, branches);
  return conv_swish(tape, bindings, prefix, merged, norm);
}

template <typename T>
Var generator_forward(Tape<T>& tape, const NetSpec& spec, const Bindings& b, Var rgb, Var guidance) {
  check_extent(tape.value(rgb), spec, "generator_forward");
  require(tape.value(rgb).dim(1) == 3, "generator_forward: rgb input must have 3 channels, got ",
          tape.value(rgb).dim(1));
  Var x = rgb;
  if (spec.guidance) {
    require(guidance.valid(), "generator_forward: guidance channel required by this network");
    const auto& g = tape.value(guidance);
    require(g.rank() == 4 && g.dim(1) == 1, "generator_forward: guidance must be N x 1 x H x W, got ",
            to_string(g.shape()));
    const Var parts[] = {rgb, guidance};
    x = concat_channels<T>(tape, parts);
  } else {
    require(!guidance.valid(), "generator_forward: network built without guidance but guidance was supplied");
  }
  std::vector<Var> skips;
  x = encoder_forward(tape, spec, b, x, &skips);
  x = conv_swish(tape, b, "bottleneck.conv1", x, spec.instance_norm);
  x = conv_swish(tape, b, "bottleneck.conv2", x, spec.instance_norm);
  if (spec.use_spp) x = spp_block(tape, x, spec.spp_kernels, b, "bottleneck.spp", spec.instance_norm);
  for (int s = spec.depth - 1; s >= 0; --s) {
    x = conv_swish(tape, b, dec(s, "pre"), x, spec.instance_norm);
    if (spec.upsample == UpsampleMode::NearestConv) {
      x = conv_swish(tape, b, dec(s, "up"), upsample_nearest2x(tape, x), spec.instance_norm);
    } else {
      x = conv_transpose2x2(tape, x, param<T>(b, dec(s, "up") + ".weight"), param<T>(b, dec(s, "up") + ".bias"));
      if (spec.instance_norm) x = instance_norm(tape, x);
      x = swish(tape, x);
    }
    const Var parts[] = {skips[static_cast<std::size_t>(s)], x};
    x = concat_channels<T>(tape, parts);
    x = conv_swish(tape, b, dec(s, "conv1"), x, spec.instance_norm);
    x = conv_swish(tape, b, dec(s, "conv2"), x, spec.instance_norm);
  }
  x = conv2d(tape, x, param<T>(b, "head.weight"), param<T>(b, "head.bias"), 1);
  return sigmoid(tape, x);
}

template <typename T>
Var discriminator_forward(Tape<T>& tape, const NetSpec& spec, const Bindings& b, Var image) {
  check_extent(tape.value(image), spec, "discriminator_forward");
  require(tape.value(image).dim(1) == 3, "discriminator_forward: image must have 3 channels, got ",
          tape.value(image).dim(1));
  Var x = encoder_forward(tape, spec, b, image, nullptr);
  x = global_avg_pool(tape, x);
  return linear(tape, x, param<T>(b, "head.weight"), param<T>(b, "head.bias"));
}

Tensor<float> generate(const GeneratorState<float>& generator, const Tensor<float>& rgb,
                       const Tensor<float>* guidance) {
  Tape<float> tape;
  const Bindings b = bind(tape, generator.params, false);
  const Var x = tape.leaf(rgb, false);
  const Var g = guidance ? tape.leaf(*guidance, false) : Var{};
  return tape.value(generator_forward(tape, generator.spec, b, x, g));
}

Tensor<float> score(const DiscriminatorState<float>& discriminator, const Tensor<float>& image) {
  Tape<float> tape;
  const Bindings b = bind(tape, discriminator.params, false);
  const Var x = tape.leaf(image, false);
  return tape.value(discriminator_forward(tape, discriminator.spec, b, x));
}

std::vector<int> encoder_widths(const ParamStore<float>& params, int depth) {
  std::vector<int> widths;
  for (int s = 0; s < depth; ++s) widths.push_back(params.at(enc(s, 3) + ".weight").dim(0));
  return widths;
}

#define EDNGTM_INSTANTIATE_NET(T)                                                                          \
  template Var spp_block(Tape<T>&, Var, std::span<const int>, const Bindings&, const std::string&, bool);  \
  template Var generator_forward(Tape<T>&, const NetSpec&, const Bindings&, Var, Var);                     \
  template Var discriminator_forward(Tape<T>&, const NetSpec&, const Bindings&, Var);

EDNGTM_INSTANTIATE_NET(float)
EDNGTM_INSTANTIATE_NET(double)

#undef EDNGTM_INSTANTIATE_NET

}  // namespace edngtm::net
