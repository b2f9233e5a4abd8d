#include <doctest.h>

#include "c2v/common/error.hpp"
#include "c2v/nn/denoiser.hpp"
#include "c2v/nn/ops.hpp"
#include "c2v/nn/unet.hpp"
#include "c2v/phantom/phantom.hpp"
#include "support/gradcheck.hpp"

using namespace c2v;
using namespace c2v::nn;

namespace {

DenoiserConfig small_config() {
  DenoiserConfig c;
  c.aux = geometry::AuxChannels::parse("edge,ribbon");
  c.in_channels = 3;
  c.stage_channels = {4, 6};
  c.attention_at_factor = 2;
  c.attention_heads = 2;
  c.attention_head_channels = 2;
  c.groups = 2;
  c.resolution = 4;
  c.time_embedding_dim = 8;
  return c;
}

// Parameter count from the architecture description, independent of the
// implementation's bookkeeping.
std::size_t expected_count(const DenoiserConfig& c) {
  const std::size_t e = c.time_embedding_dim;
  const std::size_t hd = static_cast<std::size_t>(c.attention_heads * c.attention_head_channels);
  const auto res = [&](std::size_t i, std::size_t o) {
    return 2 * i + o * i * 27 + o + 2 * (o * e + o) + 2 * o + o * o * 27 + o + (i != o ? o * i + o : 0);
  };
  const auto attn = [&](std::size_t ch) { return 2 * ch + 3 * hd * ch + 3 * hd + ch * hd + ch; };
  const auto& ch = c.stage_channels;
  std::size_t n = 2 * (e * e + e) + ch[0] * c.in_channels * 27 + ch[0];
  std::size_t prev = ch[0];
  for (std::size_t s = 0; s < ch.size(); ++s) {
    n += res(prev, ch[s]) + ((1 << s) == c.attention_at_factor ? attn(ch[s]) : 0);
    prev = ch[s];
  }
  n += 2 * res(prev, prev) + attn(prev);
  for (std::size_t s = ch.size(); s-- > 0;) {
    n += res(prev + ch[s], ch[s]) + ((1 << s) == c.attention_at_factor ? attn(ch[s]) : 0);
    prev = ch[s];
  }
  return n + 2 * ch[0] + ch[0] * 27 + 1;
}

template <class T>
Tensor<T> random_input(const DenoiserConfig& c, int batch, std::uint64_t seed) {
  const Shape s{batch, c.in_channels, c.resolution, c.resolution, c.resolution};
  std::vector<T> v(static_cast<std::size_t>(numel(s)));
  const CounterRng rng(seed);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<T>(rng.normal(i));
  return Tensor<T>::from(s, v);
}

template <class T>
void randomize_output_layer(UNet<T>& net, std::uint64_t seed) {
  auto& w = net.parameter("out.conv.w");
  const CounterRng rng(seed);
  for (std::size_t i = 0; i < static_cast<std::size_t>(w.size()); ++i) w.data()[i] = static_cast<T>(0.2 * rng.normal(i));
}

}  // namespace

TEST_CASE("parameter count is a pure function of the config") {
  const DenoiserConfig def;
  CHECK(UNet<float>(def, 0).parameter_count() == expected_count(def));
  CHECK(UNet<float>(def, 0).parameter_count() == 1578401);
  CHECK(UNet<float>(DenoiserConfig::for_aux(geometry::AuxChannels::none()), 3).parameter_count() == 1576673);
  const DenoiserConfig small = small_config();
  CHECK(UNet<double>(small, 9).parameter_count() == expected_count(small));
}

TEST_CASE("config validation") {
  DenoiserConfig c;
  c.in_channels = 3;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = DenoiserConfig();
  c.resolution = 20;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = DenoiserConfig();
  c.stage_channels.clear();
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = DenoiserConfig();
  c.attention_at_factor = 16;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  CHECK(DenoiserConfig::for_aux(geometry::AuxChannels::parse("s_w")).in_channels == 2);
  nlohmann::json j = small_config();
  CHECK(j.get<DenoiserConfig>().aux == small_config().aux);
  CHECK(nlohmann::json(j.get<DenoiserConfig>()) == j);
}

TEST_CASE("forward shape, zero initial output and live timestep conditioning") {
  const DenoiserConfig c = small_config();
  UNet<float> net(c, 1);
  const auto x = random_input<float>(c, 2, 5);
  const int t[] = {3, 700};
  const auto y = net.forward(x, t);
  CHECK(y.shape() == Shape{2, 1, 4, 4, 4});
  for (float v : y.data()) CHECK(v == 0.0f);

  randomize_output_layer(net, 2);
  const int t1[] = {10, 10};
  const int t2[] = {500, 500};
  const auto a = net.forward(x, t1);
  const auto b = net.forward(x, t2);
  double diff = 0.0;
  for (std::int64_t i = 0; i < a.size(); ++i) diff = std::max(diff, static_cast<double>(std::abs(a.data()[i] - b.data()[i])));
  CHECK(diff > 0.0);
  const auto a2 = net.forward(x, t1);
  CHECK(std::equal(a.data().begin(), a.data().end(), a2.data().begin()));
}

TEST_CASE("batch entries are independent") {
  const DenoiserConfig c = small_config();
  UNet<float> net(c, 4);
  randomize_output_layer(net, 5);
  const auto x = random_input<float>(c, 2, 6);
  const int t[] = {4, 9};
  const auto both = net.forward(x, t);
  const std::size_t per = static_cast<std::size_t>(x.size() / 2);
  const auto second = Tensor<float>::from({1, c.in_channels, 4, 4, 4},
                                          std::vector<float>(x.data().begin() + per, x.data().end()));
  const int t9[] = {9};
  const auto alone = net.forward(second, t9);
  for (std::int64_t i = 0; i < alone.size(); ++i) CHECK(alone.data()[i] == both.data()[alone.size() + i]);
}

TEST_CASE("forward rejects a wrong channel count") {
  const DenoiserConfig c = small_config();
  UNet<float> net(c, 1);
  DenoiserConfig other = c;
  other.in_channels = 2;
  const int t[] = {1};
  CHECK_THROWS_AS(net.forward(random_input<float>(other, 1, 1), t), ShapeMismatch);
}

TEST_CASE("full small U-Net passes a finite-difference gradient check") {
  const DenoiserConfig c = small_config();
  UNet<double> net(c, 11);
  randomize_output_layer(net, 12);
  auto x = random_input<double>(c, 2, 13);
  x.set_requires_grad(true);
  const int t[] = {17, 640};
  std::vector<Tensor<double>> inputs{x};
  for (auto& [name, p] : net.parameters()) inputs.push_back(p);
  const auto r = test::gradcheck(inputs, [&] { return test::project(net.forward(x, t), 14); }, 1e-5, 6);
  CHECK(r.max_rel_error < 1e-6);
  CHECK(r.entries > 6 * net.parameters().size() / 2);
}

TEST_CASE("clone owns its parameters") {
  UNet<float> a(small_config(), 3);
  UNet<float> b = a.clone();
  b.parameter("in.w").data()[0] += 1.0f;
  CHECK(a.parameter("in.w").data()[0] != b.parameter("in.w").data()[0]);
  CHECK_THROWS(a.parameter("missing"));
}

TEST_CASE("model input encoding") {
  const auto pc = phantom::generate([] {
    phantom::PhantomSpec s;
    s.grid = Grid::centered(16, 1.5);
    return s;
  }());
  DenoiserConfig c = DenoiserConfig::for_aux(geometry::AuxChannels::parse("s_p,ribbon"));
  c.resolution = 16;
  const auto y = encode_endpoint(c, pc.conditions);
  for (std::size_t i = 0; i < y.size(); ++i) {
    CHECK(y[i] == std::clamp(pc.conditions.s_c[i] / 8.0f, -1.0f, 1.0f));
  }
  const auto aux = encode_aux(c, pc.conditions);
  REQUIRE(aux.size() == 2 * y.size());
  CHECK(aux[y.size() + 5] == pc.conditions.ribbon[5]);
  const auto x0 = encode_image(c, pc.image);
  const Volume back = decode_image(c, x0, pc.image.grid());
  for (std::size_t i = 0; i < x0.size(); ++i) CHECK(back[i] == doctest::Approx(pc.image[i]).epsilon(1e-6));

  DenoiserConfig wrong = c;
  wrong.resolution = 32;
  CHECK_THROWS_AS(encode_endpoint(wrong, pc.conditions), ShapeMismatch);
}
