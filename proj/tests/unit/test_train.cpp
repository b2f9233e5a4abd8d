#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "c2v/common/error.hpp"
#include "c2v/nn/train.hpp"
#include "c2v/phantom/phantom.hpp"
#include "support/helpers.hpp"

using namespace c2v;
using namespace c2v::nn;

namespace {

DenoiserConfig tiny_config() {
  DenoiserConfig c = DenoiserConfig::for_aux(geometry::AuxChannels::parse("ribbon"));
  c.stage_channels = {4, 8};
  c.attention_at_factor = 2;
  c.attention_heads = 1;
  c.attention_head_channels = 4;
  c.groups = 2;
  c.resolution = 8;
  c.time_embedding_dim = 8;
  return c;
}

TrainConfig tiny_train(int epochs) {
  TrainConfig t;
  t.epochs = epochs;
  t.learning_rate = 3e-3;
  t.batch_size = 2;
  t.ema_rate = 0.9;
  t.T = 50;
  t.seed = 77;
  return t;
}

const std::vector<PreparedPair>& tiny_data() {
  static const std::vector<PreparedPair> data = [] {
    std::vector<TrainingPair> pairs;
    phantom::PhantomSpec base;
    base.grid = Grid::centered(8, 3.5);
    base.subdivisions = 2;
    for (std::size_t i = 0; i < 3; ++i) {
      const auto pc = phantom::generate(phantom::population_member(base, 5, i));
      pairs.push_back({pc.conditions, pc.image});
    }
    return prepare(tiny_config(), pairs);
  }();
  return data;
}

bool same_weights(const UNet<float>& a, const UNet<float>& b) {
  for (std::size_t i = 0; i < a.parameters().size(); ++i) {
    const auto x = a.parameters()[i].second.data();
    const auto y = b.parameters()[i].second.data();
    if (!std::equal(x.begin(), x.end(), y.begin())) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("adam matches a hand-rolled update") {
  std::vector<NamedTensor<float>> params{{"w", Tensor<float>::from({2}, {1.0f, -2.0f}, true)}};
  Adam adam({2});
  double m[2] = {0, 0}, v[2] = {0, 0}, w[2] = {1.0, -2.0};
  const float grads[3][2] = {{0.5f, -1.0f}, {0.25f, 2.0f}, {-0.1f, 0.0f}};
  for (int s = 0; s < 3; ++s) {
    auto g = params[0].second.node()->ensure_grad();
    g[0] = grads[s][0];
    g[1] = grads[s][1];
    adam.step(params, 0.01);
    for (int k = 0; k < 2; ++k) {
      m[k] = 0.9 * m[k] + 0.1 * grads[s][k];
      v[k] = 0.999 * v[k] + 0.001 * grads[s][k] * grads[s][k];
      const double mh = m[k] / (1 - std::pow(0.9, s + 1));
      const double vh = v[k] / (1 - std::pow(0.999, s + 1));
      w[k] -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
      CHECK(params[0].second.data()[k] == doctest::Approx(w[k]).epsilon(1e-6));
    }
  }
  CHECK(adam.steps() == 3);
}

TEST_CASE("ema update") {
  std::vector<NamedTensor<float>> params{{"w", Tensor<float>::from({2}, {1.0f, 3.0f})}};
  std::vector<std::vector<float>> ema{{0.0f, 1.0f}};
  ema_update(ema, params, 0.75);
  CHECK(ema[0][0] == doctest::Approx(0.25));
  CHECK(ema[0][1] == doctest::Approx(1.5));
  std::vector<std::vector<float>> wrong;
  CHECK_THROWS_AS(ema_update(wrong, params, 0.5), UsageError);
}

TEST_CASE("plateau schedule") {
  TrainConfig c;
  c.plateau_patience = 2;
  c.plateau_factor = 0.5;
  c.plateau_threshold = 0.01;
  PlateauState p;
  double lr = 1.0;
  lr = p.observe(1.0, lr, c);
  CHECK(lr == 1.0);
  lr = p.observe(0.995, lr, c);  // within threshold: counts as stalled
  CHECK(lr == 1.0);
  lr = p.observe(0.999, lr, c);
  CHECK(lr == 0.5);
  lr = p.observe(0.5, lr, c);
  CHECK(lr == 0.5);
  CHECK(p.best == 0.5);
  CHECK(p.bad_epochs == 0);
}

TEST_CASE("train config validation and json") {
  TrainConfig t = tiny_train(3);
  const nlohmann::json j = t;
  CHECK(nlohmann::json(j.get<TrainConfig>()) == j);
  t.ema_rate = 1.0;
  CHECK_THROWS_AS(t.validate(), ValidationError);
  t = tiny_train(3);
  t.plateau_factor = 1.0;
  CHECK_THROWS_AS(t.validate(), ValidationError);
  t = tiny_train(0);
  CHECK_THROWS_AS(Trainer(tiny_config(), t), ValidationError);
}

TEST_CASE("training reduces the loss on a tiny problem") {
  Trainer tr(tiny_config(), tiny_train(40));
  const auto& data = tiny_data();
  const double before = evaluate_loss(tr.net(), data, 50, 3);
  tr.fit(data, {});
  const double after = evaluate_loss(tr.net(), data, 50, 3);
  CHECK(after < 0.8 * before);
  CHECK(tr.history().size() == 40);
  CHECK(tr.steps() == 80);
  for (const auto& r : tr.history()) CHECK(std::isfinite(r.train_loss));
  CHECK(!tr.history().back().val_loss.has_value());
  // EMA weights trail the raw weights.
  CHECK(!same_weights(tr.ema_net(), tr.net()));
}

TEST_CASE("validation loss is recorded and drives the schedule") {
  TrainConfig c = tiny_train(2);
  c.plateau_patience = 1;
  c.plateau_threshold = 1e9;  // every epoch counts as stalled
  Trainer tr(tiny_config(), c);
  const auto& data = tiny_data();
  const std::vector<PreparedPair> train(data.begin(), data.begin() + 2);
  const std::vector<PreparedPair> val(data.begin() + 2, data.end());
  tr.fit(train, val);
  REQUIRE(tr.history().size() == 2);
  CHECK(tr.history()[0].val_loss.has_value());
  CHECK(tr.history()[0].learning_rate == c.learning_rate);
  // The first epoch always improves on +inf; the second stalls and halves.
  CHECK(tr.learning_rate() == doctest::Approx(c.learning_rate * 0.5));
}

TEST_CASE("checkpoint round trip and exact resume") {
  const auto dir = test::scratch_dir("train_resume");
  const auto& data = tiny_data();

  Trainer straight(tiny_config(), tiny_train(4));
  straight.fit(data, {});

  Trainer first(tiny_config(), tiny_train(2));
  first.fit(data, {});
  first.save(dir / "ck.c2ck");
  Trainer resumed = Trainer::load(dir / "ck.c2ck");
  CHECK(same_weights(resumed.net(), first.net()));
  CHECK(same_weights(resumed.ema_net(), first.ema_net()));
  CHECK(resumed.steps() == first.steps());
  CHECK(resumed.history().size() == 2);
  resumed.set_epochs(4);
  resumed.fit(data, {});

  CHECK(same_weights(resumed.net(), straight.net()));
  CHECK(same_weights(resumed.ema_net(), straight.ema_net()));
  REQUIRE(resumed.history().size() == straight.history().size());
  for (std::size_t i = 0; i < straight.history().size(); ++i) {
    CHECK(resumed.history()[i].train_loss == straight.history()[i].train_loss);
  }

  const auto info = inspect_checkpoint(dir / "ck.c2ck");
  CHECK(info.version == 1);
  CHECK(info.tensors.size() >= first.net().parameters().size());
  const auto model = load_denoiser(dir / "ck.c2ck");
  CHECK(model.steps() == 50);
  CHECK(model.config().resolution == 8);

  const std::string csv = loss_curve_csv(straight.history());
  CHECK(csv.rfind("epoch,train_loss,val_loss,learning_rate,step\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
}

TEST_CASE("corrupt checkpoints are rejected") {
  const auto dir = test::scratch_dir("train_corrupt");
  Trainer tr(tiny_config(), tiny_train(1));
  tr.save(dir / "ck.c2ck");
  {
    std::ofstream os(dir / "bad.c2ck", std::ios::binary);
    os << "NOPE";
  }
  CHECK_THROWS(Trainer::load(dir / "bad.c2ck"));
  const auto size = std::filesystem::file_size(dir / "ck.c2ck");
  std::filesystem::copy_file(dir / "ck.c2ck", dir / "short.c2ck");
  std::filesystem::resize_file(dir / "short.c2ck", size / 2);
  CHECK_THROWS(Trainer::load(dir / "short.c2ck"));
}

TEST_CASE("mismatched data is rejected") {
  DenoiserConfig other = tiny_config();
  other.resolution = 16;
  Trainer tr(other, tiny_train(1));
  CHECK_THROWS_AS(tr.step(tiny_data(), {0}), ShapeMismatch);
}
