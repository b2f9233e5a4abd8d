#include <iostream>
#include <memory>

#include "c2v/commands.hpp"
#include "c2v/common/error.hpp"
#include "c2v/common/parallel.hpp"
#include "c2v/dataset.hpp"
#include "c2v/nn/train.hpp"

namespace c2v::cli {
namespace {

std::vector<nn::TrainingPair> load_pairs(const std::vector<fs::path>& cases, const Grid& grid) {
  std::vector<nn::TrainingPair> pairs(cases.size());
  parallel_for(cases.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const Volume image = load_volume(cases[i] / kImageFile);
      if (!(image.grid() == grid)) {
        throw ShapeMismatch(cases[i].string() + ": image grid differs from the rest of the dataset");
      }
      pairs[i] = {load_conditions(cases[i], grid), image};
    }
  }, 1);
  return pairs;
}

}  // namespace

Command make_train(CLI::App& root, const nlohmann::json* replay) {
  struct Opts {
    std::string dataset;
    std::string val;
    std::string out;
    std::string resume;
    std::string aux = "s_p,s_w,edge,ribbon";
    std::size_t max_cases = 0;
    nn::DenoiserConfig dcfg;
    nn::TrainConfig tcfg;
  };
  auto o = std::make_shared<Opts>();
  auto* app = root.add_subcommand("train", "Train the bridge denoiser on a phantom/case dataset");
  auto ps = std::make_shared<ParamSet>(app, replay);
  auto& d = o->dcfg;
  auto& t = o->tcfg;
  require_unless_replayed(*ps, ps->add("--dataset,-d", "dataset", o->dataset, "Training dataset root"), "dataset");
  ps->add("--val", "val", o->val, "Validation dataset root (drives the learning-rate plateau)");
  require_unless_replayed(*ps, ps->add("--out,-o", "out", o->out, "Output directory"), "out");
  ps->add("--resume", "resume", o->resume, "Continue from this checkpoint (its configs take precedence)");
  ps->add("--aux", "aux", o->aux, "Auxiliary channels: comma list of s_p,s_w,edge,ribbon or none");
  ps->add("--max-cases", "max_cases", o->max_cases, "Use only the first N training cases (0 = all)");
  ps->add("--stage-channels", "stage_channels", d.stage_channels, "Channels per U-Net stage")->delimiter(',');
  ps->add("--attention-factor", "attention_at_factor", d.attention_at_factor, "Downsampling factor with attention");
  ps->add("--attention-heads", "attention_heads", d.attention_heads, "Attention heads");
  ps->add("--attention-head-channels", "attention_head_channels", d.attention_head_channels, "Channels per head");
  ps->add("--groups", "groups", d.groups, "Maximum group-norm groups");
  ps->add("--time-dim", "time_embedding_dim", d.time_embedding_dim, "Timestep embedding width");
  ps->add("--sdf-scale", "sdf_scale", d.sdf_scale, "SDF normalization scale (mm)");
  ps->add("--epochs", "epochs", t.epochs, "Total epochs");
  ps->add("--lr", "learning_rate", t.learning_rate, "Initial learning rate");
  ps->add("--plateau-factor", "plateau_factor", t.plateau_factor, "Learning-rate decay factor");
  ps->add("--plateau-patience", "plateau_patience", t.plateau_patience, "Epochs without improvement before decay");
  ps->add("--plateau-threshold", "plateau_threshold", t.plateau_threshold, "Minimum loss improvement");
  ps->add("--batch-size", "batch_size", t.batch_size, "Batch size");
  ps->add("--ema-rate", "ema_rate", t.ema_rate, "EMA decay per step");
  ps->add("--T", "T", t.T, "Diffusion steps");

  Command c{"train", app, [ps] { return ps->to_json(); }, {}};
  c.run = [o, ps](const Globals& g) {
    auto cases = list_cases(o->dataset);
    if (cases.empty()) throw ValidationError("train: no cases under " + o->dataset);
    if (o->max_cases > 0 && cases.size() > o->max_cases) cases.resize(o->max_cases);

    std::unique_ptr<nn::Trainer> trainer;
    if (!o->resume.empty()) {
      trainer = std::make_unique<nn::Trainer>(nn::Trainer::load(o->resume));
      trainer->set_epochs(o->tcfg.epochs);
    } else {
      nn::DenoiserConfig dcfg = o->dcfg;
      dcfg.aux = geometry::AuxChannels::parse(o->aux);
      dcfg.in_channels = 1 + static_cast<int>(dcfg.aux.count());
      const Volume first = load_volume(cases.front() / kImageFile);
      if (first.grid().dims[0] != first.grid().dims[1] || first.grid().dims[0] != first.grid().dims[2]) {
        throw ValidationError("train: case grids must be cubic");
      }
      dcfg.resolution = first.grid().dims[0];
      dcfg.validate();
      nn::TrainConfig tcfg = o->tcfg;
      tcfg.seed = g.seed;
      tcfg.validate();
      trainer = std::make_unique<nn::Trainer>(dcfg, tcfg);
    }
    const nn::DenoiserConfig& dcfg = trainer->denoiser_config();
    const Grid grid = load_volume(cases.front() / kImageFile).grid();
    if (grid.dims[0] != dcfg.resolution) throw ShapeMismatch("train: dataset resolution differs from the checkpoint");

    const auto train = nn::prepare(dcfg, load_pairs(cases, grid));
    std::vector<nn::PreparedPair> val;
    if (!o->val.empty()) val = nn::prepare(dcfg, load_pairs(list_cases(o->val), grid));

    const fs::path out(o->out);
    fs::create_directories(out);
    write_run_config(out, make_run_config("train", g, ps->to_json()));
    const auto persist = [&] {
      trainer->save(out / "checkpoint.c2ck");
      write_text(out / "loss.csv", nn::loss_curve_csv(trainer->history()));
    };
    trainer->fit(train, val, [&](const nn::EpochRecord& r) {
      std::cerr << "epoch " << r.epoch << " loss " << format_double(r.train_loss) << " lr "
                << format_double(r.learning_rate) << '\n';
      persist();
    });
    persist();
  };
  return c;
}

}  // namespace c2v::cli
