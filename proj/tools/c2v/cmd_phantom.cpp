#include <memory>

#include "c2v/commands.hpp"
#include "c2v/common/error.hpp"
#include "c2v/common/parallel.hpp"
#include "c2v/dataset.hpp"
#include "c2v/phantom/phantom.hpp"

namespace c2v::cli {

Command make_phantom(CLI::App& root, const nlohmann::json* replay) {
  struct Opts {
    std::string out;
    std::size_t count = 1;
    std::size_t start = 0;
    int dims = 32;
    double spacing = 1.0;
    phantom::PhantomSpec spec;
  };
  auto o = std::make_shared<Opts>();
  auto* app = root.add_subcommand("phantom", "Generate synthetic surface/image cases");
  auto ps = std::make_shared<ParamSet>(app, replay);
  auto& s = o->spec;
  require_unless_replayed(*ps, ps->add("--out,-o", "out", o->out, "Output dataset directory"), "out");
  ps->add("--count,-n", "count", o->count, "Number of cases");
  ps->add("--start", "start", o->start, "Index of the first case");
  ps->add("--dims", "dims", o->dims, "Voxels per axis");
  ps->add("--spacing", "spacing", o->spacing, "Voxel spacing (mm)");
  ps->add("--inner-radius", "inner_radius", s.inner_radius, "Base white-surface radius (mm)");
  ps->add("--outer-radius", "outer_radius", s.outer_radius, "Base pial-surface radius (mm)");
  ps->add("--min-degree", "min_degree", s.min_degree, "Lowest spherical-harmonic degree of the bump fields");
  ps->add("--max-degree", "max_degree", s.max_degree, "Highest spherical-harmonic degree of the bump fields");
  ps->add("--bump-amplitude", "bump_amplitude", s.bump_amplitude, "Relative radial bump amplitude");
  ps->add("--thickness-modulation", "thickness_modulation", s.thickness_modulation, "Relative thickness modulation");
  ps->add("--subdivisions", "subdivisions", s.subdivisions, "Icosphere subdivision level");
  ps->add("--background-level", "background_level", s.background_level, "Intensity outside the pial surface");
  ps->add("--interior-level", "interior_level", s.interior_level, "Intensity inside the white surface");
  ps->add("--ribbon-level", "ribbon_level", s.ribbon_level, "Intensity of the cortical ribbon");
  ps->add("--noise", "noise_sigma", s.noise_sigma, "Gaussian noise sigma");
  ps->add("--bias-amplitude", "bias_amplitude", s.bias_amplitude, "Multiplicative bias amplitude");
  ps->add("--bias-wavelength", "bias_wavelength", s.bias_wavelength, "Bias field wavelength (mm)");

  Command c{"phantom", app, [ps] { return ps->to_json(); }, {}};
  c.run = [o, ps](const Globals& g) {
    if (o->count < 1) throw ValidationError("phantom: --count must be positive");
    if (o->dims < 2 || !(o->spacing > 0.0)) throw ValidationError("phantom: bad grid");
    phantom::PhantomSpec base = o->spec;
    base.grid = Grid::centered(o->dims, o->spacing);
    base.validate();
    const fs::path out(o->out);
    fs::create_directories(out);
    parallel_for(o->count, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        const std::size_t index = o->start + i;
        const phantom::PhantomCase pc = phantom::generate(phantom::population_member(base, g.seed, index));
        const fs::path dir = out / case_name(index);
        fs::create_directories(dir);
        geometry::save_mesh(dir / kWhiteFile, pc.white);
        geometry::save_mesh(dir / kPialFile, pc.pial);
        save_volume(dir / kImageFile, pc.image);
        write_json(dir / kSpecFile, nlohmann::json(pc.spec));
      }
    }, 1);
    write_run_config(out, make_run_config("phantom", g, ps->to_json()));
  };
  return c;
}

}  // namespace c2v::cli
