#include <memory>
#include <sstream>

#include "c2v/commands.hpp"
#include "c2v/common/error.hpp"
#include "c2v/dataset.hpp"
#include "c2v/diffusion/schedule.hpp"

namespace c2v::cli {

Command make_schedule_dump(CLI::App& root, const nlohmann::json* replay) {
  struct Opts {
    int T = 1000;
    std::string out;
  };
  auto o = std::make_shared<Opts>();
  auto* app = root.add_subcommand("schedule-dump", "Write the bridge schedule coefficients as CSV");
  auto ps = std::make_shared<ParamSet>(app, replay);
  ps->add("--T", "T", o->T, "Diffusion steps");
  require_unless_replayed(*ps, ps->add("--out,-o", "out", o->out, "Output directory"), "out");

  Command c{"schedule-dump", app, [ps] { return ps->to_json(); }, {}};
  c.run = [o, ps](const Globals& g) {
    if (o->T < 1) throw ValidationError("schedule-dump: --T must be positive");
    const diffusion::BridgeSchedule s(o->T);
    std::ostringstream csv;
    csv << "t,alpha,delta,delta_cond,c_xt,c_st,c_ft,delta_tilde\n";
    for (int t = 0; t <= o->T; ++t) {
      csv << t << ',' << format_double(s.alpha(t)) << ',' << format_double(s.delta(t)) << ','
          << format_double(s.delta_cond(t)) << ',' << format_double(s.c_xt(t)) << ',' << format_double(s.c_st(t))
          << ',' << format_double(s.c_ft(t)) << ',' << format_double(s.delta_tilde(t)) << '\n';
    }
    const fs::path out(o->out);
    fs::create_directories(out);
    write_text(out / "schedule.csv", csv.str());
    write_run_config(out, make_run_config("schedule-dump", g, ps->to_json()));
  };
  return c;
}

}  // namespace c2v::cli
