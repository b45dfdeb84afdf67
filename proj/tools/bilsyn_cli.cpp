#include <CLI11.hpp>

#include "commands.hpp"

int main(int argc, char** argv) {
  using namespace bilsyn::cli;
  CLI::App app{"Controller synthesis and verification for bilinear systems"};
  app.require_subcommand(1);

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "Check a problem file");
  validate->add_option("problem", validate_path, "Problem JSON")->required();

  SynthesizeArgs syn;
  auto* synthesize = app.add_subcommand("synthesize", "Design a controller");
  synthesize->add_option("problem", syn.problem, "Problem JSON")->required();
  synthesize->add_option("--mode", syn.mode, "linear|gs")
      ->check(CLI::IsMember({"linear", "gs"}));
  synthesize->add_option("--multiplier", syn.multiplier, "full|scaled")
      ->check(CLI::IsMember({"full", "scaled"}));
  synthesize->add_option("--gamma", syn.gamma,
                         "L2-gain bound, or \"bisect\" to minimize it");
  synthesize->add_option("--target-P", syn.target_P,
                         "Required tr(P) when bisecting on gamma");
  synthesize->add_flag("--no-verify", syn.no_verify,
                       "Skip certificate verification");
  synthesize->add_option("--out", syn.out, "Output directory");
  synthesize->add_option("--samples", syn.samples, "Verification samples");
  synthesize->add_option("--seed", syn.seed, "Verification seed");

  SweepArgs sw;
  auto* sweep = app.add_subcommand("sweep", "Minimal gamma over a grid of P");
  sweep->add_option("problem", sw.problem, "Problem JSON")->required();
  sweep->add_option("--mode", sw.mode, "linear|gs")
      ->check(CLI::IsMember({"linear", "gs"}));
  sweep->add_option("--multiplier", sw.multiplier, "full|scaled")
      ->check(CLI::IsMember({"full", "scaled"}));
  sweep->add_option("--grid", sw.grid, "a:b:step or comma list")
      ->required()
      ->expected(0, 1);
  sweep->add_option("--out", sw.out, "Output directory (default stdout)");

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Roll out the closed loop");
  simulate->add_option("problem", sim.problem, "Problem JSON")->required();
  simulate->add_option("controller", sim.controller, "Controller JSON")
      ->required();
  simulate->add_option("--z0", sim.z0, "Initial state, comma separated")
      ->required();
  simulate->add_option("--wp", sim.wp,
                       "Constant disturbance (comma separated) or "
                       "uniform:DELTA for i.i.d. samples with |wp|^2 <= DELTA");
  simulate->add_option("--steps", sim.steps, "Number of steps");
  simulate->add_option("--seed", sim.seed, "Disturbance seed");
  simulate->add_option("--out", sim.out, "Output directory (default stdout)");

  VerifyArgs ver;
  auto* verify = app.add_subcommand("verify", "Re-check a synthesis report");
  verify->add_option("problem", ver.problem, "Problem JSON")->required();
  verify->add_option("report", ver.report, "Report JSON")->required();
  verify->add_option("--samples", ver.samples, "Monte-Carlo samples");
  verify->add_option("--horizon", ver.horizon, "Gain estimate horizon");
  verify->add_option("--seed", ver.seed, "Sampling seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kValidation;
  }

  if (*validate) return RunValidate(validate_path);
  if (*synthesize) return RunSynthesize(syn);
  if (*sweep) return RunSweep(sw);
  if (*simulate) return RunSimulate(sim);
  if (*verify) return RunVerify(ver);
  return kValidation;
}
