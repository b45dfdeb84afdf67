#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace bilsyn::cli {

enum ExitCode : int {
  kOk = 0,
  kValidation = 2,
  kInfeasible = 3,
  kRuntime = 4,
  kCertificate = 5,
};

struct SynthesizeArgs {
  std::string problem;
  std::string mode = "gs";
  std::string multiplier = "full";
  std::optional<std::string> gamma;  // a number or "bisect"
  double target_P = 0.0;
  bool no_verify = false;
  std::string out = ".";
  int samples = 10000;
  std::uint64_t seed = 1;
};

struct SweepArgs {
  std::string problem;
  std::string mode = "gs";
  std::string multiplier = "full";
  std::string grid;
  std::optional<std::string> out;
};

struct SimulateArgs {
  std::string problem;
  std::string controller;
  std::string z0;
  std::string wp = "0";
  int steps = 200;
  std::uint64_t seed = 1;
  std::optional<std::string> out;
};

struct VerifyArgs {
  std::string problem;
  std::string report;
  int samples = 10000;
  int horizon = 200;
  std::uint64_t seed = 1;
};

int RunValidate(const std::string& path);
int RunSynthesize(const SynthesizeArgs& args);
int RunSweep(const SweepArgs& args);
int RunSimulate(const SimulateArgs& args);
int RunVerify(const VerifyArgs& args);

/// "a:b:step" (inclusive), or a comma-separated list; empty text → empty.
std::vector<double> ParseGrid(const std::string& text);

}  // namespace bilsyn::cli
