#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "uacnn/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Gaussian moment propagation through CNN layers"};
  app.require_subcommand(1);

  std::string network, input, output, report, which;
  std::size_t samples = 1'000'000;
  std::uint64_t seed = 1;
  double sigmas = 6.0;

  auto* propagate = app.add_subcommand("propagate", "push input moments through a network");
  propagate->add_option("--network", network, "network JSON")->required();
  propagate->add_option("--input", input, "input moment tensor JSON")->required();
  propagate->add_option("--output", output, "output moment tensor JSON")->required();

  auto* oracle = app.add_subcommand("oracle", "compare each layer against Monte-Carlo sampling");
  oracle->add_option("--network", network, "network JSON")->required();
  oracle->add_option("--input", input, "input moment tensor JSON")->required();
  oracle->add_option("--samples", samples, "samples per layer")->check(CLI::Range(2ull, ~0ull));
  oracle->add_option("--seed", seed, "base seed");
  oracle->add_option("--sigmas", sigmas, "band half-width in standard errors");
  oracle->add_option("--report", report, "report JSON")->required();

  auto* figure = app.add_subcommand("figure", "write ReLU or BCE sweep data as CSV");
  figure->add_option("--which", which, "relu or bce")->required();
  figure->add_option("--output", output, "CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : uacnn::cli::kValidationFailure;
  }

  if (*propagate) return uacnn::cli::cmd_propagate(network, input, output, std::cerr);
  if (*oracle) {
    return uacnn::cli::cmd_oracle(network, input, samples, seed, sigmas, report, std::cerr);
  }
  return uacnn::cli::cmd_figure(which, output, std::cerr);
}
