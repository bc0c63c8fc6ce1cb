#include <iostream>
#include <vector>

#include <CLI11.hpp>

#include "flowbind/cli/commands.hpp"

int main(int argc, char** argv) {
  using namespace flowbind;
  CLI::App app{"Shared-latent flow matching for partially paired modalities"};
  app.require_subcommand(1);

  CommandOptions opts;
  std::uint64_t seed = 0;
  std::size_t rows = 0;
  std::string which;

  std::vector<CLI::Option*> seed_options;
  CLI::Option* rows_option = nullptr;

  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", opts.config, "experiment config file");
    seed_options.push_back(cmd->add_option("--seed", seed, "override the config seed"));
    cmd->add_option("--out", opts.out, "output directory or file")->required();
  };

  auto* gen = app.add_subcommand("gen-world", "sample the synthetic world");
  add_common(gen);
  rows_option = gen->add_option("--rows", rows, "number of samples");

  auto* train = app.add_subcommand("train", "train a model bundle");
  add_common(train);

  auto* translate = app.add_subcommand("translate", "translate latents between modalities");
  translate->add_option("--bundle", opts.bundle, "model bundle")->required();
  translate->add_option("--sources", opts.sources, "comma-separated source modalities")
      ->required();
  translate->add_option("--target", opts.target, "target modality")->required();
  translate->add_option("--in", opts.in, "input CSV or JSON file")->required();
  translate->add_option("--out", opts.out, "output file")->required();
  translate->add_option("--format", opts.format, "csv or json (default: from --in)")
      ->check(CLI::IsMember({"csv", "json"}));

  auto* eval = app.add_subcommand("eval", "evaluate a model bundle");
  eval->add_option("which", which, "decompose | alignment | variance | ablation | interp")
      ->required()
      ->check(CLI::IsMember({"decompose", "alignment", "variance", "ablation", "interp"}));
  eval->add_option("--bundle", opts.bundle, "model bundle")->required();
  eval->add_option("--out", opts.out, "output directory")->required();
  seed_options.push_back(eval->add_option("--seed", seed, "override the evaluation seed"));

  CLI11_PARSE(app, argc, argv);
  for (const auto* opt : seed_options) {
    if (opt->count() > 0) opts.seed = seed;
  }
  if (rows_option->count() > 0) opts.rows = rows;

  try {
    if (*gen) return cmd_gen_world(opts, std::cout);
    if (*train) return cmd_train(opts, std::cout);
    if (*translate) return cmd_translate(opts, std::cout);
    return cmd_eval(which, opts, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code::kError;
  }
}
