#include <iostream>

#include "CLI11.hpp"
#include "dbpc/checkpoint.hpp"
#include "dbpc_cli/commands.hpp"

namespace {

using dbpc::cli::RunOptions;

void add_common(CLI::App* cmd, RunOptions& o, bool with_mode = true) {
  cmd->add_option("--config", o.config, "Experiment config file (INI)")->check(CLI::ExistingFile);
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--seed", o.seed, "Random seed");
  cmd->add_option("--threads", o.threads, "Worker threads")->check(CLI::PositiveNumber);
  if (with_mode) {
    cmd->add_option_function<std::string>(
           "--mode", [&o](const std::string& m) { o.mode = dbpc::parse_classify_mode(m); },
           "Classification mode")
        ->check(CLI::IsMember({"feedforward", "iterative"}));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bi-directional predictive coding networks"};
  app.require_subcommand(1);

  RunOptions train_opts, eval_opts, recon_opts, grad_opts, params_opts;
  dbpc::cli::ReconstructOptions recon;
  dbpc::cli::GradcheckCommandOptions grad;
  std::optional<std::string> arch;

  auto* train = app.add_subcommand("train", "Train a network and log per-epoch metrics");
  add_common(train, train_opts);
  train->add_option("--checkpoint", train_opts.checkpoint, "Start from these weights")->check(CLI::ExistingFile);

  auto* eval = app.add_subcommand("eval", "Accuracy and per-layer reconstruction quality");
  add_common(eval, eval_opts);
  eval->add_option("--checkpoint", eval_opts.checkpoint, "Checkpoint to evaluate")->required()->check(CLI::ExistingFile);

  auto* reconstruct = app.add_subcommand("reconstruct", "Write PGM reconstructions of one image");
  add_common(reconstruct, recon_opts);
  reconstruct->add_option("--checkpoint", recon_opts.checkpoint, "Checkpoint")->required()->check(CLI::ExistingFile);
  auto* index = reconstruct->add_option("--index", recon.index, "Test-set sample index");
  auto* image = reconstruct->add_option("--image", recon.image, "P5 PGM input")->check(CLI::ExistingFile);
  index->excludes(image);
  reconstruct->add_option("--layers", recon.layers, "Source layers, numbered from 1 (the input)")->delimiter(',');

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the analytic gradients");
  add_common(gradcheck, grad_opts, false);
  gradcheck->add_option("--corrupt", grad.corrupt, "Scale analytic gradients by (1 + x); negative control");
  gradcheck->add_option("--fc-instances", grad.fc_instances, "Random fully-connected instances");
  gradcheck->add_option("--conv-instances", grad.conv_instances, "Random convolutional instances");

  auto* params = app.add_subcommand("params", "Print the weight count of an architecture");
  add_common(params, params_opts, false);
  params->add_option("--arch", arch, "Preset architecture name");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return dbpc::cli::cmd_train(train_opts, std::cout);
    if (eval->parsed()) return dbpc::cli::cmd_eval(eval_opts, std::cout);
    if (reconstruct->parsed()) return dbpc::cli::cmd_reconstruct(recon_opts, recon, std::cout);
    if (gradcheck->parsed()) return dbpc::cli::cmd_gradcheck(grad_opts, grad, std::cout);
    if (params->parsed()) return dbpc::cli::cmd_params(params_opts, arch, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
