#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "radarloop/errors.hpp"
#include "radarloop/pipeline.hpp"

namespace {

// Shared config handling: --config loads a file, targeted flags override it.
struct ConfigArgs {
  std::string config_path;
  std::uint64_t seed = 1;
  std::string scenario;
  double y_th = 0.9;
  bool train_models = true;
  std::vector<int> grid_accumulation;
  std::vector<int> grid_top_k;
  std::vector<double> grid_y_th;

  CLI::Option* seed_opt = nullptr;
  CLI::Option* scenario_opt = nullptr;
  CLI::Option* y_th_opt = nullptr;
  CLI::Option* train_opt = nullptr;
  CLI::Option* acc_opt = nullptr;
  CLI::Option* top_opt = nullptr;
  CLI::Option* gy_opt = nullptr;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file")
        ->check(CLI::ExistingFile);
    seed_opt = cmd->add_option("--seed", seed, "master random seed");
    scenario_opt =
        cmd->add_option("--scenario", scenario, "world scenario: tunnel or forest");
    y_th_opt = cmd->add_option(
        "--y-th", y_th,
        "loop acceptance threshold; replaces the sweep list unless --grid-y-th is given");
    train_opt = cmd->add_flag("--train-models,!--no-train-models", train_models,
                              "fit classifiers from the dataset when no model files are given");
    acc_opt = cmd->add_option("--grid-accumulation", grid_accumulation,
                              "keyframe accumulation counts to sweep");
    top_opt = cmd->add_option("--grid-top-k", grid_top_k, "candidate list sizes to sweep");
    gy_opt = cmd->add_option("--grid-y-th", grid_y_th, "acceptance thresholds to sweep");
  }

  radarloop::PipelineConfig resolve() const {
    radarloop::PipelineConfig cfg;
    if (!config_path.empty()) cfg = radarloop::load_config(config_path);
    if (seed_opt->count()) cfg.seed = seed;
    if (scenario_opt->count()) cfg.scenario = scenario;
    if (y_th_opt->count()) {
      cfg.y_th = y_th;
      if (!gy_opt->count()) cfg.grid.y_th = {y_th};
    }
    if (train_opt->count()) cfg.train_models = train_models;
    if (acc_opt->count()) cfg.grid.accumulation = grid_accumulation;
    if (top_opt->count()) cfg.grid.top_k = grid_top_k;
    if (gy_opt->count()) cfg.grid.y_th = grid_y_th;
    return cfg;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"4D radar SLAM pipeline: simulation, odometry, loop closure, evaluation"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth", "generate a synthetic radar dataset");
  ConfigArgs synth_args;
  synth_args.attach(synth);
  std::string synth_out;
  synth->add_option("--out", synth_out, "output dataset directory")->required();

  auto* odom = app.add_subcommand("odometry", "run scan-to-scan odometry over a dataset");
  ConfigArgs odom_args;
  odom_args.attach(odom);
  std::string odom_dataset, odom_out;
  odom->add_option("--dataset", odom_dataset, "dataset directory")->required();
  odom->add_option("--out", odom_out, "output directory")->required();

  auto* talign = app.add_subcommand("train-align", "train the alignment quality classifier");
  ConfigArgs talign_args;
  talign_args.attach(talign);
  std::string talign_dataset, talign_model;
  talign->add_option("--dataset", talign_dataset, "dataset directory")->required();
  talign->add_option("--model", talign_model, "output model file")->required();

  auto* tloop = app.add_subcommand("train-loop", "train the loop closure classifier");
  ConfigArgs tloop_args;
  tloop_args.attach(tloop);
  std::string tloop_dataset, tloop_align, tloop_model;
  tloop->add_option("--dataset", tloop_dataset, "dataset directory")->required();
  tloop->add_option("--align-model", tloop_align, "alignment quality model file")
      ->required()
      ->check(CLI::ExistingFile);
  tloop->add_option("--model", tloop_model, "output model file")->required();

  auto* slam = app.add_subcommand("slam", "run the full loop closure pipeline");
  ConfigArgs slam_args;
  slam_args.attach(slam);
  std::string slam_dataset, slam_out, slam_align, slam_loop;
  slam->add_option("--dataset", slam_dataset, "dataset directory")->required();
  slam->add_option("--out", slam_out, "output directory")->required();
  slam->add_option("--align-model", slam_align, "alignment quality model file")
      ->check(CLI::ExistingFile);
  slam->add_option("--loop-model", slam_loop, "loop classifier model file")
      ->check(CLI::ExistingFile);

  auto* eval = app.add_subcommand("eval", "compute metrics and plots for slam results");
  std::string eval_results, eval_dataset;
  eval->add_option("--results", eval_results, "slam output directory")->required();
  eval->add_option("--dataset", eval_dataset, "dataset directory with ground truth")->required();

  synth->callback([&] { radarloop::cmd_synth(synth_args.resolve(), synth_out); });
  odom->callback([&] { radarloop::cmd_odometry(odom_args.resolve(), odom_dataset, odom_out); });
  talign->callback(
      [&] { radarloop::cmd_train_align(talign_args.resolve(), talign_dataset, talign_model); });
  tloop->callback([&] {
    radarloop::cmd_train_loop(tloop_args.resolve(), tloop_dataset, tloop_align, tloop_model);
  });
  slam->callback([&] {
    radarloop::cmd_slam(slam_args.resolve(), slam_dataset, slam_out, slam_align, slam_loop);
  });
  eval->callback([&] { radarloop::cmd_eval(eval_results, eval_dataset); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const radarloop::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const radarloop::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const radarloop::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
