#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"
#include "recourse/errors.hpp"

int main(int argc, char** argv) {
  using namespace recourse::cli;
  CLI::App app{"Robust counterfactual recourse: data, training, evaluation and attacks"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth-data", "Write a synthetic shifted two-moons dataset");
  s->add_option("--out", synth.out, "Output directory")->required();
  s->add_option("--k", synth.k, "Number of subsets (>= 2)");
  s->add_option("--n", synth.n, "Rows per subset");
  s->add_option("--rotation", synth.rotation, "Rotation between consecutive subsets, degrees");
  s->add_option("--noise", synth.noise, "Gaussian noise scale");
  s->add_option("--seed", synth.seed, "Random seed");

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train a model and write a checkpoint");
  t->add_option("--config", train.config, "Config JSON")->required();
  t->add_option("--data", train.data, "Dataset directory")->required();
  t->add_option("--mode", train.mode, "robust | counternet_baseline | predictor_only (overrides config)");
  t->add_option("--out", train.out, "Checkpoint path")->required();
  t->add_option("--log", train.log, "Per-epoch JSONL log (default <out>.log.jsonl)");
  t->add_option("--subset", train.subset, "Train on one subset only (default: all)");
  t->add_option("--seed", train.seed, "Random seed (overrides config)");

  EvaluateArgs evaluate;
  auto* e = app.add_subcommand("evaluate", "Leave-one-subset-out robustness protocol");
  e->add_option("--data", evaluate.data, "Dataset directory")->required();
  e->add_option("--config", evaluate.config, "Config JSON")->required();
  e->add_option("--methods", evaluate.methods, "Comma-separated: rocoursenet,counternet,vanillacf");
  e->add_option("--out", evaluate.out, "Report JSON path")->required();
  e->add_option("--seed", evaluate.seed, "Random seed (overrides config)");

  AttackArgs attack;
  auto* a = app.add_subcommand("attack", "Sweep the data-shift attacker against a trained model");
  a->add_option("--ckpt", attack.ckpt, "Checkpoint path")->required();
  a->add_option("--data", attack.data, "Dataset directory")->required();
  a->add_option("--T-grid", attack.t_grid, "Comma-separated attacker steps");
  a->add_option("--E-grid", attack.e_grid, "Comma-separated maximum perturbations");
  a->add_option("--norm", attack.norm, "linf | l2");
  a->add_option("--out", attack.out, "Sweep CSV path")->required();
  a->add_option("--subset", attack.subset, "Attack one subset's test split (default: all)");
  a->add_option("--K", attack.unroll, "Unrolled inner steps");
  a->add_option("--eta", attack.eta, "Inner step size");
  a->add_option("--batch-size", attack.batch_size, "Rows per attacked batch");
  a->add_option("--test-fraction", attack.test_fraction, "Test fraction per subset");
  a->add_option("--seed", attack.seed, "Random seed");

  AblationArgs ablation;
  auto* b = app.add_subcommand("ablation", "Linear versus static epsilon schedule");
  b->add_option("--data", ablation.data, "Dataset directory")->required();
  b->add_option("--config", ablation.config, "Config JSON")->required();
  b->add_option("--E-grid", ablation.e_grid, "Comma-separated maximum perturbations");
  b->add_option("--seeds", ablation.seeds, "Comma-separated seed offsets");
  b->add_option("--out", ablation.out, "Report JSON path")->required();
  b->add_option("--seed", ablation.seed, "Base seed (overrides config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::CallForAllHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex);
    return 2;
  }

  try {
    if (s->parsed()) run_synth(synth);
    if (t->parsed()) run_train(train);
    if (e->parsed()) run_evaluate(evaluate);
    if (a->parsed()) run_attack(attack);
    if (b->parsed()) run_ablation(ablation);
  } catch (const recourse::ConfigError& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 2;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 0;
}
