// Command-line front end: flag parsing only.  All behavior lives in
// pforest::cli::run_* so tests can drive the same code in-process.

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "pforest/cli.hpp"

int main(int argc, char** argv) {
  using namespace pforest::cli;

  CLI::App app{"Differentiable decision forests via Gaussian input smoothing"};
  app.require_subcommand(1);

  GenDataArgs gen;
  CLI::App* cmd_gen = app.add_subcommand("gen-data", "Generate a synthetic labeled CSV");
  cmd_gen->add_option("--kind", gen.kind,
                      "identity_line | xor_quadrants | concentric_circles | two_spirals | "
                      "gaussian_blobs")
      ->capture_default_str();
  cmd_gen->add_option("--n", gen.n, "Number of rows")->capture_default_str();
  cmd_gen->add_option("--noise", gen.noise, "Label-flip probability")->capture_default_str();
  cmd_gen->add_option("--seed", gen.seed, "RNG seed")->capture_default_str();
  cmd_gen->add_option("--blobs", gen.blobs, "Cluster count (gaussian_blobs)")
      ->capture_default_str();
  cmd_gen->add_option("--embed-dim", gen.embed_dim,
                      "If > 0, emit synthetic embedding features of this width instead of "
                      "the raw 2D coordinates")
      ->capture_default_str();
  cmd_gen->add_option("--embed-scale", gen.embed_scale, "Sharpness of synthetic embeddings")
      ->capture_default_str();
  cmd_gen->add_option("--out", gen.out, "Output CSV path")->required();

  TrainArgs train;
  CLI::App* cmd_train =
      app.add_subcommand("train", "Train an embedding + random forest end to end");
  cmd_train->add_option("--train", train.train_csv, "Training CSV")->required();
  cmd_train->add_option("--test", train.test_csv,
                        "Held-out CSV (default: carve a test split from --train)");
  cmd_train->add_option("--valid-fraction", train.valid_fraction, "Validation fraction")
      ->capture_default_str();
  cmd_train->add_option("--trees", train.trees, "Number of random trees")
      ->capture_default_str();
  cmd_train->add_option("--depth", train.depth, "Tree depth")->capture_default_str();
  cmd_train->add_option("--leaf-init", train.leaf_init, "binary01 | uniform01 | zero")
      ->capture_default_str();
  cmd_train->add_option("--layers", train.layers,
                        "Comma-separated MLP widths, e.g. 16,8 (empty: identity embedding)");
  cmd_train->add_option("--loss", train.loss, "sigmoid | softmax | squared")
      ->capture_default_str();
  cmd_train->add_option("--classes", train.classes, "Class count (softmax)")
      ->capture_default_str();
  cmd_train->add_option("--sigma", train.sigma, "Smoothing noise scale")
      ->capture_default_str();
  cmd_train->add_option("--schedule", train.schedule, "fixed | linear | exponential")
      ->capture_default_str();
  cmd_train->add_option("--sigma-end", train.sigma_end, "Final sigma (linear schedule)")
      ->capture_default_str();
  cmd_train->add_option("--decay", train.decay, "Per-epoch factor (exponential schedule)")
      ->capture_default_str();
  cmd_train->add_option("--batch", train.batch, "Minibatch size")->capture_default_str();
  cmd_train->add_option("--epochs", train.epochs, "Max epochs")->capture_default_str();
  cmd_train->add_option("--patience", train.patience, "Early-stopping patience")
      ->capture_default_str();
  cmd_train->add_option("--lr", train.lr, "Adam learning rate")->capture_default_str();
  cmd_train->add_option("--seed", train.seed, "RNG seed")->capture_default_str();
  cmd_train->add_option("--out-dir", train.out_dir, "Directory for checkpoints and metrics")
      ->capture_default_str();

  FinetuneArgs fine;
  CLI::App* cmd_fine = app.add_subcommand(
      "finetune", "Freeze a forest and fine-tune an identity-initialized adapter under it");
  cmd_fine->add_option("--data", fine.data_csv, "Embedding-space CSV with labels")->required();
  cmd_fine->add_option("--forest", fine.forest_path,
                       "Forest checkpoint (default: boost one on the training split)");
  cmd_fine->add_option("--bt-rounds", fine.bt_rounds, "Boosting rounds")
      ->capture_default_str();
  cmd_fine->add_option("--bt-depth", fine.bt_depth, "Boosted tree depth")
      ->capture_default_str();
  cmd_fine->add_option("--bt-lr", fine.bt_lr, "Boosting shrinkage")->capture_default_str();
  cmd_fine->add_option("--bt-loss", fine.bt_loss, "sigmoid | squared")->capture_default_str();
  cmd_fine->add_option("--sigma", fine.sigma, "Smoothing noise scale")->capture_default_str();
  cmd_fine->add_option("--batch", fine.batch, "Minibatch size")->capture_default_str();
  cmd_fine->add_option("--epochs", fine.epochs, "Max epochs")->capture_default_str();
  cmd_fine->add_option("--patience", fine.patience, "Early-stopping patience")
      ->capture_default_str();
  cmd_fine->add_option("--lr", fine.lr, "Adam learning rate")->capture_default_str();
  cmd_fine->add_option("--seed", fine.seed, "RNG seed")->capture_default_str();
  cmd_fine->add_flag("--train-leaves", fine.train_leaves,
                     "Ignored (the forest stays frozen); emits a warning");
  cmd_fine->add_option("--out-dir", fine.out_dir, "Directory for checkpoints and metrics")
      ->capture_default_str();

  HeatmapArgs heat;
  CLI::App* cmd_heat = app.add_subcommand(
      "heatmap", "Render a forest's decision surface at several noise scales");
  cmd_heat->add_option("--forest", heat.forest_path, "Forest checkpoint")->required();
  cmd_heat->add_option("--sigmas", heat.sigmas, "Comma-separated sigmas (0 is always added)")
      ->capture_default_str();
  cmd_heat->add_option("--resolution", heat.resolution, "Grid cells per axis")
      ->capture_default_str();
  cmd_heat->add_option("--lo", heat.lo, "Domain lower bound")->capture_default_str();
  cmd_heat->add_option("--hi", heat.hi, "Domain upper bound")->capture_default_str();
  cmd_heat->add_option("--out", heat.out_prefix, "Output path prefix")->required();

  GradcheckArgs grad;
  CLI::App* cmd_grad = app.add_subcommand(
      "gradcheck", "Compare analytic gradients against finite differences");
  cmd_grad->add_flag("--random", grad.random_model, "Use a seeded random model");
  cmd_grad->add_option("--forest", grad.forest_path, "Forest checkpoint");
  cmd_grad->add_option("--embedding", grad.embed_path,
                       "Embedding checkpoint (default: identity)");
  cmd_grad->add_option("--cases", grad.cases, "Random probe inputs")->capture_default_str();
  cmd_grad->add_option("--tolerance", grad.tolerance, "Max relative error accepted")
      ->capture_default_str();
  cmd_grad->add_option("--sigma", grad.sigma, "Smoothing noise scale")->capture_default_str();
  cmd_grad->add_option("--seed", grad.seed, "RNG seed")->capture_default_str();
  cmd_grad->add_option("--report", grad.report_path, "Write the full JSON report here");

  EvalArgs eval;
  CLI::App* cmd_eval = app.add_subcommand("eval", "Evaluate a checkpoint on a CSV");
  cmd_eval->add_option("--forest", eval.forest_path, "Forest checkpoint")->required();
  cmd_eval->add_option("--embedding", eval.embed_path,
                       "Embedding checkpoint (default: identity)");
  cmd_eval->add_option("--data", eval.data_csv, "CSV to score")->required();
  cmd_eval->add_flag("--smooth", eval.smooth,
                     "Score the smoothed model instead of the exact forest");
  cmd_eval->add_option("--sigma", eval.sigma, "Noise scale for --smooth")
      ->capture_default_str();
  cmd_eval->add_option("--loss", eval.loss, "sigmoid | softmax | squared")
      ->capture_default_str();
  cmd_eval->add_option("--metric", eval.metric, "accuracy | mse")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  if (cmd_gen->parsed()) return run_gen_data(gen, std::cout, std::cerr);
  if (cmd_train->parsed()) return run_train(train, std::cout, std::cerr);
  if (cmd_fine->parsed()) return run_finetune(fine, std::cout, std::cerr);
  if (cmd_heat->parsed()) return run_heatmap(heat, std::cout, std::cerr);
  if (cmd_grad->parsed()) return run_gradcheck(grad, std::cout, std::cerr);
  if (cmd_eval->parsed()) return run_eval(eval, std::cout, std::cerr);
  return 1;  // unreachable: require_subcommand(1)
}
