// Command-line front end for the traffic-dataset augmentation toolkit.
//
// Exit codes: 0 success, 1 usage error, 2 data/parse error, 3 numeric error.

#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "trafficaug/pipeline.hpp"

namespace {

using namespace trafficaug;

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required = true) {
  auto* config_opt =
      cmd->add_option("--config", args.config_path, "JSON configuration file");
  if (config_required) config_opt->required();
  cmd->add_option("--out", args.out_dir, "output directory (overrides config)");
  cmd->add_option("--seed", args.seed, "run seed (overrides config)")
      ->each([&args](const std::string&) { args.seed_set = true; });
}

PipelineConfig resolve_config(const CommonArgs& args) {
  PipelineConfig config =
      args.config_path.empty() ? PipelineConfig{} : load_config(args.config_path);
  if (!args.out_dir.empty()) config.out_dir = args.out_dir;
  if (args.seed_set) config.seed = args.seed;
  return config;
}

std::filesystem::path path_or(const std::string& given,
                              std::filesystem::path fallback) {
  return given.empty() ? std::move(fallback) : std::filesystem::path(given);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"traffic-dataset augmentation toolkit"};
  app.require_subcommand(1);

  CommonArgs ingest_args;
  auto* ingest_cmd = app.add_subcommand(
      "ingest", "parse and filter pcap files into a byte-vector CSV");
  add_common(ingest_cmd, ingest_args);

  CommonArgs stats_args;
  std::string stats_data;
  auto* stats_cmd =
      app.add_subcommand("stats", "class histogram and balance plan of a CSV");
  add_common(stats_cmd, stats_args);
  stats_cmd->add_option("--data", stats_data, "dataset CSV (default <out>/dataset.csv)");

  CommonArgs split_args;
  std::string split_data;
  auto* split_cmd =
      app.add_subcommand("split", "stratified train/validation/test split");
  add_common(split_cmd, split_args);
  split_cmd->add_option("--data", split_data, "dataset CSV (default <out>/dataset.csv)");

  CommonArgs augment_args;
  std::string augment_data;
  AugmentOptions augment_options;
  std::string augment_checkpoint;
  auto* augment_cmd =
      app.add_subcommand("augment", "balance a dataset with one augmenter");
  add_common(augment_cmd, augment_args);
  augment_cmd->add_option("--data", augment_data,
                          "dataset CSV (default <out>/dataset.csv)");
  augment_cmd->add_option("--method", augment_options.method,
                          "none | ros | smote | gan | cgan (overrides config)");
  augment_cmd->add_flag("--train", augment_options.train_inline,
                        "train GAN/CGAN models inline");
  augment_cmd->add_option("--checkpoint", augment_checkpoint,
                          "trained model (cgan file, or gan checkpoint directory)");

  CommonArgs train_gan_args;
  std::string train_gan_data;
  auto* train_gan_cmd = app.add_subcommand(
      "train-gan", "train one generator per class below the balance target");
  add_common(train_gan_cmd, train_gan_args);
  train_gan_cmd->add_option("--data", train_gan_data,
                            "dataset CSV (default <out>/dataset.csv)");

  CommonArgs train_cgan_args;
  std::string train_cgan_data;
  auto* train_cgan_cmd =
      app.add_subcommand("train-cgan", "train one class-conditional generator");
  add_common(train_cgan_cmd, train_cgan_args);
  train_cgan_cmd->add_option("--data", train_cgan_data,
                             "dataset CSV (default <out>/dataset.csv)");

  CommonArgs generate_args;
  GenerateOptions generate_options;
  std::string generate_checkpoint, generate_out_file;
  long long generate_count = 0;
  auto* generate_cmd =
      app.add_subcommand("generate", "sample rows from a trained checkpoint");
  add_common(generate_cmd, generate_args, /*config_required=*/false);
  generate_cmd->add_option("--checkpoint", generate_checkpoint, "model checkpoint")
      ->required();
  generate_cmd->add_option("--count", generate_count, "rows to generate")->required();
  generate_cmd->add_option("--label", generate_options.label,
                           "class label (required for conditional models)");
  generate_cmd->add_option("--out-file", generate_out_file,
                           "output CSV (default <out>/generated.csv)");

  CommonArgs classify_args;
  std::string classify_train, classify_val;
  auto* classify_cmd =
      app.add_subcommand("classify", "train the MLP classifier");
  add_common(classify_cmd, classify_args);
  classify_cmd->add_option("--train-csv", classify_train,
                           "training CSV (default <out>/train.csv)");
  classify_cmd->add_option("--val-csv", classify_val,
                           "validation CSV (default <out>/validation.csv)");

  CommonArgs evaluate_args;
  EvaluateOptions evaluate_options;
  std::string evaluate_model, evaluate_test;
  auto* evaluate_cmd =
      app.add_subcommand("evaluate", "confusion matrix and metrics on a test CSV");
  add_common(evaluate_cmd, evaluate_args);
  evaluate_cmd->add_option("--model", evaluate_model,
                           "classifier checkpoint (default <out>/classifier.ckpt)");
  evaluate_cmd->add_option("--test-csv", evaluate_test,
                           "test CSV (default <out>/test.csv)");
  evaluate_cmd->add_option("--method", evaluate_options.method,
                           "method name recorded in the report");

  std::vector<std::string> report_dirs;
  std::string report_out = ".";
  auto* report_cmd = app.add_subcommand(
      "report", "comparison table across evaluated runs");
  report_cmd->add_option("dirs", report_dirs, "run directories with metrics.json")
      ->required();
  report_cmd->add_option("--out", report_out, "report output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*ingest_cmd) {
      run_ingest(resolve_config(ingest_args));
    } else if (*stats_cmd) {
      const PipelineConfig config = resolve_config(stats_args);
      const auto data = path_or(stats_data, config.out_dir / "dataset.csv");
      std::cout << run_stats(config, data);
    } else if (*split_cmd) {
      const PipelineConfig config = resolve_config(split_args);
      const auto data = path_or(split_data, config.out_dir / "dataset.csv");
      run_split(config, data);
    } else if (*augment_cmd) {
      const PipelineConfig config = resolve_config(augment_args);
      const auto data = path_or(augment_data, config.out_dir / "dataset.csv");
      augment_options.checkpoint = augment_checkpoint;
      run_augment(config, data, augment_options);
    } else if (*train_gan_cmd) {
      const PipelineConfig config = resolve_config(train_gan_args);
      const auto data = path_or(train_gan_data, config.out_dir / "dataset.csv");
      run_train_gan(config, data);
    } else if (*train_cgan_cmd) {
      const PipelineConfig config = resolve_config(train_cgan_args);
      const auto data = path_or(train_cgan_data, config.out_dir / "dataset.csv");
      run_train_cgan(config, data);
    } else if (*generate_cmd) {
      const PipelineConfig config = resolve_config(generate_args);
      generate_options.checkpoint = generate_checkpoint;
      generate_options.out_file = generate_out_file;
      generate_options.count = static_cast<Index>(generate_count);
      run_generate(config, generate_options);
    } else if (*classify_cmd) {
      const PipelineConfig config = resolve_config(classify_args);
      const auto train = path_or(classify_train, config.out_dir / "train.csv");
      const auto val = path_or(classify_val, config.out_dir / "validation.csv");
      run_classify(config, train, val);
    } else if (*evaluate_cmd) {
      const PipelineConfig config = resolve_config(evaluate_args);
      evaluate_options.model = evaluate_model;
      evaluate_options.test_csv = evaluate_test;
      run_evaluate(config, evaluate_options);
    } else if (*report_cmd) {
      std::vector<std::filesystem::path> dirs(report_dirs.begin(),
                                              report_dirs.end());
      run_report(report_out, dirs);
    }
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return 3;
  } catch (const ParseError& e) {
    std::fprintf(stderr, "parse error: %s\n", e.what());
    return 2;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
