#include "trafficaug/pipeline.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "trafficaug/binio.hpp"
#include "trafficaug/rng.hpp"

namespace trafficaug {

using nlohmann::json;

namespace {

std::string fmt3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

GanLoss gan_loss_from_string(const std::string& s) {
  if (s == "non_saturating") return GanLoss::NonSaturating;
  if (s == "minimax") return GanLoss::MinimaxEq1;
  throw DataError("config: unknown gan loss variant '" + s +
                  "' (expected non_saturating or minimax)");
}

std::string gan_loss_to_string(GanLoss loss) {
  return loss == GanLoss::NonSaturating ? "non_saturating" : "minimax";
}

void check_augmenter(const std::string& name) {
  if (name != "none" && name != "ros" && name != "smote" && name != "gan" &&
      name != "cgan")
    throw DataError("config: unknown augmenter '" + name +
                    "' (expected none, ros, smote, gan or cgan)");
}

template <typename T>
void read_gan_common(const json& j, T& cfg) {
  cfg.noise_dim = j.value("noise_dim", cfg.noise_dim);
  cfg.data_dim = j.value("data_dim", cfg.data_dim);
  cfg.g_hidden = j.value("g_hidden", cfg.g_hidden);
  cfg.d_hidden = j.value("d_hidden", cfg.d_hidden);
  cfg.leaky_slope = j.value("leaky_slope", cfg.leaky_slope);
  cfg.dropout = j.value("dropout", cfg.dropout);
  cfg.steps = j.value("steps", cfg.steps);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.g_lr = j.value("g_lr", cfg.g_lr);
  cfg.d_lr = j.value("d_lr", cfg.d_lr);
  cfg.weight_stddev = j.value("weight_stddev", cfg.weight_stddev);
  if (j.contains("loss_variant"))
    cfg.loss_variant = gan_loss_from_string(j.at("loss_variant").get<std::string>());
}

template <typename T>
json write_gan_common(const T& cfg) {
  return json{{"noise_dim", cfg.noise_dim},
              {"data_dim", cfg.data_dim},
              {"g_hidden", cfg.g_hidden},
              {"d_hidden", cfg.d_hidden},
              {"leaky_slope", cfg.leaky_slope},
              {"dropout", cfg.dropout},
              {"steps", cfg.steps},
              {"batch_size", cfg.batch_size},
              {"g_lr", cfg.g_lr},
              {"d_lr", cfg.d_lr},
              {"weight_stddev", cfg.weight_stddev},
              {"loss_variant", gan_loss_to_string(cfg.loss_variant)}};
}

}  // namespace

PipelineConfig config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config: ") + e.what(),
                     static_cast<long long>(e.byte));
  }

  PipelineConfig cfg;
  try {
    cfg.seed = j.value("seed", cfg.seed);
    cfg.out_dir = j.value("out_dir", cfg.out_dir.string());
    if (j.contains("inputs"))
      for (const json& entry : j.at("inputs"))
        cfg.inputs.push_back({std::filesystem::path(entry.at("path").get<std::string>()),
                              entry.at("label").get<std::string>()});
    cfg.preprocess.fixed_len = j.value("fixed_len", cfg.preprocess.fixed_len);
    cfg.preprocess.strip_ethernet_header =
        j.value("strip_ethernet_header", cfg.preprocess.strip_ethernet_header);
    if (j.contains("filters")) {
      const json& f = j.at("filters");
      cfg.filters.drop_arp = f.value("drop_arp", cfg.filters.drop_arp);
      cfg.filters.drop_dhcpv4 = f.value("drop_dhcpv4", cfg.filters.drop_dhcpv4);
    }
    if (j.contains("split")) {
      const json& s = j.at("split");
      cfg.split.train = s.value("train", cfg.split.train);
      cfg.split.validation = s.value("validation", cfg.split.validation);
      cfg.split.test = s.value("test", cfg.split.test);
    }
    cfg.balance_target = j.value("balance_target", cfg.balance_target);
    cfg.augmenter = j.value("augmenter", cfg.augmenter);
    check_augmenter(cfg.augmenter);
    if (j.contains("smote")) cfg.smote.k = j.at("smote").value("k", cfg.smote.k);
    if (j.contains("gan")) read_gan_common(j.at("gan"), cfg.gan);
    if (j.contains("cgan")) read_gan_common(j.at("cgan"), cfg.cgan);
    if (j.contains("classifier")) {
      const json& c = j.at("classifier");
      cfg.classifier.hidden = c.value("hidden", cfg.classifier.hidden);
      cfg.classifier.epochs = c.value("epochs", cfg.classifier.epochs);
      cfg.classifier.batch_size = c.value("batch_size", cfg.classifier.batch_size);
      cfg.classifier.lr = c.value("lr", cfg.classifier.lr);
      cfg.classifier.weight_stddev =
          c.value("weight_stddev", cfg.classifier.weight_stddev);
      cfg.classifier.patience = c.value("patience", cfg.classifier.patience);
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  return cfg;
}

std::string config_to_json_text(const PipelineConfig& cfg) {
  json inputs = json::array();
  for (const IngestEntry& e : cfg.inputs)
    inputs.push_back({{"path", e.path.string()}, {"label", e.class_name}});

  const json j{
      {"seed", cfg.seed},
      {"out_dir", cfg.out_dir.string()},
      {"inputs", inputs},
      {"fixed_len", cfg.preprocess.fixed_len},
      {"strip_ethernet_header", cfg.preprocess.strip_ethernet_header},
      {"filters",
       {{"drop_arp", cfg.filters.drop_arp}, {"drop_dhcpv4", cfg.filters.drop_dhcpv4}}},
      {"split",
       {{"train", cfg.split.train},
        {"validation", cfg.split.validation},
        {"test", cfg.split.test}}},
      {"balance_target", cfg.balance_target},
      {"augmenter", cfg.augmenter},
      {"smote", {{"k", cfg.smote.k}}},
      {"gan", write_gan_common(cfg.gan)},
      {"cgan", write_gan_common(cfg.cgan)},
      {"classifier",
       {{"hidden", cfg.classifier.hidden},
        {"epochs", cfg.classifier.epochs},
        {"batch_size", cfg.classifier.batch_size},
        {"lr", cfg.classifier.lr},
        {"weight_stddev", cfg.classifier.weight_stddev},
        {"patience", cfg.classifier.patience}}},
  };
  return j.dump(2) + "\n";
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open config file: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return config_from_json_text(buffer.str());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.offset);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string file_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot hash missing file: " + path.string());
  char buf[1 << 16];
  std::uint64_t h = 0xcbf29ce484222325ull;
  while (in.read(buf, sizeof buf) || in.gcount() > 0)
    h = fnv1a64(buf, static_cast<std::size_t>(in.gcount()), h);
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

namespace {

json hash_map(std::span<const std::filesystem::path> paths) {
  json out = json::object();
  for (const auto& p : paths) out[p.string()] = file_hash(p);
  return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open file for writing: " + path.string());
  out << text;
  if (!out) throw DataError("short write to " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

/// Runs a stage body, times it, and writes the manifest record.
template <typename Body>
void timed_stage(const PipelineConfig& config, const std::string& stage,
                 std::span<const std::filesystem::path> inputs, Body&& body) {
  const auto start = std::chrono::steady_clock::now();
  const std::vector<std::filesystem::path> outputs = body();
  const std::chrono::duration<double> elapsed =
      std::chrono::steady_clock::now() - start;
  record_stage(config, stage, inputs, outputs, elapsed.count());
}

}  // namespace

void record_stage(const PipelineConfig& config, const std::string& stage,
                  std::span<const std::filesystem::path> inputs,
                  std::span<const std::filesystem::path> outputs, double seconds) {
  const std::filesystem::path manifest_path = config.out_dir / "manifest.json";
  json manifest;
  if (std::filesystem::exists(manifest_path)) {
    try {
      manifest = json::parse(read_text_file(manifest_path));
    } catch (const json::parse_error& e) {
      throw ParseError(manifest_path.string() + ": " + e.what(),
                       static_cast<long long>(e.byte));
    }
  } else {
    manifest = json::object();
  }

  manifest["tool"] = kToolName;
  manifest["tool_version"] = kToolVersion;
  manifest["config"] = json::parse(config_to_json_text(config));
  manifest["stages"][stage] = {{"inputs", hash_map(inputs)},
                               {"outputs", hash_map(outputs)},
                               {"seconds", seconds}};
  write_text_file(manifest_path, manifest.dump(2) + "\n");
}

void run_ingest(const PipelineConfig& config) {
  if (config.inputs.empty())
    throw DataError("ingest: config lists no input pcap files");
  std::filesystem::create_directories(config.out_dir);

  std::vector<std::filesystem::path> input_paths;
  for (const IngestEntry& e : config.inputs) input_paths.push_back(e.path);

  timed_stage(config, "ingest", input_paths, [&] {
    const IngestResult result = ingest_files(config.inputs, config.filters);

    Matrix pbm = packets_to_pbm(result.packets, config.preprocess);
    std::vector<int> labels;
    labels.reserve(result.packets.size());
    for (const LabeledPacket& p : result.packets) labels.push_back(p.label);

    const auto csv = config.out_dir / "dataset.csv";
    const auto classes = config.out_dir / "classes.txt";
    const auto report = config.out_dir / "ingest_report.txt";
    write_csv_file(csv, pbm, labels);
    write_class_names(classes, result.class_names);
    write_text_file(report, result.report.to_text());
    return std::vector<std::filesystem::path>{csv, classes, report};
  });
}

namespace {

std::filesystem::path sibling_classes(const std::filesystem::path& csv) {
  return csv.parent_path() / "classes.txt";
}

std::int64_t effective_target(const PipelineConfig& config,
                              const LabeledDataset& ds) {
  if (config.balance_target > 0) return config.balance_target;
  const ClassDistribution dist = class_histogram(ds);
  std::int64_t best = 0;
  for (std::int64_t c : dist.counts) best = std::max(best, c);
  return best;
}

}  // namespace

std::string run_stats(const PipelineConfig& config,
                      const std::filesystem::path& data_csv) {
  std::filesystem::create_directories(config.out_dir);
  const LabeledDataset ds = load_dataset(data_csv, sibling_classes(data_csv));
  const ClassDistribution dist = class_histogram(ds);

  std::ostringstream os;
  os << "total " << dist.total << "\n";
  os << "classes " << ds.num_classes() << "\n";
  for (int c = 0; c < ds.num_classes(); ++c)
    os << "class " << c << " " << ds.class_names[static_cast<std::size_t>(c)]
       << " count " << dist.counts[static_cast<std::size_t>(c)] << " percentage "
       << fmt3(dist.percentages[static_cast<std::size_t>(c)]) << "\n";

  const std::int64_t target = effective_target(config, ds);
  const BalancePlan plan = make_balance_plan(ds, target);
  os << "balance_target " << target << "\n";
  for (int c = 0; c < ds.num_classes(); ++c)
    os << "class " << c << " " << ds.class_names[static_cast<std::size_t>(c)]
       << " target " << plan.target_per_class[static_cast<std::size_t>(c)]
       << " deficit " << plan.deficits[static_cast<std::size_t>(c)] << "\n";

  const std::string text = os.str();
  const std::vector<std::filesystem::path> inputs{data_csv};
  timed_stage(config, "stats", inputs, [&] {
    const auto path = config.out_dir / "stats.txt";
    write_text_file(path, text);
    return std::vector<std::filesystem::path>{path};
  });
  return text;
}

void run_split(const PipelineConfig& config, const std::filesystem::path& data_csv) {
  std::filesystem::create_directories(config.out_dir);
  const std::vector<std::filesystem::path> inputs{data_csv};
  timed_stage(config, "split", inputs, [&] {
    const LabeledDataset ds = load_dataset(data_csv, sibling_classes(data_csv));
    const Rng root(config.seed);
    const SplitResult split =
        stratified_split(ds, config.split, root.fork("split").seed());

    const auto train = config.out_dir / "train.csv";
    const auto val = config.out_dir / "validation.csv";
    const auto test = config.out_dir / "test.csv";
    const auto classes = config.out_dir / "classes.txt";
    write_csv_file(train, split.train.pbm, split.train.labels);
    write_csv_file(val, split.validation.pbm, split.validation.labels);
    write_csv_file(test, split.test.pbm, split.test.labels);
    write_class_names(classes, ds.class_names);
    return std::vector<std::filesystem::path>{train, val, test, classes};
  });
}

namespace {

LabeledDataset synth_with_gan(const PipelineConfig& config, const LabeledDataset& base,
                              const BalancePlan& plan, const AugmentOptions& options) {
  if (options.train_inline) {
    GanConfig gan_config = config.gan;
    gan_config.seed = Rng(config.seed).fork("augment.gan").seed();
    GanAugmentResult result = augment_with_gan(base, plan, gan_config);
    for (std::size_t i = 0; i < result.trained_labels.size(); ++i) {
      const int label = result.trained_labels[i];
      save_gan_file(config.out_dir /
                        ("gan_class_" + std::to_string(label) + ".ckpt"),
                    result.models[i]);
      std::ofstream loss(config.out_dir /
                         ("gan_class_" + std::to_string(label) + "_loss.csv"));
      result.histories[i].to_csv(loss);
    }
    return result.synthetic;
  }

  if (options.checkpoint.empty())
    throw DataError(
        "augment: method gan needs --train or --checkpoint pointing at a "
        "directory of per-class checkpoints");
  Matrix pbm(0, base.dim());
  std::vector<int> labels;
  const Rng root(config.seed);
  for (int c = 0; c < base.num_classes(); ++c) {
    const std::int64_t deficit = plan.deficits[static_cast<std::size_t>(c)];
    if (deficit == 0) continue;
    const auto path =
        options.checkpoint / ("gan_class_" + std::to_string(c) + ".ckpt");
    const GanModel model = load_gan_file(path);
    if (model.data_dim != base.dim())
      throw DataError(path.string() + ": checkpoint width " +
                      std::to_string(model.data_dim) +
                      " does not match dataset width " + std::to_string(base.dim()));
    const Matrix rows = sample(model, static_cast<Index>(deficit),
                               root.fork("gan.sample.class." + std::to_string(c)).seed());
    pbm = pbm.rows() == 0 ? rows : vcat(pbm, rows);
    labels.insert(labels.end(), static_cast<std::size_t>(deficit), c);
  }
  std::vector<Provenance> provenance(labels.size(), Provenance::Synthetic);
  return make_dataset(std::move(pbm), std::move(labels), base.class_names,
                      std::move(provenance));
}

LabeledDataset synth_with_cgan(const PipelineConfig& config, const LabeledDataset& base,
                               const BalancePlan& plan, const AugmentOptions& options) {
  CganModel model;
  if (options.train_inline) {
    CganConfig cgan_config = config.cgan;
    cgan_config.seed = Rng(config.seed).fork("augment.cgan").seed();
    TrainHistory history;
    model = train_cgan(base, cgan_config, &history);
    save_cgan_file(config.out_dir / "cgan.ckpt", model);
    std::ofstream loss(config.out_dir / "cgan_loss.csv");
    history.to_csv(loss);
  } else {
    if (options.checkpoint.empty())
      throw DataError("augment: method cgan needs --train or --checkpoint");
    model = load_cgan_file(options.checkpoint);
    if (model.class_names != base.class_names)
      throw DataError(options.checkpoint.string() +
                      ": checkpoint class table does not match the dataset");
    if (model.data_dim != base.dim())
      throw DataError(options.checkpoint.string() + ": checkpoint width " +
                      std::to_string(model.data_dim) +
                      " does not match dataset width " + std::to_string(base.dim()));
  }
  return augment_to_balance(model, plan,
                            Rng(config.seed).fork("augment.cgan.sample").seed());
}

}  // namespace

void run_augment(const PipelineConfig& config, const std::filesystem::path& data_csv,
                 const AugmentOptions& options) {
  const std::string method =
      options.method.empty() ? config.augmenter : options.method;
  check_augmenter(method);
  std::filesystem::create_directories(config.out_dir);

  const std::vector<std::filesystem::path> inputs{data_csv};
  timed_stage(config, "augment", inputs, [&] {
    const LabeledDataset ds = load_dataset(data_csv, sibling_classes(data_csv));
    const std::int64_t target = effective_target(config, ds);
    const Rng root(config.seed);

    LabeledDataset merged;
    if (method == "none") {
      merged = ds;
    } else {
      const BalancePlan plan = make_balance_plan(ds, target);
      for (int c = 0; c < ds.num_classes(); ++c)
        if (plan.deficits[static_cast<std::size_t>(c)] > 0 &&
            rows_of_class(ds, c).empty())
          throw DataError("augment: class '" +
                          ds.class_names[static_cast<std::size_t>(c)] +
                          "' has no rows at all; cannot synthesise it");

      const LabeledDataset base =
          downsample_to_plan(ds, plan, root.fork("augment.downsample").seed());
      const BalancePlan base_plan = make_balance_plan(base, target);

      LabeledDataset synthetic;
      if (method == "ros")
        synthetic = ros_oversample(base, base_plan, root.fork("augment.ros").seed());
      else if (method == "smote")
        synthetic = smote(base, base_plan, config.smote,
                          root.fork("augment.smote").seed());
      else if (method == "gan")
        synthetic = synth_with_gan(config, base, base_plan, options);
      else
        synthetic = synth_with_cgan(config, base, base_plan, options);

      merged = merge(base, synthetic);
      const ClassDistribution result_dist = class_histogram(merged);
      for (int c = 0; c < merged.num_classes(); ++c)
        if (result_dist.counts[static_cast<std::size_t>(c)] != target)
          throw DataError("augment: class '" +
                          merged.class_names[static_cast<std::size_t>(c)] +
                          "' ended at " +
                          std::to_string(result_dist.counts[static_cast<std::size_t>(c)]) +
                          " rows instead of " + std::to_string(target));
    }

    const auto csv = config.out_dir / "balanced.csv";
    const auto classes = config.out_dir / "classes.txt";
    const auto prov = config.out_dir / "balanced.provenance.csv";
    write_csv_file(csv, merged.pbm, merged.labels);
    write_class_names(classes, merged.class_names);
    write_provenance(prov, merged.provenance);
    return std::vector<std::filesystem::path>{csv, classes, prov};
  });
}

void run_train_gan(const PipelineConfig& config,
                   const std::filesystem::path& data_csv) {
  std::filesystem::create_directories(config.out_dir);
  const std::vector<std::filesystem::path> inputs{data_csv};
  timed_stage(config, "train-gan", inputs, [&] {
    const LabeledDataset ds = load_dataset(data_csv, sibling_classes(data_csv));
    const BalancePlan plan = make_balance_plan(ds, effective_target(config, ds));

    GanConfig gan_config = config.gan;
    gan_config.seed = Rng(config.seed).fork("augment.gan").seed();
    const GanAugmentResult result = augment_with_gan(ds, plan, gan_config);
    if (result.trained_labels.empty())
      throw DataError("train-gan: no class is below the balance target");

    std::vector<std::filesystem::path> outputs;
    for (std::size_t i = 0; i < result.trained_labels.size(); ++i) {
      const int label = result.trained_labels[i];
      const auto ckpt =
          config.out_dir / ("gan_class_" + std::to_string(label) + ".ckpt");
      const auto loss_csv =
          config.out_dir / ("gan_class_" + std::to_string(label) + "_loss.csv");
      save_gan_file(ckpt, result.models[i]);
      std::ofstream loss(loss_csv);
      result.histories[i].to_csv(loss);
      outputs.push_back(ckpt);
      outputs.push_back(loss_csv);
    }
    return outputs;
  });
}

void run_train_cgan(const PipelineConfig& config,
                    const std::filesystem::path& data_csv) {
  std::filesystem::create_directories(config.out_dir);
  const std::vector<std::filesystem::path> inputs{data_csv};
  timed_stage(config, "train-cgan", inputs, [&] {
    const LabeledDataset ds = load_dataset(data_csv, sibling_classes(data_csv));
    CganConfig cgan_config = config.cgan;
    cgan_config.seed = Rng(config.seed).fork("augment.cgan").seed();
    TrainHistory history;
    const CganModel model = train_cgan(ds, cgan_config, &history);

    const auto ckpt = config.out_dir / "cgan.ckpt";
    const auto loss_csv = config.out_dir / "cgan_loss.csv";
    save_cgan_file(ckpt, model);
    std::ofstream loss(loss_csv);
    history.to_csv(loss);
    return std::vector<std::filesystem::path>{ckpt, loss_csv};
  });
}

namespace {

std::uint32_t peek_magic(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path.string());
  std::uint8_t b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw ParseError(path.string() + ": checkpoint too short", 0);
  return load_u32(b, ByteOrder::Little);
}

}  // namespace

void run_generate(const PipelineConfig& config, const GenerateOptions& options) {
  if (options.checkpoint.empty())
    throw DataError("generate: --checkpoint is required");
  if (options.count <= 0)
    throw DataError("generate: --count must be positive");
  std::filesystem::create_directories(config.out_dir);

  const auto out_file = options.out_file.empty()
                            ? config.out_dir / "generated.csv"
                            : options.out_file;
  const std::vector<std::filesystem::path> inputs{options.checkpoint};
  timed_stage(config, "generate", inputs, [&] {
    const std::uint32_t magic = peek_magic(options.checkpoint);
    Matrix rows;
    int label = options.label;
    if (magic == 0x54414331) {  // conditional checkpoint
      const CganModel model = load_cgan_file(options.checkpoint);
      if (label < 0)
        throw DataError("generate: --label is required for a conditional model");
      rows = generate_conditional(model, label, options.count,
                                  Rng(config.seed).fork("generate").seed());
    } else {
      const GanModel model = load_gan_file(options.checkpoint);
      if (label < 0) label = 0;
      rows = sample(model, options.count, Rng(config.seed).fork("generate").seed());
    }
    const std::vector<int> labels(static_cast<std::size_t>(options.count), label);
    write_csv_file(out_file, rows, labels);
    return std::vector<std::filesystem::path>{out_file};
  });
}

void run_classify(const PipelineConfig& config,
                  const std::filesystem::path& train_csv,
                  const std::filesystem::path& val_csv) {
  std::filesystem::create_directories(config.out_dir);
  const std::vector<std::filesystem::path> inputs{train_csv, val_csv};
  timed_stage(config, "classify", inputs, [&] {
    const LabeledDataset train = load_dataset(train_csv, sibling_classes(train_csv));
    const LabeledDataset val = load_dataset(val_csv, sibling_classes(val_csv));

    ClassifierConfig classifier_config = config.classifier;
    classifier_config.seed = Rng(config.seed).fork("classifier").seed();
    TrainingCurves curves;
    const Network net = train_classifier(train, val, classifier_config, &curves);

    const auto ckpt = config.out_dir / "classifier.ckpt";
    const auto curves_csv = config.out_dir / "curves.csv";
    save_network_file(ckpt, net);
    std::ostringstream os;
    os << "epoch,train_loss,val_loss\n";
    for (std::size_t i = 0; i < curves.train_loss.size(); ++i) {
      os << (i + 1) << ',' << curves.train_loss[i] << ',';
      if (i < curves.val_loss.size()) os << curves.val_loss[i];
      os << '\n';
    }
    write_text_file(curves_csv, os.str());
    return std::vector<std::filesystem::path>{ckpt, curves_csv};
  });
}

namespace {

json metrics_to_json(const MetricsReport& report) {
  json per_class = json::array();
  for (std::size_t c = 0; c < report.per_class.size(); ++c) {
    const ClassMetrics& m = report.per_class[c];
    per_class.push_back({{"name", report.class_names[c]},
                         {"precision", m.precision},
                         {"recall", m.recall},
                         {"f1", m.f1},
                         {"precision_defined", m.precision_defined},
                         {"recall_defined", m.recall_defined},
                         {"f1_defined", m.f1_defined}});
  }
  return json{{"method", report.provenance.method},
              {"dataset_hash", report.provenance.dataset_hash},
              {"seed", report.provenance.seed},
              {"accuracy", report.accuracy},
              {"macro_precision", report.macro_precision},
              {"macro_recall", report.macro_recall},
              {"macro_f1", report.macro_f1},
              {"classes", per_class}};
}

}  // namespace

void save_metrics_json(const std::filesystem::path& path,
                       const MetricsReport& report) {
  write_text_file(path, metrics_to_json(report).dump(2) + "\n");
}

MetricsReport load_metrics_json(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what(),
                     static_cast<long long>(e.byte));
  }

  MetricsReport report;
  try {
    report.provenance.method = j.at("method").get<std::string>();
    report.provenance.dataset_hash = j.at("dataset_hash").get<std::string>();
    report.provenance.seed = j.at("seed").get<std::uint64_t>();
    report.accuracy = j.at("accuracy").get<double>();
    report.macro_precision = j.at("macro_precision").get<double>();
    report.macro_recall = j.at("macro_recall").get<double>();
    report.macro_f1 = j.at("macro_f1").get<double>();
    for (const json& c : j.at("classes")) {
      report.class_names.push_back(c.at("name").get<std::string>());
      ClassMetrics m;
      m.precision = c.at("precision").get<double>();
      m.recall = c.at("recall").get<double>();
      m.f1 = c.at("f1").get<double>();
      m.precision_defined = c.value("precision_defined", true);
      m.recall_defined = c.value("recall_defined", true);
      m.f1_defined = c.value("f1_defined", true);
      report.per_class.push_back(m);
    }
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return report;
}

void run_evaluate(const PipelineConfig& config, const EvaluateOptions& options) {
  std::filesystem::create_directories(config.out_dir);
  const auto model_path =
      options.model.empty() ? config.out_dir / "classifier.ckpt" : options.model;
  const auto test_csv =
      options.test_csv.empty() ? config.out_dir / "test.csv" : options.test_csv;

  const std::vector<std::filesystem::path> inputs{model_path, test_csv};
  timed_stage(config, "evaluate", inputs, [&] {
    const Network net = load_network_file(model_path);
    const LabeledDataset test = load_dataset(test_csv, sibling_classes(test_csv));

    ReportProvenance provenance;
    provenance.method = options.method.empty() ? config.augmenter : options.method;
    provenance.dataset_hash = file_hash(test_csv);
    provenance.seed = config.seed;
    const EvaluationResult result = evaluate(net, test, provenance);

    const auto metrics_json_path = config.out_dir / "metrics.json";
    const auto metrics_txt = config.out_dir / "metrics.txt";
    const auto metrics_csv = config.out_dir / "metrics.csv";
    const auto confusion_csv = config.out_dir / "confusion.csv";
    save_metrics_json(metrics_json_path, result.metrics);
    write_text_file(metrics_txt, result.metrics.to_text());
    write_text_file(metrics_csv, result.metrics.to_csv());
    std::ostringstream os;
    result.confusion.to_csv(os);
    write_text_file(confusion_csv, os.str());
    return std::vector<std::filesystem::path>{metrics_json_path, metrics_txt,
                                              metrics_csv, confusion_csv};
  });
}

void run_report(const std::filesystem::path& out_dir,
                std::span<const std::filesystem::path> run_dirs) {
  if (run_dirs.empty()) throw DataError("report: no run directories given");
  std::filesystem::create_directories(out_dir);

  std::vector<MetricsReport> reports;
  for (const auto& dir : run_dirs) {
    const auto path = dir / "metrics.json";
    if (!std::filesystem::exists(path))
      throw DataError("report: " + path.string() + " does not exist");
    reports.push_back(load_metrics_json(path));
  }

  write_text_file(out_dir / "comparison.txt", compare_methods(reports));
  write_text_file(out_dir / "comparison.csv", compare_methods_csv(reports));

  // Loss histories and training curves, prefixed by method, for plotting.
  for (std::size_t i = 0; i < run_dirs.size(); ++i) {
    const std::string prefix =
        std::to_string(i) + "_" + reports[i].provenance.method + "_";
    for (const char* name : {"cgan_loss.csv", "curves.csv"}) {
      const auto src = run_dirs[i] / name;
      if (std::filesystem::exists(src))
        std::filesystem::copy_file(src, out_dir / (prefix + name),
                                   std::filesystem::copy_options::overwrite_existing);
    }
    for (const auto& entry : std::filesystem::directory_iterator(run_dirs[i])) {
      const std::string name = entry.path().filename().string();
      if (name.starts_with("gan_class_") && name.ends_with("_loss.csv"))
        std::filesystem::copy_file(entry.path(), out_dir / (prefix + name),
                                   std::filesystem::copy_options::overwrite_existing);
    }
  }
}

}  // namespace trafficaug
