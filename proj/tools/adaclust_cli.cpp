// adaclust: data generation, training, prediction, LODO evaluation, ablation
// sweeps, theory checks and spectral probes, all writing deterministic CSV and
// JSON artifacts plus a run manifest.

#include <chrono>
#include <cstdio>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "adaclust/csv.hpp"
#include "adaclust/csv_schema.hpp"
#include "adaclust/hash.hpp"
#include "adaclust/lodo.hpp"
#include "adaclust/probe.hpp"
#include "adaclust/serialize.hpp"
#include "adaclust/theory.hpp"
#include "adaclust/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace adaclust;

namespace {

constexpr int kManifestVersion = 1;

enum Exit : int { kOk = 0, kUsage = 2, kMissingInput = 3, kNumeric = 4, kTheoryFailed = 5 };

/// Bad or absent input files.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A PASS/FAIL check came out FAIL; artifacts are still written.
struct CheckFailed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument:
    case ErrorCode::insufficient_trials: return kUsage;
    case ErrorCode::io:
    case ErrorCode::corrupt_model:
    case ErrorCode::unsupported_version:
    case ErrorCode::shape_inconsistency:
    case ErrorCode::precondition_violation: return kMissingInput;
    default: return kNumeric;
  }
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::uint64_t default_seed() {
  const char* env = std::getenv("ADACLUST_SEED");
  if (env == nullptr || *env == '\0') return 0;
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(env, &pos);
    if (pos == std::string(env).size()) return v;
  } catch (const std::exception&) {
  }
  throw CLI::ValidationError("ADACLUST_SEED", std::string("not an unsigned integer: '") + env + "'");
}

/// Collects the files a command writes and emits the manifest last.
class Artifacts {
 public:
  explicit Artifacts(fs::path dir) : dir_(std::move(dir)) {}

  void write(const std::string& name, const std::string& contents) {
    fs::create_directories(dir_);
    write_file_atomically((dir_ / name).string(), contents);
    files_.push_back({name, contents.size(), fnv1a_hex(contents)});
  }

  void write_manifest(const std::string& command, const json& config, std::uint64_t seed,
                      const std::string& started_at) const {
    json outputs = json::array();
    for (const auto& f : files_) outputs.push_back({{"path", f.name}, {"bytes", f.bytes}, {"fnv1a64", f.hash}});
    const json manifest = {{"manifest_version", kManifestVersion},
                           {"csv_schema_version", csv_schema::kVersion},
                           {"model_format_version", kModelFormatVersion},
                           {"command", command},
                           {"config", config},
                           {"seed", seed},
                           {"started_at", started_at},
                           {"finished_at", utc_now()},
                           {"outputs", outputs}};
    fs::create_directories(dir_);
    write_file_atomically((dir_ / "manifest.json").string(), manifest.dump(2) + "\n");
  }

 private:
  struct File {
    std::string name;
    std::size_t bytes;
    std::string hash;
  };
  fs::path dir_;
  std::vector<File> files_;
};

AggregatedDataset load_dataset(const std::string& path) {
  if (!fs::exists(path)) throw InputError("dataset not found: '" + path + "'");
  try {
    return read_dataset_csv(path);
  } catch (const Error& e) {
    throw InputError("cannot read dataset '" + path + "': " + e.what());
  }
}

MotherConfig load_mother(const std::string& path) {
  if (!fs::exists(path)) throw InputError("mother config not found: '" + path + "'");
  try {
    return mother_from_json(json::parse(read_file(path)));
  } catch (const json::exception& e) {
    throw InputError("cannot parse mother config '" + path + "': " + e.what());
  }
}

std::string dataset_to_csv(const AggregatedDataset& data, bool with_domains) {
  std::ostringstream out;
  write_dataset_csv(out, data, with_domains);
  return out.str();
}

// ---------------------------------------------------------------------------
// Shared flag groups

void add_mother_flags(CLI::App* app, MotherConfig& m) {
  app->add_option("--classes", m.num_classes, "number of classes")->check(CLI::PositiveNumber)->capture_default_str();
  app->add_option("--d-raw", m.d_raw, "input dimension")->check(CLI::PositiveNumber)->capture_default_str();
  app->add_option("--noise", m.noise_scale, "per-point noise scale")->check(CLI::NonNegativeNumber)->capture_default_str();
  app->add_option("--shift", m.shift_scale, "domain shift scale")->check(CLI::NonNegativeNumber)->capture_default_str();
  app->add_option("--theta-lo", m.theta_lo, "rotation range start (radians)")->capture_default_str();
  app->add_option("--theta-hi", m.theta_hi, "rotation range end (radians)")->capture_default_str();
  app->add_option("--planes", m.rotated_planes, "coordinate planes rotated per domain")->capture_default_str();
  app->add_option("--shift-rank", m.shift_rank, "rank of the shift subspace (0 = full)")->capture_default_str();
  app->add_option("--prototype-scale", m.prototype_scale, "class prototype scale")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

void add_pretrain_flags(CLI::App* app, PretrainConfig& p) {
  app->add_option("--hidden", p.hidden, "extractor hidden width")->check(CLI::PositiveNumber)->capture_default_str();
  app->add_option("--feature-dim", p.feature_dim, "extractor output dimension d")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_option("--pretrain-epochs", p.sgd.epochs, "pretraining epochs")->capture_default_str();
  app->add_option("--pretrain-domains", p.num_domains, "pretraining domains")->capture_default_str();
}

struct TrainFlags {
  std::size_t k_per_class = 1;
  std::size_t d_start = 0;
  std::size_t d_end = 16;
  std::string schedule = "log";
  std::string variant = "adaclust";
  std::size_t epochs = 10;
  double lr = 0.01;
  double wd = 1e-4;
  std::size_t batch = 32;
  std::size_t finetune = 1;
  KMeansOptions kmeans{};

  static TrainFlags from(const TrainConfig& c) {
    TrainFlags f;
    f.k_per_class = c.clusters_per_class;
    f.d_start = c.d_start;
    f.d_end = c.d_end;
    f.variant = to_string(c.variant);
    f.epochs = c.sgd.epochs;
    f.lr = c.sgd.learning_rate;
    f.wd = c.sgd.weight_decay;
    f.batch = c.sgd.batch_size;
    f.finetune = c.finetune_epochs;
    f.kmeans = c.kmeans;
    return f;
  }

  TrainConfig to_config(std::uint64_t seed) const {
    TrainConfig c;
    c.clusters_per_class = k_per_class;
    c.d_start = d_start;
    c.d_end = d_end;
    c.schedule = parse_schedule(schedule, epochs);
    c.variant = parse_variant(variant);
    c.sgd = {lr, wd, batch, epochs, seed};
    c.finetune_epochs = finetune;
    c.kmeans = kmeans;
    return c;
  }
};

void add_train_flags(CLI::App* app, TrainFlags& f, bool with_variant) {
  app->add_option("--k-per-class", f.k_per_class, "clusters per class (K / n_c)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_option("--d-start", f.d_start, "first eigen-direction kept")->capture_default_str();
  app->add_option("--d-end", f.d_end, "one past the last eigen-direction kept")->capture_default_str();
  app->add_option("--schedule", f.schedule, "log | every | const | epochs=a,b,...")->capture_default_str();
  if (with_variant)
    app->add_option("--variant", f.variant, "adaclust | erm | random | nopca")->capture_default_str();
  app->add_option("--epochs", f.epochs, "training epochs")->check(CLI::PositiveNumber)->capture_default_str();
  app->add_option("--lr", f.lr, "learning rate")->check(CLI::PositiveNumber)->capture_default_str();
  app->add_option("--wd", f.wd, "weight decay")->check(CLI::NonNegativeNumber)->capture_default_str();
  app->add_option("--batch", f.batch, "minibatch size")->check(CLI::PositiveNumber)->capture_default_str();
  app->add_option("--finetune-epochs", f.finetune, "fine-tuning epochs before the first clustering round")
      ->capture_default_str();
  app->add_option("--kmeans-max-iters", f.kmeans.max_iters, "Lloyd iteration cap")->capture_default_str();
  app->add_option("--kmeans-rel-tol", f.kmeans.rel_tol, "stop when the relative cost decrease falls below this")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  app->add_option("--kmeans-n-init", f.kmeans.n_init, "k-means++ runs per clustering round, best kept")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

ExtractorWeights initial_extractor(const std::optional<MotherConfig>& mother, PretrainConfig pretrain,
                                   std::size_t d_raw, std::uint64_t seed) {
  pretrain.sgd.seed = split_seed(seed, 7);
  if (mother) return pretrain_extractor(make_mother(*mother), pretrain);
  return init_extractor(d_raw, pretrain.hidden, pretrain.feature_dim, split_seed(seed, 7));
}

json pretrain_to_json(const PretrainConfig& p) {
  return {{"hidden", p.hidden},
          {"feature_dim", p.feature_dim},
          {"num_domains", p.num_domains},
          {"per_domain", p.per_domain},
          {"epochs", p.sgd.epochs},
          {"learning_rate", p.sgd.learning_rate},
          {"weight_decay", p.sgd.weight_decay},
          {"batch_size", p.sgd.batch_size}};
}

// ---------------------------------------------------------------------------
// LODO helpers shared by eval-lodo and ablate

struct LodoFlags {
  std::size_t domains = 6;
  std::size_t per_domain = 200;
  double train_fraction = 0.8;
  std::vector<std::uint64_t> seeds;
  std::size_t num_seeds = 5;
  double d_star = 2.0;
  double delta = 0.05;
};

void add_lodo_flags(CLI::App* app, LodoFlags& f) {
  app->add_option("--domains", f.domains, "number of sampled domains N")->capture_default_str();
  app->add_option("--per-domain", f.per_domain, "points per domain n")->check(CLI::PositiveNumber)->capture_default_str();
  app->add_option("--train-fraction", f.train_fraction, "train share inside each training domain")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  app->add_option("--seeds", f.seeds, "explicit seed list (overrides --seed/--num-seeds)")->delimiter(',');
  app->add_option("--num-seeds", f.num_seeds, "seeds seed, seed+1, ...")->check(CLI::PositiveNumber)->capture_default_str();
  app->add_option("--dstar", f.d_star, "intrinsic dimension used for the bound columns")->capture_default_str();
  app->add_option("--delta", f.delta, "confidence used for the bound columns")->capture_default_str();
}

std::vector<std::uint64_t> resolve_seeds(const LodoFlags& f, std::uint64_t seed) {
  if (!f.seeds.empty()) return f.seeds;
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i < f.num_seeds; ++i) out.push_back(seed + i);
  return out;
}

std::optional<theory::BoundTerms> bound_terms_for(const LodoRow& row, const LodoSetup& setup, const LodoFlags& f) {
  if (row.variant == Variant::erm) return std::nullopt;
  theory::BoundInputs in;
  in.K = setup.train.num_clusters(setup.mother.num_classes);
  in.N = setup.num_domains - 1;
  in.n = std::max<std::size_t>(1, row.train_points / in.N);
  in.delta = f.delta;
  in.d_star = f.d_star;
  return theory::theorem1_terms(in);
}

json lodo_setup_to_json(const LodoSetup& s, const LodoFlags& f, const std::vector<std::uint64_t>& seeds) {
  return {{"mother", mother_to_json(s.mother)},       {"pretrain", pretrain_to_json(s.pretrain)},
          {"train", config_to_json(s.train)},         {"num_domains", s.num_domains},
          {"per_domain", s.per_domain},               {"train_fraction", s.train_fraction},
          {"seeds", seeds},                           {"dstar", f.d_star},
          {"delta", f.delta}};
}

// ---------------------------------------------------------------------------
// Commands

struct Common {
  std::uint64_t seed = 0;
  std::string out_dir = ".";
};

int cmd_gen(const Common& common, MotherConfig mc, std::size_t domains, std::size_t per_domain,
            std::size_t test_domains, std::size_t test_per_domain, bool with_domains) {
  const std::string started = utc_now();
  mc.seed = common.seed;
  const MotherDistribution mother = make_mother(mc);
  const AggregatedDataset train_set = sample_training_set(mother, domains, per_domain);
  std::vector<std::uint64_t> test_draws;
  for (std::size_t t = 0; t < test_domains; ++t) test_draws.push_back(kTestDrawBase + t);
  const AggregatedDataset test_set = aggregate_domains(mother, test_draws, test_per_domain);

  Artifacts out(common.out_dir);
  out.write("train.csv", dataset_to_csv(train_set, with_domains));
  out.write("test.csv", dataset_to_csv(test_set, with_domains));
  out.write("mother.json", mother_to_json(mc).dump(2) + "\n");
  out.write_manifest("gen",
                     {{"mother", mother_to_json(mc)},
                      {"domains", domains},
                      {"per_domain", per_domain},
                      {"test_domains", test_domains},
                      {"test_per_domain", test_per_domain},
                      {"with_domains", with_domains}},
                     common.seed, started);
  std::cout << "wrote " << train_set.size() << " training rows and " << test_set.size() << " test rows\n";
  return kOk;
}

int cmd_train(const Common& common, const std::string& data_path, const std::string& mother_path,
              const PretrainConfig& pretrain, const TrainFlags& flags, double val_fraction) {
  const std::string started = utc_now();
  const AggregatedDataset data = load_dataset(data_path);
  std::optional<MotherConfig> mother;
  if (!mother_path.empty()) mother = load_mother(mother_path);
  const TrainConfig config = flags.to_config(common.seed);
  validate(config, pretrain.feature_dim);

  std::vector<std::size_t> rows(data.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  std::vector<std::size_t> fit_rows = rows, val_rows;
  if (val_fraction > 0.0) {
    Rng rng(split_seed(common.seed, 11));
    for (std::size_t i = rows.size(); i > 1; --i) std::swap(rows[i - 1], rows[rng.below(i)]);
    const auto cut = static_cast<std::size_t>(std::llround((1.0 - val_fraction) * static_cast<double>(rows.size())));
    fit_rows.assign(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(cut));
    val_rows.assign(rows.begin() + static_cast<std::ptrdiff_t>(cut), rows.end());
    std::sort(fit_rows.begin(), fit_rows.end());
    std::sort(val_rows.begin(), val_rows.end());
  }
  const AggregatedDataset fit_set = data.subset(fit_rows);
  const AggregatedDataset val_set = data.subset(val_rows);

  const ExtractorWeights omega0 = initial_extractor(mother, pretrain, data.dim(), common.seed);
  TrainOptions opts;
  if (!val_rows.empty()) opts.validation.emplace(val_set.learner_view());
  const TrainResult result = train(fit_set.learner_view(), config, omega0, opts);

  std::string log = std::string(csv_schema::kTrainLog) + "\n";
  for (const auto& e : result.log.epochs) log += csv_schema::train_log_row(e, result.log.selected_epoch) + "\n";

  Artifacts out(common.out_dir);
  out.write("model.json", model_to_json(result.model));
  out.write("train_log.csv", log);
  out.write_manifest("train",
                     {{"data", data_path},
                      {"data_fnv1a64", fnv1a_hex(read_file(data_path))},
                      {"mother", mother ? mother_to_json(*mother) : json(nullptr)},
                      {"pretrain", pretrain_to_json(pretrain)},
                      {"train", config_to_json(config)},
                      {"val_fraction", val_fraction}},
                     common.seed, started);
  std::cout << "trained " << result.log.rounds.size() << " clustering rounds, selected epoch "
            << result.log.selected_epoch << "\n";
  return kOk;
}

int cmd_predict(const Common& common, const std::string& model_path, const std::string& data_path) {
  const std::string started = utc_now();
  if (!fs::exists(model_path)) throw InputError("model not found: '" + model_path + "'");
  const AdaptiveClassifier model = load_model(model_path);
  const AggregatedDataset data = load_dataset(data_path);

  std::string csv = std::string(csv_schema::kPredictions) + "\n";
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Prediction p = predict(data.features().row(i), model);
    if (p.label == data.labels()[i]) ++correct;
    csv += std::to_string(i) + "," + std::to_string(data.labels()[i]) + "," + std::to_string(p.label) + "," +
           std::to_string(p.matched_cluster) + "\n";
  }
  const double acc = static_cast<double>(correct) / static_cast<double>(data.size());

  Artifacts out(common.out_dir);
  out.write("predictions.csv", csv);
  out.write_manifest("predict",
                     {{"model", model_path},
                      {"model_fnv1a64", fnv1a_hex(read_file(model_path))},
                      {"data", data_path},
                      {"accuracy", acc}},
                     common.seed, started);
  std::cout << "accuracy " << format_double(acc) << "\n";
  return kOk;
}

void check_lodo(const LodoSetup& setup) {
  if (setup.num_domains < 2) throw CLI::ValidationError("--domains", "LODO needs at least two domains");
}

int cmd_eval_lodo(const Common& common, LodoSetup setup, const LodoFlags& flags, const TrainFlags& tflags,
                  const std::vector<std::string>& variants) {
  const std::string started = utc_now();
  setup.num_domains = flags.domains;
  setup.per_domain = flags.per_domain;
  setup.train_fraction = flags.train_fraction;
  check_lodo(setup);
  if (variants.empty()) throw CLI::ValidationError("--variants", "empty variant list");
  const auto seeds = resolve_seeds(flags, common.seed);

  std::string rows_csv = std::string(csv_schema::kLodo) + "\n";
  std::string summary_csv = std::string(csv_schema::kLodoSummary) + "\n";
  json per_variant = json::array();
  for (const auto& name : variants) {
    setup.train = tflags.to_config(0);
    setup.train.variant = parse_variant(name);
    const auto rows = evaluate_lodo(setup, seeds);
    for (const auto& r : rows) rows_csv += csv_schema::lodo_row(r, bound_terms_for(r, setup, flags)) + "\n";
    const LodoSummary s = summarize(rows);
    summary_csv += to_string(setup.train.variant) + "," + std::to_string(rows.size()) + "," + format_double(s.mean) +
                   "," + format_double(s.stddev_over_seeds) + "\n";
    per_variant.push_back(lodo_setup_to_json(setup, flags, seeds));
    std::cout << to_string(setup.train.variant) << " mean " << format_double(s.mean) << "\n";
  }

  Artifacts out(common.out_dir);
  out.write("lodo.csv", rows_csv);
  out.write("lodo_summary.csv", summary_csv);
  out.write_manifest("eval-lodo", {{"runs", per_variant}}, common.seed, started);
  return kOk;
}

int cmd_ablate(const Common& common, LodoSetup setup, const LodoFlags& flags, const TrainFlags& tflags,
               const std::string& axis, const std::vector<std::string>& values) {
  const std::string started = utc_now();
  setup.num_domains = flags.domains;
  setup.per_domain = flags.per_domain;
  setup.train_fraction = flags.train_fraction;
  check_lodo(setup);
  if (values.empty()) throw CLI::ValidationError("--values", "empty sweep list");
  const auto seeds = resolve_seeds(flags, common.seed);

  std::string cells = std::string(csv_schema::kAblate) + "\n";
  std::string rows_csv = csv_schema::ablate_rows_header() + "\n";
  json runs = json::array();
  for (const auto& value : values) {
    TrainFlags f = tflags;
    if (axis == "k") {
      f.k_per_class = static_cast<std::size_t>(parse_integer(value));
    } else if (axis == "window") {
      const auto colon = value.find(':');
      if (colon == std::string::npos) throw CLI::ValidationError("--values", "window values look like start:end");
      f.d_start = static_cast<std::size_t>(parse_integer(value.substr(0, colon)));
      f.d_end = static_cast<std::size_t>(parse_integer(value.substr(colon + 1)));
    } else if (axis == "schedule") {
      f.schedule = value;
    } else if (axis == "variant") {
      f.variant = value;
    }
    setup.train = f.to_config(0);
    const auto rows = evaluate_lodo(setup, seeds);
    for (const auto& r : rows)
      rows_csv += axis + "," + value + "," + csv_schema::lodo_row(r, bound_terms_for(r, setup, flags)) + "\n";
    const LodoSummary s = summarize(rows);
    cells += axis + "," + value + "," + std::to_string(rows.size()) + "," + format_double(s.mean) + "," +
             format_double(s.stddev_over_seeds) + "\n";
    runs.push_back({{"value", value}, {"setup", lodo_setup_to_json(setup, flags, seeds)}});
    std::cout << axis << "=" << value << " mean " << format_double(s.mean) << "\n";
  }

  Artifacts out(common.out_dir);
  out.write("ablate.csv", cells);
  out.write("ablate_rows.csv", rows_csv);
  out.write_manifest("ablate", {{"axis", axis}, {"runs", runs}}, common.seed, started);
  return kOk;
}

/// Compact rendering for the human-readable inputs column.
std::string short_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "/" : "") + std::to_string(v[i]);
  return out;
}

struct TheoryFlags {
  std::string source = "mother";
  std::size_t n = 50;
  std::size_t N = 50;
  double delta = 0.05;
  std::size_t trials = 200;
  std::size_t K = 4;
  std::size_t d = 2;
  std::vector<std::size_t> ks;
  std::size_t points = 5000;
  std::size_t restarts = 20;
  std::size_t window_start = 0;
  std::size_t window_end = 4;
  double d_star = 2.0;
  double constant = 1.0;
  std::optional<double> expect_lo, expect_hi;
  std::size_t domains = 50;
  std::size_t per_domain = 100;
};

theory::MotherFeatureSource mother_source(const MotherDistribution& mother, const PretrainConfig& pretrain,
                                          const TheoryFlags& f, std::uint64_t seed) {
  PretrainConfig p = pretrain;
  p.sgd.seed = split_seed(seed, 7);
  return theory::make_mother_source(mother, pretrain_extractor(mother, p), {f.window_start, f.window_end});
}

int cmd_theory(const Common& common, const std::string& sub, MotherConfig mc, const PretrainConfig& pretrain,
               const TheoryFlags& f) {
  const std::string started = utc_now();
  mc.seed = common.seed;
  std::string csv = std::string(csv_schema::kTheory) + "\n";
  bool all_pass = true;
  auto row = [&](std::string_view op, const std::string& inputs, double value, double se, std::optional<bool> pass) {
    csv += csv_schema::theory_row(op, inputs, value, se, pass) + "\n";
    if (pass && !*pass) all_pass = false;
  };
  const double nan = std::numeric_limits<double>::quiet_NaN();

  if (sub == "lemma1") {
    theory::Lemma1Config lc;
    lc.n = f.n;
    lc.num_domains = f.N;
    lc.delta = f.delta;
    lc.trials = f.trials;
    lc.seed = split_seed(common.seed, 3);
    const std::string inputs = "source=" + f.source + ";n=" + std::to_string(f.n) + ";N=" + std::to_string(f.N) +
                               ";delta=" + short_double(f.delta) + ";trials=" + std::to_string(f.trials);
    theory::Lemma1Report rep;
    if (f.source == "disk") {
      // One centroid at the origin: the expected cost is E||x|| = 2/3.
      Centroids psi;
      psi.psi = Matrix(1, 2);
      lc.expected_cost = 2.0 / 3.0;
      rep = theory::lemma1_check(theory::UniformBallSource{2, common.seed}, psi, lc);
    } else if (f.source == "mother") {
      const MotherDistribution mother = make_mother(mc);
      const auto src = mother_source(mother, pretrain, f, common.seed);
      Centroids psi =
          kmeans_best_of(theory::pooled_sample(src, split_seed(common.seed, 999), 50, 50), f.K,
                         split_seed(common.seed, 5), 5)
              .centroids;
      rep = theory::lemma1_check(src, psi, lc);
    } else {
      throw CLI::ValidationError("--source", "lemma1 sources are mother and disk");
    }
    row("lemma1.bound", inputs, rep.bound, nan, std::nullopt);
    row("lemma1.expected_cost", inputs, rep.expected_cost, rep.expected_cost_std_error, std::nullopt);
    row("lemma1.mean_gap", inputs, rep.mean_gap, nan, std::nullopt);
    row("lemma1.fraction_within", inputs + ";threshold=" + short_double(rep.pass_threshold), rep.fraction_within, nan,
        rep.pass);
  } else if (sub == "covering") {
    const std::vector<std::size_t> ks = f.ks.empty() ? std::vector<std::size_t>{1, 4, 16, 64} : f.ks;
    for (const auto& r : theory::covering_check(f.d, ks, f.points, common.seed, f.restarts))
      row("covering", "d=" + std::to_string(r.d) + ";K=" + std::to_string(r.K) + ";bound=" + short_double(r.bound),
          r.cost, nan, r.pass);
  } else if (sub == "dstar") {
    const std::vector<std::size_t> ks = f.ks.empty() ? std::vector<std::size_t>{2, 4, 8, 16, 32} : f.ks;
    theory::DStarReport rep;
    if (f.source == "line") {
      rep = theory::estimate_d_star(theory::LineSource{16, 1.0, common.seed}, ks, split_seed(common.seed, 1),
                                    f.domains, f.per_domain, f.restarts);
    } else if (f.source == "disk") {
      rep = theory::estimate_d_star(theory::UniformBallSource{2, common.seed}, ks, split_seed(common.seed, 1),
                                    f.domains, f.per_domain, f.restarts);
    } else if (f.source == "mother") {
      const MotherDistribution mother = make_mother(mc);
      rep = theory::estimate_d_star(mother_source(mother, pretrain, f, common.seed), ks, split_seed(common.seed, 1),
                                    f.domains, f.per_domain, f.restarts);
    } else {
      throw CLI::ValidationError("--source", "dstar sources are line, disk and mother");
    }
    const std::string inputs = "source=" + f.source + ";K=" + join_sizes(ks);
    for (std::size_t i = 0; i < rep.ks.size(); ++i)
      row("dstar.cost", "source=" + f.source + ";K=" + std::to_string(rep.ks[i]), rep.costs[i], nan, std::nullopt);
    std::optional<bool> pass;
    if (f.expect_lo || f.expect_hi)
      pass = rep.d_star >= f.expect_lo.value_or(-std::numeric_limits<double>::infinity()) &&
             rep.d_star <= f.expect_hi.value_or(std::numeric_limits<double>::infinity());
    row("dstar", inputs, rep.d_star, nan, pass);
    row("dstar.residual", inputs, rep.residual, nan, std::nullopt);
  } else if (sub == "badpairs") {
    const MotherDistribution mother = make_mother(mc);
    const auto src = mother_source(mother, pretrain, f, common.seed);
    theory::TripleConfig tc;
    tc.K = f.K;
    tc.N = f.N;
    tc.n = f.n;
    tc.restarts = f.restarts;
    tc.seed = split_seed(common.seed, 21);
    const theory::CentroidTriple triple = theory::estimate_centroid_triple(src, tc);
    Matrix phi(0, 0);
    std::vector<std::int64_t> domains;
    for (std::size_t i = 0; i < f.N; ++i) {
      const Matrix m = src.sample(theory::mc_draw(split_seed(common.seed, 22), i), f.n);
      for (std::size_t r = 0; r < m.rows(); ++r) {
        phi.append_row(m.row(r));
        domains.push_back(static_cast<std::int64_t>(i));
      }
    }
    const double p0 = theory::bad_neighbor_probability(phi, domains, triple.psi_star.psi, triple.psi_tilde_star.psi);
    const std::string inputs = "K=" + std::to_string(f.K) + ";N=" + std::to_string(f.N) + ";n=" + std::to_string(f.n) +
                               ";restarts=" + std::to_string(f.restarts);
    row("badpairs.p0", inputs, p0, nan, std::nullopt);
    row("badpairs.psi_star_cost", inputs, triple.psi_star.final_cost, nan, std::nullopt);
    row("badpairs.psi_tilde_star_cost", inputs, triple.psi_tilde_star.final_cost, nan, std::nullopt);
    row("badpairs.psi_hat_star_cost", inputs, triple.psi_hat_star.final_cost, nan, std::nullopt);
  } else if (sub == "bounds") {
    theory::BoundInputs in;
    in.K = f.K;
    in.N = f.N;
    in.n = f.n;
    in.delta = f.delta;
    in.d_star = f.d_star;
    in.constant_scale = f.constant;
    const theory::BoundTerms t = theory::theorem1_terms(in);
    const std::string inputs = "K=" + std::to_string(f.K) + ";dstar=" + short_double(f.d_star) +
                               ";n=" + std::to_string(f.n) + ";N=" + std::to_string(f.N) +
                               ";delta=" + short_double(f.delta) + ";C=" + short_double(f.constant);
    row("term_cover", inputs, t.term_cover, nan, std::nullopt);
    row("term_n", inputs, t.term_n, nan, std::nullopt);
    row("term_N", inputs, t.term_N, nan, std::nullopt);
    row("total", inputs, t.total, nan, std::nullopt);
  }

  Artifacts out(common.out_dir);
  out.write("theory.csv", csv);
  out.write_manifest("theory " + sub,
                     {{"subcommand", sub},
                      {"mother", mother_to_json(mc)},
                      {"pretrain", pretrain_to_json(pretrain)},
                      {"source", f.source},
                      {"n", f.n},
                      {"N", f.N},
                      {"K", f.K},
                      {"delta", f.delta},
                      {"trials", f.trials}},
                     common.seed, started);
  std::cout << csv;
  if (!all_pass) throw CheckFailed("theory check failed");
  return kOk;
}

int cmd_probe(const Common& common, const std::string& data_path, const std::string& mother_path,
              const PretrainConfig& pretrain, ProbeConfig cfg, std::size_t finetune_epochs) {
  const std::string started = utc_now();
  const AggregatedDataset data = load_dataset(data_path);
  if (!data.has_hidden_domains()) throw InputError("probe needs a dataset with a domain column");
  std::optional<MotherConfig> mother;
  if (!mother_path.empty()) mother = load_mother(mother_path);
  ExtractorWeights omega = initial_extractor(mother, pretrain, data.dim(), common.seed);
  if (finetune_epochs > 0) {
    TrainConfig tc;
    tc.variant = Variant::erm;
    tc.sgd.epochs = finetune_epochs;
    tc.sgd.seed = split_seed(common.seed, 8);
    omega = train(data.learner_view(), tc, omega).model.omega;
  }
  cfg.seed = common.seed;
  const auto rows = run_probe(data, omega, cfg);

  std::string csv = std::string(csv_schema::kProbe) + "\n";
  for (const auto& r : rows) csv += csv_schema::probe_row(r) + "\n";
  Artifacts out(common.out_dir);
  out.write("probe.csv", csv);
  out.write_manifest("probe",
                     {{"data", data_path},
                      {"data_fnv1a64", fnv1a_hex(read_file(data_path))},
                      {"mother", mother ? mother_to_json(*mother) : json(nullptr)},
                      {"pretrain", pretrain_to_json(pretrain)},
                      {"finetune_epochs", finetune_epochs},
                      {"d_starts", cfg.d_starts},
                      {"width", cfg.width},
                      {"clusters", cfg.clusters},
                      {"probe_steps", cfg.probe_steps}},
                     common.seed, started);
  std::cout << csv;
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pseudo-domain clustering for domain generalization"};
  app.require_subcommand(1);
  Common common;
  try {
    common.seed = default_seed();
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", common.seed, "random seed (default: $ADACLUST_SEED or 0)")->capture_default_str();
    sub->add_option("--out-dir", common.out_dir, "directory for output files")->capture_default_str();
  };

  // gen
  MotherConfig gen_mother;
  std::size_t gen_domains = 6, gen_per_domain = 200, gen_test_domains = 1, gen_test_per_domain = 200;
  bool gen_with_domains = false;
  auto* gen = app.add_subcommand("gen", "sample training and test domains to CSV");
  add_common(gen);
  add_mother_flags(gen, gen_mother);
  gen->add_option("--domains", gen_domains, "training domains N")->check(CLI::PositiveNumber)->capture_default_str();
  gen->add_option("--per-domain", gen_per_domain, "points per training domain n")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  gen->add_option("--test-domains", gen_test_domains, "held-out test domains")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  gen->add_flag("--with-domains", gen_with_domains, "append the evaluator-only domain column");
  gen->add_option("--test-per-domain", gen_test_per_domain, "points per test domain")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  // train
  std::string train_data, train_mother;
  double val_fraction = 0.0;
  PretrainConfig train_pretrain;
  TrainFlags train_flags;
  auto* train_cmd = app.add_subcommand("train", "train a classifier on a dataset CSV");
  add_common(train_cmd);
  train_cmd->add_option("--data", train_data, "training CSV")->required();
  train_cmd->add_option("--mother", train_mother, "mother config JSON; enables pretraining");
  train_cmd->add_option("--val-fraction", val_fraction, "held-out share for epoch selection")
      ->check(CLI::Range(0.0, 0.9))
      ->capture_default_str();
  add_pretrain_flags(train_cmd, train_pretrain);
  add_train_flags(train_cmd, train_flags, true);

  // predict
  std::string predict_model, predict_data;
  auto* predict_cmd = app.add_subcommand("predict", "label a dataset with a saved model");
  add_common(predict_cmd);
  predict_cmd->add_option("--model", predict_model, "model JSON")->required();
  predict_cmd->add_option("--data", predict_data, "dataset CSV")->required();

  // eval-lodo and ablate share the rotated-domain fixture defaults
  const LodoSetup fixture = rotated_domain_fixture();
  LodoSetup lodo_setup = fixture, ablate_setup = fixture;
  LodoFlags lodo_flags, ablate_flags;
  TrainFlags lodo_train = TrainFlags::from(fixture.train), ablate_train = TrainFlags::from(fixture.train);
  std::vector<std::string> lodo_variants{"adaclust", "erm", "random"};
  auto* lodo = app.add_subcommand("eval-lodo", "leave-one-domain-out evaluation");
  add_common(lodo);
  add_mother_flags(lodo, lodo_setup.mother);
  add_pretrain_flags(lodo, lodo_setup.pretrain);
  add_train_flags(lodo, lodo_train, false);
  add_lodo_flags(lodo, lodo_flags);
  lodo->add_option("--variants", lodo_variants, "variants to compare")->delimiter(',')->capture_default_str();

  std::string axis;
  std::vector<std::string> values;
  auto* ablate = app.add_subcommand("ablate", "sweep one hyperparameter under LODO");
  add_common(ablate);
  add_mother_flags(ablate, ablate_setup.mother);
  add_pretrain_flags(ablate, ablate_setup.pretrain);
  add_train_flags(ablate, ablate_train, true);
  add_lodo_flags(ablate, ablate_flags);
  ablate->add_option("--axis", axis, "k | window | schedule | variant")
      ->required()
      ->check(CLI::IsMember({"k", "window", "schedule", "variant"}));
  ablate->add_option("--values", values, "comma-separated sweep values (window: start:end)")
      ->required()
      ->delimiter(',');

  // theory
  MotherConfig theory_mother;
  PretrainConfig theory_pretrain;
  TheoryFlags tf;
  auto* theory_cmd = app.add_subcommand("theory", "Monte Carlo checks of the generalization analysis");
  theory_cmd->require_subcommand(1);
  std::string theory_sub;
  for (const char* name : {"lemma1", "covering", "dstar", "badpairs", "bounds"}) {
    auto* sub = theory_cmd->add_subcommand(name);
    add_common(sub);
    sub->callback([&theory_sub, name] { theory_sub = name; });
    const std::string n = name;
    if (n == "lemma1" || n == "dstar" || n == "badpairs") {
      add_mother_flags(sub, theory_mother);
      add_pretrain_flags(sub, theory_pretrain);
      sub->add_option("--window-start", tf.window_start, "spectral window start")->capture_default_str();
      sub->add_option("--window-end", tf.window_end, "spectral window end")->capture_default_str();
    }
    if (n == "lemma1" || n == "dstar")
      sub->add_option("--source", tf.source, n == "lemma1" ? "mother | disk" : "line | disk | mother")
          ->capture_default_str();
    if (n == "lemma1" || n == "badpairs" || n == "bounds") {
      sub->add_option("--n", tf.n, "points per domain")->check(CLI::PositiveNumber)->capture_default_str();
      sub->add_option("--N", tf.N, "domains")->check(CLI::PositiveNumber)->capture_default_str();
    }
    if (n == "lemma1" || n == "bounds") sub->add_option("--delta", tf.delta, "confidence")->capture_default_str();
    if (n == "lemma1") sub->add_option("--trials", tf.trials, "independent trials")->capture_default_str();
    if (n == "lemma1" || n == "badpairs")
      sub->add_option("--k", tf.K, "clusters")->check(CLI::PositiveNumber)->capture_default_str();
    if (n == "covering") {
      sub->add_option("--d", tf.d, "ball dimension")->check(CLI::PositiveNumber)->capture_default_str();
      sub->add_option("--k", tf.ks, "cluster counts")->delimiter(',');
      sub->add_option("--points", tf.points, "sample size")->check(CLI::PositiveNumber)->capture_default_str();
    }
    if (n == "dstar") {
      sub->add_option("--k", tf.ks, "cluster counts (at least three)")->delimiter(',');
      sub->add_option("--domains", tf.domains, "pooled domains")->capture_default_str();
      sub->add_option("--per-domain", tf.per_domain, "points per pooled domain")->capture_default_str();
      sub->add_option("--expect-lo", tf.expect_lo, "PASS when d* >= this");
      sub->add_option("--expect-hi", tf.expect_hi, "PASS when d* <= this");
    }
    if (n == "covering" || n == "dstar" || n == "badpairs")
      sub->add_option("--restarts", tf.restarts, "k-means restarts")->check(CLI::PositiveNumber)->capture_default_str();
    if (n == "bounds") {
      sub->add_option("--k", tf.K, "clusters")->check(CLI::PositiveNumber)->capture_default_str();
      sub->add_option("--dstar", tf.d_star, "intrinsic dimension")->capture_default_str();
      sub->add_option("--c", tf.constant, "constant scale")->capture_default_str();
    }
  }

  // probe
  std::string probe_data, probe_mother;
  PretrainConfig probe_pretrain;
  ProbeConfig probe_cfg;
  std::size_t probe_finetune = 1;
  auto* probe_cmd = app.add_subcommand("probe", "class/domain predictability of sliding spectral windows");
  add_common(probe_cmd);
  probe_cmd->add_option("--data", probe_data, "dataset CSV with a domain column")->required();
  probe_cmd->add_option("--mother", probe_mother, "mother config JSON; enables pretraining");
  add_pretrain_flags(probe_cmd, probe_pretrain);
  probe_cmd->add_option("--finetune-epochs", probe_finetune, "ERM fine-tuning epochs before probing")
      ->capture_default_str();
  probe_cmd->add_option("--d-starts", probe_cfg.d_starts, "window starts")->delimiter(',')->capture_default_str();
  probe_cmd->add_option("--width", probe_cfg.width, "window width")->check(CLI::PositiveNumber)->capture_default_str();
  probe_cmd->add_option("--clusters", probe_cfg.clusters, "k-means clusters (0 = domains x classes)")
      ->capture_default_str();
  probe_cmd->add_option("--steps", probe_cfg.probe_steps, "probe gradient steps")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*gen) return cmd_gen(common, gen_mother, gen_domains, gen_per_domain, gen_test_domains, gen_test_per_domain,
                                gen_with_domains);
    if (*train_cmd) return cmd_train(common, train_data, train_mother, train_pretrain, train_flags, val_fraction);
    if (*predict_cmd) return cmd_predict(common, predict_model, predict_data);
    if (*lodo) return cmd_eval_lodo(common, lodo_setup, lodo_flags, lodo_train, lodo_variants);
    if (*ablate) return cmd_ablate(common, ablate_setup, ablate_flags, ablate_train, axis, values);
    if (*theory_cmd) return cmd_theory(common, theory_sub, theory_mother, theory_pretrain, tf);
    if (*probe_cmd) return cmd_probe(common, probe_data, probe_mother, probe_pretrain, probe_cfg, probe_finetune);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kMissingInput;
  } catch (const CheckFailed& e) {
    std::cerr << e.what() << "\n";
    return kTheoryFailed;
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumeric;
  }
  return kUsage;
}
