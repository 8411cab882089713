#include "protoloss/experiment.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "protoloss/csv.hpp"
#include "protoloss/geometry.hpp"
#include "protoloss/svg.hpp"

namespace protoloss {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---- config field readers -------------------------------------------------

const json* find(const json& obj, const char* key) {
  const auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

void reject_unknown(const json& obj, const std::string& section,
                    std::initializer_list<const char*> known) {
  for (const auto& [key, value] : obj.items()) {
    if (std::find_if(known.begin(), known.end(), [&](const char* k) {
          return key == k;
        }) == known.end()) {
      throw ConfigError("unknown config field '" + section + key + "'");
    }
  }
}

std::uint64_t read_uint(const json& obj, const char* key,
                        const std::string& section, std::uint64_t fallback,
                        std::uint64_t minimum) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_number_integer() ||
      (v->is_number_integer() && !v->is_number_unsigned() &&
       v->get<std::int64_t>() < 0) ||
      v->get<std::uint64_t>() < minimum) {
    throw ConfigError(section + key + " must be an integer >= " +
                      std::to_string(minimum));
  }
  return v->get<std::uint64_t>();
}

double read_double(const json& obj, const char* key, const std::string& section,
                   double fallback) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_number()) throw ConfigError(section + key + " must be a number");
  return v->get<double>();
}

std::string read_string(const json& obj, const char* key,
                        const std::string& section, std::string fallback) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_string()) throw ConfigError(section + key + " must be a string");
  return v->get<std::string>();
}

bool read_bool(const json& obj, const char* key, const std::string& section,
               bool fallback) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_boolean()) throw ConfigError(section + key + " must be a boolean");
  return v->get<bool>();
}

const json& read_object(const json& obj, const char* key,
                        const std::string& section) {
  static const json kEmpty = json::object();
  const json* v = find(obj, key);
  if (!v) return kEmpty;
  if (!v->is_object()) throw ConfigError(section + key + " must be an object");
  return *v;
}

// ---- artifact writers ------------------------------------------------------

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IoError("cannot create output directory " + dir.string());
  }
  const fs::path probe = dir / ".write_probe";
  {
    std::ofstream out(probe);
    if (!out) throw IoError("output directory " + dir.string() + " is not writable");
  }
  fs::remove(probe, ec);
}

std::string metrics_csv(const std::vector<EpochMetrics>& history) {
  std::ostringstream out;
  out << "epoch,ce,pos,neg_sample,neg_class,total,train_acc,test_acc,lr\n";
  for (const EpochMetrics& m : history) {
    out << m.epoch << ',' << csv::format_double(m.loss.ce) << ','
        << csv::format_double(m.loss.pos) << ','
        << csv::format_double(m.loss.neg_sample) << ','
        << csv::format_double(m.loss.neg_class) << ','
        << csv::format_double(m.loss.total) << ','
        << csv::format_double(m.train_accuracy) << ','
        << (m.test_accuracy ? csv::format_double(*m.test_accuracy) : "") << ','
        << csv::format_double(m.lr) << '\n';
  }
  return out.str();
}

void write_embeddings(const Tensor& h, std::span<const Label> labels,
                      const fs::path& path) {
  std::ostringstream out;
  out << "label";
  for (std::size_t t = 0; t < h.cols(); ++t) out << ",h" << t;
  out << '\n';
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out << labels[i];
    for (double v : h.row(i)) out << ',' << csv::format_double(v);
    out << '\n';
  }
  csv::write_file(path, out.str());
}

json breakdown_json(const LossBreakdown& b) {
  return {{"ce", b.ce},
          {"pos", b.pos},
          {"neg_sample", b.neg_sample},
          {"neg_class", b.neg_class},
          {"total", b.total}};
}

std::string data_fingerprint(const TrainTestSplit& data) {
  std::ostringstream out;
  for (const Dataset* d : {&data.train, &data.test}) {
    for (std::size_t i = 0; i < d->size(); ++i) {
      out << d->labels[i];
      for (double v : d->features.row(i)) out << ',' << csv::format_double(v);
      out << '\n';
    }
    out << "--\n";
  }
  return out.str();
}

struct RunOutcome {
  TrainResult result;
  double wall_seconds = 0.0;
};

// Trains one (config, data) cell and writes its artifacts into out_dir.
RunOutcome run_training(const ExperimentConfig& config,
                        const TrainTestSplit& data, const fs::path& out_dir) {
  ensure_directory(out_dir);
  const auto start = std::chrono::steady_clock::now();

  MlpConfig mlp;
  mlp.layer_dims.push_back(data.train.input_dim());
  for (std::size_t h : config.model.hidden) mlp.layer_dims.push_back(h);
  mlp.layer_dims.push_back(config.model.latent_dim);
  mlp.seed = derive_seed(config.train.seed, 1);

  FeatureExtractor model = init_mlp(mlp);
  PrototypeBank bank =
      init_prototypes(data.train.num_classes, config.model.latent_dim,
                      config.train.alpha, derive_seed(config.train.seed, 2));

  const Dataset* test = data.test.size() > 0 ? &data.test : nullptr;
  RunOutcome outcome;
  try {
    outcome.result = train(std::move(model), std::move(bank), data.train, test,
                           config.train);
  } catch (const TrainingDiverged& e) {
    const json diag = {{"error", e.what()},
                       {"epoch", e.epoch},
                       {"batch", e.batch},
                       {"loss", {{"ce", std::to_string(e.loss.ce)},
                                 {"pos", std::to_string(e.loss.pos)},
                                 {"neg_sample", std::to_string(e.loss.neg_sample)},
                                 {"neg_class", std::to_string(e.loss.neg_class)},
                                 {"total", std::to_string(e.loss.total)}}}};
    csv::write_file(out_dir / "diagnostics.json", diag.dump(2) + "\n");
    throw;
  }
  const TrainState& state = outcome.result.state;

  csv::write_file(out_dir / "metrics.csv", metrics_csv(outcome.result.history));
  save_prototypes_csv(state.class_centers(), out_dir / "prototypes.csv");
  save_prototypes_csv(state.bank.centers(), out_dir / "weights.csv");
  save_parameters(state.model, out_dir / "theta.bin");
  const Dataset& shown = test ? *test : data.train;
  write_embeddings(embed(state.model, shown.features), shown.labels,
                   out_dir / "embeddings.csv");
  write_embeddings(embed(state.model, data.train.features), data.train.labels,
                   out_dir / "train_embeddings.csv");

  outcome.wall_seconds = std::chrono::duration<double>(
                             std::chrono::steady_clock::now() - start)
                             .count();
  const std::string config_text = config_to_json(config);
  const EpochMetrics& last = outcome.result.history.back();
  json summary = {
      {"method", to_string(config.train.method)},
      {"seed", config.train.seed},
      {"epochs_completed", outcome.result.history.size()},
      {"train_accuracy", last.train_accuracy},
      {"test_accuracy",
       last.test_accuracy ? json(*last.test_accuracy) : json()},
      {"final_loss", breakdown_json(last.loss)},
      {"wall_time_seconds", outcome.wall_seconds},
      {"input_hash", content_hash(config_text + data_fingerprint(data))},
      {"config", json::parse(config_text)},
  };
  csv::write_file(out_dir / "summary.json", summary.dump(2) + "\n");
  return outcome;
}

struct LabeledEmbeddings {
  Tensor h;
  std::vector<Label> labels;
};

LabeledEmbeddings read_embeddings(const fs::path& path, std::size_t classes) {
  Dataset d = load_csv(path, classes);
  return {std::move(d.features), std::move(d.labels)};
}

geometry::GeometryReport analyze_run(const fs::path& run_dir) {
  const fs::path proto_path = run_dir / "prototypes.csv";
  const fs::path emb_path = run_dir / "embeddings.csv";
  if (!fs::exists(proto_path) || !fs::exists(emb_path)) {
    throw ConfigError(run_dir.string() +
                      " must contain prototypes.csv and embeddings.csv");
  }
  const Tensor centers = load_prototypes_csv(proto_path);
  const fs::path weights_path = run_dir / "weights.csv";
  const Tensor weights =
      fs::exists(weights_path) ? load_prototypes_csv(weights_path) : centers;
  // Compactness is measured on training embeddings when the run kept them.
  const fs::path train_path = run_dir / "train_embeddings.csv";
  const LabeledEmbeddings emb = read_embeddings(
      fs::exists(train_path) ? train_path : emb_path, centers.rows());

  geometry::GeometryReport report =
      geometry::build_report(emb.h, emb.labels, centers);
  csv::write_file(run_dir / "geometry_report.json",
                  geometry::report_to_json(report));
  csv::write_file(run_dir / "inter_hist.csv",
                  geometry::histogram_csv(report.inter_hist));
  csv::write_file(run_dir / "intra_hist.csv",
                  geometry::histogram_csv(report.intra_hist));
  csv::write_file(run_dir / "inter_hist.svg",
                  svg::histogram(report.inter_hist, "Inter-class angles",
                                 "angle between class centers (deg)"));
  csv::write_file(run_dir / "intra_hist.svg",
                  svg::histogram(report.intra_hist, "Intra-class angles",
                                 "angle between sample and its center (deg)"));
  if (centers.cols() == 3) {
    const auto sphere = geometry::spherical_surface_histogram(
        emb.h, emb.labels, centers, weights);
    csv::write_file(run_dir / "sphere_hist.csv",
                    geometry::sphere_histogram_csv(sphere));
    csv::write_file(run_dir / "sphere_markers.csv",
                    geometry::sphere_markers_csv(sphere));
    csv::write_file(run_dir / "sphere_map.svg",
                    svg::sphere_map(sphere, "Normalized embeddings (phi, theta)"));
  }
  return report;
}

std::string comparison_markdown(const std::vector<ComparisonRow>& rows,
                                const std::vector<Method>& methods) {
  const auto fmt = [](double mean, double sd) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f ± %.2f", mean, sd);
    return std::string(buf);
  };
  std::ostringstream out;
  out << "| Model | Test accuracy (%) | MinSep | MeanSep | Std | SCR | Runs |\n"
      << "|---|---|---|---|---|---|---|\n";
  for (Method m : methods) {
    std::vector<const ComparisonRow*> cell;
    for (const auto& r : rows) {
      if (r.method == m) cell.push_back(&r);
    }
    if (cell.empty()) continue;
    const auto stat = [&](auto field) {
      double mean = 0.0;
      for (const auto* r : cell) mean += field(*r);
      mean /= static_cast<double>(cell.size());
      double var = 0.0;
      for (const auto* r : cell) var += (field(*r) - mean) * (field(*r) - mean);
      return std::pair{mean, std::sqrt(var / static_cast<double>(cell.size()))};
    };
    const auto [acc, acc_sd] =
        stat([](const ComparisonRow& r) { return 100.0 * r.test_accuracy; });
    const auto [mn, mn_sd] = stat([](const ComparisonRow& r) { return r.min_sep; });
    const auto [me, me_sd] = stat([](const ComparisonRow& r) { return r.mean_sep; });
    const auto [sd, sd_sd] = stat([](const ComparisonRow& r) { return r.std_sep; });
    const auto [sc, sc_sd] = stat([](const ComparisonRow& r) { return r.scr; });
    out << "| " << to_string(m) << " | " << fmt(acc, acc_sd) << " | "
        << fmt(mn, mn_sd) << " | " << fmt(me, me_sd) << " | " << fmt(sd, sd_sd)
        << " | " << fmt(sc, sc_sd) << " | " << cell.size() << " |\n";
  }
  return out.str();
}

std::string comparison_csv(const std::vector<ComparisonRow>& rows) {
  std::ostringstream out;
  out << "method,seed,test_acc,min_sep,mean_sep,std_sep,scr\n";
  for (const auto& r : rows) {
    out << to_string(r.method) << ',' << r.seed << ','
        << csv::format_double(r.test_accuracy) << ','
        << csv::format_double(r.min_sep) << ','
        << csv::format_double(r.mean_sep) << ','
        << csv::format_double(r.std_sep) << ',' << csv::format_double(r.scr)
        << '\n';
  }
  return out.str();
}

std::size_t worker_count(std::size_t cells) {
  std::size_t n = 1;
  if (const char* env = std::getenv("PROTOLOSS_THREADS")) {
    n = static_cast<std::size_t>(std::max(1L, std::strtol(env, nullptr, 10)));
  } else {
    n = std::max(1u, std::thread::hardware_concurrency());
  }
  return std::min(n, std::max<std::size_t>(cells, 1));
}

}  // namespace

void ExperimentConfig::validate() const {
  if (data.generator) {
    data.generator->validate();
  } else {
    if (data.train_csv.empty()) {
      throw ConfigError("data needs either a generator or train_csv");
    }
    if (!fs::exists(data.train_csv)) {
      throw ConfigError("data.train_csv does not exist: " +
                        data.train_csv.string());
    }
    if (!data.test_csv.empty() && !fs::exists(data.test_csv)) {
      throw ConfigError("data.test_csv does not exist: " +
                        data.test_csv.string());
    }
    if (data.classes < 1) throw ConfigError("data.classes must be >= 1");
  }
  if (model.latent_dim < 1) throw ConfigError("model.latent_dim must be >= 1");
  for (std::size_t h : model.hidden) {
    if (h < 1) throw ConfigError("model.hidden entries must be >= 1");
  }
  train.validate();
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
}

ExperimentConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(root, "", {"data", "model", "train", "output_dir"});

  ExperimentConfig c;
  const json& data = read_object(root, "data", "");
  reject_unknown(data, "data.",
                 {"generator", "train_csv", "test_csv", "classes", "rescale"});
  if (const json* gen = find(data, "generator")) {
    if (!gen->is_object()) throw ConfigError("data.generator must be an object");
    reject_unknown(*gen, "data.generator.",
                   {"classes", "input_dim", "n_per_class", "center_scale",
                    "noise_sigma", "seed"});
    const std::string s = "data.generator.";
    BlobConfig b;
    b.classes = read_uint(*gen, "classes", s, b.classes, 1);
    b.input_dim = read_uint(*gen, "input_dim", s, b.input_dim, 1);
    b.n_per_class = read_uint(*gen, "n_per_class", s, b.n_per_class, 1);
    b.center_scale = read_double(*gen, "center_scale", s, b.center_scale);
    b.noise_sigma = read_double(*gen, "noise_sigma", s, b.noise_sigma);
    b.seed = read_uint(*gen, "seed", s, b.seed, 0);
    c.data.generator = b;
  } else {
    c.data.train_csv = read_string(data, "train_csv", "data.", "");
    c.data.test_csv = read_string(data, "test_csv", "data.", "");
    c.data.classes = read_uint(data, "classes", "data.", 0, 1);
    c.data.rescale = read_bool(data, "rescale", "data.", false);
  }

  const json& model = read_object(root, "model", "");
  reject_unknown(model, "model.", {"hidden", "latent_dim"});
  if (const json* hidden = find(model, "hidden")) {
    if (!hidden->is_array()) throw ConfigError("model.hidden must be an array");
    c.model.hidden.clear();
    for (const json& h : *hidden) {
      if (!h.is_number_unsigned() || h.get<std::uint64_t>() < 1) {
        throw ConfigError("model.hidden entries must be integers >= 1");
      }
      c.model.hidden.push_back(h.get<std::size_t>());
    }
  }
  c.model.latent_dim = read_uint(model, "latent_dim", "model.", c.model.latent_dim, 1);

  const json& tr = read_object(root, "train", "");
  reject_unknown(tr, "train.",
                 {"method", "epochs", "batch_size", "eta", "eta_c", "momentum",
                  "weight_decay", "lr_drop_points", "lr_drop_factor", "alpha",
                  "lambda_pos", "lambda_neg_sample", "lambda_neg_class",
                  "repulsion_norm", "repulsion_eps", "seed"});
  const std::string s = "train.";
  TrainConfig& t = c.train;
  t.method = parse_method(read_string(tr, "method", s, to_string(t.method)));
  t.epochs = read_uint(tr, "epochs", s, t.epochs, 1);
  t.batch_size = read_uint(tr, "batch_size", s, t.batch_size, 1);
  t.eta = read_double(tr, "eta", s, t.eta);
  t.eta_c = read_double(tr, "eta_c", s, t.eta_c);
  t.momentum = read_double(tr, "momentum", s, t.momentum);
  t.weight_decay = read_double(tr, "weight_decay", s, t.weight_decay);
  if (const json* drops = find(tr, "lr_drop_points")) {
    if (!drops->is_array()) {
      throw ConfigError("train.lr_drop_points must be an array of numbers");
    }
    t.lr_drop_points.clear();
    for (const json& p : *drops) {
      if (!p.is_number()) {
        throw ConfigError("train.lr_drop_points must be an array of numbers");
      }
      t.lr_drop_points.push_back(p.get<double>());
    }
  }
  t.lr_drop_factor = read_double(tr, "lr_drop_factor", s, t.lr_drop_factor);
  t.alpha = read_double(tr, "alpha", s, t.alpha);
  t.loss_weights.pos = read_double(tr, "lambda_pos", s, t.loss_weights.pos);
  t.loss_weights.neg_sample =
      read_double(tr, "lambda_neg_sample", s, t.loss_weights.neg_sample);
  t.loss_weights.neg_class =
      read_double(tr, "lambda_neg_class", s, t.loss_weights.neg_class);
  t.repulsion.norm = parse_repulsion_norm(
      read_string(tr, "repulsion_norm", s, to_string(t.repulsion.norm)));
  t.repulsion.eps = read_double(tr, "repulsion_eps", s, t.repulsion.eps);
  t.seed = read_uint(tr, "seed", s, t.seed, 0);

  c.output_dir = read_string(root, "output_dir", "", c.output_dir.string());
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  if (!fs::exists(path)) {
    throw ConfigError("config file not found: " + path.string());
  }
  return parse_config(read_text(path));
}

std::string config_to_json(const ExperimentConfig& c) {
  json data;
  if (c.data.generator) {
    const BlobConfig& b = *c.data.generator;
    data["generator"] = {{"classes", b.classes},
                         {"input_dim", b.input_dim},
                         {"n_per_class", b.n_per_class},
                         {"center_scale", b.center_scale},
                         {"noise_sigma", b.noise_sigma},
                         {"seed", b.seed}};
  } else {
    data = {{"train_csv", c.data.train_csv.string()},
            {"classes", c.data.classes},
            {"rescale", c.data.rescale}};
    if (!c.data.test_csv.empty()) data["test_csv"] = c.data.test_csv.string();
  }
  const TrainConfig& t = c.train;
  json root = {
      {"data", data},
      {"model", {{"hidden", c.model.hidden}, {"latent_dim", c.model.latent_dim}}},
      {"train",
       {{"method", to_string(t.method)},
        {"epochs", t.epochs},
        {"batch_size", t.batch_size},
        {"eta", t.eta},
        {"eta_c", t.eta_c},
        {"momentum", t.momentum},
        {"weight_decay", t.weight_decay},
        {"lr_drop_points", t.lr_drop_points},
        {"lr_drop_factor", t.lr_drop_factor},
        {"alpha", t.alpha},
        {"lambda_pos", t.loss_weights.pos},
        {"lambda_neg_sample", t.loss_weights.neg_sample},
        {"lambda_neg_class", t.loss_weights.neg_class},
        {"repulsion_norm", to_string(t.repulsion.norm)},
        {"repulsion_eps", t.repulsion.eps},
        {"seed", t.seed}}},
      {"output_dir", c.output_dir.string()},
  };
  return root.dump(2) + "\n";
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + (stream + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

TrainTestSplit load_data(const DataSection& data) {
  if (data.generator) return gaussian_blobs(*data.generator);
  TrainTestSplit split;
  split.train = load_csv(data.train_csv, data.classes, false, Split::kTrain);
  if (!data.test_csv.empty()) {
    split.test = load_csv(data.test_csv, data.classes, false, Split::kTest);
    if (split.test.input_dim() != split.train.input_dim()) {
      throw ConfigError("data.test_csv has a different feature count");
    }
  } else {
    split.test.features = Tensor(Shape{0, split.train.input_dim()});
    split.test.num_classes = data.classes;
    split.test.split = Split::kTest;
  }
  if (data.rescale) {
    const UnitRangeScaler scaler = UnitRangeScaler::fit(split.train.features);
    scaler.apply(split.train.features);
    if (split.test.size() > 0) scaler.apply(split.test.features);
  }
  return split;
}

std::string content_hash(const std::string& text) {
  const std::string blob = "blob " + std::to_string(text.size()) +
                           std::string(1, '\0') + text;
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(blob.data(), blob.size(), digest, &length, EVP_sha1(),
                 nullptr) != 1) {
    throw Error("SHA-1 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  for (unsigned int i = 0; i < length; ++i) {
    hex += kHex[digest[i] >> 4];
    hex += kHex[digest[i] & 0xF];
  }
  return hex;
}

int exit_code_for(const std::exception& error) {
  if (dynamic_cast<const NumericalError*>(&error)) return kExitNumerical;
  if (dynamic_cast<const IoError*>(&error)) return kExitIo;
  if (dynamic_cast<const ConfigError*>(&error) ||
      dynamic_cast<const ParseError*>(&error) ||
      dynamic_cast<const ContractViolation*>(&error)) {
    return kExitConfig;
  }
  if (dynamic_cast<const fs::filesystem_error*>(&error)) return kExitIo;
  return kExitConfig;
}

int cmd_gen_data(const ExperimentConfig& config, std::ostream& log) {
  try {
    config.validate();
    if (!config.data.generator) {
      throw ConfigError("gen-data needs a data.generator section");
    }
    const BlobConfig& b = *config.data.generator;
    const TrainTestSplit data = gaussian_blobs(b);
    ensure_directory(config.output_dir);
    save_csv(data.train, config.output_dir / "train.csv");
    save_csv(data.test, config.output_dir / "test.csv");
    const json meta = {{"M", b.classes},
                       {"D", b.input_dim},
                       {"n_per_class", b.n_per_class},
                       {"train_size", data.train.size()},
                       {"test_size", data.test.size()},
                       {"center_scale", b.center_scale},
                       {"noise_sigma", b.noise_sigma},
                       {"seed", b.seed}};
    csv::write_file(config.output_dir / "meta.json", meta.dump(2) + "\n");
    log << "wrote " << data.train.size() << " train / " << data.test.size()
        << " test samples to " << config.output_dir.string() << "\n";
    return kExitOk;
  } catch (const std::exception& e) {
    log << "gen-data: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

int cmd_train(const ExperimentConfig& config, std::ostream& log) {
  try {
    config.validate();
    const TrainTestSplit data = load_data(config.data);
    const RunOutcome run = run_training(config, data, config.output_dir);
    const EpochMetrics& last = run.result.history.back();
    log << to_string(config.train.method) << " seed " << config.train.seed
        << ": train acc " << last.train_accuracy;
    if (last.test_accuracy) log << ", test acc " << *last.test_accuracy;
    log << " (" << run.wall_seconds << " s) -> " << config.output_dir.string()
        << "\n";
    return kExitOk;
  } catch (const TrainingDiverged& e) {
    log << "train: " << e.what() << "; diagnostics in "
        << (config.output_dir / "diagnostics.json").string() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    log << "train: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

int cmd_analyze(const fs::path& run_dir, std::ostream& log) {
  try {
    const geometry::GeometryReport report = analyze_run(run_dir);
    log << "MinSep " << report.min_sep << ", MeanSep " << report.mean_sep
        << ", Std " << report.std_sep << ", SCR " << report.scr.value << "\n";
    for (std::size_t j : report.scr.empty_classes) {
      log << "warning: class " << j << " has no samples; excluded from SCR\n";
    }
    for (std::size_t j : report.scr.infinite_classes) {
      log << "warning: class " << j
          << " collapsed onto its center; SCR ratio is infinite\n";
    }
    return kExitOk;
  } catch (const std::exception& e) {
    log << "analyze: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

int cmd_compare(const ExperimentConfig& config,
                const std::vector<Method>& methods,
                const std::vector<std::uint64_t>& seeds, std::ostream& log) {
  struct Cell {
    Method method;
    std::uint64_t seed;
    std::optional<ComparisonRow> row;
    int code = kExitOk;
  };
  std::vector<Cell> cells;
  std::mutex log_mutex;
  try {
    config.validate();
    if (methods.empty() || seeds.empty() || methods.size() * seeds.size() < 2) {
      throw ConfigError("compare needs at least two (method, seed) cells");
    }
    for (Method m : methods) {
      for (std::uint64_t s : seeds) cells.push_back({m, s, std::nullopt});
    }
    ensure_directory(config.output_dir);
    const TrainTestSplit data = load_data(config.data);

    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
      for (std::size_t i = next++; i < cells.size(); i = next++) {
        Cell& cell = cells[i];
        ExperimentConfig cell_config = config;
        cell_config.train.method = cell.method;
        cell_config.train.seed = cell.seed;
        cell_config.output_dir = config.output_dir /
                                 (std::string(to_string(cell.method)) +
                                  "_seed" + std::to_string(cell.seed));
        try {
          const RunOutcome run =
              run_training(cell_config, data, cell_config.output_dir);
          const auto report = analyze_run(cell_config.output_dir);
          const EpochMetrics& last = run.result.history.back();
          cell.row = ComparisonRow{cell.method,
                                   cell.seed,
                                   last.test_accuracy.value_or(last.train_accuracy),
                                   report.min_sep,
                                   report.mean_sep,
                                   report.std_sep,
                                   report.scr.value};
          std::lock_guard lock(log_mutex);
          log << to_string(cell.method) << " seed " << cell.seed
              << ": test acc " << cell.row->test_accuracy << ", MinSep "
              << report.min_sep << ", SCR " << report.scr.value << "\n";
        } catch (const std::exception& e) {
          cell.code = dynamic_cast<const TrainingDiverged*>(&e)
                          ? kExitNumerical
                          : exit_code_for(e);
          std::lock_guard lock(log_mutex);
          log << to_string(cell.method) << " seed " << cell.seed
              << " failed: " << e.what() << "\n";
        }
      }
    };
    const std::size_t workers = worker_count(cells.size());
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    std::vector<ComparisonRow> rows;
    int code = kExitOk;
    for (const Cell& cell : cells) {
      if (cell.row) rows.push_back(*cell.row);
      code = std::max(code, cell.code);
    }
    csv::write_file(config.output_dir / "comparison.csv", comparison_csv(rows));
    csv::write_file(config.output_dir / "comparison.md",
                    comparison_markdown(rows, methods));
    return code;
  } catch (const std::exception& e) {
    log << "compare: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

std::vector<ComparisonRow> load_comparison_csv(const fs::path& path) {
  const csv::Table table = csv::read(path);
  std::vector<ComparisonRow> rows;
  for (const auto& [line, cells] : table.rows) {
    if (cells.size() != 7) {
      throw ParseError(path.string() + ":" + std::to_string(line) +
                       ": expected 7 cells");
    }
    ComparisonRow r;
    r.method = parse_method(cells[0]);
    r.seed = csv::parse_index(cells[1], line, path);
    r.test_accuracy = csv::parse_double(cells[2], line, path);
    r.min_sep = csv::parse_double(cells[3], line, path);
    r.mean_sep = csv::parse_double(cells[4], line, path);
    r.std_sep = csv::parse_double(cells[5], line, path);
    r.scr = csv::parse_double(cells[6], line, path);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace protoloss
