#include "classmark/bench.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "classmark/attacks.hpp"
#include "classmark/checkpoint.hpp"
#include "classmark/errors.hpp"
#include "classmark/keyforge.hpp"
#include "classmark/protocol.hpp"
#include "classmark/stego.hpp"
#include "classmark/util.hpp"

namespace classmark::bench {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

namespace {

nn::Optimizer parse_optimizer(const std::string& s) {
  if (s == "adam") return nn::Optimizer::Adam;
  if (s == "sgd") return nn::Optimizer::Sgd;
  raise(Errc::ConfigInvalid, "unknown optimizer: " + s);
}

std::string optimizer_name(nn::Optimizer o) {
  return o == nn::Optimizer::Adam ? "adam" : "sgd";
}

template <typename T>
T field(const json& doc, const std::string& key, T fallback) {
  if (!doc.contains(key)) return fallback;
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception&) {
    raise(Errc::ConfigInvalid, "bad value for config field '" + key + "'");
  }
}

}  // namespace

ExperimentConfig parse_config(const json& doc) {
  if (!doc.is_object()) raise(Errc::ConfigInvalid, "config is not an object");
  ExperimentConfig cfg;
  cfg.run_name = field<std::string>(doc, "run_name", cfg.run_name);
  cfg.seed = field<std::uint64_t>(doc, "seed", cfg.seed);
  cfg.output_dir = field<std::string>(doc, "output_dir", "");
  cfg.verbose = field<bool>(doc, "verbose", false);

  if (doc.contains("data")) {
    const json& d = doc.at("data");
    cfg.data.train_dataset =
        field<std::string>(d, "train_dataset", cfg.data.train_dataset);
    cfg.data.key_dataset =
        field<std::string>(d, "key_dataset", cfg.data.key_dataset);
    cfg.data.data_root = field<std::string>(d, "data_root", "");
    cfg.data.train_limit = field<int>(d, "train_limit", 0);
    cfg.data.test_limit = field<int>(d, "test_limit", 0);
  }
  if (doc.contains("keys")) {
    const json& k = doc.at("keys");
    cfg.keys.class_filter =
        field<std::string>(k, "class_filter", cfg.keys.class_filter);
    cfg.keys.count = field<int>(k, "count", cfg.keys.count);
    cfg.keys.identity_template =
        field<std::string>(k, "identity_template", cfg.keys.identity_template);
  }
  if (cfg.keys.count < 1)
    raise(Errc::ConfigInvalid, "keys.count must be at least 1");

  cfg.model_family = field<std::string>(doc, "model_family", cfg.model_family);
  if (doc.contains("train")) {
    const json& t = doc.at("train");
    cfg.hp.optimizer =
        parse_optimizer(field<std::string>(t, "optimizer", "adam"));
    cfg.hp.lr = field<double>(t, "lr", cfg.hp.lr);
    cfg.hp.momentum = field<double>(t, "momentum", cfg.hp.momentum);
    cfg.hp.weight_decay =
        field<double>(t, "weight_decay", cfg.hp.weight_decay);
    cfg.hp.epochs = field<int>(t, "epochs", cfg.hp.epochs);
    cfg.hp.batch_size = field<int>(t, "batch_size", cfg.hp.batch_size);
  }
  if (cfg.hp.epochs < 1 || cfg.hp.batch_size < 1)
    raise(Errc::ConfigInvalid, "train.epochs and train.batch_size must be >= 1");
  if (cfg.hp.weight_decay < 0.0)
    raise(Errc::ConfigInvalid, "train.weight_decay must be >= 0");
  cfg.hp.seed = cfg.seed;

  cfg.threshold = field<double>(doc, "threshold", cfg.threshold);
  if (cfg.threshold <= 0.0 || cfg.threshold >= 1.0)
    raise(Errc::ConfigInvalid, "threshold must lie strictly inside (0,1)");
  cfg.clean_twin = field<bool>(doc, "clean_twin", cfg.clean_twin);

  for (const json& a : doc.value("attacks", json::array())) {
    const auto type = field<std::string>(a, "type", "");
    if (type == "finetune") {
      FinetuneAttackConfig f;
      f.data_fraction = field<double>(a, "data_fraction", f.data_fraction);
      f.epochs = field<int>(a, "epochs", f.epochs);
      f.lr = field<double>(a, "lr", f.lr);
      f.momentum = field<double>(a, "momentum", f.momentum);
      cfg.finetune = f;
    } else if (type == "prune") {
      PruneAttackConfig p;
      p.rates = field<std::vector<double>>(a, "rates", {});
      if (p.rates.empty())
        raise(Errc::ConfigInvalid, "prune attack needs a rates list");
      cfg.prune = p;
    } else if (type == "query_mod") {
      QueryModAttackConfig q;
      q.train_fraction = field<double>(a, "train_fraction", q.train_fraction);
      q.denoiser_epochs = field<int>(a, "denoiser_epochs", q.denoiser_epochs);
      q.baselines = field<bool>(a, "baselines", q.baselines);
      q.logo_opacity = field<double>(a, "logo_opacity", q.logo_opacity);
      q.noise_scale = field<double>(a, "noise_scale", q.noise_scale);
      q.baseline_target = field<int>(a, "baseline_target", q.baseline_target);
      q.baseline_train_limit =
          field<int>(a, "baseline_train_limit", q.baseline_train_limit);
      q.baseline_epochs = field<int>(a, "baseline_epochs", q.baseline_epochs);
      cfg.query_mod = q;
    } else {
      raise(Errc::ConfigInvalid, "unknown attack type: " + type);
    }
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(Errc::IoError, "cannot read config " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    raise(Errc::ConfigInvalid, std::string("config parse: ") + e.what());
  }
  return parse_config(doc);
}

json config_to_json(const ExperimentConfig& cfg) {
  json doc;
  doc["run_name"] = cfg.run_name;
  doc["seed"] = cfg.seed;
  doc["output_dir"] = cfg.output_dir;
  doc["verbose"] = cfg.verbose;
  doc["data"] = {{"train_dataset", cfg.data.train_dataset},
                 {"key_dataset", cfg.data.key_dataset},
                 {"data_root", cfg.data.data_root},
                 {"train_limit", cfg.data.train_limit},
                 {"test_limit", cfg.data.test_limit}};
  doc["keys"] = {{"class_filter", cfg.keys.class_filter},
                 {"count", cfg.keys.count},
                 {"identity_template", cfg.keys.identity_template}};
  doc["model_family"] = cfg.model_family;
  doc["train"] = {{"optimizer", optimizer_name(cfg.hp.optimizer)},
                  {"lr", cfg.hp.lr},
                  {"momentum", cfg.hp.momentum},
                  {"weight_decay", cfg.hp.weight_decay},
                  {"epochs", cfg.hp.epochs},
                  {"batch_size", cfg.hp.batch_size}};
  doc["threshold"] = cfg.threshold;
  doc["clean_twin"] = cfg.clean_twin;
  doc["attacks"] = json::array();
  if (cfg.finetune)
    doc["attacks"].push_back({{"type", "finetune"},
                              {"data_fraction", cfg.finetune->data_fraction},
                              {"epochs", cfg.finetune->epochs},
                              {"lr", cfg.finetune->lr},
                              {"momentum", cfg.finetune->momentum}});
  if (cfg.prune)
    doc["attacks"].push_back({{"type", "prune"}, {"rates", cfg.prune->rates}});
  if (cfg.query_mod)
    doc["attacks"].push_back(
        {{"type", "query_mod"},
         {"train_fraction", cfg.query_mod->train_fraction},
         {"denoiser_epochs", cfg.query_mod->denoiser_epochs},
         {"baselines", cfg.query_mod->baselines},
         {"logo_opacity", cfg.query_mod->logo_opacity},
         {"noise_scale", cfg.query_mod->noise_scale},
         {"baseline_target", cfg.query_mod->baseline_target},
         {"baseline_train_limit", cfg.query_mod->baseline_train_limit},
         {"baseline_epochs", cfg.query_mod->baseline_epochs}});
  return doc;
}

std::string config_hash(const ExperimentConfig& cfg) {
  json doc = config_to_json(cfg);
  doc.erase("output_dir");
  doc.erase("verbose");
  return hex64(fnv1a64(doc.dump()));
}

// ---------------------------------------------------------------------------
// Report serialization
// ---------------------------------------------------------------------------

json report_to_json(const RunReport& r) {
  json doc;
  doc["run_name"] = r.run_name;
  doc["config_hash"] = r.config_hash;
  doc["created"] = r.created;
  if (r.effectiveness) {
    const auto& e = *r.effectiveness;
    doc["effectiveness"] = {{"clean_test_acc", e.clean_test_acc},
                            {"wm_test_acc", e.wm_test_acc},
                            {"delta_pp", e.delta_pp},
                            {"wm_accuracy", e.wm_accuracy},
                            {"pirated", e.pirated},
                            {"clean_model_id", e.clean_model_id},
                            {"wm_model_id", e.wm_model_id},
                            {"keys_id", e.keys_id}};
  }
  if (r.auth) {
    const auto& a = *r.auth;
    doc["auth"] = {{"users", a.users},
                   {"fasr", a.fasr},
                   {"avg_key_mse", a.avg_key_mse},
                   {"wm_model_id", a.wm_model_id},
                   {"keys_id", a.keys_id}};
  }
  if (r.finetune) {
    const auto& f = *r.finetune;
    doc["finetune"] = {{"epochs", f.epochs},
                       {"test_acc_after", f.test_acc_after},
                       {"wm_acc_after", f.wm_acc_after},
                       {"model_id", f.model_id},
                       {"parent_id", f.parent_id}};
  }
  if (!r.prune.empty()) {
    doc["prune"] = json::array();
    for (const auto& row : r.prune)
      doc["prune"].push_back({{"rate", row.rate},
                              {"test_acc", row.test_acc},
                              {"wm_acc", row.wm_acc},
                              {"zero_exact", row.zero_exact},
                              {"model_id", row.model_id}});
  }
  if (!r.query_mod.empty()) {
    doc["query_mod"] = json::array();
    for (const auto& row : r.query_mod)
      doc["query_mod"].push_back({{"scheme", row.scheme},
                                  {"wm_before", row.wm_before},
                                  {"wm_after", row.wm_after},
                                  {"model_id", row.model_id},
                                  {"keys_id", row.keys_id},
                                  {"modified_keys_id", row.modified_keys_id}});
  }
  if (r.baseline_mse) {
    const auto& b = *r.baseline_mse;
    doc["baseline_mse"] = {{"ours_avg_mse", b.ours_avg_mse},
                           {"logo_avg_mse", b.logo_avg_mse},
                           {"noise_avg_mse", b.noise_avg_mse}};
  }
  return doc;
}

RunReport report_from_json(const json& doc) {
  RunReport r;
  r.run_name = doc.value("run_name", "");
  r.config_hash = doc.value("config_hash", "");
  r.created = doc.value("created", "");
  if (doc.contains("effectiveness")) {
    const json& e = doc.at("effectiveness");
    EffectivenessBlock b;
    b.clean_test_acc = e.at("clean_test_acc").get<double>();
    b.wm_test_acc = e.at("wm_test_acc").get<double>();
    b.delta_pp = e.at("delta_pp").get<double>();
    b.wm_accuracy = e.at("wm_accuracy").get<double>();
    b.pirated = e.at("pirated").get<bool>();
    b.clean_model_id = e.value("clean_model_id", "");
    b.wm_model_id = e.value("wm_model_id", "");
    b.keys_id = e.value("keys_id", "");
    r.effectiveness = b;
  }
  if (doc.contains("auth")) {
    const json& a = doc.at("auth");
    AuthBlock b;
    b.users = a.at("users").get<int>();
    b.fasr = a.at("fasr").get<double>();
    b.avg_key_mse = a.at("avg_key_mse").get<double>();
    b.wm_model_id = a.value("wm_model_id", "");
    b.keys_id = a.value("keys_id", "");
    r.auth = b;
  }
  if (doc.contains("finetune")) {
    const json& f = doc.at("finetune");
    FinetuneBlock b;
    b.epochs = f.at("epochs").get<int>();
    b.test_acc_after = f.at("test_acc_after").get<double>();
    b.wm_acc_after = f.at("wm_acc_after").get<double>();
    b.model_id = f.value("model_id", "");
    b.parent_id = f.value("parent_id", "");
    r.finetune = b;
  }
  for (const json& row : doc.value("prune", json::array())) {
    PruneRow p;
    p.rate = row.at("rate").get<double>();
    p.test_acc = row.at("test_acc").get<double>();
    p.wm_acc = row.at("wm_acc").get<double>();
    p.zero_exact = row.at("zero_exact").get<bool>();
    p.model_id = row.value("model_id", "");
    r.prune.push_back(p);
  }
  for (const json& row : doc.value("query_mod", json::array())) {
    QueryModRow q;
    q.scheme = row.at("scheme").get<std::string>();
    q.wm_before = row.at("wm_before").get<double>();
    q.wm_after = row.at("wm_after").get<double>();
    q.model_id = row.value("model_id", "");
    q.keys_id = row.value("keys_id", "");
    q.modified_keys_id = row.value("modified_keys_id", "");
    r.query_mod.push_back(q);
  }
  if (doc.contains("baseline_mse")) {
    const json& b = doc.at("baseline_mse");
    BaselineMseBlock m;
    m.ours_avg_mse = b.at("ours_avg_mse").get<double>();
    m.logo_avg_mse = b.at("logo_avg_mse").get<double>();
    m.noise_avg_mse = b.at("noise_avg_mse").get<double>();
    r.baseline_mse = m;
  }
  return r;
}

namespace {

void render_text(const RunReport& r, std::ostream& out) {
  char buf[160];
  out << "# classmark run report\n";
  out << "run:    " << r.run_name << "\n";
  out << "config: " << r.config_hash << "\n";
  out << "created: " << r.created << "\n";
  if (r.effectiveness) {
    const auto& e = *r.effectiveness;
    out << "\n## effectiveness\n";
    std::snprintf(buf, sizeof buf,
                  "clean test acc   %.4f  [%s]\n"
                  "wm test acc      %.4f  [%s]\n"
                  "delta (pp)       %+.2f\n"
                  "wm accuracy      %.4f  verdict: %s  [keys %s]\n",
                  e.clean_test_acc, e.clean_model_id.c_str(), e.wm_test_acc,
                  e.wm_model_id.c_str(), e.delta_pp, e.wm_accuracy,
                  e.pirated ? "pirated" : "not-pirated", e.keys_id.c_str());
    out << buf;
  }
  if (r.auth) {
    const auto& a = *r.auth;
    out << "\n## fingerprint authentication\n";
    std::snprintf(buf, sizeof buf,
                  "users            %d\n"
                  "FASR             %.4f\n"
                  "avg key MSE      %.4f  [keys %s]\n",
                  a.users, a.fasr, a.avg_key_mse, a.keys_id.c_str());
    out << buf;
  }
  if (r.finetune) {
    const auto& f = *r.finetune;
    out << "\n## fine-tuning attack\n";
    std::snprintf(buf, sizeof buf,
                  "epochs           %d\n"
                  "test acc after   %.4f\n"
                  "wm acc after     %.4f  [%s <- %s]\n",
                  f.epochs, f.test_acc_after, f.wm_acc_after,
                  f.model_id.c_str(), f.parent_id.c_str());
    out << buf;
  }
  if (!r.prune.empty()) {
    out << "\n## pruning attack\n";
    out << "rate   test acc  wm acc   zeros-exact  model\n";
    for (const auto& row : r.prune) {
      std::snprintf(buf, sizeof buf, "%.2f   %.4f    %.4f   %s  [%s]\n",
                    row.rate, row.test_acc, row.wm_acc,
                    row.zero_exact ? "yes" : "NO ", row.model_id.c_str());
      out << buf;
    }
  }
  if (!r.query_mod.empty()) {
    out << "\n## query modification attack\n";
    out << "scheme  wm before  wm after\n";
    for (const auto& row : r.query_mod) {
      std::snprintf(buf, sizeof buf, "%-6s  %.4f     %.4f  [%s]\n",
                    row.scheme.c_str(), row.wm_before, row.wm_after,
                    row.model_id.c_str());
      out << buf;
    }
  }
  if (r.baseline_mse) {
    const auto& b = *r.baseline_mse;
    out << "\n## key distortion (avg MSE vs originals)\n";
    std::snprintf(buf, sizeof buf,
                  "ours             %.4f\n"
                  "logo baseline    %.2f\n"
                  "noise baseline   %.2f\n",
                  b.ours_avg_mse, b.logo_avg_mse, b.noise_avg_mse);
    out << buf;
  }
}

}  // namespace

void emit_report(const RunReport& report, ReportFormat format,
                 const std::string& path) {
  if (!report.effectiveness || !report.auth)
    raise(Errc::IncompleteReport,
          "core metric blocks missing; refusing to emit");
  std::ofstream out(path, std::ios::trunc);
  if (!out) raise(Errc::IoError, "cannot write " + path);
  if (format == ReportFormat::Structured)
    out << report_to_json(report).dump(2) << '\n';
  else
    render_text(report, out);
}

RunReport parse_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(Errc::IoError, "cannot read " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    raise(Errc::IncompleteReport,
          std::string("report is not structured form: ") + e.what());
  }
  return report_from_json(doc);
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

namespace {

std::string now_stamp() {
  std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

data::LabeledDataset head(const data::LabeledDataset& ds, int limit) {
  if (limit <= 0 || std::size_t(limit) >= ds.size()) return ds;
  std::vector<std::size_t> idx(static_cast<std::size_t>(limit));
  std::iota(idx.begin(), idx.end(), 0);
  return ds.subset(idx);
}

int class_count(const data::LabeledDataset& ds) {
  if (!ds.class_names.empty()) return int(ds.class_names.size());
  int mx = -1;
  for (int y : ds.labels) mx = std::max(mx, y);
  return mx + 1;
}

std::string model_content_id(const nn::ModelArtifact& model) {
  std::uint64_t h = fnv1a64(nn::family_name(model.arch.family));
  auto params = const_cast<nn::ModelArtifact&>(model).net.params();
  for (const auto& p : params)
    h = fnv1a64(p.value->data(), p.value->size() * sizeof(double), h);
  return hex64(h);
}

std::string keyset_content_id(const std::vector<keys::WatermarkKeySample>& ks) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& k : ks) {
    h = fnv1a64(k.image.pixels.data(), k.image.pixels.size(), h);
    const int meta[2] = {k.label, k.owner};
    h = fnv1a64(meta, sizeof meta, h);
  }
  return hex64(h);
}

/// Collects provenance rows and writes checkpoints under the run directory.
struct ArtifactStore {
  std::string dir;  // empty = in-memory run, nothing persisted
  json rows = json::array();

  void note(const std::string& id, const std::string& kind,
            const std::string& path, const std::string& parent,
            const std::string& detail) {
    rows.push_back({{"id", id},
                    {"kind", kind},
                    {"path", path},
                    {"parent", parent},
                    {"detail", detail}});
  }

  std::string put_model(const nn::ModelArtifact& model,
                        const std::string& name, const std::string& parent,
                        const std::string& detail) {
    const std::string id = model_content_id(model);
    std::string path;
    if (!dir.empty()) {
      path = (fs::path(dir) / (name + ".ckpt")).string();
      nn::save_checkpoint(model, path);
    }
    note(id, "checkpoint", path, parent, detail);
    return id;
  }

  std::string put_keys(std::vector<keys::WatermarkKeySample>& ks,
                       keys::FingerprintRegistry* registry,
                       const std::string& name, const std::string& parent,
                       const std::string& detail) {
    const std::string id = keyset_content_id(ks);
    std::string path;
    if (!dir.empty()) {
      path = (fs::path(dir) / name).string();
      if (registry) {
        keys::save_key_images(ks, *registry, path);
      } else {
        keys::FingerprintRegistry throwaway;
        for (const auto& k : ks)
          throwaway.entries.push_back({k.owner, "", "", ""});
        keys::save_key_images(ks, throwaway, path);
      }
    }
    note(id, "keyset", path, parent, detail);
    return id;
  }
};

template <typename Fn>
auto stage(const std::string& name, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.code(), "[stage " + name + "] " + e.what());
  }
}

}  // namespace

data::DatasetBundle resolve_dataset(const std::string& ref,
                                    const std::string& data_root) {
  std::string root = data_root;
  if (root.empty())
    if (const char* env = std::getenv("CLASSMARK_DATA_ROOT")) root = env;

  const bool is_garments = ref == "garments-synth";
  const bool is_digits = ref == "digits-synth";
  if (is_garments || is_digits) {
    const fs::path archived = fs::path(root.empty() ? "." : root) / ref;
    if (fs::exists(archived / "manifest.json"))
      return data::ingest_dataset(archived.string());
    return is_garments ? data::synth_garments({})
                       : data::synth_digits({});
  }

  fs::path dir = ref;
  if (dir.is_relative() && !root.empty() && !fs::exists(dir))
    dir = fs::path(root) / ref;
  if (!fs::exists(dir))
    raise(Errc::DatasetMissing, "no dataset at " + dir.string());
  return data::ingest_dataset(dir.string());
}

RunReport run_pipeline(const ExperimentConfig& cfg) {
  RunReport report;
  report.run_name = cfg.run_name;
  report.config_hash = config_hash(cfg);
  report.created = now_stamp();

  ArtifactStore store;
  if (!cfg.output_dir.empty()) {
    fs::create_directories(cfg.output_dir);
    store.dir = cfg.output_dir;
    std::ofstream cfg_out(fs::path(cfg.output_dir) / "config.json");
    cfg_out << config_to_json(cfg).dump(2) << '\n';
  }

  auto vlog = [&](const std::string& msg) {
    if (cfg.verbose) std::fprintf(stderr, "[%s] %s\n", cfg.run_name.c_str(), msg.c_str());
  };
  nn::ProgressFn train_log;
  if (cfg.verbose)
    train_log = [&](const nn::EpochStats& s) {
      std::fprintf(stderr, "  epoch %d  loss %.4f\n", s.epoch, s.mean_loss);
    };

  // -- data ----------------------------------------------------------------
  vlog("loading datasets");
  data::DatasetBundle garments = stage("data", [&] {
    auto b = resolve_dataset(cfg.data.train_dataset, cfg.data.data_root);
    b.train = head(b.train, cfg.data.train_limit);
    b.test = head(b.test, cfg.data.test_limit);
    if (b.train.empty() || b.test.empty())
      raise(Errc::EmptyDataset, "training dataset resolved empty");
    return b;
  });
  data::DatasetBundle digits = stage("data", [&] {
    return resolve_dataset(cfg.data.key_dataset, cfg.data.data_root);
  });

  const int num_classes = class_count(garments.train);
  const RasterImage& probe = garments.train.images.front();

  // -- keys ----------------------------------------------------------------
  vlog("selecting key images and minting fingerprints");
  std::vector<RasterImage> key_images = stage("keys", [&] {
    return keys::select_key_images(digits.train, cfg.keys.class_filter,
                                   cfg.keys.count, cfg.seed);
  });
  keys::FingerprintRegistry registry = stage("keys", [&] {
    return keys::mint_fingerprints(cfg.keys.count, cfg.keys.identity_template);
  });

  // -- embed ---------------------------------------------------------------
  nn::ArchSpec wm_arch;
  wm_arch.family = nn::parse_family(cfg.model_family);
  wm_arch.input_h = probe.height;
  wm_arch.input_w = probe.width;
  wm_arch.input_c = probe.channels;
  wm_arch.num_classes = num_classes + 1;

  vlog("training watermarked model");
  wm::EmbedResult embedded = stage("embed", [&] {
    return wm::embed_watermark(wm_arch, garments.train, key_images, registry,
                               num_classes, cfg.hp, train_log);
  });
  const std::string wm_id =
      store.put_model(embedded.model, "watermarked", "", "embed_watermark");
  const std::string keys_id =
      store.put_keys(embedded.dwm, &registry, "keys", wm_id, "forged key set");
  if (!store.dir.empty())
    keys::save_registry(registry,
                        (fs::path(store.dir) / "registry.json").string());

  // -- clean twin + effectiveness -----------------------------------------
  EffectivenessBlock eff;
  eff.wm_model_id = wm_id;
  eff.keys_id = keys_id;
  eff.wm_test_acc = nn::evaluate(embedded.model, garments.test);
  if (cfg.clean_twin) {
    vlog("training clean twin");
    nn::ArchSpec clean_arch = wm_arch;
    clean_arch.num_classes = num_classes;
    nn::ModelArtifact clean = stage("clean-twin", [&] {
      nn::ModelArtifact blank = nn::build_model(clean_arch, cfg.hp.seed);
      return nn::train(blank, garments.train, cfg.hp, train_log);
    });
    eff.clean_model_id =
        store.put_model(clean, "clean", "", "clean twin, same seed, no keys");
    eff.clean_test_acc = nn::evaluate(clean, garments.test);
    eff.delta_pp = (eff.wm_test_acc - eff.clean_test_acc) * 100.0;
  }

  // -- verify --------------------------------------------------------------
  vlog("verifying ownership");
  wm::VerificationPolicy policy{cfg.threshold};
  wm::LocalSuspect self_suspect(embedded.model);
  const wm::VerificationReport vr = stage("verify", [&] {
    return wm::verify_ownership(self_suspect, embedded.dwm, policy);
  });
  eff.wm_accuracy = vr.wm_accuracy;
  eff.pirated = vr.pirated;
  report.effectiveness = eff;

  // -- authenticate --------------------------------------------------------
  vlog("authenticating registered users");
  AuthBlock auth;
  auth.users = int(embedded.dwm.size());
  auth.wm_model_id = wm_id;
  auth.keys_id = keys_id;
  stage("authenticate", [&] {
    std::vector<wm::AuthDecision> decisions;
    decisions.reserve(embedded.dwm.size());
    for (const auto& key : embedded.dwm)
      decisions.push_back(
          wm::authenticate_user(embedded.model, key.image, registry));
    auth.fasr = wm::compute_fasr(decisions);
    double mse_sum = 0.0;
    for (std::size_t i = 0; i < embedded.dwm.size(); ++i)
      mse_sum += stego::mean_squared_error(key_images[i],
                                           embedded.dwm[i].image);
    auth.avg_key_mse = mse_sum / double(embedded.dwm.size());
    return 0;
  });
  report.auth = auth;

  // -- attacks -------------------------------------------------------------
  if (cfg.finetune) {
    vlog("fine-tuning attack");
    stage("attack-finetune", [&] {
      attacks::FinetuneConfig fcfg;
      fcfg.data_fraction = cfg.finetune->data_fraction;
      fcfg.epochs = cfg.finetune->epochs;
      fcfg.lr = cfg.finetune->lr;
      fcfg.momentum = cfg.finetune->momentum;
      fcfg.seed = cfg.seed;
      auto [tuned, held] =
          attacks::finetune_attack(embedded.model, garments.test, fcfg,
                                   train_log);
      FinetuneBlock blk;
      blk.epochs = fcfg.epochs;
      blk.parent_id = wm_id;
      blk.model_id = store.put_model(tuned, "finetuned", wm_id,
                                     "finetune_attack");
      blk.test_acc_after = nn::evaluate(tuned, held);
      wm::LocalSuspect suspect(tuned);
      blk.wm_acc_after =
          wm::verify_ownership(suspect, embedded.dwm, policy).wm_accuracy;
      report.finetune = blk;
      return 0;
    });
  }

  if (cfg.prune) {
    vlog("pruning attack sweep");
    stage("attack-prune", [&] {
      for (double z : cfg.prune->rates) {
        nn::ModelArtifact pruned =
            attacks::prune_attack(embedded.model, {z});
        PruneRow row;
        row.rate = z;
        bool exact = true;
        auto params = pruned.net.params();
        for (const auto& p : params) {
          if (!p.is_weight) continue;
          const auto zeros = std::size_t(
              std::count(p.value->begin(), p.value->end(), 0.0));
          if (zeros != std::size_t(z * double(p.value->size())))
            exact = false;
        }
        row.zero_exact = exact;
        char tag[32];
        std::snprintf(tag, sizeof tag, "pruned_z%02d", int(z * 100 + 0.5));
        row.model_id = store.put_model(pruned, tag, wm_id, "prune_attack");
        row.test_acc = nn::evaluate(pruned, garments.test);
        wm::LocalSuspect suspect(pruned);
        row.wm_acc =
            wm::verify_ownership(suspect, embedded.dwm, policy).wm_accuracy;
        report.prune.push_back(row);
      }
      return 0;
    });
  }

  if (cfg.query_mod) {
    vlog("query modification attack");
    stage("attack-query-mod", [&] {
      const auto& q = *cfg.query_mod;
      const int subset_n = std::max(
          1, int(double(garments.train.size()) * q.train_fraction));
      nn::Hyperparams ae_hp;
      ae_hp.optimizer = nn::Optimizer::Adam;
      ae_hp.lr = 1e-3;
      ae_hp.epochs = q.denoiser_epochs;
      ae_hp.batch_size = cfg.hp.batch_size;
      ae_hp.loss = nn::LossKind::ReconstructionMse;
      ae_hp.seed = cfg.seed;
      attacks::DenoiserArtifact denoiser = attacks::train_denoiser(
          head(garments.train, subset_n), ae_hp, q.train_fraction, train_log);
      const std::string den_id =
          store.put_model(denoiser.autoencoder, "denoiser", "",
                          "query-mod denoiser");

      auto attack_scheme = [&](const std::string& scheme,
                               const nn::ModelArtifact& model,
                               const std::string& model_id,
                               std::vector<keys::WatermarkKeySample>& ks,
                               const std::string& ks_id) {
        QueryModRow row;
        row.scheme = scheme;
        row.model_id = model_id;
        row.keys_id = ks_id;
        wm::LocalSuspect suspect(model);
        row.wm_before =
            wm::verify_ownership(suspect, ks, policy).wm_accuracy;
        auto modified = attacks::query_modification(denoiser, ks);
        row.modified_keys_id =
            store.put_keys(modified, nullptr, scheme + "_keys_modified",
                           ks_id, "query_modification output");
        row.wm_after =
            wm::verify_ownership(suspect, modified, policy).wm_accuracy;
        report.query_mod.push_back(row);
      };

      attack_scheme("ours", embedded.model, wm_id, embedded.dwm, keys_id);

      if (q.baselines) {
        // Draw baseline source images away from the target class so the
        // backdoor, not residual semantics, carries the watermark.
        std::vector<std::size_t> pool;
        for (std::size_t i = 0; i < garments.train.size(); ++i)
          if (garments.train.labels[i] != q.baseline_target)
            pool.push_back(i);
        std::mt19937_64 rng(cfg.seed ^ 0xba5e11e5eedULL);
        std::shuffle(pool.begin(), pool.end(), rng);
        if (int(pool.size()) < cfg.keys.count)
          raise(Errc::InsufficientSourceImages,
                "not enough off-target images for baselines");
        pool.resize(std::size_t(cfg.keys.count));
        std::vector<RasterImage> sources;
        sources.reserve(pool.size());
        for (std::size_t i : pool)
          sources.push_back(garments.train.images[i]);

        BaselineMseBlock mse;
        mse.ours_avg_mse = auth.avg_key_mse;

        auto build_baseline =
            [&](const std::string& scheme,
                std::vector<keys::WatermarkKeySample> bkeys) {
              double mse_sum = 0.0;
              for (std::size_t i = 0; i < bkeys.size(); ++i)
                mse_sum +=
                    stego::mean_squared_error(sources[i], bkeys[i].image);
              const double avg_mse = mse_sum / double(bkeys.size());

              data::LabeledDataset bd = head(garments.train,
                                             q.baseline_train_limit);
              for (const auto& k : bkeys) {
                bd.images.push_back(k.image);
                bd.labels.push_back(k.label);
              }
              nn::ArchSpec barch = wm_arch;
              barch.num_classes = num_classes;  // baselines stay C-class
              nn::Hyperparams bhp = cfg.hp;
              bhp.epochs = q.baseline_epochs;
              vlog("training " + scheme + " baseline model");
              nn::ModelArtifact bmodel =
                  nn::train(nn::build_model(barch, cfg.hp.seed), bd, bhp,
                            train_log);
              const std::string bid = store.put_model(
                  bmodel, scheme + "_baseline", "", scheme + " backdoor");
              const std::string bkid = store.put_keys(
                  bkeys, nullptr, scheme + "_keys", bid, scheme + " keys");
              attack_scheme(scheme, bmodel, bid, bkeys, bkid);
              return avg_mse;
            };

        attacks::LogoConfig lcfg;
        lcfg.target = q.baseline_target;
        lcfg.opacity = q.logo_opacity;
        mse.logo_avg_mse =
            build_baseline("logo", attacks::gen_logo_keys(sources, lcfg));

        attacks::NoiseConfig ncfg;
        ncfg.target = q.baseline_target;
        ncfg.noise_scale = q.noise_scale;
        ncfg.seed = cfg.seed;
        mse.noise_avg_mse =
            build_baseline("noise", attacks::gen_noise_keys(sources, ncfg));

        report.baseline_mse = mse;
      }
      return 0;
    });
  }

  // -- emit ----------------------------------------------------------------
  if (!store.dir.empty()) {
    emit_report(report, ReportFormat::Structured,
                (fs::path(store.dir) / "report.json").string());
    emit_report(report, ReportFormat::TextTable,
                (fs::path(store.dir) / "report.txt").string());
    json manifest;
    manifest["run_name"] = cfg.run_name;
    manifest["config_hash"] = report.config_hash;
    manifest["created"] = report.created;
    manifest["artifacts"] = store.rows;
    std::ofstream mf(fs::path(store.dir) / "manifest.json");
    mf << manifest.dump(2) << '\n';
  }
  vlog("done");
  return report;
}

}  // namespace classmark::bench
