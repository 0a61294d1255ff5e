#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <nlohmann/json.hpp>

#include "classmark/attacks.hpp"
#include "classmark/bench.hpp"
#include "classmark/checkpoint.hpp"
#include "classmark/dataset.hpp"
#include "classmark/errors.hpp"
#include "classmark/keyforge.hpp"
#include "classmark/png_io.hpp"
#include "classmark/protocol.hpp"
#include "classmark/stego.hpp"

namespace fs = std::filesystem;
using namespace classmark;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitStage = 3;

struct ConfigOverrides {
  std::string path;
  std::optional<std::uint64_t> seed;
  std::string output_dir;
  bool verbose = false;
};

bench::ExperimentConfig load_with_overrides(const ConfigOverrides& o) {
  bench::ExperimentConfig cfg = bench::load_config(o.path);
  if (o.seed) {
    cfg.seed = *o.seed;
    cfg.hp.seed = *o.seed;
  }
  if (!o.output_dir.empty()) cfg.output_dir = o.output_dir;
  if (o.verbose) cfg.verbose = true;
  return cfg;
}

int cmd_synth_data(const std::string& out_dir, const std::string& which) {
  if (which == "garments-synth" || which == "all") {
    data::write_dataset_archive((fs::path(out_dir) / "garments-synth").string(),
                                data::synth_garments({}));
    std::printf("wrote %s/garments-synth\n", out_dir.c_str());
  }
  if (which == "digits-synth" || which == "all") {
    data::write_dataset_archive((fs::path(out_dir) / "digits-synth").string(),
                                data::synth_digits({}));
    std::printf("wrote %s/digits-synth\n", out_dir.c_str());
  }
  return 0;
}

int cmd_forge_keys(const ConfigOverrides& o) {
  bench::ExperimentConfig cfg = load_with_overrides(o);
  if (cfg.output_dir.empty())
    raise(Errc::ConfigInvalid, "forge-keys needs an output directory");
  data::DatasetBundle digits =
      bench::resolve_dataset(cfg.data.key_dataset, cfg.data.data_root);
  auto images = keys::select_key_images(digits.train, cfg.keys.class_filter,
                                        cfg.keys.count, cfg.seed);
  auto registry =
      keys::mint_fingerprints(cfg.keys.count, cfg.keys.identity_template);

  // The forged labels use the additional class of the configured task.
  data::DatasetBundle garments =
      bench::resolve_dataset(cfg.data.train_dataset, cfg.data.data_root);
  const int additional = int(garments.train.class_names.size());
  auto key_set = keys::forge_key_set(images, registry, additional);

  fs::create_directories(cfg.output_dir);
  keys::save_key_images(key_set, registry,
                        (fs::path(cfg.output_dir) / "keys").string());
  keys::save_registry(registry,
                      (fs::path(cfg.output_dir) / "registry.json").string());
  std::printf("forged %zu keys (additional class %d) under %s\n",
              key_set.size(), additional, cfg.output_dir.c_str());
  return 0;
}

int cmd_run(const ConfigOverrides& o, const std::string& report_path) {
  bench::ExperimentConfig cfg = load_with_overrides(o);
  bench::RunReport report = bench::run_pipeline(cfg);
  if (!report_path.empty())
    bench::emit_report(report, bench::ReportFormat::TextTable, report_path);
  bench::emit_report(report, bench::ReportFormat::TextTable, "/dev/stdout");
  return 0;
}

std::unique_ptr<wm::Suspect> make_suspect(
    const std::string& checkpoint, const std::string& host, int port,
    std::optional<nn::ModelArtifact>& holder) {
  if (!host.empty()) return std::make_unique<wm::HttpSuspect>(host, port);
  holder = nn::load_checkpoint(checkpoint);
  return std::make_unique<wm::LocalSuspect>(*holder);
}

int cmd_verify(const std::string& checkpoint, const std::string& host,
               int port, const std::string& keys_dir, double threshold) {
  auto key_set = keys::load_key_set(keys_dir);
  std::optional<nn::ModelArtifact> holder;
  auto suspect = make_suspect(checkpoint, host, port, holder);
  auto report =
      wm::verify_ownership(*suspect, key_set, wm::VerificationPolicy{threshold});
  std::printf("wm accuracy %.4f over %zu keys, threshold %.2f -> %s\n",
              report.wm_accuracy, key_set.size(), threshold,
              report.pirated ? "pirated" : "not-pirated");
  return report.pirated ? 0 : 1;
}

int cmd_authenticate(const std::string& checkpoint,
                     const std::string& registry_path,
                     const std::string& image_path,
                     const std::string& keys_dir) {
  nn::ModelArtifact model = nn::load_checkpoint(checkpoint);
  keys::FingerprintRegistry registry = keys::load_registry(registry_path);

  if (!image_path.empty()) {
    RasterImage img = read_png(image_path);
    wm::AuthDecision d = wm::authenticate_user(model, img, registry);
    std::printf("identity: %s\nregistered: %s\nadditional class: %s\n"
                "granted: %s\n",
                d.extracted_identity ? d.extracted_identity->c_str() : "-",
                d.identity_registered ? "yes" : "no",
                d.classified_as_additional ? "yes" : "no",
                d.granted ? "yes" : "no");
    return d.granted ? 0 : 1;
  }

  auto key_set = keys::load_key_set(keys_dir);
  std::vector<wm::AuthDecision> decisions;
  for (const auto& key : key_set)
    decisions.push_back(wm::authenticate_user(model, key.image, registry));
  std::printf("FASR %.4f over %zu users\n", wm::compute_fasr(decisions),
              decisions.size());
  return 0;
}

int cmd_attack_prune(const std::string& checkpoint, double rate,
                     const std::string& out) {
  nn::ModelArtifact model = nn::load_checkpoint(checkpoint);
  nn::ModelArtifact pruned = attacks::prune_attack(model, {rate});
  nn::save_checkpoint(pruned, out);
  std::printf("pruned z=%.2f -> %s\n", rate, out.c_str());
  return 0;
}

int cmd_attack_finetune(const std::string& checkpoint,
                        const ConfigOverrides& o, const std::string& out) {
  bench::ExperimentConfig cfg = load_with_overrides(o);
  nn::ModelArtifact model = nn::load_checkpoint(checkpoint);
  data::DatasetBundle bundle =
      bench::resolve_dataset(cfg.data.train_dataset, cfg.data.data_root);
  attacks::FinetuneConfig fcfg;
  if (cfg.finetune) {
    fcfg.data_fraction = cfg.finetune->data_fraction;
    fcfg.epochs = cfg.finetune->epochs;
    fcfg.lr = cfg.finetune->lr;
    fcfg.momentum = cfg.finetune->momentum;
  }
  fcfg.seed = cfg.seed;
  auto [tuned, held] = attacks::finetune_attack(model, bundle.test, fcfg);
  nn::save_checkpoint(tuned, out);
  std::printf("fine-tuned %d epochs; held-out acc %.4f -> %s\n", fcfg.epochs,
              nn::evaluate(tuned, held), out.c_str());
  return 0;
}

int cmd_attack_query_mod(const std::string& keys_dir, const ConfigOverrides& o,
                         const std::string& out_dir) {
  bench::ExperimentConfig cfg = load_with_overrides(o);
  data::DatasetBundle bundle =
      bench::resolve_dataset(cfg.data.train_dataset, cfg.data.data_root);
  const auto q = cfg.query_mod.value_or(bench::QueryModAttackConfig{});

  const int subset_n =
      std::max(1, int(double(bundle.train.size()) * q.train_fraction));
  std::vector<std::size_t> idx(static_cast<std::size_t>(subset_n));
  std::iota(idx.begin(), idx.end(), 0);

  nn::Hyperparams hp;
  hp.loss = nn::LossKind::ReconstructionMse;
  hp.epochs = q.denoiser_epochs;
  hp.seed = cfg.seed;
  auto denoiser = attacks::train_denoiser(bundle.train.subset(idx), hp,
                                          q.train_fraction);

  auto key_set = keys::load_key_set(keys_dir);
  auto modified = attacks::query_modification(denoiser, key_set);
  keys::FingerprintRegistry throwaway;
  for (const auto& k : modified)
    throwaway.entries.push_back({k.owner, "", "", ""});
  keys::save_key_images(modified, throwaway, out_dir);
  std::printf("wrote %zu modified keys -> %s\n", modified.size(),
              out_dir.c_str());
  return 0;
}

int cmd_report(const std::string& run_dir, const std::string& format) {
  bench::RunReport report =
      bench::parse_report((fs::path(run_dir) / "report.json").string());
  bench::emit_report(report,
                     format == "json" ? bench::ReportFormat::Structured
                                      : bench::ReportFormat::TextTable,
                     "/dev/stdout");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"model ownership watermarking toolkit"};
  app.require_subcommand(1);

  ConfigOverrides o;
  std::string seed_str;

  // with_out_override is off for subcommands that use --out for their own
  // artifact path.
  auto add_config_opts = [&](CLI::App* sub, bool with_out_override = true) {
    sub->add_option("--config", o.path, "experiment config JSON")->required();
    sub->add_option("--seed", seed_str, "seed override");
    if (with_out_override)
      sub->add_option("--out", o.output_dir, "output directory override");
    sub->add_flag("--verbose", o.verbose, "log stage progress to stderr");
  };

  // synth-data
  std::string synth_out = ".", synth_which = "all";
  auto* synth = app.add_subcommand("synth-data",
                                   "write the built-in datasets as archives");
  synth->add_option("--out", synth_out, "destination root");
  synth->add_option("--which", synth_which, "garments-synth|digits-synth|all");

  // run
  std::string run_report_path;
  auto* run = app.add_subcommand("run", "full pipeline from a config");
  add_config_opts(run);
  run->add_option("--report", run_report_path, "also write the text report here");

  // forge-keys
  auto* forge = app.add_subcommand("forge-keys",
                                   "select, fingerprint, and save key images");
  add_config_opts(forge);

  // embed
  auto* embed = app.add_subcommand("embed",
                                   "train a watermarked model from a config");
  add_config_opts(embed);

  // verify
  std::string v_ckpt, v_host, v_keys;
  int v_port = 8080;
  double v_threshold = 0.9;
  auto* verify = app.add_subcommand("verify", "ownership check on a suspect");
  verify->add_option("--checkpoint", v_ckpt, "local suspect checkpoint");
  verify->add_option("--host", v_host, "remote suspect host");
  verify->add_option("--port", v_port, "remote suspect port");
  verify->add_option("--keys", v_keys, "key set directory")->required();
  verify->add_option("--threshold", v_threshold, "decision threshold T");

  // authenticate
  std::string a_ckpt, a_registry, a_image, a_keys;
  auto* auth = app.add_subcommand("authenticate",
                                  "two-factor fingerprint authentication");
  auth->add_option("--checkpoint", a_ckpt, "watermarked model")->required();
  auth->add_option("--registry", a_registry, "registry JSON")->required();
  auth->add_option("--image", a_image, "single submitted image (PNG)");
  auth->add_option("--keys", a_keys, "key set directory (batch FASR mode)");

  // attack
  auto* attack = app.add_subcommand("attack", "run one attack");
  attack->require_subcommand(1);
  std::string p_ckpt, p_out;
  double p_rate = 0.3;
  auto* prune = attack->add_subcommand("prune", "magnitude pruning");
  prune->add_option("--checkpoint", p_ckpt)->required();
  prune->add_option("--rate", p_rate, "fraction z in [0,1]");
  prune->add_option("--out", p_out)->required();

  std::string f_ckpt, f_out;
  auto* finetune = attack->add_subcommand("finetune", "fine-tune on test data");
  finetune->add_option("--checkpoint", f_ckpt)->required();
  finetune->add_option("--out", f_out)->required();
  add_config_opts(finetune, false);

  std::string qm_keys, qm_out;
  auto* query_mod = attack->add_subcommand(
      "query-mod", "denoise key images through an autoencoder");
  query_mod->add_option("--keys", qm_keys)->required();
  query_mod->add_option("--out", qm_out)->required();
  add_config_opts(query_mod, false);

  // report
  std::string r_dir, r_format = "text";
  auto* rep = app.add_subcommand("report", "re-render a run's report");
  rep->add_option("--run", r_dir, "run directory")->required();
  rep->add_option("--format", r_format, "text|json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  if (!seed_str.empty()) {
    try {
      std::size_t used = 0;
      o.seed = std::stoull(seed_str, &used);
      if (used != seed_str.size()) throw std::invalid_argument(seed_str);
    } catch (const std::exception&) {
      std::fprintf(stderr, "error: --seed wants an unsigned integer, got %s\n",
                   seed_str.c_str());
      return kExitConfig;
    }
  }

  try {
    if (synth->parsed()) return cmd_synth_data(synth_out, synth_which);
    if (run->parsed()) return cmd_run(o, run_report_path);
    if (forge->parsed()) return cmd_forge_keys(o);
    if (embed->parsed()) {
      bench::ExperimentConfig cfg = load_with_overrides(o);
      cfg.clean_twin = false;
      cfg.finetune.reset();
      cfg.prune.reset();
      cfg.query_mod.reset();
      bench::RunReport report = bench::run_pipeline(cfg);
      std::printf("wm accuracy %.4f, test acc %.4f\n",
                  report.effectiveness->wm_accuracy,
                  report.effectiveness->wm_test_acc);
      return 0;
    }
    if (verify->parsed()) {
      if (v_ckpt.empty() && v_host.empty())
        raise(Errc::ConfigInvalid, "verify needs --checkpoint or --host");
      return cmd_verify(v_ckpt, v_host, v_port, v_keys, v_threshold);
    }
    if (auth->parsed()) {
      if (a_image.empty() && a_keys.empty())
        raise(Errc::ConfigInvalid, "authenticate needs --image or --keys");
      return cmd_authenticate(a_ckpt, a_registry, a_image, a_keys);
    }
    if (attack->parsed()) {
      if (prune->parsed()) return cmd_attack_prune(p_ckpt, p_rate, p_out);
      if (finetune->parsed()) return cmd_attack_finetune(f_ckpt, o, f_out);
      if (query_mod->parsed()) return cmd_attack_query_mod(qm_keys, o, qm_out);
    }
    if (rep->parsed()) return cmd_report(r_dir, r_format);
  } catch (const Error& e) {
    std::fprintf(stderr, "error [%s]: %s\n", errc_name(e.code()), e.what());
    return e.code() == Errc::ConfigInvalid ? kExitConfig : kExitStage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitStage;
  }
  return 0;
}
