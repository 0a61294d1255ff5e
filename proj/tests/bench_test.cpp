#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sys/wait.h>

#include "classmark/bench.hpp"
#include "classmark/checkpoint.hpp"
#include "doctest.h"
#include "nlohmann/json.hpp"
#include "test_support.hpp"

using classmark::Errc;
using namespace classmark::bench;
using nlohmann::json;
using testutil::TempDir;
using testutil::thrown_code;

namespace data = classmark::data;
namespace fs = std::filesystem;
namespace nn = classmark::nn;

static bool is_hex_id(const std::string& s) {
  if (s.size() != 16) return false;
  for (char c : s)
    if (!std::isxdigit(static_cast<unsigned char>(c))) return false;
  return true;
}

TEST_CASE("config defaults and parsing") {
  ExperimentConfig cfg = parse_config(json::object());
  CHECK(cfg.run_name == "run");
  CHECK(cfg.seed == 1);
  CHECK(cfg.data.train_dataset == "garments-synth");
  CHECK(cfg.data.key_dataset == "digits-synth");
  CHECK(cfg.keys.count == 100);
  CHECK(cfg.keys.class_filter == "0");
  CHECK(cfg.keys.identity_template == "user fp{i}");
  CHECK(cfg.model_family == "lenet5-like");
  CHECK(cfg.threshold == 0.9);
  CHECK(cfg.clean_twin);
  CHECK(!cfg.finetune);
  CHECK(!cfg.prune);
  CHECK(!cfg.query_mod);

  const json doc = {
      {"run_name", "exp1"},
      {"seed", 9},
      {"data", {{"train_dataset", "garments-synth"}, {"train_limit", 500}}},
      {"keys", {{"count", 12}, {"identity_template", "client {i}"}}},
      {"train",
       {{"optimizer", "sgd"},
        {"lr", 0.05},
        {"weight_decay", 0.01},
        {"epochs", 4},
        {"batch_size", 64}}},
      {"threshold", 0.8},
      {"attacks",
       json::array({{{"type", "finetune"}, {"epochs", 2}},
                    {{"type", "prune"}, {"rates", {0.1, 0.5}}},
                    {{"type", "query_mod"}, {"baselines", false}}})},
  };
  ExperimentConfig full = parse_config(doc);
  CHECK(full.run_name == "exp1");
  CHECK(full.seed == 9);
  CHECK(full.hp.seed == 9);  // training inherits the run seed
  CHECK(full.hp.optimizer == nn::Optimizer::Sgd);
  CHECK(full.hp.lr == 0.05);
  CHECK(full.hp.weight_decay == 0.01);
  CHECK(full.hp.epochs == 4);
  CHECK(full.data.train_limit == 500);
  CHECK(full.keys.count == 12);
  CHECK(full.keys.identity_template == "client {i}");
  CHECK(full.threshold == 0.8);
  REQUIRE(full.finetune);
  CHECK(full.finetune->epochs == 2);
  REQUIRE(full.prune);
  CHECK(full.prune->rates == std::vector<double>{0.1, 0.5});
  REQUIRE(full.query_mod);
  CHECK(!full.query_mod->baselines);

  // The JSON projection reparses to the same configuration.
  ExperimentConfig back = parse_config(config_to_json(full));
  CHECK(config_to_json(back) == config_to_json(full));
  CHECK(config_hash(back) == config_hash(full));
}

TEST_CASE("config validation") {
  CHECK(thrown_code([] { parse_config(json::array()); }) ==
        Errc::ConfigInvalid);
  CHECK(thrown_code([] {
          parse_config({{"train", {{"optimizer", "lbfgs"}}}});
        }) == Errc::ConfigInvalid);
  CHECK(thrown_code([] { parse_config({{"threshold", 1.0}}); }) ==
        Errc::ConfigInvalid);
  CHECK(thrown_code([] { parse_config({{"threshold", 0.0}}); }) ==
        Errc::ConfigInvalid);
  CHECK(thrown_code([] { parse_config({{"keys", {{"count", 0}}}}); }) ==
        Errc::ConfigInvalid);
  CHECK(thrown_code([] {
          parse_config({{"train", {{"epochs", 0}}}});
        }) == Errc::ConfigInvalid);
  CHECK(thrown_code([] {
          parse_config({{"train", {{"weight_decay", -0.1}}}});
        }) == Errc::ConfigInvalid);
  CHECK(thrown_code([] { parse_config({{"seed", "soon"}}); }) ==
        Errc::ConfigInvalid);
  CHECK(thrown_code([] {
          parse_config({{"attacks", json::array({{{"type", "prune"}}})}});
        }) == Errc::ConfigInvalid);
  CHECK(thrown_code([] {
          parse_config({{"attacks", json::array({{{"type", "distill"}}})}});
        }) == Errc::ConfigInvalid);
}

TEST_CASE("config files load with IO and parse errors distinguished") {
  TempDir dir;
  CHECK(thrown_code([&] { load_config(dir.file("none.json")); }) ==
        Errc::IoError);
  {
    std::ofstream out(dir.file("bad.json"));
    out << "{ not json";
  }
  CHECK(thrown_code([&] { load_config(dir.file("bad.json")); }) ==
        Errc::ConfigInvalid);
  {
    std::ofstream out(dir.file("ok.json"));
    out << R"({"run_name":"from-file","seed":3})";
  }
  CHECK(load_config(dir.file("ok.json")).run_name == "from-file");
}

TEST_CASE("config hash ignores presentation-only fields") {
  ExperimentConfig a = parse_config({{"seed", 5}});
  ExperimentConfig b = a;
  b.output_dir = "/somewhere/else";
  b.verbose = true;
  CHECK(config_hash(a) == config_hash(b));

  ExperimentConfig c = a;
  c.seed = 6;
  CHECK(config_hash(a) != config_hash(c));
  ExperimentConfig d = a;
  d.hp.epochs += 1;
  CHECK(config_hash(a) != config_hash(d));
  CHECK(is_hex_id(config_hash(a)));
}

static RunReport sample_report() {
  RunReport r;
  r.run_name = "sample";
  r.config_hash = "00deadbeef001234";
  r.created = "2024-05-01T00:00:00Z";
  EffectivenessBlock eff;
  eff.clean_test_acc = 0.9035;
  eff.wm_test_acc = 0.9012;
  eff.delta_pp = -0.23;
  eff.wm_accuracy = 1.0;
  eff.pirated = true;
  eff.clean_model_id = "1111111111111111";
  eff.wm_model_id = "2222222222222222";
  eff.keys_id = "3333333333333333";
  r.effectiveness = eff;
  AuthBlock auth;
  auth.users = 100;
  auth.fasr = 1.0;
  auth.avg_key_mse = 0.042;
  auth.wm_model_id = eff.wm_model_id;
  auth.keys_id = eff.keys_id;
  r.auth = auth;
  FinetuneBlock ft;
  ft.epochs = 30;
  ft.test_acc_after = 0.89;
  ft.wm_acc_after = 0.99;
  ft.model_id = "4444444444444444";
  ft.parent_id = eff.wm_model_id;
  r.finetune = ft;
  for (double z : {0.1, 0.6}) {
    PruneRow row;
    row.rate = z;
    row.test_acc = 0.88;
    row.wm_acc = 0.97;
    row.zero_exact = true;
    row.model_id = "5555555555555555";
    r.prune.push_back(row);
  }
  for (const char* scheme : {"ours", "logo", "noise"}) {
    QueryModRow row;
    row.scheme = scheme;
    row.wm_before = 1.0;
    row.wm_after = scheme == std::string("ours") ? 0.97 : 0.11;
    row.model_id = "6666666666666666";
    row.keys_id = "7777777777777777";
    row.modified_keys_id = "8888888888888888";
    r.query_mod.push_back(row);
  }
  BaselineMseBlock mse;
  mse.ours_avg_mse = 0.042;
  mse.logo_avg_mse = 718.17;
  mse.noise_avg_mse = 302.41;
  r.baseline_mse = mse;
  return r;
}

TEST_CASE("report JSON round-trip is lossless") {
  const RunReport r = sample_report();
  const json doc = report_to_json(r);
  const RunReport back = report_from_json(doc);
  CHECK(report_to_json(back) == doc);

  CHECK(back.run_name == "sample");
  REQUIRE(back.effectiveness);
  CHECK(back.effectiveness->clean_test_acc == 0.9035);
  CHECK(back.effectiveness->pirated);
  REQUIRE(back.auth);
  CHECK(back.auth->users == 100);
  REQUIRE(back.finetune);
  CHECK(back.finetune->parent_id == back.effectiveness->wm_model_id);
  REQUIRE(back.prune.size() == 2);
  CHECK(back.prune[1].rate == 0.6);
  CHECK(back.prune[1].zero_exact);
  REQUIRE(back.query_mod.size() == 3);
  CHECK(back.query_mod[2].scheme == "noise");
  REQUIRE(back.baseline_mse);
  CHECK(back.baseline_mse->logo_avg_mse == 718.17);
}

TEST_CASE("emitted files parse back and render sections") {
  TempDir dir;
  const RunReport r = sample_report();

  emit_report(r, ReportFormat::Structured, dir.file("report.json"));
  RunReport parsed = parse_report(dir.file("report.json"));
  CHECK(report_to_json(parsed) == report_to_json(r));

  emit_report(r, ReportFormat::TextTable, dir.file("report.txt"));
  std::ifstream in(dir.file("report.txt"));
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  for (const char* section :
       {"## effectiveness", "## fingerprint authentication",
        "## fine-tuning attack", "## pruning attack",
        "## query modification attack", "## key distortion"}) {
    INFO("missing section: " << section);
    CHECK(text.find(section) != std::string::npos);
  }
  CHECK(text.find("0.9035") != std::string::npos);

  // The text table is for humans; only JSON parses back.
  CHECK(thrown_code([&] { parse_report(dir.file("report.txt")); }) ==
        Errc::IncompleteReport);
}

TEST_CASE("a report without its core blocks cannot be emitted") {
  TempDir dir;
  RunReport r;
  r.run_name = "hollow";
  CHECK(thrown_code([&] {
          emit_report(r, ReportFormat::Structured, dir.file("r.json"));
        }) == Errc::IncompleteReport);
}

TEST_CASE("dataset references resolve through the archive root") {
  TempDir dir;
  data::GarmentSynthConfig small;
  small.train_count = 30;
  small.test_count = 10;
  data::write_dataset_archive(dir.file("garments-synth"),
                              data::synth_garments(small));

  // An archived copy under the data root wins over on-the-fly generation.
  data::DatasetBundle b = resolve_dataset("garments-synth", dir.str());
  CHECK(b.train.size() == 30);
  CHECK(b.test.size() == 10);

  // Plain directories resolve relative to the root as well.
  data::DatasetBundle c = resolve_dataset("garments-synth/", dir.str());
  CHECK(c.train.size() == 30);

  CHECK(thrown_code([&] { resolve_dataset("absent-dir", dir.str()); }) ==
        Errc::DatasetMissing);
}

// ---------------------------------------------------------------------------
// End-to-end pipeline on a desk-corner budget: tiny archived datasets, one
// epoch everywhere. Checks wiring, artifact provenance, and determinism, not
// model quality.
// ---------------------------------------------------------------------------

static ExperimentConfig smoke_config(const std::string& data_root,
                                     const std::string& output_dir) {
  const json doc = {
      {"run_name", "smoke"},
      {"seed", 2},
      {"data", {{"data_root", data_root}}},
      {"keys", {{"count", 10}}},
      {"train", {{"optimizer", "adam"}, {"epochs", 1}, {"batch_size", 32}}},
      {"attacks",
       json::array(
           {{{"type", "finetune"}, {"epochs", 1}},
            {{"type", "prune"}, {"rates", {0.1, 0.5}}},
            {{"type", "query_mod"},
             {"train_fraction", 0.2},
             {"denoiser_epochs", 1},
             {"baselines", true},
             {"baseline_train_limit", 200},
             {"baseline_epochs", 1}}})},
  };
  ExperimentConfig cfg = parse_config(doc);
  cfg.output_dir = output_dir;
  return cfg;
}

static void write_smoke_archives(const std::string& root) {
  data::GarmentSynthConfig g;
  g.train_count = 360;
  g.test_count = 120;
  data::write_dataset_archive(root + "/garments-synth", data::synth_garments(g));
  data::DigitSynthConfig d;
  d.train_count = 1200;
  d.test_count = 100;
  data::write_dataset_archive(root + "/digits-synth", data::synth_digits(d));
}

TEST_CASE("pipeline smoke run: blocks, artifacts, provenance, determinism") {
  TempDir dir;
  write_smoke_archives(dir.str());
  ExperimentConfig cfg = smoke_config(dir.str(), dir.file("out"));
  RunReport report = run_pipeline(cfg);

  // -- blocks --------------------------------------------------------------
  REQUIRE(report.effectiveness);
  REQUIRE(report.auth);
  REQUIRE(report.finetune);
  REQUIRE(report.prune.size() == 2);
  REQUIRE(report.query_mod.size() == 3);
  REQUIRE(report.baseline_mse);
  CHECK(report.run_name == "smoke");
  CHECK(report.config_hash == config_hash(cfg));

  const auto& eff = *report.effectiveness;
  CHECK(eff.clean_test_acc >= 0.0);
  CHECK(eff.clean_test_acc <= 1.0);
  CHECK(eff.wm_test_acc >= 0.0);
  CHECK(eff.wm_test_acc <= 1.0);
  CHECK(eff.delta_pp ==
        doctest::Approx((eff.wm_test_acc - eff.clean_test_acc) * 100.0));
  CHECK(is_hex_id(eff.wm_model_id));
  CHECK(is_hex_id(eff.clean_model_id));
  CHECK(eff.wm_model_id != eff.clean_model_id);

  CHECK(report.auth->users == 10);
  CHECK(report.auth->avg_key_mse > 0.0);
  CHECK(report.auth->avg_key_mse < 1.0);  // fingerprints stay sub-pixel

  // -- provenance ----------------------------------------------------------
  CHECK(report.auth->wm_model_id == eff.wm_model_id);
  CHECK(report.auth->keys_id == eff.keys_id);
  CHECK(report.finetune->parent_id == eff.wm_model_id);
  CHECK(report.finetune->model_id != eff.wm_model_id);
  CHECK(report.query_mod[0].scheme == "ours");
  CHECK(report.query_mod[0].model_id == eff.wm_model_id);
  CHECK(report.query_mod[0].keys_id == eff.keys_id);
  CHECK(report.query_mod[1].scheme == "logo");
  CHECK(report.query_mod[2].scheme == "noise");
  for (const auto& row : report.query_mod) {
    CHECK(is_hex_id(row.model_id));
    CHECK(is_hex_id(row.keys_id));
    CHECK(is_hex_id(row.modified_keys_id));
    CHECK(row.keys_id != row.modified_keys_id);
  }
  for (const auto& row : report.prune) {
    CHECK(row.zero_exact);  // exactness holds however weak the model is
    CHECK(is_hex_id(row.model_id));
  }
  CHECK(report.baseline_mse->ours_avg_mse ==
        doctest::Approx(report.auth->avg_key_mse));
  CHECK(report.baseline_mse->logo_avg_mse > report.baseline_mse->ours_avg_mse);
  CHECK(report.baseline_mse->noise_avg_mse > report.baseline_mse->ours_avg_mse);

  // -- persisted artifacts -------------------------------------------------
  const std::string out = dir.file("out");
  for (const char* name :
       {"config.json", "report.json", "report.txt", "manifest.json",
        "registry.json", "watermarked.ckpt", "clean.ckpt", "finetuned.ckpt",
        "denoiser.ckpt", "pruned_z10.ckpt", "pruned_z50.ckpt"}) {
    INFO("missing artifact: " << name);
    CHECK(fs::exists(fs::path(out) / name));
  }
  for (const char* keydir :
       {"keys", "ours_keys_modified", "logo_keys", "logo_keys_modified",
        "noise_keys", "noise_keys_modified"}) {
    INFO("missing key set: " << keydir);
    CHECK(fs::exists(fs::path(out) / keydir / "keyset.json"));
  }

  nn::ModelArtifact wm = nn::load_checkpoint(out + "/watermarked.ckpt");
  CHECK(wm.arch.num_classes == 11);  // ten garment classes + the key class
  nn::ModelArtifact clean = nn::load_checkpoint(out + "/clean.ckpt");
  CHECK(clean.arch.num_classes == 10);

  RunReport parsed = parse_report(out + "/report.json");
  CHECK(report_to_json(parsed) == report_to_json(report));

  json manifest;
  std::ifstream mf(out + "/manifest.json");
  mf >> manifest;
  CHECK(manifest["config_hash"] == report.config_hash);
  CHECK(manifest["artifacts"].is_array());
  CHECK(manifest["artifacts"].size() >= 10);
  for (const auto& row : manifest["artifacts"]) {
    CHECK(row.contains("id"));
    CHECK(row.contains("kind"));
    CHECK(row.contains("path"));
  }

  // -- determinism ---------------------------------------------------------
  ExperimentConfig again = smoke_config(dir.str(), dir.file("out2"));
  RunReport second = run_pipeline(again);
  json ja = report_to_json(report);
  json jb = report_to_json(second);
  ja.erase("created");
  jb.erase("created");
  CHECK(ja == jb);
}

TEST_CASE("pipeline without optional stages emits a minimal report") {
  TempDir dir;
  write_smoke_archives(dir.str());
  const json doc = {
      {"run_name", "minimal"},
      {"seed", 2},
      {"data", {{"data_root", dir.str()}}},
      {"keys", {{"count", 4}}},
      {"train", {{"epochs", 1}, {"batch_size", 32}}},
      {"clean_twin", false},
  };
  ExperimentConfig cfg = parse_config(doc);
  RunReport report = run_pipeline(cfg);  // no output_dir: in-memory run
  REQUIRE(report.effectiveness);
  REQUIRE(report.auth);
  CHECK(report.effectiveness->clean_model_id.empty());
  CHECK(report.effectiveness->clean_test_acc == 0.0);
  CHECK(!report.finetune);
  CHECK(report.prune.empty());
  CHECK(report.query_mod.empty());
  CHECK(!report.baseline_mse);
  CHECK(report.auth->users == 4);
}

TEST_CASE("pipeline failures carry their stage name") {
  TempDir dir;  // no archives: a bad explicit dataset path must fail in data
  const json doc = {
      {"run_name", "broken"},
      {"data",
       {{"train_dataset", dir.file("missing-dir")}, {"data_root", dir.str()}}},
  };
  try {
    run_pipeline(parse_config(doc));
    FAIL("expected a stage error");
  } catch (const classmark::Error& e) {
    CHECK(e.code() == Errc::DatasetMissing);
    CHECK(std::string(e.what()).find("[stage data]") != std::string::npos);
  }
}

// ---------------------------------------------------------------------------
// CLI process-level checks: exit codes and the report subcommand.
// ---------------------------------------------------------------------------

static int run_cli(const std::string& args) {
  const std::string cmd =
      std::string(CLASSMARK_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WEXITSTATUS(status);
}

TEST_CASE("cli exit codes") {
  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("") == 2);              // subcommand required
  CHECK(run_cli("frobnicate") == 2);    // unknown subcommand

  TempDir dir;
  {
    std::ofstream out(dir.file("bad.json"));
    out << "{ definitely not json";
  }
  CHECK(run_cli("run --config " + dir.file("bad.json")) == 2);
  CHECK(run_cli("run --config " + dir.file("absent.json")) == 3);
  {
    std::ofstream out(dir.file("badfield.json"));
    out << R"({"threshold": 2.0})";
  }
  CHECK(run_cli("run --config " + dir.file("badfield.json")) == 2);
}

TEST_CASE("cli verify and report run against pipeline outputs") {
  TempDir dir;
  write_smoke_archives(dir.str());
  ExperimentConfig cfg = smoke_config(dir.str(), dir.file("out"));
  cfg.finetune.reset();
  cfg.prune.reset();
  cfg.query_mod.reset();
  run_pipeline(cfg);
  const std::string out = dir.file("out");

  // A clean 10-class model can never hit the key class: exit 1, not guilty.
  CHECK(run_cli("verify --checkpoint " + out + "/clean.ckpt --keys " + out +
                "/keys") == 1);
  // Re-rendering the stored report succeeds in both formats.
  CHECK(run_cli("report --run " + out + " --format text") == 0);
  CHECK(run_cli("report --run " + out + " --format json") == 0);
  CHECK(run_cli("report --run " + dir.file("nowhere")) == 3);
}
