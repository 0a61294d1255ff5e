#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "classmark/dataset.hpp"
#include "classmark/net.hpp"
#include "classmark/train.hpp"

namespace classmark::bench {

struct DataConfig {
  std::string train_dataset = "garments-synth";  // synth id or directory
  std::string key_dataset = "digits-synth";
  std::string data_root;   // falls back to $CLASSMARK_DATA_ROOT, then cwd
  int train_limit = 0;     // 0 = use everything
  int test_limit = 0;
};

struct KeysConfig {
  std::string class_filter = "0";
  int count = 100;
  std::string identity_template = "user fp{i}";
};

struct FinetuneAttackConfig {
  double data_fraction = 0.5;
  int epochs = 30;
  double lr = 0.01;
  double momentum = 0.9;
};

struct PruneAttackConfig {
  std::vector<double> rates;
};

struct QueryModAttackConfig {
  double train_fraction = 0.1;  // of the training set, for the denoiser
  int denoiser_epochs = 5;
  bool baselines = true;        // also run logo/noise comparison schemes
  double logo_opacity = 0.5;
  // Big enough to stand out against the built-in garments' heavy texture;
  // photographic data can drop this back toward the teens.
  double noise_scale = 45.0;
  // Denoised images skew toward the smoothest class, so the comparison
  // target stays away from it; otherwise the autoencoder's own blur
  // inflates the baselines' post-attack accuracy.
  int baseline_target = 4;
  int baseline_train_limit = 10000;  // smaller budget for baseline models
  int baseline_epochs = 20;
};

struct ExperimentConfig {
  std::string run_name = "run";
  std::uint64_t seed = 1;
  std::string output_dir;
  bool verbose = false;

  DataConfig data;
  KeysConfig keys;
  std::string model_family = "lenet5-like";
  nn::Hyperparams hp;
  double threshold = 0.9;
  bool clean_twin = true;

  std::optional<FinetuneAttackConfig> finetune;
  std::optional<PruneAttackConfig> prune;
  std::optional<QueryModAttackConfig> query_mod;
};

ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::string& path);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

/// Hash over the run-identifying fields (output dir and verbosity excluded).
std::string config_hash(const ExperimentConfig& cfg);

// --- report ---------------------------------------------------------------

struct EffectivenessBlock {
  double clean_test_acc = 0.0;
  double wm_test_acc = 0.0;
  double delta_pp = 0.0;  // wm minus clean, percentage points
  double wm_accuracy = 0.0;
  bool pirated = false;
  std::string clean_model_id, wm_model_id, keys_id;
};

struct AuthBlock {
  int users = 0;
  double fasr = 0.0;
  double avg_key_mse = 0.0;  // embedded vs. original, raw 8-bit units
  std::string wm_model_id, keys_id;
};

struct FinetuneBlock {
  int epochs = 0;
  double test_acc_after = 0.0;  // on the held-out half
  double wm_acc_after = 0.0;
  std::string model_id, parent_id;
};

struct PruneRow {
  double rate = 0.0;
  double test_acc = 0.0;
  double wm_acc = 0.0;
  bool zero_exact = false;  // per-layer floor(rate*n) zero counts verified
  std::string model_id;
};

struct QueryModRow {
  std::string scheme;  // "ours" | "logo" | "noise"
  double wm_before = 0.0;
  double wm_after = 0.0;
  std::string model_id, keys_id, modified_keys_id;
};

struct BaselineMseBlock {
  double ours_avg_mse = 0.0;
  double logo_avg_mse = 0.0;
  double noise_avg_mse = 0.0;
};

struct RunReport {
  std::string run_name;
  std::string config_hash;
  std::string created;  // wall-clock stamp; excluded from determinism diffs

  std::optional<EffectivenessBlock> effectiveness;
  std::optional<AuthBlock> auth;
  std::optional<FinetuneBlock> finetune;
  std::vector<PruneRow> prune;
  std::vector<QueryModRow> query_mod;
  std::optional<BaselineMseBlock> baseline_mse;
};

nlohmann::json report_to_json(const RunReport& report);
RunReport report_from_json(const nlohmann::json& doc);

enum class ReportFormat { TextTable, Structured };

/// Writes the report to `path`; text form renders one table block per
/// metric family, structured form is JSON that round-trips losslessly.
void emit_report(const RunReport& report, ReportFormat format,
                 const std::string& path);
RunReport parse_report(const std::string& path);

// --- pipeline -------------------------------------------------------------

/// Resolves a dataset reference: a known synthetic id is generated on the
/// fly (or read from data_root when archived there); anything else is a
/// directory in the archive layout.
data::DatasetBundle resolve_dataset(const std::string& ref,
                                    const std::string& data_root);

/// generate -> embed -> verify -> authenticate -> attacks -> report.
/// Persists artifacts under cfg.output_dir when set; stage failures carry
/// the stage name in the error message.
RunReport run_pipeline(const ExperimentConfig& cfg);

}  // namespace classmark::bench
