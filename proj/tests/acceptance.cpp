// Release gate: trains the desk-scale reference models once, then walks
// every acceptance criterion and prints one verdict line per criterion.
// Exits nonzero if any criterion fails. Budget: ~1 h on one CPU core.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "classmark/attacks.hpp"
#include "classmark/bench.hpp"
#include "classmark/checkpoint.hpp"
#include "classmark/dataset.hpp"
#include "classmark/keyforge.hpp"
#include "classmark/net.hpp"
#include "classmark/protocol.hpp"
#include "classmark/stego.hpp"
#include "classmark/train.hpp"

namespace fs = std::filesystem;
using namespace classmark;

namespace {

int failures = 0;

void verdict(bool ok, int criterion, const std::string& detail) {
  std::printf("[%s] criterion %2d: %s\n", ok ? "PASS" : "FAIL", criterion,
              detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

// Answers the additional class for the first `hits` keys, class 0 after.
class ScriptedSuspect final : public wm::Suspect {
 public:
  ScriptedSuspect(int hits, int additional)
      : hits_(hits), additional_(additional) {}
  std::vector<int> classify(const std::vector<RasterImage>& images) override {
    std::vector<int> out;
    for (std::size_t i = 0; i < images.size(); ++i) {
      out.push_back(served_ < hits_ ? additional_ : 0);
      ++served_;
    }
    return out;
  }

 private:
  int hits_, additional_;
  int served_ = 0;
};

RasterImage random_image(std::mt19937_64& rng, int h, int w, int c) {
  RasterImage img;
  img.height = h;
  img.width = w;
  img.channels = c;
  img.pixels.resize(std::size_t(h) * w * c);
  std::uniform_int_distribution<int> px(0, 255);
  for (auto& p : img.pixels) p = std::uint8_t(px(rng));
  return img;
}

std::string random_identity(std::mt19937_64& rng, int max_len) {
  std::uniform_int_distribution<int> len(1, max_len);
  std::uniform_int_distribution<int> ch(0x20, 0x7e);
  std::string s(std::size_t(len(rng)), ' ');
  for (auto& c : s) c = char(ch(rng));
  return s;
}

}  // namespace

int main() {
  std::setvbuf(stdout, nullptr, _IOLBF, 0);

  // One full pipeline run feeds criteria 1-5; its artifacts feed 6 and 9.
  // Full training budget: 50 epochs over the whole training set, so the
  // test-accuracy delta bound is the tight +/-1 pp.
  bench::ExperimentConfig cfg;
  cfg.run_name = "acceptance";
  cfg.seed = 2024;
  cfg.output_dir = "acceptance_artifacts";
  cfg.verbose = true;
  cfg.hp.optimizer = nn::Optimizer::Adam;
  cfg.hp.lr = 1e-3;
  // Decay keeps unused weights in a low-magnitude band so the magnitude
  // pruning sweep removes dead weights first; without it Adam's update noise
  // leaves dead weights as large as live ones and the z=0.6 row collapses.
  cfg.hp.weight_decay = 0.3;
  cfg.hp.epochs = 50;
  cfg.hp.batch_size = 128;
  cfg.hp.seed = cfg.seed;
  cfg.finetune = bench::FinetuneAttackConfig{};
  cfg.prune = bench::PruneAttackConfig{{0.1, 0.2, 0.3, 0.4, 0.5, 0.6}};
  cfg.query_mod = bench::QueryModAttackConfig{};

  std::error_code scrub;
  fs::remove_all(cfg.output_dir, scrub);
  std::fprintf(stderr, "training desk-scale models (seed %llu)...\n",
               (unsigned long long)cfg.seed);
  bench::RunReport report = bench::run_pipeline(cfg);

  // 1. Effectiveness: the watermark holds and barely costs test accuracy.
  {
    const auto& e = *report.effectiveness;
    const bool ok = e.wm_accuracy >= 0.98 && std::fabs(e.delta_pp) <= 1.0;
    verdict(ok, 1,
            fmt("effectiveness: wm acc %.4f (>= 0.98), test %.4f vs clean "
                "%.4f, delta %+.2f pp (|.| <= 1)",
                e.wm_accuracy, e.wm_test_acc, e.clean_test_acc, e.delta_pp));
  }

  // 2. Fingerprint authentication over all registered users.
  {
    const auto& a = *report.auth;
    const bool ok = a.users == 100 && a.fasr == 1.0 && a.avg_key_mse <= 0.06;
    verdict(ok, 2,
            fmt("authentication: FASR %.4f over %d users (= 1.00), avg key "
                "MSE %.4f (<= 0.06)",
                a.fasr, a.users, a.avg_key_mse));
  }

  // 3. Fine-tuning attack leaves the watermark readable.
  {
    const auto& f = *report.finetune;
    const bool ok = f.wm_acc_after >= 0.98;
    verdict(ok, 3,
            fmt("fine-tuning: wm acc %.4f after %d epochs (>= 0.98), "
                "held-out acc %.4f",
                f.wm_acc_after, f.epochs, f.test_acc_after));
  }

  // 4. Pruning sweep keeps the watermark; zero counts are exact per layer.
  {
    bool ok = report.prune.size() == 6;
    double worst = 1.0;
    for (const auto& row : report.prune) {
      worst = std::min(worst, row.wm_acc);
      if (row.wm_acc < 0.90 || !row.zero_exact) ok = false;
    }
    verdict(ok, 4,
            fmt("pruning z=0.1..0.6: worst wm acc %.4f (>= 0.90), zero "
                "counts exact in all %zu sweeps",
                worst, report.prune.size()));
  }

  // 5. Query modification: our keys survive the denoiser, baselines don't.
  {
    const bench::QueryModRow *ours = nullptr, *logo = nullptr, *noise = nullptr;
    for (const auto& row : report.query_mod) {
      if (row.scheme == "ours") ours = &row;
      if (row.scheme == "logo") logo = &row;
      if (row.scheme == "noise") noise = &row;
    }
    const bool ok = ours && logo && noise && ours->wm_after >= 0.95 &&
                    logo->wm_after <= 0.30 && noise->wm_after <= 0.30;
    verdict(ok, 5,
            fmt("query modification: ours %.2f -> %.2f (>= 0.95), logo %.2f "
                "-> %.2f (<= 0.30), noise %.2f -> %.2f (<= 0.30)",
                ours ? ours->wm_before : -1.0, ours ? ours->wm_after : -1.0,
                logo ? logo->wm_before : -1.0, logo ? logo->wm_after : -1.0,
                noise ? noise->wm_before : -1.0,
                noise ? noise->wm_after : -1.0));
  }

  const std::string out = cfg.output_dir;
  nn::ModelArtifact clean =
      nn::load_checkpoint((fs::path(out) / "clean.ckpt").string());
  nn::ModelArtifact wm_model =
      nn::load_checkpoint((fs::path(out) / "watermarked.ckpt").string());
  data::DatasetBundle digits = bench::resolve_dataset("digits-synth", "");

  // 6. Integrity: the clean twin never passes verification, over 5 key-set
  //    seeds.
  {
    bool ok = true;
    double worst = 0.0;
    for (std::uint64_t seed : {11ull, 22ull, 33ull, 44ull, 55ull}) {
      auto images = keys::select_key_images(digits.train, "0", 100, seed);
      auto registry = keys::mint_fingerprints(100, "user fp{i}");
      auto key_set = keys::forge_key_set(images, registry, 10);
      wm::LocalSuspect suspect(clean);
      auto vr = wm::verify_ownership(suspect, key_set, {cfg.threshold});
      worst = std::max(worst, vr.wm_accuracy);
      if (vr.wm_accuracy != 0.0 || vr.pirated) ok = false;
    }
    verdict(ok, 6,
            fmt("integrity: clean model wm acc %.4f (= 0 exactly) across 5 "
                "key-set seeds, never pirated",
                worst));
  }

  // 7. Steganography: exhaustive round-trip fuzz, single-plane delta bound,
  //    and the MSE oracle against a brute-force computation.
  {
    std::mt19937_64 rng(0xacce97);
    const std::vector<std::array<int, 3>> shapes = {
        {28, 28, 1}, {14, 14, 3}, {32, 32, 1}, {9, 13, 1}};
    int recovered = 0, delta_violations = 0;
    const int pairs = 1200;
    for (int i = 0; i < pairs; ++i) {
      const auto [h, w, c] = shapes[i % shapes.size()];
      RasterImage img = random_image(rng, h, w, c);
      const long long cap1 = stego::capacity(h, w, c, 1);
      const int max_chars = int((stego::capacity(h, w, c, 2) - 32) / 8);
      std::string identity = random_identity(rng, max_chars);
      RasterImage marked =
          stego::lsb_embed(img, stego::encode_payload(identity));
      if (stego::lsb_extract(marked) == identity) ++recovered;
      if (32 + 8 * (long long)identity.size() <= cap1) {
        for (std::size_t p = 0; p < img.pixels.size(); ++p) {
          const int delta = std::abs(int(marked.pixels[p]) - img.pixels[p]);
          if (delta > 1) ++delta_violations;
        }
      }
    }
    double worst_gap = 0.0;
    for (int i = 0; i < 100; ++i) {
      RasterImage a = random_image(rng, 28, 28, 1);
      RasterImage b = random_image(rng, 28, 28, 1);
      long double brute = 0.0L;
      for (std::size_t p = 0; p < a.pixels.size(); ++p) {
        const long double d = (long double)(a.pixels[p]) - b.pixels[p];
        brute += d * d;
      }
      brute /= (long double)(a.pixels.size());
      worst_gap = std::max(
          worst_gap,
          std::fabs(double(brute - stego::mean_squared_error(a, b))));
    }
    const bool ok =
        recovered == pairs && delta_violations == 0 && worst_gap <= 1e-9;
    verdict(ok, 7,
            fmt("steganography: %d/%d round-trips exact, %d single-plane "
                "delta violations, MSE oracle gap %.2e (<= 1e-9)",
                recovered, pairs, delta_violations, worst_gap));
  }

  // 8. Verification boundary: floor(T*K) hits is not piracy, one more is.
  {
    bool ok = true;
    std::mt19937_64 rng(88);
    for (int K : {100, 47}) {
      std::vector<keys::WatermarkKeySample> dummy(
          static_cast<std::size_t>(K));
      for (auto& k : dummy) {
        k.image = random_image(rng, 4, 4, 1);
        k.label = 10;
      }
      for (double T : {0.5, 0.9, 0.99}) {
        const int at_floor = int(T * K);
        ScriptedSuspect low(at_floor, 10);
        ScriptedSuspect high(at_floor + 1, 10);
        if (wm::verify_ownership(low, dummy, {T}).pirated) ok = false;
        if (!wm::verify_ownership(high, dummy, {T}).pirated) ok = false;
      }
    }
    verdict(ok, 8,
            "boundary: floor(T*K) correct keys -> not pirated, one more -> "
            "pirated, for T in {0.5, 0.9, 0.99}, K in {100, 47}");
  }

  // 9. Fingerprint independence: the model keys on image content, so
  //    permuting who owns which key image changes no prediction.
  {
    auto sources = keys::select_key_images(digits.train, "0", 100, cfg.seed);
    auto reg_a = keys::mint_fingerprints(100, "user fp{i}");
    auto reg_b = keys::mint_fingerprints(100, "user fp{i}");
    std::rotate(reg_b.entries.begin(), reg_b.entries.begin() + 1,
                reg_b.entries.end());  // derangement: everyone shifts one
    auto keys_a = keys::forge_key_set(sources, reg_a, 10);
    auto keys_b = keys::forge_key_set(sources, reg_b, 10);
    wm::LocalSuspect suspect(wm_model);
    auto pred_a = wm::verify_ownership(suspect, keys_a, {cfg.threshold});
    auto pred_b = wm::verify_ownership(suspect, keys_b, {cfg.threshold});
    int changed = 0;
    for (std::size_t i = 0; i < pred_a.per_key_predictions.size(); ++i)
      if (pred_a.per_key_predictions[i].second !=
          pred_b.per_key_predictions[i].second)
        ++changed;
    verdict(changed == 0, 9,
            fmt("fingerprint independence: %d/100 predictions changed after "
                "permuting fingerprint assignments (= 0)",
                changed));
  }

  // 10. Numerics: analytic gradients match finite differences on every
  //     architecture family; softmax rows are normalized.
  {
    data::GarmentSynthConfig gc;
    gc.seed = 303;
    auto bundle = data::synth_garments(gc);
    data::LabeledDataset batch;
    for (int i = 0; i < 3; ++i) {
      batch.images.push_back(bundle.train.images[std::size_t(i)]);
      batch.labels.push_back(bundle.train.labels[std::size_t(i)]);
    }
    batch.class_names = bundle.train.class_names;

    double worst_rel = 0.0;
    for (auto family :
         {nn::ArchFamily::Lenet5Like, nn::ArchFamily::SmallVggLike,
          nn::ArchFamily::ConvAutoencoder}) {
      nn::ArchSpec arch;
      arch.family = family;
      arch.num_classes = 10;
      auto model = nn::build_model(arch, 71);
      worst_rel =
          std::max(worst_rel, nn::gradient_check(model, batch, 120, 72));
    }

    double worst_sum_gap = 0.0;
    std::vector<RasterImage> probe(bundle.train.images.begin(),
                                   bundle.train.images.begin() + 32);
    for (auto family :
         {nn::ArchFamily::Lenet5Like, nn::ArchFamily::SmallVggLike}) {
      nn::ArchSpec arch;
      arch.family = family;
      arch.num_classes = 10;
      auto model = nn::build_model(arch, 73);
      for (const auto& row : nn::predict_proba(model, probe)) {
        double sum = 0.0;
        for (double v : row) sum += v;
        worst_sum_gap = std::max(worst_sum_gap, std::fabs(sum - 1.0));
      }
    }
    const bool ok = worst_rel < 1e-3 && worst_sum_gap < 1e-5;
    verdict(ok, 10,
            fmt("numerics: worst gradient rel err %.2e (< 1e-3) across 3 "
                "families, worst softmax sum gap %.2e (< 1e-5)",
                worst_rel, worst_sum_gap));
  }

  if (failures == 0) {
    std::printf("all 10 acceptance criteria passed\n");
    return 0;
  }
  std::printf("%d acceptance criteria FAILED\n", failures);
  return 1;
}
