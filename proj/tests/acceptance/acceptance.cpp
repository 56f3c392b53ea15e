// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "cube_oracle.hpp"
#include "dsp_oracle.hpp"
#include "emostress/checkpoint.hpp"
#include "emostress/cube.hpp"
#include "emostress/features.hpp"
#include "emostress/fft.hpp"
#include "emostress/model.hpp"
#include "emostress/pipeline.hpp"
#include "emostress/synth.hpp"
#include "gradcheck_suites.hpp"
#include "pca_oracle.hpp"
#include "support.hpp"

using namespace emostress;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

int failures = 0;

void criterion(int id, const char* title, double budget_seconds, const std::function<Outcome()>& body) {
  const auto start = Clock::now();
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out = {false, std::string("exception: ") + e.what()};
  }
  const double seconds = std::chrono::duration<double>(Clock::now() - start).count();
  if (budget_seconds > 0 && seconds > budget_seconds) {
    out.pass = false;
    out.detail += "; over time budget of " + std::to_string(budget_seconds) + " s";
  }
  if (!out.pass) ++failures;
  std::printf("%s [%d] %s: %s (%.3f s)\n", out.pass ? "PASS" : "FAIL", id, title, out.detail.c_str(), seconds);
  std::fflush(stdout);
}

std::string num(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

int cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string("\"") + EMOSTRESS_CLI_PATH + "\" " + args + " > " + q(log) + " 2>&1";
  const int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

Tensor<float> to_tensor(const Matrix& m) {
  Tensor<float> t({1, m.rows(), m.cols()});
  for (std::size_t i = 0; i < m.data().size(); ++i) t.data[i] = static_cast<float>(m.data()[i]);
  return t;
}

// ---------------------------------------------------------------------------

Outcome emodb_status() {
  const char* root = std::getenv("EMOSTRESS_EMODB_ROOT");
  if (!root || !*root) {
    return {true, "non-gating; EMOSTRESS_EMODB_ROOT not set, so the Emo-DB soft target (>= 70%) was not measured"};
  }
  testing::TempDir out("accept_emodb");
  RunConfig cfg;
  cfg.dataset_root = root;
  cfg.dataset_kind = DatasetKind::EmoDB;
  cfg.output_dir = out.path();
  const auto report = run_pipeline(cfg);
  const double acc = report.test_metrics.categorical_accuracy;
  return {true, "non-gating; Emo-DB test accuracy " + num(acc, 4) + (acc >= 0.70 ? " (meets" : " (below") +
                    " the 70% soft target)"};
}

Outcome reference_centroid_fixture() {
  std::string detail;
  bool ok = true;
  for (const auto& [expected, point] : testing::reference_centroid_rows()) {
    const auto got = nearest_corner(NeurotransmitterLevels::from(point)).emotion;
    const auto oracle = testing::oracle_nearest(point);
    ok = ok && got == expected && oracle == expected;
    if (!detail.empty()) detail += ", ";
    detail += std::string(to_string(got));
  }
  return {ok, detail};
}

Outcome calibration_recovery() {
  int recovered = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) recovered += testing::calibration_recovery_trial(seed) ? 1 : 0;
  return {recovered == 100, std::to_string(recovered) + "/100 planted transforms inverted"};
}

Outcome gradient_checks() {
  double conv = 0, pool = 0, relu = 0, dense = 0, ce = 0, net = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    conv = std::max({conv, testing::conv_check(s, nn::Padding::Same), testing::conv_check(s, nn::Padding::Valid)});
    pool = std::max(pool, testing::maxpool_check(s));
    relu = std::max(relu, testing::relu_check(s));
    dense = std::max(dense, testing::dense_check(s));
    ce = std::max(ce, testing::softmax_ce_check(s));
    net = std::max(net, testing::network_check(s));
  }
  const double worst = std::max({conv, pool, relu, dense, ce, net});
  return {worst < 1e-4, "worst relative error over 100 instances each: conv " + num(conv, 3) + ", pool " + num(pool, 3) +
                            ", relu " + num(relu, 3) + ", dense " + num(dense, 3) + ", softmax-ce " + num(ce, 3) +
                            ", network " + num(net, 3)};
}

Outcome dsp_conformance() {
  Rng rng(77);
  double worst = 0;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> frame(400);
    for (auto& v : frame) v = rng.normal();
    worst = std::max(worst, testing::max_rel(power_spectrum(frame, 512), testing::direct_power_spectrum(frame, 512)));
  }
  const auto peak = testing::mel_peak_1khz();
  const bool peak_ok = peak.oracle_best == peak.nearest && peak.library_best == peak.nearest;

  bool shapes = true;
  for (double seconds : {0.5, 0.75, 1.0, 1.99, 2.0, 2.01, 4.5, 7.0, 10.0}) {
    const auto f = extract_features(testing::noise(static_cast<std::size_t>(seconds * 16000), 5), FeatureConfig{});
    shapes = shapes && f.values.rows() == 199 && f.values.cols() == 39;
  }
  return {worst < 1e-6 && peak_ok && shapes, "spectrum max rel error " + num(worst, 3) + "; 1 kHz peak in filter " +
                                                  std::to_string(peak.library_best) + " (oracle " +
                                                  std::to_string(peak.oracle_best) + "); 199x39 for 0.5-10 s " +
                                                  (shapes ? "ok" : "violated")};
}

Outcome pca_equivalence() {
  double eig = 0, vec = 0, ortho = 0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto r = testing::pca_oracle_problem(1000 + s);
    eig = std::max(eig, r.eigen_error);
    vec = std::max(vec, r.vector_error);
    ortho = std::max(ortho, r.orthonormality_error);
  }
  return {eig < 1e-6 && vec < 1e-6 && ortho < 1e-8,
          "50 problems: eigenvalue " + num(eig, 3) + ", vector " + num(vec, 3) + ", orthonormality " + num(ortho, 3)};
}

Outcome overfit() {
  const FeatureConfig fc;
  Rng rng(derive_seed(31, "overfit"));
  std::vector<Matrix> raw;
  std::vector<std::size_t> labels;
  for (std::size_t i = 0; i < 32; ++i) {
    const auto label = static_cast<EmotionLabel>(i % kNumEmotions);
    raw.push_back(extract_raw_features(synthesize_clip(label, i % 3, rng), fc));
    labels.push_back(i % kNumEmotions);
  }
  const auto stats = fit_normalizer(raw);
  std::vector<Example<float>> data;
  for (std::size_t i = 0; i < raw.size(); ++i) data.push_back({to_tensor(finalize_features(raw[i], fc, stats).values), labels[i]});

  ModelConfig mc;
  mc.epochs = 200;
  mc.seed = derive_seed(31, "model");
  auto model = EmoCnn::build(mc);
  const auto report = train(model, std::span<const Example<float>>(data));
  const auto m = evaluate(model, std::span<const Example<float>>(data));

  // Smoothed loss trend: mean over consecutive 10-epoch windows.
  std::size_t rises = 0;
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t w = 0; w + 10 <= report.epochs.size(); w += 10) {
    double mean = 0;
    for (std::size_t e = w; e < w + 10; ++e) mean += report.epochs[e].train_loss / 10;
    if (mean > prev) ++rises;
    prev = mean;
  }
  return {m.categorical_accuracy >= 0.95,
          "train accuracy " + num(m.categorical_accuracy, 4) + " after " + std::to_string(report.epochs.size()) +
              " epochs; loss " + num(report.epochs.front().train_loss, 4) + " -> " +
              num(report.epochs.back().train_loss, 4) + "; 10-epoch window means rose " + std::to_string(rises) +
              " time(s)"};
}

Outcome synthetic_end_to_end(const fs::path& work) {
  const auto root = work / "synth";
  if (cli("synth --out " + q(root) + " --seed 1", work / "synth.log") != 0) return {false, "synth failed: " + slurp(work / "synth.log")};
  const auto out = work / "run";
  if (cli("pipeline --config " + q(root / "synth_config.json") + " --out " + q(out), work / "pipeline.log") != 0) {
    return {false, "pipeline failed: " + slurp(work / "pipeline.log")};
  }
  const auto metrics = nlohmann::json::parse(slurp(out / "metrics.json"));
  const double acc = metrics.at("categorical_accuracy").get<double>();
  const double residual = metrics.at("cube").at("residual").get<double>();
  const auto train_n = metrics.at("counts").at("train").get<std::size_t>();
  const auto test_n = metrics.at("counts").at("test").get<std::size_t>();
  // The Sad class counts as mapped to Distress when its mean cube position is
  // nearest Distress and so are most of its clips.
  std::size_t sad = 0, sad_distress = 0;
  Vec3 mean{0, 0, 0};
  for (const auto& row : csv_rows(slurp(out / "cube_points.csv"))) {
    if (row.at(1) != "Sad") continue;
    ++sad;
    if (row.at(5) == "Distress") ++sad_distress;
    for (std::size_t a = 0; a < 3; ++a) mean[a] += std::stod(row.at(2 + a));
  }
  for (auto& v : mean) v /= static_cast<double>(std::max<std::size_t>(sad, 1));
  const auto class_corner = nearest_corner(NeurotransmitterLevels::from(mean)).emotion;
  const bool sad_ok = sad > 0 && class_corner == CubeEmotion::Distress && 2 * sad_distress > sad;
  const bool ok = train_n == 140 && test_n == 70 && acc >= 0.90 && std::isfinite(residual) && sad_ok;
  return {ok, std::to_string(train_n) + "/" + std::to_string(test_n) + " split, test accuracy " + num(acc, 4) +
                  ", residual " + num(residual, 6) + ", Sad class mean nearest " + std::string(to_string(class_corner)) +
                  ", Sad clips nearest Distress " + std::to_string(sad_distress) + "/" + std::to_string(sad)};
}

Outcome determinism(const fs::path& work) {
  const auto root = work / "small";
  if (cli("synth --out " + q(root) + " --seed 4 --clips-per-class 8", work / "small.log") != 0) return {false, "synth failed"};
  const std::string base = "pipeline --config " + q(root / "synth_config.json") + " --model.epochs 4 --out ";
  for (const char* run : {"a", "b"}) {
    if (cli(base + q(work / run), work / (std::string(run) + ".log")) != 0) {
      return {false, std::string("run ") + run + " failed: " + slurp(work / (std::string(run) + ".log"))};
    }
  }
  const bool metrics_same = slurp(work / "a" / "metrics.json") == slurp(work / "b" / "metrics.json");
  const bool ckpt_same = slurp(work / "a" / "model.emoc") == slurp(work / "b" / "model.emoc");

  // Save a loaded checkpoint again, reload, and compare forward outputs.
  const auto first = load_checkpoint(work / "a" / "model.emoc");
  save_checkpoint(first, work / "resaved.emoc");
  const auto second = load_checkpoint(work / "resaved.emoc");
  Rng rng(8);
  bool forward_same = true;
  for (int t = 0; t < 5; ++t) {
    Tensor<float> x({1, 199, 39});
    for (auto& v : x.data) v = static_cast<float>(rng.normal());
    const auto a = first.model.forward(x), b = second.model.forward(x);
    forward_same = forward_same && a.logits == b.logits && a.embedding == b.embedding;
  }
  const bool bytes_same = slurp(work / "resaved.emoc") == slurp(work / "a" / "model.emoc");
  return {metrics_same && ckpt_same && forward_same && bytes_same,
          std::string("metrics.json ") + (metrics_same ? "identical" : "differs") + ", checkpoint " +
              (ckpt_same ? "identical" : "differs") + ", reloaded forward " + (forward_same ? "bit-exact" : "differs") +
              ", re-saved bytes " + (bytes_same ? "identical" : "differ")};
}

Outcome stress_analytics() {
  // Closed form at a corner: 1 corner at squared distance 0, 3 at 4, 3 at 8, 1 at 12.
  const double expected = 1.0 / (1.0 + 3 * std::exp(-4.0) + 3 * std::exp(-8.0) + std::exp(-12.0));
  const auto at_corner = stress_score(NeurotransmitterLevels::from(corner_coordinates(CubeEmotion::Distress)), 1.0);
  const auto at_origin = stress_score(NeurotransmitterLevels{}, 1.0);

  Rng rng(10);
  double worst = 0;
  for (int t = 0; t < 10000; ++t) {
    const double spread = t % 4 == 0 ? 50.0 : 2.0;
    const NeurotransmitterLevels p{spread * rng.normal(), spread * rng.normal(), spread * rng.normal()};
    const double tau = 0.05 + 3 * rng.uniform();
    const auto w = corner_weights(p, tau);
    worst = std::max(worst, std::abs(std::accumulate(w.begin(), w.end(), 0.0) - 1.0));
  }
  const bool ok = std::abs(at_corner.score - 0.947) < 1e-3 && std::abs(at_corner.score - expected) < 1e-12 &&
                  at_origin.score == 0.125 && worst < 1e-12;
  return {ok, "Distress corner " + num(at_corner.score, 8) + " (closed form " + num(expected, 8) + "), origin " +
                  num(at_origin.score, 17) + ", worst weight-sum error " + num(worst, 3)};
}

}  // namespace

int main() {
  testing::TempDir work("acceptance");
  criterion(1, "published-accuracy status", 3600, emodb_status);
  criterion(2, "reference centroid nearest corners", 0.001, reference_centroid_fixture);
  criterion(3, "calibration recovery", 1, calibration_recovery);
  criterion(4, "gradient correctness", 120, gradient_checks);
  criterion(5, "DSP conformance", 60, dsp_conformance);
  criterion(6, "PCA oracle equivalence", 30, pca_equivalence);
  criterion(7, "overfit sanity", 300, overfit);
  criterion(8, "synthetic end-to-end", 600, [&] { return synthetic_end_to_end(work.path()); });
  criterion(9, "determinism and persistence", 60, [&] { return determinism(work.path()); });
  criterion(10, "stress-score analytics", 0, stress_analytics);
  std::printf("%s: %d criterion(s) failed\n", failures == 0 ? "ACCEPTED" : "REJECTED", failures);
  return failures == 0 ? 0 : 1;
}
