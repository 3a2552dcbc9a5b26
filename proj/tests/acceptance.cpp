// Acceptance run: one PASS/FAIL line per criterion.
//
//   hcctc_acceptance --group fast|training|all --work DIR
//
// The fast group covers the property and gradient criteria and finishes in
// seconds. The training group trains on the toy task and takes most of an
// hour on one core.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hcctc/ctc/ctc.hpp"
#include "hcctc/harness/metrics.hpp"
#include "hcctc/harness/pipeline.hpp"
#include "hcctc/harness/synthetic.hpp"
#include "hcctc/harness/training_config.hpp"
#include "hcctc/numerics/checkpoint.hpp"
#include "hcctc/numerics/gradcheck.hpp"
#include "hcctc/objectives/objectives.hpp"
#include "hcctc/subword/hierarchy.hpp"

#ifndef HCCTC_CONFIG_DIR
#define HCCTC_CONFIG_DIR "configs"
#endif

namespace fs = std::filesystem;
using namespace hcctc;
using namespace hcctc::harness;
using Md = Matrix<double>;
using Ids = std::vector<int>;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Md random_log_probs(int frames, int width, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.5);
  Md logits(frames, width);
  for (Eigen::Index i = 0; i < logits.size(); ++i) logits.data()[i] = n(rng);
  Graph<double> g(false);
  return log_softmax(g.constant(logits)).value();
}

Md random_features(int frames, int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Md m(frames, dim);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

Ids random_labels(int length, int width, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> label(1, width - 1);
  Ids t(static_cast<std::size_t>(length));
  for (int& y : t) y = label(rng);
  return t;
}

// ---------------------------------------------------------------- fast group

Outcome oracle_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> frames(1, 6), width(2, 3), len(0, 3);
  double worst = 0.0;
  int infeasible = 0;
  for (int rep = 0; rep < 200; ++rep) {
    const int T = frames(rng), V = width(rng);
    const Ids y = random_labels(len(rng), V, rng);
    const Md lp = random_log_probs(T, V, rng);
    const double oracle = ctc::brute_force_ctc(lp.array().exp().matrix(), y);
    const double dp = std::exp(-ctc::ctc_loss(lp, y).loss);
    if (!ctc::is_feasible(y, T)) ++infeasible;
    worst = std::max(worst, std::abs(dp - oracle));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-9 && secs < 10.0,
          fmt("200 instances (%d infeasible), max |exp(-loss) - enumeration| = %.3g, %.3f s", infeasible, worst, secs)};
}

Outcome gradient_exactness() {
  std::mt19937_64 rng(202);
  std::uniform_int_distribution<int> frames(2, 8), width(2, 4);
  double worst = 0.0;
  int done = 0;
  while (done < 20) {
    const int T = frames(rng), V = width(rng);
    std::uniform_int_distribution<int> len(1, std::max(1, T / 2));
    const Ids y = random_labels(len(rng), V, rng);
    if (!ctc::is_feasible(y, T)) continue;
    const Md lp = random_log_probs(T, V, rng);
    const ctc::LossResult r = ctc::ctc_loss(lp, y);
    auto f = [&](const Eigen::VectorXd& v) {
      Md m = lp;
      Eigen::Map<Eigen::VectorXd>(m.data(), m.size()) = v;
      return ctc::ctc_loss(m, y).loss;
    };
    const auto check = finite_diff_check(f, Eigen::Map<const Eigen::VectorXd>(lp.data(), lp.size()),
                                         Eigen::Map<const Eigen::VectorXd>(r.grad.data(), r.grad.size()), 1e-5);
    if (!check.failed.empty()) return {false, fmt("instance %d: non-finite probe", done)};
    worst = std::max(worst, check.max_relative_error);
    ++done;
  }
  return {worst <= 1e-4, fmt("20 instances, max relative error %.3g", worst)};
}

// Every label sequence of length <= T over labels 1..V-1.
void enumerate_labels(int max_len, int width, Ids& prefix, const std::function<void(const Ids&)>& visit) {
  visit(prefix);
  if (static_cast<int>(prefix.size()) == max_len) return;
  for (int v = 1; v < width; ++v) {
    prefix.push_back(v);
    enumerate_labels(max_len, width, prefix, visit);
    prefix.pop_back();
  }
}

Outcome path_normalization() {
  std::mt19937_64 rng(303);
  std::string detail;
  bool pass = true;
  // Two readings of V=2: blank plus one label, and two labels plus blank.
  for (int width : {2, 3}) {
    const Md lp = random_log_probs(3, width, rng);
    double total = 0.0;
    Ids prefix;
    enumerate_labels(3, width, prefix, [&](const Ids& y) { total += std::exp(-ctc::ctc_loss(lp, y).loss); });
    pass = pass && std::abs(total - 1.0) <= 1e-9;
    detail += fmt("%s%d columns: sum = 1%+.3g", detail.empty() ? "" : "; ", width, total - 1.0);
  }
  return {pass, detail};
}

EncoderConfig small_config(Objective o, int layers, std::vector<int> widths, int input_dim = 4) {
  EncoderConfig c;
  c.input_dim = input_dim;
  c.layers = layers;
  c.loss_count = static_cast<int>(widths.size());
  c.d_model = 8;
  c.heads = 2;
  c.d_ff = 12;
  c.level_vocab_sizes = std::move(widths);
  c.layout = layout_for(o);
  return c;
}

Outcome hc_sc_degeneracy() {
  std::mt19937_64 rng(404);
  Encoder<double> model(small_config(Objective::kHcCtc, 6, {7, 7, 7}), 404);
  std::uniform_int_distribution<int> frames(6, 14), len(1, 3);
  std::vector<Md> features;
  std::vector<subword::HierTargets> targets;
  for (int i = 0; i < 20; ++i) {
    features.push_back(random_features(frames(rng), 4, rng));
    const Ids y = random_labels(len(rng), 7, rng);
    targets.push_back(subword::HierTargets{{y, y, y}});
  }
  int identical = 0;
  for (int b = 0; b < 5; ++b) {
    std::vector<std::size_t> batch{std::size_t(4 * b), std::size_t(4 * b + 1), std::size_t(4 * b + 2),
                                   std::size_t(4 * b + 3)};
    GradientSet<double> ga(model.parameters()), gb(model.parameters());
    const auto hc = accumulate_batch(model, Objective::kHcCtc, features, targets, batch, ga);
    const auto sc = accumulate_batch(model, Objective::kScCtc, features, targets, batch, gb);
    if (hc.mean_loss == sc.mean_loss && hc.level_losses == sc.level_losses && flatten(ga) == flatten(gb)) ++identical;
  }
  return {identical == 5, fmt("%d/5 batches of 4 with bit-identical losses and gradients", identical)};
}

Outcome conditioning_identity() {
  std::mt19937_64 rng(505);
  EncoderConfig on = small_config(Objective::kHcCtc, 6, {5, 7, 9});
  EncoderConfig off = on;
  off.conditioning = false;
  Encoder<double> a(on, 505);
  Encoder<double> b(off, 999);
  // Share every parameter the unconditioned model has.
  for (auto& p : b.parameters()) p.value = a.parameters()[a.parameters().index_of(p.name)].value;
  int identical = 0;
  for (int rep = 0; rep < 10; ++rep) {
    const Md x = random_features(5 + rep, 4, rng);
    Graph<double> ga(false), gb(false);
    const auto ea = a.encode(ga, x);
    const auto eb = b.encode(gb, x);
    bool same = ea.final_states.value() == eb.final_states.value();
    for (std::size_t k = 0; k < ea.level_log_probs.size(); ++k)
      same = same && ea.level_log_probs[k].value() == eb.level_log_probs[k].value();
    if (same) ++identical;
  }
  return {identical == 10, fmt("%d/10 inputs bit-identical across all levels and final states", identical)};
}

double objective_gradcheck(Objective o, Encoder<double>& enc, const Md& x, const subword::HierTargets& hier) {
  Graph<double> g;
  const auto rep = evaluate_objective(o, enc.encode(g, x), hier);
  g.backward(rep.total);
  GradientSet<double> grads(enc.parameters());
  g.accumulate_into(grads);
  const Eigen::VectorXd start = flatten(enc.parameters());
  auto f = [&](const Eigen::VectorXd& v) {
    unflatten(v, enc.parameters());
    Graph<double> h(false);
    const double loss = evaluate_objective(o, enc.encode(h, x), hier).total_loss;
    unflatten(start, enc.parameters());
    return loss;
  };
  const auto check = finite_diff_check(f, start, flatten(grads), 1e-5);
  return check.failed.empty() ? check.max_relative_error : std::numeric_limits<double>::infinity();
}

Outcome end_to_end_gradient() {
  std::mt19937_64 rng(606);
  bool pass = true;
  std::string detail;
  for (Objective o : {Objective::kCtc, Objective::kScCtc, Objective::kHcCtc, Objective::kParaCtc}) {
    const std::vector<int> widths = o == Objective::kScCtc ? std::vector<int>{6, 6} : std::vector<int>{5, 6};
    Encoder<double> enc(small_config(o, 2, widths), 606);
    // Non-zero conditioning so its gradient path is exercised.
    for (auto& p : enc.parameters())
      if (p.name.rfind("cond.", 0) == 0) p.value = 0.3 * random_features(p.value.rows(), p.value.cols(), rng);
    const Md x = random_features(7, 4, rng);
    const subword::HierTargets hier =
        o == Objective::kScCtc ? subword::HierTargets{{{2, 5}, {2, 5}}} : subword::HierTargets{{{1, 3, 4}, {2, 5}}};
    const double err = objective_gradcheck(o, enc, x, hier);
    pass = pass && err <= 1e-4;
    detail += fmt("%s%s %.3g", detail.empty() ? "" : ", ", to_string(o).c_str(), err);
  }
  return {pass, "max relative error " + detail};
}

Outcome subword_round_trip() {
  SyntheticTask task;
  const Corpus toy = generate_synthetic_corpus(task);
  const auto vocabs = subword::build_hierarchy(transcripts(toy.train), {40, 120, 400});
  // 1000 lines drawn from the same inventory with a larger train split.
  task.train_count = 1000;
  const auto lines = transcripts(generate_synthetic_corpus(task).train);
  int ok = 0;
  for (const auto& line : lines) {
    bool all = true;
    for (const auto& v : vocabs) all = all && v.detokenize(v.segment(line)) == line;
    if (all) ++ok;
  }
  return {ok == 1000, fmt("%d/1000 lines round-trip at all 3 levels", ok)};
}

Outcome best_path() {
  std::mt19937_64 rng(808);
  std::uniform_int_distribution<int> frames(1, 30), width(2, 12), coarse(0, 3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int ok = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    const int T = frames(rng), V = width(rng);
    Md post(T, V);
    // Every fourth matrix is coarsely quantized so ties occur.
    const bool ties = rep % 4 == 0;
    for (Eigen::Index i = 0; i < post.size(); ++i) post.data()[i] = ties ? coarse(rng) : unit(rng);
    for (Eigen::Index t = 0; t < T; ++t) {
      const double s = post.row(t).sum();
      post.row(t) = s > 0 ? Md(post.row(t) / s) : Md::Constant(1, V, 1.0 / V);
    }
    Ids argmax(static_cast<std::size_t>(T));
    for (Eigen::Index t = 0; t < T; ++t) {
      int best = 0;
      for (int v = 1; v < V; ++v)
        if (post(t, v) > post(t, best)) best = v;
      argmax[static_cast<std::size_t>(t)] = best;
    }
    if (ctc::best_path_decode(post) == ctc::collapse(argmax)) ++ok;
  }
  return {ok == 1000, fmt("%d/1000 random posterior matrices match collapse(argmax)", ok)};
}

Outcome averaging_exact() {
  TrainingConfig tc;
  EncoderConfig c = small_config(Objective::kHcCtc, 3, {5, 7, 9});
  Encoder<float> p(c, 1), q(c, 2);
  const Checkpoint cp = to_checkpoint(p.parameters()), cq = to_checkpoint(q.parameters());
  bool identity = true, mean = true, linear = true;
  const Checkpoint same = average_checkpoints({cp, cp, cp, cp, cp});
  for (std::size_t i = 0; i < cp.size(); ++i) identity = identity && same[i].data == cp[i].data;

  Checkpoint zeros = cp, twos = cp;
  for (auto& e : zeros) std::fill(e.data.begin(), e.data.end(), 0.f);
  for (auto& e : twos) std::fill(e.data.begin(), e.data.end(), 2.f);
  for (const auto& e : average_checkpoints({zeros, twos}))
    for (float v : e.data) mean = mean && v == 1.f;

  const Checkpoint once = average_checkpoints({cp, cq});
  const Checkpoint twice = average_checkpoints({once, once});
  for (std::size_t i = 0; i < once.size(); ++i) {
    linear = linear && twice[i].data == once[i].data;
    for (std::size_t j = 0; j < once[i].data.size(); ++j)
      linear = linear && once[i].data[j] ==
                             static_cast<float>((double(cp[i].data[j]) + double(cq[i].data[j])) / 2.0);
  }
  return {identity && mean && linear,
          fmt("identical copies %s, {0,2} -> 1 %s, pairwise mean and idempotence %s", identity ? "exact" : "differ",
              mean ? "exact" : "differs", linear ? "exact" : "differ")};
}

// ------------------------------------------------------------ training group

struct ToyRun {
  TrainingConfig config;
  TrainResult result;
  std::string dir;
};

SyntheticTask toy_task() { return SyntheticTask::from_config(KeyValueFile::read(HCCTC_CONFIG_DIR "/toy_task.cfg")); }

TrainingConfig toy_config(const std::string& name) {
  return TrainingConfig::from_config(KeyValueFile::read(std::string(HCCTC_CONFIG_DIR) + "/" + name));
}

struct TrainingContext {
  std::string work;
  Corpus corpus;
  std::string data_dir;
  ToyRun main_run;
  bool main_done = false;

  explicit TrainingContext(std::string w) : work(std::move(w)) {
    const SyntheticTask task = toy_task();
    corpus = generate_synthetic_corpus(task);
    data_dir = (fs::path(work) / "toy_data").string();
    fs::remove_all(data_dir);
    write_corpus(corpus, task, data_dir);
  }

  TrainResult run(TrainingConfig c, const std::string& name) {
    const std::string dir = (fs::path(work) / name).string();
    fs::remove_all(dir);
    c.data_dir = data_dir;
    std::cout << "  training " << name << " (" << to_string(c.objective) << ", seed " << c.seed << ", "
              << c.epochs << " epochs)" << std::endl;
    return train(c, corpus, dir);
  }

  const ToyRun& main() {
    if (!main_done) {
      main_run.config = toy_config("toy_hc.cfg");
      main_run.dir = (fs::path(work) / "toy_hc").string();
      main_run.result = run(main_run.config, "toy_hc");
      main_done = true;
    }
    return main_run;
  }
};

Outcome toy_learnability(TrainingContext& ctx) {
  const ToyRun& r = ctx.main();
  const auto& wers = r.result.dev_wers;
  int hit = -1;
  for (std::size_t e = 0; e < wers.size(); ++e)
    if (wers[e] <= 0.05) {
      hit = static_cast<int>(e) + 1;
      break;
    }
  const double best = wers.empty() ? 1.0 : *std::min_element(wers.begin(), wers.end());
  const bool pass = hit > 0 && hit <= 50 && r.result.seconds <= 1800.0;
  const auto& losses = r.result.dev_losses;
  bool decreasing = losses.size() >= 5;
  for (std::size_t e = 1; e < 5 && decreasing; ++e) decreasing = losses[e] < losses[e - 1];
  return {pass, fmt("best dev WER %.2f%%, first epoch <= 5%%: %s, %d epochs in %.0f s, dev loss strictly "
                    "decreasing over epochs 1-5: %s",
                    100 * best, hit > 0 ? std::to_string(hit).c_str() : "none", r.result.epochs_run,
                    r.result.seconds, decreasing ? "yes" : "no")};
}

double final_level_dev_loss(const std::string& dir, int epochs, int level) {
  const MetricsLog log = read_metrics((fs::path(dir) / "metrics.tsv").string());
  for (const auto& row : log.rows)
    if (row.epoch == std::to_string(epochs) && row.split == "dev" && row.level == std::to_string(level))
      return row.loss;
  return std::numeric_limits<double>::quiet_NaN();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Outcome trend(TrainingContext& ctx) {
  const TrainingConfig base = toy_config("toy_trend.cfg");
  std::vector<double> hc, para;
  std::string detail;
  for (int s = 1; s <= 5; ++s) {
    for (Objective o : {Objective::kHcCtc, Objective::kParaCtc}) {
      TrainingConfig c = base;
      c.objective = o;
      c.seed = static_cast<std::uint64_t>(s);
      const std::string name = "trend_" + to_string(o) + "_seed" + std::to_string(s);
      const TrainResult r = ctx.run(c, name);
      const double loss = final_level_dev_loss((fs::path(ctx.work) / name).string(), r.epochs_run, c.loss_count);
      (o == Objective::kHcCtc ? hc : para).push_back(loss);
    }
    detail += fmt("%sseed %d hc %.3f para %.3f", detail.empty() ? "" : "; ", s, hc.back(), para.back());
  }
  const double mh = median(hc), mp = median(para);
  return {mh <= mp, fmt("median final-level dev loss hc-ctc %.3f vs para-ctc %.3f (", mh, mp) + detail + ")"};
}

Outcome ablation(TrainingContext& ctx) {
  TrainingConfig on = toy_config("toy_hc.cfg");
  on.epochs = 2;
  on.stop_at_dev_wer = -1;
  TrainingConfig off = on;
  off.conditioning = false;
  ctx.run(on, "ablation_on");
  ctx.run(off, "ablation_off");
  const fs::path a = fs::path(ctx.work) / "ablation_on", b = fs::path(ctx.work) / "ablation_off";
  const Checkpoint ca = read_checkpoint((a / "ckpt.002.bin").string());
  const Checkpoint cb = read_checkpoint((b / "ckpt.002.bin").string());
  // Distinct models: the conditioned one carries extra projections, and the
  // shared parameters have moved apart.
  std::size_t cond_entries = 0, shared_differ = 0;
  for (const auto& e : ca) {
    if (e.name.rfind("cond.", 0) == 0) ++cond_entries;
    for (const auto& f : cb)
      if (f.name == e.name && f.data != e.data) ++shared_differ;
  }
  const std::string va = read_metrics((a / "metrics.tsv").string()).attributes.at("conditioning");
  const std::string vb = read_metrics((b / "metrics.tsv").string()).attributes.at("conditioning");
  const bool pass = cond_entries > 0 && shared_differ > 0 && va == "on" && vb == "off";
  return {pass, fmt("%zu conditioning entries only in the conditioned model, %zu shared entries differ, "
                    "metrics record conditioning=%s / conditioning=%s",
                    cond_entries, shared_differ, va.c_str(), vb.c_str())};
}

Outcome averaging_toy(TrainingContext& ctx) {
  const ToyRun& r = ctx.main();
  if (r.result.averaged.empty()) return {false, "no averaged checkpoint was written"};
  const auto picks = select_best(r.result.dev_losses, static_cast<std::size_t>(r.config.average_count));
  double worst = 0.0;
  std::string epochs;
  for (std::size_t i : picks) {
    worst = std::max(worst, r.result.dev_wers[i]);
    epochs += (epochs.empty() ? "" : ",") + std::to_string(i + 1);
  }
  const double avg = r.result.averaged_dev.level_wer.back();
  return {avg <= worst + 0.005,
          fmt("averaged dev WER %.2f%% vs worst constituent %.2f%% (epochs %s)", 100 * avg, 100 * worst,
              epochs.c_str())};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::string group = "all";
  std::string work = "acceptance_work";
  app.add_option("--group", group, "fast, training or all")->check(CLI::IsMember({"fast", "training", "all"}));
  app.add_option("--work", work, "scratch directory for training runs");
  CLI11_PARSE(app, argc, argv);

  int failures = 0;
  auto report = [&](int id, const std::string& name, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << id << "] " << name << ": " << o.detail << std::endl;
  };

  if (group == "fast" || group == "all") {
    report(1, "ctc oracle equivalence", oracle_equivalence);
    report(2, "ctc gradient exactness", gradient_exactness);
    report(3, "path-space normalization", path_normalization);
    report(4, "hc/sc degeneracy", hc_sc_degeneracy);
    report(5, "conditioning identity", conditioning_identity);
    report(6, "end-to-end gradient", end_to_end_gradient);
    report(10, "subword round-trip", subword_round_trip);
    report(11, "best-path decoding", best_path);
    report(12, "checkpoint averaging (exact checks)", averaging_exact);
  }
  if (group == "training" || group == "all") {
    fs::create_directories(work);
    TrainingContext ctx(work);
    report(7, "toy learnability", [&] { return toy_learnability(ctx); });
    report(12, "checkpoint averaging (toy run)", [&] { return averaging_toy(ctx); });
    report(9, "conditioning ablation", [&] { return ablation(ctx); });
    report(8, "hc-ctc vs para-ctc trend", [&] { return trend(ctx); });
  }
  return failures == 0 ? 0 : 1;
}
