// hcctc: data generation, vocabulary building, training and inspection.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <regex>
#include <string>
#include <vector>

#include "hcctc/errors.hpp"
#include "hcctc/harness/features.hpp"
#include "hcctc/harness/metrics.hpp"
#include "hcctc/harness/pipeline.hpp"
#include "hcctc/harness/synthetic.hpp"
#include "hcctc/subword/hierarchy.hpp"

namespace fs = std::filesystem;
using namespace hcctc;
using namespace hcctc::harness;

namespace {

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

int cmd_build_vocab(const std::string& corpus, const std::string& sizes, const std::string& out) {
  const auto lines = read_lines(corpus);
  const auto vocabs = subword::build_hierarchy(lines, parse_size_list(sizes));
  subword::save_hierarchy(out, vocabs);
  const auto lengths = subword::mean_lengths(subword::segment_corpus(lines, vocabs));
  std::cout << "level\tsize\tmean_length\n";
  for (std::size_t k = 0; k < vocabs.size(); ++k)
    std::cout << k + 1 << '\t' << vocabs[k].size() << '\t' << lengths[k] << '\n';
  return 0;
}

int cmd_gen_data(const std::string& spec, const std::string& out) {
  const SyntheticTask task = SyntheticTask::from_config(KeyValueFile::read(spec));
  const Corpus corpus = generate_synthetic_corpus(task);
  write_corpus(corpus, task, out);
  std::cout << "train " << corpus.train.size() << ", dev " << corpus.dev.size() << ", test " << corpus.test.size()
            << " utterances written to " << out << '\n';
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& data, const std::string& out) {
  TrainingConfig config = TrainingConfig::from_config(KeyValueFile::read(config_path));
  config.data_dir = fs::absolute(data).string();
  const Corpus corpus = load_corpus(data);
  const TrainResult r = train(config, corpus, out, &std::cout);
  if (!r.averaged.empty()) {
    std::cout << "averaged checkpoint " << r.averaged << ": dev loss " << r.averaged_dev.total_loss << ", dev wer "
              << r.averaged_dev.level_wer.back() << '\n';
  }
  std::cout << "trained " << r.epochs_run << " epochs in " << r.seconds << " s\n";
  return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& data, const std::string& split) {
  if (split != "dev" && split != "test" && split != "train") throw ConfigError("unknown split: " + split);
  const ModelBundle bundle = load_model(ckpt);
  const EvalResult r = evaluate(bundle, load_split(data, split));
  std::cout << "level\tloss\twer\tinfeasible\n";
  for (std::size_t k = 0; k < r.level_loss.size(); ++k)
    std::cout << k + 1 << '\t' << format_number(r.level_loss[k]) << '\t' << format_number(r.level_wer[k]) << '\t'
              << r.level_infeasible[k] << '\n';
  std::cout << "total\t" << format_number(r.total_loss) << '\t' << format_number(r.level_wer.back()) << "\t-\n";
  return 0;
}

bool is_feature_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  char magic[4] = {};
  in.read(magic, 4);
  return in && std::string(magic, 4) == "HFEA";
}

// --input is either one feature file or a manifest; manifest feature paths
// are relative to the manifest's directory.
int cmd_decode(const std::string& ckpt, const std::string& input) {
  const ModelBundle bundle = load_model(ckpt);
  if (is_feature_file(input)) {
    std::cout << decode(bundle, read_features(input)) << '\n';
    return 0;
  }
  const fs::path base = fs::path(input).parent_path();
  for (const std::string& line : read_lines(input)) {
    if (line.empty()) continue;
    const auto tab1 = line.find('\t');
    const auto tab2 = line.rfind('\t');
    if (tab1 == std::string::npos || tab2 == tab1) throw FormatError("bad manifest line: " + line);
    const std::string id = line.substr(0, tab1);
    const fs::path feat = base / line.substr(tab2 + 1);
    std::cout << id << '\t' << decode(bundle, read_features(feat.string())) << '\n';
  }
  return 0;
}

// With a metrics.tsv beside the checkpoints, keep the n with the lowest dev
// loss; otherwise the last n in the order given.
int cmd_avg(const std::vector<std::string>& ckpts, int n, const std::string& out) {
  if (n < 1) throw ConfigError("--n must be positive");
  std::vector<std::string> chosen;
  const fs::path metrics_path = fs::path(ckpts.front()).parent_path() / "metrics.tsv";
  std::map<int, double> dev_loss;
  if (fs::exists(metrics_path)) {
    for (const auto& row : read_metrics(metrics_path.string()).rows)
      if (row.split == "dev" && row.level == "total" && row.epoch != "avg") dev_loss[std::stoi(row.epoch)] = row.loss;
  }
  const std::regex epoch_re(R"(ckpt\.(\d+)\.bin)");
  std::vector<double> losses;
  bool all_known = !dev_loss.empty();
  for (const auto& c : ckpts) {
    std::smatch m;
    const std::string name = fs::path(c).filename().string();
    if (!std::regex_match(name, m, epoch_re) || !dev_loss.count(std::stoi(m[1].str()))) {
      all_known = false;
      break;
    }
    losses.push_back(dev_loss[std::stoi(m[1].str())]);
  }
  if (all_known) {
    for (std::size_t i : select_best(losses, static_cast<std::size_t>(n))) chosen.push_back(ckpts[i]);
  } else {
    const std::size_t skip = ckpts.size() > static_cast<std::size_t>(n) ? ckpts.size() - n : 0;
    chosen.assign(ckpts.begin() + static_cast<std::ptrdiff_t>(skip), ckpts.end());
  }
  std::vector<Checkpoint> loaded;
  for (const auto& c : chosen) loaded.push_back(read_checkpoint(c));
  write_checkpoint(out, average_checkpoints(loaded));
  std::cout << "averaged " << chosen.size() << (all_known ? " (by dev loss):" : " (last n):");
  for (const auto& c : chosen) std::cout << ' ' << fs::path(c).filename().string();
  std::cout << '\n';
  return 0;
}

int cmd_dump_attn(const std::string& ckpt, const std::string& utt, const std::string& out, std::string data) {
  const ModelBundle bundle = load_model(ckpt);
  if (data.empty()) data = bundle.config.data_dir;
  if (data.empty()) throw ConfigError("no data directory recorded for this run; pass --data");
  const Corpus corpus = load_corpus(data);
  for (const auto& f : dump_attention(bundle, find_utterance(corpus, utt), out)) std::cout << f << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical conditional CTC toolkit"};
  app.require_subcommand(1);

  std::string corpus, sizes, out, spec, config, data, ckpt, split = "dev", input, utt;
  std::vector<std::string> ckpts;
  int n = 5;

  auto* bv = app.add_subcommand("build-vocab", "Train one subword vocabulary per size");
  bv->add_option("--corpus", corpus, "Text corpus, one utterance per line")->required();
  bv->add_option("--sizes", sizes, "Comma-separated vocabulary sizes, finest first")->required();
  bv->add_option("--out", out, "Output directory")->required();

  auto* gd = app.add_subcommand("gen-data", "Generate a synthetic corpus");
  gd->add_option("--spec", spec, "Task spec (key=value)")->required();
  gd->add_option("--out", out, "Output directory")->required();

  auto* tr = app.add_subcommand("train", "Train a model");
  tr->add_option("--config", config, "Training config (key=value)")->required();
  tr->add_option("--data", data, "Corpus directory")->required();
  tr->add_option("--out", out, "Run directory")->required();

  auto* ev = app.add_subcommand("eval", "Per-level loss and WER of a checkpoint on one split");
  ev->add_option("--ckpt", ckpt, "Checkpoint")->required();
  ev->add_option("--data", data, "Corpus directory")->required();
  ev->add_option("--split", split, "dev or test");

  auto* de = app.add_subcommand("decode", "Best-path decode features");
  de->add_option("--ckpt", ckpt, "Checkpoint")->required();
  de->add_option("--input", input, "Feature file or manifest")->required();

  auto* av = app.add_subcommand("avg", "Average checkpoints");
  av->add_option("--ckpts", ckpts, "Candidate checkpoints")->required();
  av->add_option("--n", n, "How many to average");
  av->add_option("--out", out, "Output checkpoint")->required();

  auto* da = app.add_subcommand("dump-attn", "Write attention and posterior matrices for one utterance");
  da->add_option("--ckpt", ckpt, "Checkpoint")->required();
  da->add_option("--utt", utt, "Utterance id")->required();
  da->add_option("--out", out, "Output directory")->required();
  da->add_option("--data", data, "Corpus directory (defaults to the one used for training)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*bv) return cmd_build_vocab(corpus, sizes, out);
    if (*gd) return cmd_gen_data(spec, out);
    if (*tr) return cmd_train(config, data, out);
    if (*ev) return cmd_eval(ckpt, data, split);
    if (*de) return cmd_decode(ckpt, input);
    if (*av) return cmd_avg(ckpts, n, out);
    if (*da) return cmd_dump_attn(ckpt, utt, out, data);
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
