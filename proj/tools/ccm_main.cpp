#include <CLI11.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ccm/config.hpp"
#include "ccm/evaluate.hpp"
#include "ccm/model.hpp"
#include "ccm/perturb.hpp"
#include "ccm/report.hpp"
#include "ccm/textio.hpp"
#include "ccm/toyvqa.hpp"
#include "ccm/trainer.hpp"

namespace {

using ccm::RunConfig;

class Timer {
 public:
  Timer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

// Option storage shared by the subcommands. Every config key gets a flag of
// the same name; seed, out_dir, data and model have dedicated spellings.
struct CliState {
  std::string config_path;
  std::string seed;
  std::string out_dir;
  std::string data;
  std::string model;
  std::map<std::string, std::string> key_flags;

  int gen_count = 1000;
  std::string gen_out;

  std::string eval_name;
  std::string rank_metric = "spearman";

  std::string kind = "gaussian_feature";
  std::vector<double> intensities;
  std::vector<double> mask_probs;
  int samples = 50;
  std::string sweep_metric = "bleu1";
  std::string sweep_out;

  std::string explanations_path;
  std::string scores_path;
  double alpha = 0.05;
  std::vector<std::string> sweep_inputs;
};

void add_config_flags(CLI::App* sub, CliState& st) {
  sub->add_option("--config", st.config_path, "flat key = value configuration file");
  sub->add_option("--seed", st.seed, "master random seed");
  sub->add_option("--out-dir", st.out_dir, "directory for output files");
  for (const auto& key : RunConfig::keys()) {
    if (key == "seed" || key == "out_dir" || key == "data" || key == "model")
      continue;
    sub->add_option("--" + key, st.key_flags[key], "config key " + key);
  }
}

bool flag_given(const CLI::App* sub, const std::string& name) {
  const CLI::Option* opt = sub->get_option_no_throw(name);
  return opt != nullptr && opt->count() > 0;
}

// defaults, then the config file, then any flag that was actually given.
RunConfig resolve_config(const CLI::App* sub, const CliState& st) {
  RunConfig cfg;
  if (flag_given(sub, "--config"))
    cfg.apply_text(ccm::read_text_file(st.config_path), st.config_path);
  for (const auto& [key, value] : st.key_flags)
    if (flag_given(sub, "--" + key)) cfg.set(key, value);
  if (flag_given(sub, "--seed")) cfg.set("seed", st.seed);
  if (flag_given(sub, "--out-dir")) cfg.set("out_dir", st.out_dir);
  if (flag_given(sub, "--data")) cfg.set("data", st.data);
  if (flag_given(sub, "--model")) cfg.set("model", st.model);
  cfg.validate();
  return cfg;
}

std::string join_path(const std::string& dir, const std::string& name) {
  if (dir.empty() || dir == ".") return name;
  return dir.back() == '/' ? dir + name : dir + "/" + name;
}

void ensure_out_dir(const RunConfig& cfg) {
  const std::string dir = cfg.out_dir();
  if (!dir.empty() && dir != ".") std::filesystem::create_directories(dir);
}

struct LoadedData {
  std::vector<ccm::EncodedInstance> instances;
  ccm::Vocabulary vocab;
  uint64_t checksum = 0;
};

LoadedData load_encoded(const RunConfig& cfg) {
  const std::string path = cfg.data_path();
  if (path.empty())
    throw std::invalid_argument("no dataset given (use --data or the data key)");
  LoadedData out;
  const auto raw = ccm::load_dataset(path);
  out.vocab = ccm::build_vocab(raw);
  auto encoded = ccm::encode_instances(raw, out.vocab);
  out.checksum = ccm::file_checksum(path);

  const std::string split = cfg.split();
  if (split == "all") {
    out.instances = std::move(encoded);
  } else {
    auto splits = ccm::split_dataset(encoded, {});
    if (split == "train") out.instances = std::move(splits.train);
    if (split == "val") out.instances = std::move(splits.val);
    if (split == "test") out.instances = std::move(splits.test);
  }
  return out;
}

int run_gen_data(const CLI::App* sub, CliState& st) {
  const RunConfig cfg = resolve_config(sub, st);
  ensure_out_dir(cfg);
  const std::string out = flag_given(sub, "--out")
                              ? st.gen_out
                              : join_path(cfg.out_dir(), "dataset.jsonl");
  const auto instances = ccm::generate_dataset(st.gen_count, cfg.seed(), cfg.gen_options());
  ccm::save_dataset(instances, out);
  const ccm::Vocabulary vocab = ccm::build_vocab(instances);
  std::cout << "wrote " << instances.size() << " instances to " << out
            << " (vocab: question=" << vocab.question.size()
            << " explanation=" << vocab.explanation.size()
            << " answer=" << vocab.answer.size() << ")\n";
  return 0;
}

int run_train(const CLI::App* sub, CliState& st) {
  const RunConfig cfg = resolve_config(sub, st);
  ensure_out_dir(cfg);

  Timer load_timer;
  const LoadedData data = load_encoded(cfg);
  const double load_seconds = load_timer.seconds();

  ccm::CcmModel model(cfg.train_config().variant, cfg.model_dims(data.vocab),
                      data.vocab.checksum(), cfg.seed());
  ccm::write_text_file(join_path(cfg.out_dir(), "manifest.txt"),
                       ccm::render_manifest(cfg, data.checksum));

  Timer train_timer;
  const ccm::TrainHistory history = ccm::train(model, data.instances, cfg.train_config());
  const double train_seconds = train_timer.seconds();

  Timer write_timer;
  model.save(join_path(cfg.out_dir(), "model.ccm"));
  ccm::write_text_file(join_path(cfg.out_dir(), "history.csv"),
                       ccm::history_to_csv(history));
  const double write_seconds = write_timer.seconds();
  ccm::write_text_file(join_path(cfg.out_dir(), "timings.txt"),
                       ccm::render_timings({{"load", load_seconds},
                                            {"train", train_seconds},
                                            {"write", write_seconds}}));

  const ccm::EpochStats& last = history.back();
  std::cout << "trained " << cfg.get("variant") << " for " << history.size()
            << " epochs on " << data.instances.size()
            << " instances: accuracy " << ccm::format_csv_number(last.accuracy)
            << ", L_y " << ccm::format_csv_number(last.l_y) << ", L_e "
            << ccm::format_csv_number(last.l_e) << "\n";
  std::cout << "wrote model.ccm, history.csv, manifest.txt, timings.txt to "
            << cfg.out_dir() << "\n";
  return 0;
}

int run_eval(const CLI::App* sub, CliState& st) {
  const RunConfig cfg = resolve_config(sub, st);
  if (cfg.model_path().empty())
    throw std::invalid_argument("no model given (use --model or the model key)");
  if (st.rank_metric != "spearman" && st.rank_metric != "kendall")
    throw std::invalid_argument("rank metric must be spearman or kendall");
  ensure_out_dir(cfg);

  const ccm::CcmModel model = ccm::CcmModel::load(cfg.model_path());
  const LoadedData data = load_encoded(cfg);
  const ccm::RankMethod method = st.rank_metric == "kendall"
                                     ? ccm::RankMethod::kKendall
                                     : ccm::RankMethod::kSpearman;
  const ccm::EvalReport report =
      ccm::evaluate_model(model, data.instances, data.vocab, method);

  const std::string name = flag_given(sub, "--name")
                               ? st.eval_name
                               : std::string(ccm::variant_name(model.variant()));
  ccm::write_text_file(join_path(cfg.out_dir(), "metrics.csv"),
                       ccm::metrics_to_csv(report, name));
  ccm::write_text_file(join_path(cfg.out_dir(), "rank_correlation.csv"),
                       ccm::ranks_to_csv(report));
  std::string lines;
  for (const auto& e : report.explanations) {
    lines += e;
    lines += '\n';
  }
  ccm::write_text_file(join_path(cfg.out_dir(), "explanations.txt"), lines);

  std::cout << "evaluated " << name << " on " << data.instances.size()
            << " instances:";
  for (const auto& row : report.metrics)
    std::cout << " " << row.metric << "=" << ccm::format_csv_number(row.score);
  std::cout << "\n";
  std::cout << "wrote metrics.csv, rank_correlation.csv, explanations.txt to "
            << cfg.out_dir() << "\n";
  return 0;
}

std::vector<double> default_intensities(ccm::PerturbKind kind) {
  switch (kind) {
    case ccm::PerturbKind::kGaussianFeature:
    case ccm::PerturbKind::kCombined:
      return {0, 1, 2, 3, 4, 5};
    case ccm::PerturbKind::kMaskWords:
    case ccm::PerturbKind::kReplaceWords:
      return {0, 0.05, 0.1, 0.15, 0.2, 0.25};
    case ccm::PerturbKind::kBlur:
      return {0, 0.5, 1, 1.5, 2, 2.5};
  }
  return {};
}

int run_perturb(const CLI::App* sub, CliState& st) {
  const RunConfig cfg = resolve_config(sub, st);
  if (cfg.model_path().empty())
    throw std::invalid_argument("no model given (use --model or the model key)");
  ensure_out_dir(cfg);

  ccm::SweepSpec spec;
  spec.kind = ccm::parse_perturb_kind(st.kind);
  spec.intensities = flag_given(sub, "--intensities") ? st.intensities
                                                     : default_intensities(spec.kind);
  if (flag_given(sub, "--mask-probs")) spec.mask_probs = st.mask_probs;
  if (spec.kind == ccm::PerturbKind::kCombined && spec.mask_probs.empty())
    spec.mask_probs = {0, 0.05, 0.1, 0.15, 0.2, 0.25};
  spec.samples = st.samples;
  spec.seed = cfg.seed();
  spec.metric = st.sweep_metric;

  const ccm::CcmModel model = ccm::CcmModel::load(cfg.model_path());
  const LoadedData data = load_encoded(cfg);
  const ccm::SweepResult result =
      ccm::robustness_sweep(model, data.instances, data.vocab, spec);

  const std::string out = flag_given(sub, "--out")
                              ? st.sweep_out
                              : join_path(cfg.out_dir(), "sweep.csv");
  ccm::write_text_file(out, ccm::sweep_to_csv(result));
  std::cout << "swept " << st.kind << " over " << spec.intensities.size()
            << " intensities x " << spec.samples << " samples ("
            << spec.metric << ") into " << out << "\n";
  return 0;
}

int run_report(const CLI::App* sub, CliState& st) {
  const RunConfig cfg = resolve_config(sub, st);
  if (st.explanations_path.empty() && st.scores_path.empty() &&
      st.sweep_inputs.empty())
    throw std::invalid_argument(
        "report needs at least one of --explanations, --scores or --sweep");
  ensure_out_dir(cfg);

  std::vector<std::string> written;
  if (!st.explanations_path.empty()) {
    const std::string text = ccm::read_text_file(st.explanations_path);
    std::vector<std::string> lines;
    std::size_t pos = 0;
    while (pos < text.size()) {
      std::size_t eol = text.find('\n', pos);
      if (eol == std::string::npos) eol = text.size();
      lines.push_back(text.substr(pos, eol - pos));
      pos = eol + 1;
    }
    ccm::write_text_file(join_path(cfg.out_dir(), "sunburst.csv"),
                         ccm::sunburst_csv(lines));
    written.push_back("sunburst.csv");
  }
  if (!st.scores_path.empty()) {
    const auto matrix = ccm::parse_score_matrix(
        ccm::read_text_file(st.scores_path), st.scores_path);
    ccm::write_text_file(join_path(cfg.out_dir(), "cd.csv"),
                         ccm::cd_csv(matrix, st.alpha));
    written.push_back("cd.csv");
  }
  if (!st.sweep_inputs.empty()) {
    std::vector<ccm::NamedSweep> sweeps;
    for (const auto& input : st.sweep_inputs) {
      const std::size_t eq = input.find('=');
      if (eq == std::string::npos || eq == 0 || eq + 1 == input.size())
        throw std::invalid_argument("--sweep expects model=path, got '" + input +
                                    "'");
      sweeps.push_back({input.substr(0, eq), input.substr(eq + 1),
                        ccm::read_text_file(input.substr(eq + 1))});
    }
    ccm::write_text_file(join_path(cfg.out_dir(), "curves.csv"),
                         ccm::curves_csv(sweeps));
    written.push_back("curves.csv");
  }

  std::cout << "wrote";
  for (std::size_t i = 0; i < written.size(); ++i)
    std::cout << (i == 0 ? " " : ", ") << written[i];
  std::cout << " to " << cfg.out_dir() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CliState st;
  CLI::App app{"toy VQA answer+explanation models with adversarial correlation"};
  app.require_subcommand(1);

  CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  add_config_flags(gen, st);
  gen->add_option("-n,--count", st.gen_count, "number of instances")
      ->check(CLI::Range(1, 1000000000));
  gen->add_option("--out", st.gen_out, "dataset path (default out_dir/dataset.jsonl)");

  CLI::App* train = app.add_subcommand("train", "train a model variant");
  add_config_flags(train, st);
  train->add_option("--data", st.data, "dataset file from gen-data");

  CLI::App* eval = app.add_subcommand("eval", "score a trained model");
  add_config_flags(eval, st);
  eval->add_option("--model", st.model, "trained model file");
  eval->add_option("--data", st.data, "dataset file from gen-data");
  eval->add_option("--name", st.eval_name, "model label in metrics.csv");
  eval->add_option("--rank-metric", st.rank_metric,
                   "attention rank statistic: spearman or kendall");

  CLI::App* perturb = app.add_subcommand("perturb", "robustness sweep");
  add_config_flags(perturb, st);
  perturb->add_option("--model", st.model, "trained model file");
  perturb->add_option("--data", st.data, "dataset file from gen-data");
  perturb
      ->add_option("--kind", st.kind,
                   "gaussian_feature, mask_words, replace_words, blur or combined")
      ->check(CLI::IsMember({"gaussian_feature", "mask_words", "replace_words",
                             "blur", "combined"}));
  perturb->add_option("--intensities", st.intensities, "comma-separated intensities")
      ->delimiter(',');
  perturb
      ->add_option("--mask-probs", st.mask_probs,
                   "comma-separated mask probabilities for kind=combined")
      ->delimiter(',');
  perturb->add_option("--samples", st.samples, "noise draws per intensity")
      ->check(CLI::Range(1, 1000000));
  perturb->add_option("--metric", st.sweep_metric, "corpus metric to track");
  perturb->add_option("--out", st.sweep_out, "sweep path (default out_dir/sweep.csv)");

  CLI::App* report = app.add_subcommand("report", "emit plot-ready report files");
  add_config_flags(report, st);
  report->add_option("--explanations", st.explanations_path,
                     "explanations.txt from eval; emits sunburst.csv");
  report->add_option("--scores", st.scores_path,
                     "model x condition score matrix; emits cd.csv");
  report->add_option("--alpha", st.alpha, "significance level for the CD, 0.05 or 0.10");
  report->add_option("--sweep", st.sweep_inputs,
                     "model=path sweep CSV (repeatable); emits curves.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return run_gen_data(gen, st);
    if (train->parsed()) return run_train(train, st);
    if (eval->parsed()) return run_eval(eval, st);
    if (perturb->parsed()) return run_perturb(perturb, st);
    if (report->parsed()) return run_report(report, st);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
