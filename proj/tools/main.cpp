// sreseg: command-line entry point for the SRE-Conv segmentation toolkit.
//
// Exit codes: 0 success, 2 usage error, 3 data error, 4 invariant violation.
// All randomness flows from --seed; --threads 1 is the (only) supported mode.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "sre/datagen.hpp"
#include "sre/imaging.hpp"
#include "sre/metrics.hpp"
#include "sre/model.hpp"
#include "sre/pipeline.hpp"
#include "sre/report.hpp"
#include "sre/selfcheck.hpp"

namespace fs = std::filesystem;
using namespace sre;

namespace {

struct InvariantViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using KvList = std::vector<std::pair<std::string, std::string>>;

void echo_config(const std::string& out_dir, const std::string& command, KvList kv) {
  fs::create_directories(out_dir);
  KvList all;
  all.push_back({"# command", command});
  for (auto& e : kv) all.push_back(std::move(e));
  write_kv_file(out_dir + "/config.echo", all);
}

// Expand `--config FILE` into --key=value tokens so later explicit flags win.
std::vector<std::string> expand_config_args(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  for (std::size_t i = 0; i < args.size(); ++i) {
    std::string value;
    if (args[i] == "--config" && i + 1 < args.size())
      value = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0)
      value = args[i].substr(9);
    else
      continue;

    std::ifstream f(value);
    if (!f) throw IoError("cannot open config file: " + value);
    std::vector<std::string> expanded;
    std::string line;
    while (std::getline(f, line)) {
      const auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
      };
      const std::string key = trim(line.substr(0, eq));
      const std::string val = trim(line.substr(eq + 1));
      if (!key.empty()) expanded.push_back("--" + key + "=" + val);
    }
    // config values go before user flags: the last occurrence wins in CLI11
    std::vector<std::string> merged(args.begin(), args.begin() + 1);  // subcommand
    merged.insert(merged.end(), expanded.begin(), expanded.end());
    for (std::size_t j = 1; j < args.size(); ++j) {
      if (j == i || j == i + 1) {
        if (args[i] == "--config" && j == i + 1) continue;
        if (j == i) continue;
      }
      merged.push_back(args[j]);
    }
    return merged;
  }
  return args;
}

std::vector<double> parse_angles(const std::string& spec) {
  std::vector<double> out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(std::stod(item));
  if (out.empty()) throw std::invalid_argument("empty angle list");
  return out;
}

std::vector<Clusterer> parse_clusterers(const std::string& spec) {
  std::vector<Clusterer> out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto colon = item.find(':');
    const std::string kind = colon == std::string::npos ? item : item.substr(0, colon);
    const int k = colon == std::string::npos ? 3 : std::stoi(item.substr(colon + 1));
    if (kind == "kmeans")
      out.push_back(Clusterer::spec(Clusterer::Kind::kKmeans, k));
    else if (kind == "gmm")
      out.push_back(Clusterer::spec(Clusterer::Kind::kGmm, k));
    else
      throw std::invalid_argument("unknown clusterer: " + kind);
  }
  if (out.empty()) throw std::invalid_argument("empty clusterer list");
  return out;
}

std::string variant_tag(const Model<float>& model) {
  return model.config().variant == ConvKind::kSre ? "sre" : "standard";
}

// --- gen-data ---------------------------------------------------------------

struct GenDataArgs {
  std::string out;
  std::uint64_t seed = 42;
  int tma_subjects = 20;
  int tma_size = 512;
  int classes = 4;
  int cls_train = 2000;
  int cls_test = 500;
  int cls_size = 64;
};

void write_classification_split(const std::string& dir, const std::string& manifest_path,
                                const LabeledImages& split) {
  fs::create_directories(dir);
  std::ofstream manifest(manifest_path, std::ios::trunc);
  if (!manifest) throw IoError("cannot write manifest: " + manifest_path);
  for (int i = 0; i < split.count(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "img%05d.ppm", i);
    const std::string rel = fs::path(dir).filename().string() + "/" + name;
    Image img(split.images.h, split.images.w, split.images.c);
    const float* src =
        split.images.v.data() + static_cast<std::size_t>(i) * split.images.c *
                                    split.images.h * split.images.w;
    std::copy(src, src + img.v.size(), img.v.begin());
    write_image(dir + "/" + name, img);
    manifest << rel << "\t" << split.labels[i] << "\n";
  }
}

int run_gen_data(const GenDataArgs& a) {
  fs::create_directories(a.out);
  fs::create_directories(a.out + "/tma");

  auto cohort = gen_tma_cohort(a.seed, a.tma_subjects, a.tma_size);
  std::vector<SubjectRecord> records;
  for (const auto& subj : cohort) {
    const std::string img_path = "tma/" + subj.id + ".ppm";
    const std::string gt_path = "tma/" + subj.id + "_gt.pgm";
    write_image(a.out + "/" + img_path, subj.image);
    write_label_map(a.out + "/" + gt_path, subj.ground_truth);
    records.push_back({subj.id, img_path, gt_path, subj.split});
  }
  write_cohort_manifest(a.out + "/tma_manifest.tsv", records);

  auto cls = gen_classification_set(a.seed, a.classes, a.cls_train, a.cls_test, a.cls_size);
  write_classification_split(a.out + "/cls_train", a.out + "/cls_train_manifest.tsv", cls.train);
  write_classification_split(a.out + "/cls_test", a.out + "/cls_test_manifest.tsv", cls.test);

  echo_config(a.out, "gen-data",
              {{"out", a.out},
               {"seed", std::to_string(a.seed)},
               {"tma-subjects", std::to_string(a.tma_subjects)},
               {"tma-size", std::to_string(a.tma_size)},
               {"classes", std::to_string(a.classes)},
               {"cls-train", std::to_string(a.cls_train)},
               {"cls-test", std::to_string(a.cls_test)},
               {"cls-size", std::to_string(a.cls_size)}});
  std::printf("gen-data: wrote %d TMA subjects and %d+%d classification images to %s\n",
              a.tma_subjects, a.cls_train, a.cls_test, a.out.c_str());
  return 0;
}

LabeledImages load_classification_split(const std::string& manifest_path) {
  std::ifstream f(manifest_path);
  if (!f) throw IoError("cannot open manifest: " + manifest_path);
  const fs::path base = fs::path(manifest_path).parent_path();
  std::vector<std::string> paths;
  std::vector<int> labels;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw IoError(manifest_path + ": malformed line");
    paths.push_back((base / line.substr(0, tab)).string());
    labels.push_back(std::stoi(line.substr(tab + 1)));
  }
  if (paths.empty()) throw IoError(manifest_path + ": empty manifest");

  Image first = read_image(paths[0]);
  LabeledImages out;
  out.images = Tensor<float>(static_cast<int>(paths.size()), first.c, first.h, first.w);
  out.labels = labels;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    Image img = i == 0 ? first : read_image(paths[i]);
    std::copy(img.v.begin(), img.v.end(),
              out.images.v.begin() + static_cast<std::size_t>(i) * img.v.size());
  }
  return out;
}

// --- pretrain -----------------------------------------------------------------

struct PretrainArgs {
  std::string data;
  std::string out;
  std::string variant = "sre";
  int epochs = 10;
  int batch = 24;
  double lr = 2e-2;
  double momentum = 0.9;
  std::uint64_t seed = 42;
  int threads = 1;
};

int run_pretrain(const PretrainArgs& a) {
  LabeledImages train = load_classification_split(a.data + "/cls_train_manifest.tsv");
  int num_classes = 0;
  for (int lbl : train.labels) num_classes = std::max(num_classes, lbl + 1);

  ModelConfig cfg;
  cfg.variant = a.variant == "sre" ? ConvKind::kSre : ConvKind::kStandard;
  cfg.num_classes = num_classes;
  cfg.in_channels = train.images.c;
  cfg.input_size = train.images.h;
  cfg.seed = seed_for(a.seed, "model");

  Model<float> model(cfg);
  TrainConfig tc;
  tc.epochs = a.epochs;
  tc.batch_size = a.batch;
  tc.base_lr = a.lr;
  tc.momentum = a.momentum;
  auto history = model.train(train, tc, seed_for(a.seed, "train"));

  model.save(a.out);
  std::ofstream hist(a.out + "/history.csv", std::ios::trunc);
  hist << "epoch,lr,loss,accuracy\n";
  for (std::size_t e = 0; e < history.size(); ++e)
    hist << e << "," << format_value(history[e].lr) << "," << format_value(history[e].loss)
         << "," << format_value(history[e].accuracy) << "\n";

  echo_config(a.out, "pretrain",
              {{"data", a.data},
               {"out", a.out},
               {"variant", a.variant},
               {"epochs", std::to_string(a.epochs)},
               {"batch", std::to_string(a.batch)},
               {"lr", format_value(a.lr)},
               {"momentum", format_value(a.momentum)},
               {"seed", std::to_string(a.seed)},
               {"threads", "1"}});
  std::printf("pretrain: %s model, final loss %.4f, train accuracy %.4f\n", a.variant.c_str(),
              history.back().loss, history.back().accuracy);
  return 0;
}

// --- segment -------------------------------------------------------------------

struct SegmentArgs {
  std::string model_dir;
  std::string image_path;
  std::string out;
  std::string clusterer = "kmeans";
  std::string centroids;  // optional prefix
  int clusters = 3;
  int tap = 4;
  int grid = 128;
  int fit_samples = 2000;
  std::uint64_t seed = 42;
  int threads = 1;
};

int run_segment(const SegmentArgs& a) {
  Model<float> model = Model<float>::load(a.model_dir);
  Image img = read_image(a.image_path);

  Clusterer clusterer =
      Clusterer::spec(a.clusterer == "gmm" ? Clusterer::Kind::kGmm : Clusterer::Kind::kKmeans,
                      a.clusters);
  if (!a.centroids.empty()) {
    if (clusterer.kind != Clusterer::Kind::kKmeans)
      throw std::invalid_argument("--centroids supports kmeans only");
    clusterer.km = load_centroids(a.centroids);
    clusterer.k = clusterer.km.k;
    clusterer.fitted = true;
  } else {
    MaskedFeatures f = extract_masked_features(model, img, a.tap, a.grid);
    Rng rng(seed_for(a.seed, "segment-sample"));
    std::vector<int> idx;
    if (f.x.n <= a.fit_samples) {
      idx.resize(f.x.n);
      for (int i = 0; i < f.x.n; ++i) idx[i] = i;
    } else {
      std::vector<int> all(f.x.n);
      for (int i = 0; i < f.x.n; ++i) all[i] = i;
      for (int i = 0; i < a.fit_samples; ++i) {
        const int j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(f.x.n - i)));
        std::swap(all[i], all[j]);
        idx.push_back(all[i]);
      }
    }
    FeatureMatrix sample(static_cast<int>(idx.size()), f.x.d);
    for (std::size_t i = 0; i < idx.size(); ++i)
      std::copy(f.x.row(idx[i]), f.x.row(idx[i]) + f.x.d, sample.row(static_cast<int>(i)));
    clusterer.fit(sample, seed_for(a.seed, "segment-cluster"));
  }

  LabelMap labels = segment(model, clusterer, img, a.tap, a.grid);
  write_label_map(a.out, labels);
  const std::string echo_dir = fs::path(a.out).parent_path().string();
  echo_config(echo_dir.empty() ? "." : echo_dir, "segment",
              {{"model", a.model_dir},
               {"image", a.image_path},
               {"out", a.out},
               {"clusterer", a.clusterer},
               {"clusters", std::to_string(a.clusters)},
               {"tap", std::to_string(a.tap)},
               {"grid", std::to_string(a.grid)},
               {"fit-samples", std::to_string(a.fit_samples)},
               {"seed", std::to_string(a.seed)},
               {"threads", "1"}});
  std::printf("segment: wrote %s\n", a.out.c_str());
  return 0;
}

// --- eval-intra / eval-inter ----------------------------------------------------

struct EvalArgs {
  std::string model_dir;
  std::string cohort;
  std::string out;
  std::string angles = "0,30,60,90,120,150,180,210,240,270,300,330";
  std::string clusterer = "kmeans";
  std::string pairing = "allpairs";
  int clusters = 3;
  int samples = 2000;
  int samples_per_subject = 500;
  int tap = 4;
  int grid = 128;
  std::uint64_t seed = 42;
  bool dump_labelmaps = false;
  int threads = 1;
};

AnalysisOptions options_from(const EvalArgs& a) {
  AnalysisOptions opt;
  opt.angles = parse_angles(a.angles);
  opt.samples = a.samples;
  opt.samples_per_subject = a.samples_per_subject;
  opt.tap = a.tap;
  opt.grid = a.grid;
  opt.pairing = a.pairing == "ref0" ? PairMode::kReferenceZero : PairMode::kAllPairs;
  if (a.dump_labelmaps) opt.dump_dir = a.out + "/labelmaps";
  return opt;
}

KvList eval_kv(const EvalArgs& a, const std::string& extra_key = "", const std::string& extra = "") {
  KvList kv{{"model", a.model_dir},
            {"cohort", a.cohort},
            {"out", a.out},
            {"angles", a.angles},
            {"clusterer", a.clusterer},
            {"clusters", std::to_string(a.clusters)},
            {"samples", std::to_string(a.samples)},
            {"samples-per-subject", std::to_string(a.samples_per_subject)},
            {"tap", std::to_string(a.tap)},
            {"grid", std::to_string(a.grid)},
            {"pairing", a.pairing},
            {"seed", std::to_string(a.seed)},
            {"threads", "1"}};
  if (!extra_key.empty()) kv.push_back({extra_key, extra});
  return kv;
}

int run_eval_intra(const EvalArgs& a) {
  Model<float> model = Model<float>::load(a.model_dir);
  auto subjects = load_cohort(a.cohort, "test");
  if (subjects.empty()) throw IoError("no test subjects in cohort " + a.cohort);
  const AnalysisOptions opt = options_from(a);
  const Clusterer spec =
      Clusterer::spec(a.clusterer == "gmm" ? Clusterer::Kind::kGmm : Clusterer::Kind::kKmeans,
                      a.clusters);

  AnalysisResult all;
  all.analysis = "intra";
  all.method = spec.tag();
  for (const auto& subj : subjects) {
    AnalysisResult r = intra_subject_analysis(model, subj, spec, opt, a.seed);
    all.subjects.push_back(r.subjects[0]);
  }
  Report report;
  append_analysis_rows(report, variant_tag(model), all);
  fs::create_directories(a.out);
  report.write_csv(a.out + "/report.csv");
  report.write_jsonl(a.out + "/report.jsonl");
  echo_config(a.out, "eval-intra", eval_kv(a));
  std::printf("eval-intra: %zu subjects -> %s/report.csv\n", subjects.size(), a.out.c_str());
  return 0;
}

int run_eval_inter(const EvalArgs& a) {
  Model<float> model = Model<float>::load(a.model_dir);
  auto train_subjects = load_cohort(a.cohort, "train");
  auto test_subjects = load_cohort(a.cohort, "test");
  const AnalysisOptions opt = options_from(a);
  const Clusterer spec =
      Clusterer::spec(a.clusterer == "gmm" ? Clusterer::Kind::kGmm : Clusterer::Kind::kKmeans,
                      a.clusters);
  AnalysisResult result =
      inter_subject_analysis(model, train_subjects, test_subjects, spec, opt, a.seed);

  Report report;
  append_analysis_rows(report, variant_tag(model), result);
  fs::create_directories(a.out);
  report.write_csv(a.out + "/report.csv");
  report.write_jsonl(a.out + "/report.jsonl");
  echo_config(a.out, "eval-inter", eval_kv(a));
  std::printf("eval-inter: %zu train / %zu test -> %s/report.csv\n", train_subjects.size(),
              test_subjects.size(), a.out.c_str());
  return 0;
}

// --- ablate ----------------------------------------------------------------------

struct AblateArgs {
  EvalArgs base;
  std::string models;      // tag=dir,tag=dir
  std::string clusterers = "kmeans:2,kmeans:3,kmeans:4,gmm:3";
};

int run_ablate(const AblateArgs& a) {
  std::vector<std::pair<std::string, Model<float>>> loaded;
  {
    std::stringstream ss(a.models);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item.empty()) continue;
      const auto eq = item.find('=');
      if (eq == std::string::npos)
        throw std::invalid_argument("--models expects tag=dir pairs: " + item);
      loaded.emplace_back(item.substr(0, eq), Model<float>::load(item.substr(eq + 1)));
    }
  }
  if (loaded.empty()) throw std::invalid_argument("--models is empty");

  auto specs = parse_clusterers(a.clusterers);
  auto train_subjects = load_cohort(a.base.cohort, "train");
  auto test_subjects = load_cohort(a.base.cohort, "test");
  const AnalysisOptions opt = options_from(a.base);

  std::vector<std::pair<std::string, Model<float>*>> model_ptrs;
  for (auto& [tag, model] : loaded) model_ptrs.push_back({tag, &model});
  auto entries = ablation_run(model_ptrs, specs, train_subjects, test_subjects, opt, a.base.seed);

  Report report;
  for (const auto& e : entries) append_analysis_rows(report, e.model, e.result);
  fs::create_directories(a.base.out);
  report.write_csv(a.base.out + "/report.csv");
  report.write_jsonl(a.base.out + "/report.jsonl");
  KvList kv = eval_kv(a.base, "clusterers", a.clusterers);
  kv.push_back({"models", a.models});
  echo_config(a.base.out, "ablate", kv);
  std::printf("ablate: %zu table rows -> %s/report.csv\n", entries.size(), a.base.out.c_str());
  return 0;
}

// --- embed-eval --------------------------------------------------------------------

int run_embed_eval(const EvalArgs& a) {
  Model<float> model = Model<float>::load(a.model_dir);
  auto subjects = load_cohort(a.cohort, "test");
  EmbeddingEvalResult result =
      embedding_eval(model, subjects, a.samples_per_subject, a.tap, a.grid, a.seed);

  Report report;
  const std::string tag = variant_tag(model);
  for (const auto& [id, d] : result.per_subject_dice)
    report.add(id, tag, "embed", "dice", d);
  report.add("mean", tag, "embed", "dice", result.mean_dice);
  report.add("cohort", tag, "embed", "pca_retained", result.pca_retained);
  for (const auto& id : result.skipped) report.add(id, tag, "embed", "skipped_no_gt", 1.0);
  fs::create_directories(a.out);
  report.write_csv(a.out + "/report.csv");
  report.write_jsonl(a.out + "/report.jsonl");
  echo_config(a.out, "embed-eval", eval_kv(a));
  std::printf("embed-eval: mean dice %.4f over %zu subjects -> %s/report.csv\n",
              result.mean_dice, result.per_subject_dice.size(), a.out.c_str());
  return 0;
}

// --- check-equivariance ---------------------------------------------------------------

int run_check_equivariance(std::uint64_t seed) {
  auto results = run_equivariance_suite(seed);
  bool all_pass = true;
  for (const auto& r : results) {
    std::printf("[%s] %-34s measured=%.3e limit=%.3e\n", r.pass ? "PASS" : "FAIL",
                r.name.c_str(), r.measure, r.limit);
    all_pass = all_pass && r.pass;
  }
  if (!all_pass) throw InvariantViolation("equivariance suite failed");
  std::printf("check-equivariance: %zu checks passed\n", results.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Symmetric rotation-equivariant convolution toolkit"};
  std::string config_sink;
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* cmd_gen = app.add_subcommand("gen-data", "Generate the synthetic datasets");
  cmd_gen->add_option("--out", gen.out)->required();
  cmd_gen->add_option("--seed", gen.seed);
  cmd_gen->add_option("--tma-subjects", gen.tma_subjects);
  cmd_gen->add_option("--tma-size", gen.tma_size);
  cmd_gen->add_option("--classes", gen.classes);
  cmd_gen->add_option("--cls-train", gen.cls_train);
  cmd_gen->add_option("--cls-test", gen.cls_test);
  cmd_gen->add_option("--cls-size", gen.cls_size);
  cmd_gen->add_option("--config", config_sink, "flat key=value config file (flags override)");

  PretrainArgs pre;
  auto* cmd_pre = app.add_subcommand("pretrain", "Train a model on the classification set");
  cmd_pre->add_option("--data", pre.data)->required();
  cmd_pre->add_option("--out", pre.out)->required();
  cmd_pre->add_option("--variant", pre.variant)->check(CLI::IsMember({"sre", "standard"}));
  cmd_pre->add_option("--epochs", pre.epochs);
  cmd_pre->add_option("--batch", pre.batch);
  cmd_pre->add_option("--lr", pre.lr);
  cmd_pre->add_option("--momentum", pre.momentum);
  cmd_pre->add_option("--seed", pre.seed);
  cmd_pre->add_option("--threads", pre.threads);
  cmd_pre->add_option("--config", config_sink, "flat key=value config file (flags override)");

  SegmentArgs seg;
  auto* cmd_seg = app.add_subcommand("segment", "Unsupervised segmentation of one image");
  cmd_seg->add_option("--model", seg.model_dir)->required();
  cmd_seg->add_option("--image", seg.image_path)->required();
  cmd_seg->add_option("--out", seg.out)->required();
  cmd_seg->add_option("--clusterer", seg.clusterer)->check(CLI::IsMember({"kmeans", "gmm"}));
  cmd_seg->add_option("--centroids", seg.centroids);
  cmd_seg->add_option("--clusters", seg.clusters);
  cmd_seg->add_option("--tap", seg.tap);
  cmd_seg->add_option("--grid", seg.grid);
  cmd_seg->add_option("--fit-samples", seg.fit_samples);
  cmd_seg->add_option("--seed", seg.seed);
  cmd_seg->add_option("--threads", seg.threads);
  cmd_seg->add_option("--config", config_sink, "flat key=value config file (flags override)");

  EvalArgs intra;
  auto* cmd_intra = app.add_subcommand("eval-intra", "Intra-subject rotation analysis");
  EvalArgs inter;
  auto* cmd_inter = app.add_subcommand("eval-inter", "Inter-subject rotation analysis");
  EvalArgs embed;
  auto* cmd_embed = app.add_subcommand("embed-eval", "Embedding-space ground-truth evaluation");
  AblateArgs ablate;
  auto* cmd_ablate = app.add_subcommand("ablate", "Model x clusterer ablation table");

  auto add_eval_options = [&config_sink](CLI::App* cmd, EvalArgs& a, bool with_model) {
    std::string* config_sink_ptr = &config_sink;
    if (with_model) cmd->add_option("--model", a.model_dir)->required();
    cmd->add_option("--cohort", a.cohort)->required();
    cmd->add_option("--out", a.out)->required();
    cmd->add_option("--angles", a.angles);
    cmd->add_option("--clusterer", a.clusterer)->check(CLI::IsMember({"kmeans", "gmm"}));
    cmd->add_option("--clusters", a.clusters);
    cmd->add_option("--samples", a.samples);
    cmd->add_option("--samples-per-subject", a.samples_per_subject);
    cmd->add_option("--tap", a.tap);
    cmd->add_option("--grid", a.grid);
    cmd->add_option("--pairing", a.pairing)->check(CLI::IsMember({"allpairs", "ref0"}));
    cmd->add_option("--seed", a.seed);
    cmd->add_flag("--dump-labelmaps", a.dump_labelmaps);
    cmd->add_option("--threads", a.threads);
    cmd->add_option("--config", *config_sink_ptr, "flat key=value config file (flags override)");
  };
  add_eval_options(cmd_intra, intra, true);
  add_eval_options(cmd_inter, inter, true);
  add_eval_options(cmd_embed, embed, true);
  add_eval_options(cmd_ablate, ablate.base, false);
  cmd_ablate->add_option("--models", ablate.models)->required();
  cmd_ablate->add_option("--clusterers", ablate.clusterers);

  std::uint64_t check_seed = 42;
  auto* cmd_check = app.add_subcommand("check-equivariance", "Run the invariant suite");
  cmd_check->add_option("--seed", check_seed);

  try {
    const auto args = expand_config_args(argc, argv);
    std::vector<const char*> cargs{argv[0]};
    for (const auto& s : args) cargs.push_back(s.c_str());
    app.parse(static_cast<int>(cargs.size()), cargs.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error: type=usage msg=\"%s\"\n", e.what());
    return 2;
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: type=data msg=\"%s\"\n", e.what());
    return 3;
  }

  try {
    if (cmd_gen->parsed()) return run_gen_data(gen);
    if (cmd_pre->parsed()) return run_pretrain(pre);
    if (cmd_seg->parsed()) return run_segment(seg);
    if (cmd_intra->parsed()) return run_eval_intra(intra);
    if (cmd_inter->parsed()) return run_eval_inter(inter);
    if (cmd_embed->parsed()) return run_embed_eval(embed);
    if (cmd_ablate->parsed()) return run_ablate(ablate);
    if (cmd_check->parsed()) return run_check_equivariance(check_seed);
  } catch (const InvariantViolation& e) {
    std::fprintf(stderr, "error: type=invariant msg=\"%s\"\n", e.what());
    return 4;
  } catch (const FormatError& e) {
    std::fprintf(stderr, "error: type=data msg=\"%s\"\n", e.what());
    return 3;
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: type=data msg=\"%s\"\n", e.what());
    return 3;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: type=data msg=\"%s\"\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: type=internal msg=\"%s\"\n", e.what());
    return 3;
  }
  return 0;
}
