#include "sre/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace sre {

// ---------------------------------------------------------------------------
// cohort
// ---------------------------------------------------------------------------

std::vector<SubjectRecord> read_cohort_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open cohort manifest: " + path);
  std::vector<SubjectRecord> out;
  std::string line;
  int line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    SubjectRecord rec;
    if (!std::getline(ss, rec.id, '\t') || !std::getline(ss, rec.image_path, '\t') ||
        !std::getline(ss, rec.gt_path, '\t') || !std::getline(ss, rec.split, '\t'))
      throw IoError(path + ": malformed manifest line " + std::to_string(line_no));
    if (rec.split != "train" && rec.split != "test")
      throw IoError(path + ": bad split on line " + std::to_string(line_no));
    out.push_back(std::move(rec));
  }
  return out;
}

void write_cohort_manifest(const std::string& path, const std::vector<SubjectRecord>& subjects) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot write cohort manifest: " + path);
  for (const auto& s : subjects)
    f << s.id << "\t" << s.image_path << "\t" << (s.gt_path.empty() ? "-" : s.gt_path) << "\t"
      << s.split << "\n";
}

std::vector<SubjectData> load_cohort(const std::string& manifest_path,
                                     const std::string& split_filter) {
  auto records = read_cohort_manifest(manifest_path);
  std::sort(records.begin(), records.end(),
            [](const SubjectRecord& a, const SubjectRecord& b) { return a.id < b.id; });
  std::vector<SubjectData> out;
  for (const auto& rec : records) {
    if (!split_filter.empty() && rec.split != split_filter) continue;
    SubjectData s;
    s.id = rec.id;
    s.split = rec.split;
    s.image = read_image(rec.image_path);
    if (!rec.gt_path.empty() && rec.gt_path != "-") {
      s.gt = read_label_map(rec.gt_path);
      s.has_gt = true;
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<SubjectData> cohort_from_tma(const std::vector<SyntheticTma>& cohort,
                                         const std::string& split_filter) {
  std::vector<SubjectData> out;
  for (const auto& t : cohort) {
    if (!split_filter.empty() && t.split != split_filter) continue;
    SubjectData s;
    s.id = t.id;
    s.split = t.split;
    s.image = t.image;
    s.gt = t.ground_truth;
    s.has_gt = true;
    out.push_back(std::move(s));
  }
  std::sort(out.begin(), out.end(),
            [](const SubjectData& a, const SubjectData& b) { return a.id < b.id; });
  return out;
}

// ---------------------------------------------------------------------------
// features and segmentation
// ---------------------------------------------------------------------------

MaskedFeatures extract_masked_features(Model<float>& model, const Image& img, int tap,
                                       int grid) {
  Tensor<float> x = image_to_tensor(img);
  Tensor<float> f = model.forward_features(x, tap);

  Tensor<float> resized(1, f.c, grid, grid);
  for (int c = 0; c < f.c; ++c)
    resize_plane_bilinear(f.plane(0, c), f.h, f.w, resized.plane(0, c), grid, grid);

  Mask grid_mask = resize_mask(tissue_mask(img), grid, grid);
  const int rows = grid_mask.count();
  if (rows == 0) throw std::invalid_argument("extract_masked_features: empty tissue mask");

  MaskedFeatures out;
  out.grid = grid;
  out.grid_mask = grid_mask;
  out.x = FeatureMatrix(rows, f.c);
  out.cells.reserve(rows);
  int row = 0;
  for (int y = 0; y < grid; ++y)
    for (int xx = 0; xx < grid; ++xx) {
      if (!grid_mask.at(y, xx)) continue;
      float* dst = out.x.row(row);
      for (int c = 0; c < f.c; ++c) dst[c] = resized.at(0, c, y, xx);
      out.cells.push_back({y, xx});
      ++row;
    }
  return out;
}

std::string Clusterer::tag() const {
  return (kind == Kind::kKmeans ? "kmeans" : "gmm") + std::to_string(k);
}

void Clusterer::fit(const FeatureMatrix& x, std::uint64_t seed) {
  if (kind == Kind::kKmeans)
    km = kmeans_fit(x, k, seed);
  else
    gmm = gmm_fit(x, k, seed);
  fitted = true;
}

std::vector<int> Clusterer::predict(const FeatureMatrix& x) const {
  if (!fitted) throw std::logic_error("Clusterer::predict before fit");
  return kind == Kind::kKmeans ? kmeans_predict(km, x) : gmm_predict(gmm, x);
}

namespace {

LabelMap scatter_to_grid(const MaskedFeatures& f, const std::vector<int>& labels) {
  LabelMap grid_map(f.grid, f.grid);
  for (std::size_t i = 0; i < f.cells.size(); ++i)
    grid_map.set(f.cells[i].first, f.cells[i].second, labels[i]);
  return grid_map;
}

}  // namespace

LabelMap segment(Model<float>& model, const Clusterer& clusterer, const Image& img, int tap,
                 int grid) {
  MaskedFeatures f = extract_masked_features(model, img, tap, grid);
  if (clusterer.dim() != f.x.d)
    throw std::invalid_argument("segment: clusterer dimensionality mismatch");
  LabelMap grid_map = scatter_to_grid(f, clusterer.predict(f.x));
  return resize_label_map(grid_map, img.h, img.w);
}

// ---------------------------------------------------------------------------
// rotation-consistency scoring
// ---------------------------------------------------------------------------

std::vector<double> default_angles() {
  std::vector<double> a;
  for (int i = 0; i < 12; ++i) a.push_back(30.0 * i);
  return a;
}

CohortStats mean_sd(const std::vector<double>& values) {
  CohortStats s;
  s.count = static_cast<int>(values.size());
  if (values.empty()) return s;
  for (double v : values) s.mean += v;
  s.mean /= values.size();
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / (values.size() - 1));
  }
  return s;
}

std::vector<double> metric_values(const AnalysisResult& r, const std::string& metric) {
  std::vector<double> out;
  for (const auto& s : r.subjects) {
    if (metric == "icc") {
      if (s.icc.has_value) out.push_back(s.icc.value);
    } else if (metric == "kappa") {
      out.push_back(s.kappa);
    } else if (metric == "dice") {
      out.push_back(s.dice);
    }
  }
  return out;
}

namespace {

// Sample `n` row indices; without replacement when possible, otherwise with
// replacement (flagged).
std::vector<int> sample_rows(int rows, int n, Rng& rng, bool& with_replacement) {
  std::vector<int> idx;
  idx.reserve(n);
  if (rows >= n) {
    with_replacement = false;
    std::vector<int> all(rows);
    for (int i = 0; i < rows; ++i) all[i] = i;
    for (int i = 0; i < n; ++i) {
      const int j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(rows - i)));
      std::swap(all[i], all[j]);
      idx.push_back(all[i]);
    }
  } else {
    with_replacement = true;
    for (int i = 0; i < n; ++i)
      idx.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(rows))));
  }
  return idx;
}

FeatureMatrix take_rows(const FeatureMatrix& x, const std::vector<int>& idx) {
  FeatureMatrix out(static_cast<int>(idx.size()), x.d);
  for (std::size_t i = 0; i < idx.size(); ++i)
    std::copy(x.row(idx[i]), x.row(idx[i]) + x.d, out.row(static_cast<int>(i)));
  return out;
}

// Per-angle grid-resolution label vector: segment the rotated image, upscale,
// rotate the label map back, then downsample to grid resolution.
void per_angle_grid_labels(Model<float>& model, const Image& img,
                           const std::string& subject_id, const std::vector<Clusterer>& fitted,
                           const AnalysisOptions& opt, std::vector<std::vector<int>>* storage) {
  if (!opt.dump_dir.empty()) std::filesystem::create_directories(opt.dump_dir);
  // storage[c * angles + a] = label vector for clusterer c at angle a
  storage->assign(fitted.size() * opt.angles.size(), {});
  for (std::size_t a = 0; a < opt.angles.size(); ++a) {
    const double angle = opt.angles[a];
    const Image rotated = rotate_image(img, angle, Interp::kBilinear, 1.0f);
    MaskedFeatures f = extract_masked_features(model, rotated, opt.tap, opt.grid);
    for (std::size_t c = 0; c < fitted.size(); ++c) {
      LabelMap grid_map = scatter_to_grid(f, fitted[c].predict(f.x));
      LabelMap full = resize_label_map(grid_map, img.h, img.w);
      LabelMap back = rotate_label_map(full, -angle);
      if (!opt.dump_dir.empty()) {
        char name[128];
        std::snprintf(name, sizeof(name), "%s_%s_a%03d.pgm", subject_id.c_str(),
                      fitted[c].tag().c_str(), static_cast<int>(std::lround(angle)));
        write_label_map(opt.dump_dir + "/" + name, back);
      }
      LabelMap down = resize_label_map(back, opt.grid, opt.grid);
      (*storage)[c * opt.angles.size() + a] = std::move(down.v);
    }
  }
}

SubjectScores score_from_labels(const std::string& subject_id,
                                const std::vector<const std::vector<int>*>& angle_labels,
                                PairMode pairing) {
  const std::size_t n_angles = angle_labels.size();
  const std::size_t cells = angle_labels[0]->size();

  // intersection of valid masks across all rotations
  std::vector<int> valid;
  for (std::size_t i = 0; i < cells; ++i) {
    bool ok = true;
    for (const auto* v : angle_labels)
      if ((*v)[i] == kIgnoreLabel) {
        ok = false;
        break;
      }
    if (ok) valid.push_back(static_cast<int>(i));
  }
  if (valid.size() < 2)
    throw std::invalid_argument("rotation scoring: mask intersection nearly empty");

  std::vector<std::vector<int>> compressed(n_angles, std::vector<int>(valid.size()));
  for (std::size_t a = 0; a < n_angles; ++a)
    for (std::size_t i = 0; i < valid.size(); ++i)
      compressed[a][i] = (*angle_labels[a])[valid[i]];

  SubjectScores s;
  s.subject = subject_id;

  RatingsMatrix m(static_cast<int>(valid.size()), static_cast<int>(n_angles));
  for (std::size_t i = 0; i < valid.size(); ++i)
    for (std::size_t a = 0; a < n_angles; ++a)
      m.at(static_cast<int>(i), static_cast<int>(a)) = compressed[a][i];
  s.icc = icc(m);

  double kappa_sum = 0.0, dice_sum = 0.0;
  int pairs = 0;
  if (pairing == PairMode::kAllPairs) {
    for (std::size_t a = 0; a < n_angles; ++a)
      for (std::size_t b = a + 1; b < n_angles; ++b) {
        kappa_sum += cohen_kappa(compressed[a], compressed[b]);
        dice_sum += dice(compressed[a], compressed[b]);
        ++pairs;
      }
  } else {
    for (std::size_t b = 1; b < n_angles; ++b) {
      kappa_sum += cohen_kappa(compressed[0], compressed[b]);
      dice_sum += dice(compressed[0], compressed[b]);
      ++pairs;
    }
  }
  if (pairs == 0) throw std::invalid_argument("rotation scoring: need at least two angles");
  s.kappa = kappa_sum / pairs;
  s.dice = dice_sum / pairs;
  return s;
}

}  // namespace

std::vector<AnalysisResult> intra_subject_multi(Model<float>& model, const SubjectData& subject,
                                                const std::vector<Clusterer>& specs,
                                                const AnalysisOptions& opt,
                                                std::uint64_t master_seed) {
  if (opt.angles.empty()) throw std::invalid_argument("intra_subject_analysis: no angles");

  MaskedFeatures f0 = extract_masked_features(model, subject.image, opt.tap, opt.grid);
  Rng sample_rng(seed_for(master_seed, "intra-sample:" + subject.id));
  bool with_replacement = false;
  const auto idx = sample_rows(f0.x.n, opt.samples, sample_rng, with_replacement);
  const FeatureMatrix sample = take_rows(f0.x, idx);

  std::vector<Clusterer> fitted = specs;
  for (auto& c : fitted)
    c.fit(sample, seed_for(master_seed, "intra-cluster:" + subject.id + ":" + c.tag()));

  std::vector<std::vector<int>> storage;
  per_angle_grid_labels(model, subject.image, subject.id, fitted, opt, &storage);

  std::vector<AnalysisResult> out;
  for (std::size_t c = 0; c < fitted.size(); ++c) {
    AnalysisResult r;
    r.analysis = "intra";
    r.method = fitted[c].tag();
    std::vector<const std::vector<int>*> ptrs;
    for (std::size_t a = 0; a < opt.angles.size(); ++a)
      ptrs.push_back(&storage[c * opt.angles.size() + a]);
    SubjectScores s = score_from_labels(subject.id, ptrs, opt.pairing);
    s.sampled_with_replacement = with_replacement;
    r.subjects.push_back(std::move(s));
    out.push_back(std::move(r));
  }
  return out;
}

AnalysisResult intra_subject_analysis(Model<float>& model, const SubjectData& subject,
                                      const Clusterer& spec, const AnalysisOptions& opt,
                                      std::uint64_t master_seed) {
  return intra_subject_multi(model, subject, {spec}, opt, master_seed)[0];
}

std::vector<AnalysisResult> inter_subject_multi(Model<float>& model,
                                                const std::vector<SubjectData>& train_subjects,
                                                const std::vector<SubjectData>& test_subjects,
                                                const std::vector<Clusterer>& specs,
                                                const AnalysisOptions& opt,
                                                std::uint64_t master_seed) {
  if (train_subjects.empty() || test_subjects.empty())
    throw std::invalid_argument("inter_subject_analysis: empty split");
  if (opt.angles.empty()) throw std::invalid_argument("inter_subject_analysis: no angles");

  FeatureMatrix pooled;
  bool any_replacement = false;
  for (const auto& subj : train_subjects) {
    MaskedFeatures f0 = extract_masked_features(model, subj.image, opt.tap, opt.grid);
    Rng rng(seed_for(master_seed, "inter-sample:" + subj.id));
    bool with_replacement = false;
    const auto idx = sample_rows(f0.x.n, opt.samples_per_subject, rng, with_replacement);
    any_replacement = any_replacement || with_replacement;
    if (pooled.d == 0) pooled = FeatureMatrix(0, f0.x.d);
    const int base = pooled.n;
    pooled.n += static_cast<int>(idx.size());
    pooled.v.resize(static_cast<std::size_t>(pooled.n) * pooled.d);
    for (std::size_t i = 0; i < idx.size(); ++i)
      std::copy(f0.x.row(idx[i]), f0.x.row(idx[i]) + f0.x.d,
                pooled.row(base + static_cast<int>(i)));
  }

  std::vector<Clusterer> fitted = specs;
  for (auto& c : fitted)
    c.fit(pooled, seed_for(master_seed, "inter-cluster:" + c.tag()));

  std::vector<AnalysisResult> out(specs.size());
  for (std::size_t c = 0; c < specs.size(); ++c) {
    out[c].analysis = "inter";
    out[c].method = fitted[c].tag();
  }
  for (const auto& subj : test_subjects) {
    std::vector<std::vector<int>> storage;
    per_angle_grid_labels(model, subj.image, subj.id, fitted, opt, &storage);
    for (std::size_t c = 0; c < fitted.size(); ++c) {
      std::vector<const std::vector<int>*> ptrs;
      for (std::size_t a = 0; a < opt.angles.size(); ++a)
        ptrs.push_back(&storage[c * opt.angles.size() + a]);
      SubjectScores s = score_from_labels(subj.id, ptrs, opt.pairing);
      s.sampled_with_replacement = any_replacement;
      out[c].subjects.push_back(std::move(s));
    }
  }
  return out;
}

AnalysisResult inter_subject_analysis(Model<float>& model,
                                      const std::vector<SubjectData>& train_subjects,
                                      const std::vector<SubjectData>& test_subjects,
                                      const Clusterer& spec, const AnalysisOptions& opt,
                                      std::uint64_t master_seed) {
  return inter_subject_multi(model, train_subjects, test_subjects, {spec}, opt, master_seed)[0];
}

std::vector<AblationEntry> ablation_run(
    const std::vector<std::pair<std::string, Model<float>*>>& models,
    const std::vector<Clusterer>& specs, const std::vector<SubjectData>& train_subjects,
    const std::vector<SubjectData>& test_subjects, const AnalysisOptions& opt,
    std::uint64_t master_seed) {
  std::vector<AblationEntry> out;
  for (const auto& [tag, model] : models) {
    // intra: per-subject fits, extraction shared across clusterers
    std::vector<AnalysisResult> intra(specs.size());
    for (std::size_t c = 0; c < specs.size(); ++c) {
      intra[c].analysis = "intra";
      intra[c].method = specs[c].tag();
    }
    for (const auto& subj : test_subjects) {
      auto results = intra_subject_multi(*model, subj, specs, opt, master_seed);
      for (std::size_t c = 0; c < specs.size(); ++c)
        intra[c].subjects.push_back(results[c].subjects[0]);
    }
    auto inter = inter_subject_multi(*model, train_subjects, test_subjects, specs, opt,
                                     master_seed);
    for (auto& r : intra) out.push_back({tag, std::move(r)});
    for (auto& r : inter) out.push_back({tag, std::move(r)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// embedding evaluation
// ---------------------------------------------------------------------------

EmbeddingEvalResult embedding_eval(Model<float>& model,
                                   const std::vector<SubjectData>& test_subjects,
                                   int samples_per_subject, int tap, int grid,
                                   std::uint64_t master_seed) {
  EmbeddingEvalResult result;

  struct SubjectFeatures {
    const SubjectData* subj;
    MaskedFeatures f;
    std::vector<int> gt_grid_labels;  // per feature row
  };
  std::vector<SubjectFeatures> prepared;
  FeatureMatrix pooled;
  std::vector<int> pooled_labels;

  for (const auto& subj : test_subjects) {
    if (!subj.has_gt) {
      result.skipped.push_back(subj.id);
      continue;
    }
    SubjectFeatures sf{&subj, extract_masked_features(model, subj.image, tap, grid), {}};
    LabelMap gt_grid = resize_label_map(subj.gt, grid, grid);
    sf.gt_grid_labels.resize(sf.f.cells.size());
    std::vector<int> labeled_rows;
    for (std::size_t i = 0; i < sf.f.cells.size(); ++i) {
      sf.gt_grid_labels[i] = gt_grid.at(sf.f.cells[i].first, sf.f.cells[i].second);
      if (sf.gt_grid_labels[i] != kIgnoreLabel) labeled_rows.push_back(static_cast<int>(i));
    }
    if (labeled_rows.empty()) {
      result.skipped.push_back(subj.id);
      continue;
    }
    Rng rng(seed_for(master_seed, "embed-sample:" + subj.id));
    bool with_replacement = false;
    std::vector<int> pick = sample_rows(static_cast<int>(labeled_rows.size()),
                                        samples_per_subject, rng, with_replacement);
    if (pooled.d == 0) pooled = FeatureMatrix(0, sf.f.x.d);
    for (int p : pick) {
      const int row = labeled_rows[p];
      pooled.v.insert(pooled.v.end(), sf.f.x.row(row), sf.f.x.row(row) + sf.f.x.d);
      ++pooled.n;
      pooled_labels.push_back(sf.gt_grid_labels[row]);
    }
    prepared.push_back(std::move(sf));
  }
  if (prepared.empty())
    throw std::invalid_argument("embedding_eval: no subject has ground truth");

  PcaBasis basis = pca_fit(pooled, 0.99);
  result.pca_retained = basis.retained;
  FeatureMatrix train_proj = pca_project(basis, pooled);

  double dice_sum = 0.0;
  for (const auto& sf : prepared) {
    FeatureMatrix proj = pca_project(basis, sf.f.x);
    std::vector<int> pred = knn_classify(train_proj, pooled_labels, 3, proj);
    LabelMap grid_map(grid, grid);
    for (std::size_t i = 0; i < sf.f.cells.size(); ++i)
      grid_map.set(sf.f.cells[i].first, sf.f.cells[i].second, pred[i]);
    LabelMap full = resize_label_map(grid_map, sf.subj->image.h, sf.subj->image.w);
    const double d = dice(full, sf.subj->gt);
    result.per_subject_dice.push_back({sf.subj->id, d});
    dice_sum += d;
  }
  result.mean_dice = dice_sum / prepared.size();
  return result;
}

// ---------------------------------------------------------------------------
// report assembly
// ---------------------------------------------------------------------------

void append_analysis_rows(Report& report, const std::string& model_tag,
                          const AnalysisResult& result) {
  const std::string method = result.analysis + ":" + result.method;
  for (const auto& s : result.subjects) {
    if (s.icc.has_value)
      report.add(s.subject, model_tag, method, "icc", s.icc.value);
    else
      report.add(s.subject, model_tag, method, "icc_no_variance", 1.0);
    report.add(s.subject, model_tag, method, "kappa", s.kappa);
    report.add(s.subject, model_tag, method, "dice", s.dice);
    if (s.sampled_with_replacement)
      report.add(s.subject, model_tag, method, "sampled_with_replacement", 1.0);
  }
  for (const char* metric : {"icc", "kappa", "dice"}) {
    const auto values = metric_values(result, metric);
    if (values.empty()) continue;
    const CohortStats stats = mean_sd(values);
    report.add("mean", model_tag, method, metric, stats.mean);
    report.add("sd", model_tag, method, metric, stats.sd);
  }
}

}  // namespace sre
