#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sre/clustering.hpp"
#include "sre/datagen.hpp"
#include "sre/imaging.hpp"
#include "sre/metrics.hpp"
#include "sre/model.hpp"
#include "sre/report.hpp"

namespace sre {

// --- cohort ----------------------------------------------------------------

struct SubjectRecord {
  std::string id;
  std::string image_path;
  std::string gt_path;  // "-" when absent
  std::string split;    // train | test
};

// One text line per subject: id<TAB>image_path<TAB>gt_path|-<TAB>split
std::vector<SubjectRecord> read_cohort_manifest(const std::string& path);
void write_cohort_manifest(const std::string& path, const std::vector<SubjectRecord>& subjects);

struct SubjectData {
  std::string id;
  std::string split;
  Image image;
  LabelMap gt;
  bool has_gt = false;
};

// Loads images (and ground truth when present), ordered by subject id.
std::vector<SubjectData> load_cohort(const std::string& manifest_path,
                                     const std::string& split_filter = "");
std::vector<SubjectData> cohort_from_tma(const std::vector<SyntheticTma>& cohort,
                                         const std::string& split_filter = "");

// --- feature extraction and segmentation -----------------------------------

struct MaskedFeatures {
  FeatureMatrix x;                          // one row per mask-true grid cell
  std::vector<std::pair<int, int>> cells;   // (y, x) per row, row-major scan
  Mask grid_mask;
  int grid = 0;
};

// Forward to the tap, bilinear-resize the feature map to (grid, grid), and
// keep the embeddings at tissue-mask cells (mask nearest-downsampled from
// image resolution). Throws if the tissue mask is empty.
MaskedFeatures extract_masked_features(Model<float>& model, const Image& img, int tap,
                                       int grid = 128);

// K-means or Gaussian-mixture labeling behind one surface, for the ablation.
struct Clusterer {
  enum class Kind { kKmeans, kGmm };
  Kind kind = Kind::kKmeans;
  int k = 3;
  Centroids km;
  GmmParams gmm;
  bool fitted = false;

  static Clusterer spec(Kind kind, int k) { return Clusterer{kind, k, {}, {}, false}; }
  std::string tag() const;
  int dim() const { return kind == Kind::kKmeans ? km.d : gmm.d; }
  void fit(const FeatureMatrix& x, std::uint64_t seed);
  std::vector<int> predict(const FeatureMatrix& x) const;
};

// Predict labels at all masked grid cells, scatter into a (grid, grid) map
// with IGNORE elsewhere, nearest-upscale to image resolution.
LabelMap segment(Model<float>& model, const Clusterer& clusterer, const Image& img, int tap,
                 int grid = 128);

// --- rotation-consistency analyses ------------------------------------------

enum class PairMode { kAllPairs, kReferenceZero };

struct AnalysisOptions {
  std::vector<double> angles;  // default: 0..330 step 30
  int samples = 2000;          // intra-subject sample count
  int samples_per_subject = 500;
  int tap = 4;
  int grid = 128;
  PairMode pairing = PairMode::kAllPairs;
  std::string dump_dir;  // when set, unrotated label maps are written as PGM
};

std::vector<double> default_angles();

struct SubjectScores {
  std::string subject;
  IccResult icc;
  double kappa = 0.0;
  double dice = 0.0;
  bool sampled_with_replacement = false;
};

struct AnalysisResult {
  std::string analysis;  // "intra" | "inter"
  std::string method;    // clusterer tag
  std::vector<SubjectScores> subjects;
};

struct CohortStats {
  double mean = 0.0;
  double sd = 0.0;
  int count = 0;
};
CohortStats mean_sd(const std::vector<double>& values);
std::vector<double> metric_values(const AnalysisResult& r, const std::string& metric);

// Fit one clusterer per spec on n seeded samples of the 0-degree embeddings,
// then score label consistency across the rotation set. Fitting seeds derive
// from (master_seed, subject id), so results do not depend on cohort order.
std::vector<AnalysisResult> intra_subject_multi(Model<float>& model, const SubjectData& subject,
                                                const std::vector<Clusterer>& specs,
                                                const AnalysisOptions& opt,
                                                std::uint64_t master_seed);

AnalysisResult intra_subject_analysis(Model<float>& model, const SubjectData& subject,
                                      const Clusterer& spec, const AnalysisOptions& opt,
                                      std::uint64_t master_seed);

// Pools samples_per_subject seeded embeddings from every 0-degree training
// subject, fits each spec once, then scores every test subject.
std::vector<AnalysisResult> inter_subject_multi(Model<float>& model,
                                                const std::vector<SubjectData>& train_subjects,
                                                const std::vector<SubjectData>& test_subjects,
                                                const std::vector<Clusterer>& specs,
                                                const AnalysisOptions& opt,
                                                std::uint64_t master_seed);

AnalysisResult inter_subject_analysis(Model<float>& model,
                                      const std::vector<SubjectData>& train_subjects,
                                      const std::vector<SubjectData>& test_subjects,
                                      const Clusterer& spec, const AnalysisOptions& opt,
                                      std::uint64_t master_seed);

// Cross-product of models and clusterers over both analyses.
struct AblationEntry {
  std::string model;
  AnalysisResult result;
};
std::vector<AblationEntry> ablation_run(
    const std::vector<std::pair<std::string, Model<float>*>>& models,
    const std::vector<Clusterer>& specs, const std::vector<SubjectData>& train_subjects,
    const std::vector<SubjectData>& test_subjects, const AnalysisOptions& opt,
    std::uint64_t master_seed);

// --- embedding-space evaluation against ground truth -------------------------

struct EmbeddingEvalResult {
  std::vector<std::pair<std::string, double>> per_subject_dice;
  std::vector<std::string> skipped;  // subjects lacking ground truth
  double mean_dice = 0.0;
  int pca_retained = 0;
};

// PCA (99% cumulative variance) over pooled seeded samples with ground-truth
// labels, kNN (k=3) in the projected space, per-subject Dice of the projected
// classification against ground truth.
EmbeddingEvalResult embedding_eval(Model<float>& model,
                                   const std::vector<SubjectData>& test_subjects,
                                   int samples_per_subject, int tap, int grid,
                                   std::uint64_t master_seed);

// --- report assembly ---------------------------------------------------------

void append_analysis_rows(Report& report, const std::string& model_tag,
                          const AnalysisResult& result);

}  // namespace sre
