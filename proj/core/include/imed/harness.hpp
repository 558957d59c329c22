#pragma once

// Training pipeline: optional component pre-training, the teacher phase
// (components + ensemble with SAM) and the student phase (distillation),
// plus evaluation and checkpoint round trips.
//
// Determinism: every random draw comes from a stream derived from
// RunConfig::seed, so (config, data, platform) fixes the whole log stream.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "imed/checkpoint.hpp"
#include "imed/config.hpp"
#include "imed/datasets.hpp"
#include "imed/distillation.hpp"
#include "imed/ensemble_core.hpp"
#include "imed/objectives.hpp"

namespace imed {

/// l0 * (1 + 10 p)^(-0.75); p is progress within the current phase.
double lr_schedule(double l0, double p);

/// Top-1 accuracy; ties resolve to the lowest class index.
double accuracy(const Matrix& logits, const std::vector<int>& labels);
std::vector<int> argmax_rows(const Matrix& logits);

struct StepRecord {
  std::string phase;
  long step = 0;
  double lr = 0.0;
  std::map<std::string, double> values;

  nlohmann::json to_json() const;
};

struct MetricsRecord {
  std::string transfer_name;
  std::string phase;  // component | teacher | student | eval
  std::string model;  // components | teacher | student
  int epoch = 0;
  long step = 0;
  double source_acc = 0.0;
  double target_acc = 0.0;
  std::map<std::string, double> losses;
  /// Target accuracy of each component (teacher and component phases).
  std::vector<double> component_target_acc;
  std::vector<double> component_source_acc;
  double wall_time = 0.0;

  /// wall_time is left out unless asked for, keeping metric streams reproducible.
  nlohmann::json to_json(bool with_wall_time = false) const;
};

class RunLog {
 public:
  virtual ~RunLog() = default;
  virtual void step(const StepRecord&) {}
  virtual void metrics(const MetricsRecord&) {}
};

class MemoryLog : public RunLog {
 public:
  void step(const StepRecord& r) override { steps.push_back(r); }
  void metrics(const MetricsRecord& r) override { records.push_back(r); }

  std::vector<StepRecord> steps;
  std::vector<MetricsRecord> records;
};

/// Streams steps.jsonl, metrics.jsonl and timing.jsonl into `dir`. Lines go
/// to *.tmp files that close() renames into place.
class JsonlLog : public RunLog {
 public:
  explicit JsonlLog(const std::filesystem::path& dir);
  ~JsonlLog() override;
  JsonlLog(const JsonlLog&) = delete;
  JsonlLog& operator=(const JsonlLog&) = delete;

  void step(const StepRecord& r) override;
  void metrics(const MetricsRecord& r) override;
  void close();

 private:
  struct File;
  std::unique_ptr<File> steps_, metrics_, timing_;
};

/// Thrown when a loss or gradient turns non-finite; carries the snapshot.
class TrainingHalted : public std::runtime_error {
 public:
  TrainingHalted(const std::string& what, nlohmann::json snapshot)
      : std::runtime_error(what), snapshot_(std::move(snapshot)) {}
  const nlohmann::json& snapshot() const { return snapshot_; }

 private:
  nlohmann::json snapshot_;
};

/// Epoch-wise reshuffled index stream; drops the ragged tail of each pass.
class BatchSampler {
 public:
  BatchSampler(Eigen::Index n, int batch_size, Rng rng);
  std::vector<Eigen::Index> next();

 private:
  void reshuffle();
  Eigen::Index n_;
  int batch_;
  Rng rng_;
  std::vector<Eigen::Index> order_;
  std::size_t pos_ = 0;
};

Matrix gather_rows(const Matrix& x, const std::vector<Eigen::Index>& idx);
std::vector<int> gather(const std::vector<int>& y, const std::vector<Eigen::Index>& idx);

struct Teacher {
  RunConfig config;
  Eigen::Index input_dim = 0;
  int num_classes = 0;
  std::vector<ComponentModel> components;
  EnsembleModel ensemble;

  /// Ensemble logits (and feature) for raw inputs.
  EnsembleOutput evaluate(const Matrix& x);
  /// Everything a checkpoint stores, discriminators included.
  ParamList all_params();
  /// Deployable parameters: component backbones and heads plus theta_E, theta_J.
  std::size_t param_count();
};

struct Student {
  RunConfig config;
  Eigen::Index input_dim = 0;
  int num_classes = 0;
  StudentModel model;

  Matrix logits(const Matrix& x) { return model.evaluate(x).second; }
  std::size_t param_count() { return count_params(model.params()); }
};

/// Fresh, untrained models for a configuration.
std::vector<ComponentModel> build_components(const RunConfig& cfg, Eigen::Index input_dim,
                                             int num_classes);
Teacher build_teacher(const RunConfig& cfg, Eigen::Index input_dim, int num_classes);
Student build_student(const RunConfig& cfg, Eigen::Index input_dim, int num_classes);

/// Each component trained alone on its own loss for pretrain_epochs x iters steps.
std::vector<ComponentModel> train_components(const RunConfig& cfg, const DatasetBundle& data,
                                             RunLog& log);

/// The teacher phase. With components_pretrained the components must be given
/// (a components archive) and only their heads are updated.
Teacher train_teacher(const RunConfig& cfg, const DatasetBundle& data, RunLog& log,
                      const Archive* pretrained_components = nullptr);

/// Distills the frozen teacher into a fresh student; the teacher is not modified.
Student train_student(const RunConfig& cfg, Teacher& teacher, const DatasetBundle& data,
                      RunLog& log);

MetricsRecord evaluate_teacher(Teacher& teacher, const DatasetBundle& data);
MetricsRecord evaluate_student(Student& student, const DatasetBundle& data);
MetricsRecord evaluate_components(std::vector<ComponentModel>& comps, const RunConfig& cfg,
                                  const DatasetBundle& data);

Archive components_archive(const RunConfig& cfg, std::vector<ComponentModel>& comps,
                           Eigen::Index input_dim, int num_classes);
Archive teacher_archive(Teacher& teacher);
Archive student_archive(Student& student);
std::vector<ComponentModel> load_components(const Archive& a);
Teacher load_teacher(const Archive& a);
Student load_student(const Archive& a);
/// "components", "teacher" or "student".
std::string archive_kind(const Archive& a);

/// Parameter counts of the deployable models for one configuration.
struct ParamCounts {
  std::size_t component = 0;  // one component (backbone + head)
  std::size_t student = 0;
  std::size_t teacher = 0;  // all components (shared head once) + endogeny + ensemble head
  std::size_t fusion_overhead = 0;  // endogeny (or static fusion) + ensemble head
};
ParamCounts param_counts(const RunConfig& cfg, Eigen::Index input_dim, int num_classes);

}  // namespace imed
