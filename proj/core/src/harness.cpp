#include "imed/harness.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <spdlog/spdlog.h>

#include "imed/io.hpp"

namespace imed {

namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

double lr_schedule(double l0, double p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::out_of_range("lr_schedule: progress p=" + std::to_string(p) + " outside [0, 1]");
  }
  return l0 * std::pow(1.0 + 10.0 * p, -0.75);
}

std::vector<int> argmax_rows(const Matrix& logits) {
  std::vector<int> out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < logits.cols(); ++c) {
      if (logits(i, c) > logits(i, best)) best = c;
    }
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

double accuracy(const Matrix& logits, const std::vector<int>& labels) {
  if (static_cast<std::size_t>(logits.rows()) != labels.size() || labels.empty()) {
    throw DimensionError("accuracy: logits rows and label count differ");
  }
  const auto pred = argmax_rows(logits);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += pred[i] == labels[i];
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

json StepRecord::to_json() const {
  json j{{"phase", phase}, {"step", step}, {"lr", lr}};
  for (const auto& [k, v] : values) j[k] = v;
  return j;
}

json MetricsRecord::to_json(bool with_wall_time) const {
  json j{{"transfer_name", transfer_name},
         {"phase", phase},
         {"model", model},
         {"epoch", epoch},
         {"step", step},
         {"source_acc", source_acc},
         {"target_acc", target_acc},
         {"losses", losses}};
  if (!component_target_acc.empty()) j["component_target_acc"] = component_target_acc;
  if (!component_source_acc.empty()) j["component_source_acc"] = component_source_acc;
  if (with_wall_time) j["wall_time"] = wall_time;
  return j;
}

// -- JsonlLog ---------------------------------------------------------------

struct JsonlLog::File {
  fs::path final_path;
  fs::path tmp_path;
  std::ofstream out;

  explicit File(fs::path p) : final_path(std::move(p)) {
    tmp_path = final_path;
    tmp_path += ".tmp";
    out.open(tmp_path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp_path.string());
  }
  void line(const json& j) { out << dump_line(j) << '\n'; }
  void close() {
    if (!out.is_open()) return;
    out.close();
    fs::rename(tmp_path, final_path);
  }
};

JsonlLog::JsonlLog(const fs::path& dir) {
  fs::create_directories(dir);
  steps_ = std::make_unique<File>(dir / "steps.jsonl");
  metrics_ = std::make_unique<File>(dir / "metrics.jsonl");
  timing_ = std::make_unique<File>(dir / "timing.jsonl");
}

JsonlLog::~JsonlLog() {
  try {
    close();
  } catch (...) {
  }
}

void JsonlLog::step(const StepRecord& r) { steps_->line(r.to_json()); }

void JsonlLog::metrics(const MetricsRecord& r) {
  metrics_->line(r.to_json());
  timing_->line({{"phase", r.phase}, {"epoch", r.epoch}, {"wall_time", r.wall_time}});
}

void JsonlLog::close() {
  steps_->close();
  metrics_->close();
  timing_->close();
}

// -- sampling ---------------------------------------------------------------

BatchSampler::BatchSampler(Eigen::Index n, int batch_size, Rng rng)
    : n_(n), batch_(batch_size), rng_(std::move(rng)) {
  if (n_ < batch_) {
    throw ConfigError("batch_size " + std::to_string(batch_) + " exceeds split size " +
                      std::to_string(n_));
  }
  order_.resize(static_cast<std::size_t>(n_));
  reshuffle();
}

void BatchSampler::reshuffle() {
  std::iota(order_.begin(), order_.end(), 0);
  for (std::size_t i = order_.size(); i > 1; --i) {
    std::swap(order_[i - 1], order_[static_cast<std::size_t>(rng_() % i)]);
  }
  pos_ = 0;
}

std::vector<Eigen::Index> BatchSampler::next() {
  if (pos_ + static_cast<std::size_t>(batch_) > order_.size()) reshuffle();
  std::vector<Eigen::Index> out(order_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                order_.begin() + static_cast<std::ptrdiff_t>(pos_ + batch_));
  pos_ += static_cast<std::size_t>(batch_);
  return out;
}

Matrix gather_rows(const Matrix& x, const std::vector<Eigen::Index>& idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(idx[i]);
  return out;
}

std::vector<int> gather(const std::vector<int>& y, const std::vector<Eigen::Index>& idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(y[static_cast<std::size_t>(i)]);
  return out;
}

// -- models -----------------------------------------------------------------

namespace {

struct ComponentOutputs {
  std::vector<Matrix> features;
  std::vector<Matrix> logits;
};

ComponentOutputs run_components(std::vector<ComponentModel>& comps, const Matrix& x) {
  ComponentOutputs out;
  for (auto& c : comps) {
    auto [f, g] = c.evaluate(x);
    out.features.push_back(std::move(f));
    out.logits.push_back(std::move(g));
  }
  return out;
}

void check_dims(const RunConfig& cfg, Eigen::Index input_dim, int num_classes,
                const DatasetBundle& data, const char* who) {
  if (data.input_dim() != input_dim || data.num_classes != num_classes) {
    throw DimensionError(std::string(who) + ": model expects input_dim=" +
                         std::to_string(input_dim) + ", classes=" + std::to_string(num_classes) +
                         " but dataset has input_dim=" + std::to_string(data.input_dim()) +
                         ", classes=" + std::to_string(data.num_classes) + " (config '" +
                         cfg.name + "')");
  }
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

json halt_snapshot(const std::string& phase, long step, int epoch, double lr,
                   const std::map<std::string, double>& last, const std::string& what) {
  json j{{"phase", phase}, {"step", step}, {"epoch", epoch}, {"lr", lr}, {"error", what}};
  json losses = json::object();
  for (const auto& [k, v] : last) losses[k] = std::isfinite(v) ? json(v) : json(std::to_string(v));
  j["last_finite_losses"] = losses;
  return j;
}

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw NonFiniteError(std::string("non-finite ") + what);
}

/// Running means of named scalars over one epoch.
class EpochMeans {
 public:
  void add(const std::map<std::string, double>& values) {
    for (const auto& [k, v] : values) sums_[k] += v;
    ++count_;
  }
  std::map<std::string, double> means() const {
    std::map<std::string, double> out;
    for (const auto& [k, v] : sums_) out[k] = count_ ? v / static_cast<double>(count_) : 0.0;
    return out;
  }

 private:
  std::map<std::string, double> sums_;
  long count_ = 0;
};

}  // namespace

EnsembleOutput Teacher::evaluate(const Matrix& x) {
  auto outs = run_components(components, x);
  return ensemble.evaluate(outs.features, outs.logits);
}

ParamList Teacher::all_params() {
  ParamList p = components_training_params(components);
  for (auto* q : ensemble.model_params()) p.push_back(q);
  for (auto* q : ensemble.disc_params()) p.push_back(q);
  return unique_params(p);
}

std::size_t Teacher::param_count() {
  ParamList p = components_params(components);
  for (auto* q : ensemble.model_params()) p.push_back(q);
  return count_params(p);
}

std::vector<ComponentModel> build_components(const RunConfig& cfg, Eigen::Index input_dim,
                                             int num_classes) {
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i) seeds.push_back(cfg.component_seed(i));
  return make_components(cfg.backbone_spec(input_dim), num_classes, seeds, cfg.method_tags(),
                         cfg.share_head, cfg.component_options());
}

Teacher build_teacher(const RunConfig& cfg, Eigen::Index input_dim, int num_classes) {
  Teacher t;
  t.config = cfg;
  t.input_dim = input_dim;
  t.num_classes = num_classes;
  t.components = build_components(cfg, input_dim, num_classes);
  t.ensemble = EnsembleModel(cfg.ensemble_config(num_classes), derive_seed(cfg.seed, "ensemble-init"));
  return t;
}

Student build_student(const RunConfig& cfg, Eigen::Index input_dim, int num_classes) {
  Student s;
  s.config = cfg;
  s.input_dim = input_dim;
  s.num_classes = num_classes;
  s.model = StudentModel(cfg.backbone_spec(input_dim), num_classes, derive_seed(cfg.seed, "student-init"));
  return s;
}

// -- evaluation -------------------------------------------------------------

MetricsRecord evaluate_components(std::vector<ComponentModel>& comps, const RunConfig& cfg,
                                  const DatasetBundle& data) {
  MetricsRecord r;
  r.transfer_name = cfg.name;
  r.phase = "eval";
  r.model = "components";
  double src = 0.0, tgt = 0.0;
  for (auto& c : comps) {
    const double s = accuracy(c.evaluate(data.source.x).second, data.source.y);
    const double t = accuracy(c.evaluate(data.test.x).second, data.test.y);
    src += s;
    tgt += t;
    r.component_target_acc.push_back(t);
    r.component_source_acc.push_back(s);
  }
  r.source_acc = src / static_cast<double>(comps.size());
  r.target_acc = tgt / static_cast<double>(comps.size());
  return r;
}

MetricsRecord evaluate_teacher(Teacher& teacher, const DatasetBundle& data) {
  check_dims(teacher.config, teacher.input_dim, teacher.num_classes, data, "evaluate");
  MetricsRecord r = evaluate_components(teacher.components, teacher.config, data);
  r.model = "teacher";
  r.source_acc = accuracy(teacher.evaluate(data.source.x).ensemble_logits, data.source.y);
  r.target_acc = accuracy(teacher.evaluate(data.test.x).ensemble_logits, data.test.y);
  return r;
}

MetricsRecord evaluate_student(Student& student, const DatasetBundle& data) {
  check_dims(student.config, student.input_dim, student.num_classes, data, "evaluate");
  MetricsRecord r;
  r.transfer_name = student.config.name;
  r.phase = "eval";
  r.model = "student";
  r.source_acc = accuracy(student.logits(data.source.x), data.source.y);
  r.target_acc = accuracy(student.logits(data.test.x), data.test.y);
  return r;
}

// -- component pre-training -------------------------------------------------

std::vector<ComponentModel> train_components(const RunConfig& cfg, const DatasetBundle& data,
                                             RunLog& log) {
  auto comps = build_components(cfg, data.input_dim(), data.num_classes);
  SgdMomentum opt(components_training_params(comps), cfg.momentum);
  BatchSampler src_s(data.source.size(), cfg.batch_size, make_stream(cfg.seed, "batches/component-source"));
  BatchSampler tgt_s(data.target.size(), cfg.batch_size, make_stream(cfg.seed, "batches/component-target"));
  const long total = static_cast<long>(cfg.pretrain_epochs) * cfg.iters;
  const auto t0 = Clock::now();
  long step = 0;
  std::map<std::string, double> last;
  for (int epoch = 1; epoch <= cfg.pretrain_epochs; ++epoch) {
    EpochMeans means;
    for (int it = 0; it < cfg.iters; ++it, ++step) {
      const double lr = lr_schedule(cfg.l0, static_cast<double>(step) / static_cast<double>(total));
      const auto si = src_s.next(), ti = tgt_s.next();
      const auto src = DomainBatch::source(gather_rows(data.source.x, si), gather(data.source.y, si),
                                           data.num_classes);
      const auto tgt = DomainBatch::target(gather_rows(data.target.x, ti));
      try {
        ad::Tape tape;
        std::vector<ad::Var> objectives;
        double l_comp = 0.0;
        for (auto& c : comps) {
          auto loss = component_loss(c, tape, src, tgt);
          objectives.push_back(loss.objective);
          l_comp += loss.value();
        }
        require_finite(l_comp, "component loss");
        zero_grads(opt.params());
        tape.backward(ad::sum(ad::concat_cols(objectives)));
        require_finite(grad_norm(opt.params()), "component gradient");
        opt.step(lr);
        last = {{"l_comp", l_comp}};
        means.add(last);
        log.step({"component", step, lr, last});
      } catch (const NonFiniteError& e) {
        throw TrainingHalted(e.what(), halt_snapshot("component", step, epoch, lr, last, e.what()));
      }
    }
    if (epoch == cfg.pretrain_epochs) round_to_float32(components_training_params(comps));
    MetricsRecord r = evaluate_components(comps, cfg, data);
    r.phase = "component";
    r.epoch = epoch;
    r.step = step;
    r.losses = means.means();
    r.wall_time = seconds_since(t0);
    log.metrics(r);
    spdlog::info("[{}] component epoch {}/{}: src={:.4f} tgt={:.4f}", cfg.name, epoch,
                 cfg.pretrain_epochs, r.source_acc, r.target_acc);
  }
  if (cfg.pretrain_epochs == 0) round_to_float32(components_training_params(comps));
  return comps;
}

// -- teacher phase ----------------------------------------------------------

Teacher train_teacher(const RunConfig& cfg, const DatasetBundle& data, RunLog& log,
                      const Archive* pretrained_components) {
  Teacher t = build_teacher(cfg, data.input_dim(), data.num_classes);
  if (cfg.components_pretrained) {
    if (!pretrained_components) {
      throw ConfigError("components_pretrained is set but no component checkpoint was given");
    }
    pretrained_components->restore(components_training_params(t.components));
  }

  // Pre-trained components only adapt their heads (theta_G); otherwise F and G train jointly.
  ParamList comp_params;
  if (cfg.components_pretrained) {
    for (auto& c : t.components) {
      for (auto* p : c.head_params()) comp_params.push_back(p);
    }
  } else {
    comp_params = components_training_params(t.components);
  }
  SgdMomentum comp_opt(comp_params, cfg.momentum);
  SgdMomentum model_opt(t.ensemble.model_params(), cfg.momentum);
  SgdMomentum disc_opt(t.ensemble.disc_params(), cfg.momentum);
  TeacherStepOptions step_opts{cfg.mu1, cfg.rho, cfg.mcc_temperature, cfg.use_sam, 1.0,
                               cfg.clip_norm};

  BatchSampler src_s(data.source.size(), cfg.batch_size, make_stream(cfg.seed, "batches/teacher-source"));
  BatchSampler tgt_s(data.target.size(), cfg.batch_size, make_stream(cfg.seed, "batches/teacher-target"));
  const long total = static_cast<long>(cfg.epoch_t) * cfg.iters;
  const auto t0 = Clock::now();
  long step = 0;
  std::map<std::string, double> last;

  auto log_epoch = [&](int epoch, const EpochMeans& means) {
    MetricsRecord r = evaluate_teacher(t, data);
    r.phase = "teacher";
    r.epoch = epoch;
    r.step = step;
    r.losses = means.means();
    r.wall_time = seconds_since(t0);
    log.metrics(r);
    spdlog::info("[{}] teacher epoch {}/{}: src={:.4f} tgt={:.4f}", cfg.name, epoch, cfg.epoch_t,
                 r.source_acc, r.target_acc);
  };

  for (int epoch = 1; epoch <= cfg.epoch_t; ++epoch) {
    EpochMeans means;
    for (int it = 0; it < cfg.iters; ++it, ++step) {
      const double lr = lr_schedule(cfg.l0, static_cast<double>(step) / static_cast<double>(total));
      const auto si = src_s.next(), ti = tgt_s.next();
      const auto src = DomainBatch::source(gather_rows(data.source.x, si), gather(data.source.y, si),
                                           data.num_classes);
      const auto tgt = DomainBatch::target(gather_rows(data.target.x, ti));
      try {
        // Component losses; their outputs (pre-update) feed the ensemble as constants.
        ad::Tape tape;
        std::vector<ad::Var> objectives;
        TeacherBatch batch;
        batch.source_labels = src.require_labels("train_teacher");
        double l_comp = 0.0;
        for (auto& c : t.components) {
          auto loss = component_loss(c, tape, src, tgt);
          objectives.push_back(loss.objective);
          l_comp += loss.value();
          batch.source_features.push_back(loss.source.features.value());
          batch.source_logits.push_back(loss.source.logits.value());
          batch.target_features.push_back(loss.target.features.value());
          batch.target_logits.push_back(loss.target.logits.value());
        }
        require_finite(l_comp, "component loss");
        zero_grads(components_training_params(t.components));
        tape.backward(ad::sum(ad::concat_cols(objectives)));
        require_finite(grad_norm(comp_params), "component gradient");
        comp_opt.step(lr);

        const double p = static_cast<double>(step) / static_cast<double>(total);
        step_opts.grl_scale = cfg.grl_warmup ? grl_warmup(p) : 1.0;
        const TeacherStepStats s = teacher_step(t.ensemble, batch, model_opt, disc_opt,
                                                  lr * cfg.ensemble_lr_mult, step_opts);
        if (step_opts.use_sam && s.grad_norm > 0.0 && cfg.rho > 0.0 &&
            std::abs(s.eps_norm - cfg.rho) > 1e-8) {
          throw std::logic_error("SAM perturbation norm " + std::to_string(s.eps_norm) +
                                 " differs from rho " + std::to_string(cfg.rho));
        }
        last = {{"l_ce", s.l_ce},           {"l_dc", s.l_dc},         {"l_c", s.l_c},
                {"grad_norm", s.grad_norm}, {"eps_norm", s.eps_norm}, {"l_comp", l_comp}};
        means.add(last);
        log.step({"teacher", step, lr, last});
      } catch (const NonFiniteError& e) {
        throw TrainingHalted(e.what(), halt_snapshot("teacher", step, epoch, lr, last, e.what()));
      }
    }
    // The last record describes exactly what the checkpoint stores.
    if (epoch == cfg.epoch_t) round_to_float32(t.all_params());
    log_epoch(epoch, means);
  }
  if (cfg.epoch_t == 0) {
    round_to_float32(t.all_params());
    log_epoch(0, EpochMeans{});
  }
  return t;
}

// -- student phase ----------------------------------------------------------

Student train_student(const RunConfig& cfg, Teacher& teacher, const DatasetBundle& data,
                      RunLog& log) {
  check_dims(cfg, teacher.input_dim, teacher.num_classes, data, "train_student");
  Student st = build_student(cfg, teacher.input_dim, teacher.num_classes);
  SgdMomentum opt(st.model.params(), cfg.momentum);
  const FeatureKdMode mode = cfg.kd_mode();
  if (st.model.feature_dim() != teacher.ensemble.config().feature_dim) {
    throw DimensionError("train_student: student feature width differs from the ensemble feature");
  }

  BatchSampler src_s(data.source.size(), cfg.batch_size, make_stream(cfg.seed, "batches/student-source"));
  BatchSampler tgt_s(data.target.size(), cfg.batch_size, make_stream(cfg.seed, "batches/student-target"));
  const long total = static_cast<long>(cfg.epoch_s) * cfg.iters;
  const auto t0 = Clock::now();
  long step = 0;
  std::map<std::string, double> last;

  auto log_epoch = [&](int epoch, const EpochMeans& means) {
    MetricsRecord r = evaluate_student(st, data);
    r.phase = "student";
    r.epoch = epoch;
    r.step = step;
    r.losses = means.means();
    r.wall_time = seconds_since(t0);
    log.metrics(r);
    spdlog::info("[{}] student epoch {}/{}: src={:.4f} tgt={:.4f}", cfg.name, epoch, cfg.epoch_s,
                 r.source_acc, r.target_acc);
  };

  for (int epoch = 1; epoch <= cfg.epoch_s; ++epoch) {
    EpochMeans means;
    for (int it = 0; it < cfg.iters; ++it, ++step) {
      const double lr = lr_schedule(cfg.l0, static_cast<double>(step) / static_cast<double>(total));
      const auto si = src_s.next(), ti = tgt_s.next();
      const auto src = DomainBatch::source(gather_rows(data.source.x, si), gather(data.source.y, si),
                                           data.num_classes);
      const auto tgt = DomainBatch::target(gather_rows(data.target.x, ti));
      try {
        const auto ts = teacher.evaluate(src.inputs());
        const auto tt = teacher.evaluate(tgt.inputs());
        ad::Tape tape;
        auto ss = st.model.forward(tape, tape.constant(src.inputs()));
        auto stt = st.model.forward(tape, tape.constant(tgt.inputs()));
        ad::Var kd = kd_loss({ts.ensemble_feature, ts.ensemble_logits},
                             {tt.ensemble_feature, tt.ensemble_logits}, ss, stt, cfg.alpha, cfg.mu2, mode);
        ad::Var ce = student_ce(ss.logits, src);
        ad::Var total_loss = student_total(kd, ce, cfg.mu3);
        require_finite(total_loss.scalar(), "student loss");
        zero_grads(opt.params());
        tape.backward(total_loss);
        const double gn = grad_norm(opt.params());
        require_finite(gn, "student gradient");
        opt.step(lr);
        last = {{"l_kd", kd.scalar()}, {"l_ce", ce.scalar()}, {"l_stu", total_loss.scalar()},
                {"grad_norm", gn}};
        means.add(last);
        log.step({"student", step, lr, last});
      } catch (const NonFiniteError& e) {
        throw TrainingHalted(e.what(), halt_snapshot("student", step, epoch, lr, last, e.what()));
      }
    }
    if (epoch == cfg.epoch_s) round_to_float32(st.model.params());
    log_epoch(epoch, means);
  }
  if (cfg.epoch_s == 0) {
    round_to_float32(st.model.params());
    log_epoch(0, EpochMeans{});
  }
  return st;
}

// -- checkpoints ------------------------------------------------------------

namespace {

json model_meta(const std::string& kind, const RunConfig& cfg, Eigen::Index input_dim, int num_classes) {
  return {{"kind", kind}, {"config", cfg.to_json()}, {"input_dim", input_dim}, {"num_classes", num_classes}};
}

struct MetaHeader {
  RunConfig cfg;
  Eigen::Index input_dim;
  int num_classes;
};

MetaHeader read_meta(const Archive& a, const std::string& want) {
  if (archive_kind(a) != want) {
    throw ConfigError("checkpoint holds a " + archive_kind(a) + " model, expected " + want);
  }
  try {
    return {RunConfig::from_json(a.meta.at("config")), a.meta.at("input_dim").get<Eigen::Index>(),
            a.meta.at("num_classes").get<int>()};
  } catch (const json::exception& e) {
    throw IoError(std::string("checkpoint manifest: ") + e.what());
  }
}

}  // namespace

std::string archive_kind(const Archive& a) {
  auto it = a.meta.find("kind");
  if (it == a.meta.end() || !it->is_string()) throw IoError("checkpoint manifest lacks a kind");
  return it->get<std::string>();
}

Archive components_archive(const RunConfig& cfg, std::vector<ComponentModel>& comps,
                           Eigen::Index input_dim, int num_classes) {
  Archive a;
  a.meta = model_meta("components", cfg, input_dim, num_classes);
  a.put(components_training_params(comps));
  return a;
}

Archive teacher_archive(Teacher& t) {
  Archive a;
  a.meta = model_meta("teacher", t.config, t.input_dim, t.num_classes);
  a.meta["ensemble_seed"] = t.ensemble.seed();
  a.meta["fusion_param_total"] = t.ensemble.layout().total();
  a.put(t.all_params());
  return a;
}

Archive student_archive(Student& s) {
  Archive a;
  a.meta = model_meta("student", s.config, s.input_dim, s.num_classes);
  a.put(s.model.params());
  return a;
}

std::vector<ComponentModel> load_components(const Archive& a) {
  auto h = read_meta(a, "components");
  auto comps = build_components(h.cfg, h.input_dim, h.num_classes);
  a.restore(components_training_params(comps));
  return comps;
}

Teacher load_teacher(const Archive& a) {
  auto h = read_meta(a, "teacher");
  Teacher t = build_teacher(h.cfg, h.input_dim, h.num_classes);
  a.restore(t.all_params());
  return t;
}

Student load_student(const Archive& a) {
  auto h = read_meta(a, "student");
  Student s = build_student(h.cfg, h.input_dim, h.num_classes);
  a.restore(s.model.params());
  return s;
}

ParamCounts param_counts(const RunConfig& cfg, Eigen::Index input_dim, int num_classes) {
  ParamCounts c;
  Teacher t = build_teacher(cfg, input_dim, num_classes);
  c.component = count_params(t.components.front().params());
  c.teacher = t.param_count();
  c.fusion_overhead = count_params(t.ensemble.model_params());
  Student s = build_student(cfg, input_dim, num_classes);
  c.student = s.param_count();
  return c;
}

}  // namespace imed
