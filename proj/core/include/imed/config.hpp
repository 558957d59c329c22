#pragma once

// Run configuration, serialized as a versioned JSON document. Field names
// follow the experiment-parameter table: (mu1, mu2, mu3), alpha, h, l0,
// seeds, share_head, epoch_t, epoch_s, iters.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "imed/component_zoo.hpp"
#include "imed/distillation.hpp"
#include "imed/ensemble_core.hpp"
#include "imed/objectives.hpp"

namespace imed {

inline constexpr int kConfigSchemaVersion = 1;

struct DatasetSpec {
  std::string kind = "moons";  // moons | blobs | rings
  double shift = 30.0;         // degrees for moons, offset for blobs, radial scale for rings
  int n = 1000;                // points per split
  std::uint64_t seed = 0;
  double noise = 0.1;

  nlohmann::json to_json() const;
  static DatasetSpec from_json(const nlohmann::json& j, const std::string& where = "dataset");
};

struct RunConfig {
  int schema_version = kConfigSchemaVersion;
  std::string name = "run";
  std::uint64_t seed = 0;

  double mu1 = 1.0;
  double mu2 = 1.0;
  double mu3 = 1.0;
  double alpha = 1.0;
  Eigen::Index h = 4;
  Eigen::Index tau = kDefaultShareThreshold;
  double l0 = 0.01;
  std::vector<std::uint64_t> seeds{0, 1};
  std::vector<std::string> methods{"cdan_like", "cdan_like"};
  bool share_head = true;
  int epoch_t = 5;
  int epoch_s = 3;
  int iters = 500;
  int batch_size = 32;
  double rho = kDefaultRho;
  bool use_sam = true;
  /// Ramp the reversed domain gradient in with progress (0 -> mu1).
  bool grl_warmup = true;
  double momentum = kDefaultMomentum;
  /// Learning-rate multiplier of the ensemble groups (endogeny, J, D)
  /// relative to the components.
  double ensemble_lr_mult = 0.1;
  /// Gradient-norm cap of the ensemble groups per step; 0 disables.
  double clip_norm = 1.0;

  std::string fusion_kind = "shuffle";
  std::size_t fusion_depth = 2;
  bool instance_aware = true;
  Eigen::Index endogeny_hidden = 256;
  Eigen::Index disc_hidden = 1024;
  Eigen::Index proj_dim = kDefaultProjectionDim;
  bool raw_logit_conditioning = false;
  bool normalize_v1 = true;
  double mcc_temperature = kDefaultMccTemperature;

  std::vector<Eigen::Index> backbone_hidden{64, 64};
  Eigen::Index feature_dim = 32;
  Eigen::Index component_disc_hidden = 64;
  double transfer_weight = 1.0;
  bool components_pretrained = false;
  int pretrain_epochs = 5;

  std::string feature_kd_mode = "softmax";

  DatasetSpec dataset;

  nlohmann::json to_json() const;
  /// Strict parse: unknown fields, wrong types and invalid values raise
  /// ConfigError naming the field.
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::filesystem::path& path);

  /// Cross-field checks (divisibility of h, positive counts, ...).
  void validate() const;

  std::vector<MethodTag> method_tags() const;
  BackboneSpec backbone_spec(Eigen::Index input_dim) const;
  ComponentOptions component_options() const;
  EnsembleConfig ensemble_config(int num_classes) const;
  FeatureKdMode kd_mode() const { return parse_feature_kd_mode(feature_kd_mode); }
  /// Initialization seed of component i (depends on seed and seeds[i] only).
  std::uint64_t component_seed(std::size_t i) const;
};

}  // namespace imed
