#include "imed/config.hpp"

#include <fstream>
#include <set>

namespace imed {

using nlohmann::json;

namespace {

class FieldReader {
 public:
  FieldReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected a JSON object");
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      check_type<T>(*it, key);
      out = it->template get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(field(key) + ": " + e.what());
    }
  }

  void mark(const char* key) { seen_.insert(key); }

  void reject_unknown() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(field(it.key()) + ": unknown field");
    }
  }

  std::string field(const std::string& key) const { return "field '" + where_ + "." + key + "'"; }

 private:
  template <typename T>
  void check_type(const json& v, const char* key) const {
    auto fail = [&](const char* want) { throw ConfigError(field(key) + ": expected " + want); };
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) fail("a boolean");
    } else if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T>) {
      if (!v.is_number_integer() || v.get<long long>() < 0) fail("a non-negative integer");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) fail("an integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) fail("a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) fail("a string");
    } else {
      if (!v.is_array()) fail("an array");
    }
  }

  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& field, const std::string& msg) {
  if (!ok) throw ConfigError("field '" + field + "': " + msg);
}

}  // namespace

json DatasetSpec::to_json() const {
  return {{"kind", kind}, {"shift", shift}, {"n", n}, {"seed", seed}, {"noise", noise}};
}

DatasetSpec DatasetSpec::from_json(const json& j, const std::string& where) {
  DatasetSpec d;
  FieldReader r(j, where);
  r.read("kind", d.kind);
  r.read("shift", d.shift);
  r.read("n", d.n);
  r.read("seed", d.seed);
  r.read("noise", d.noise);
  r.reject_unknown();
  require(d.kind == "moons" || d.kind == "blobs" || d.kind == "rings", where + ".kind",
          "expected one of moons, blobs, rings");
  require(d.n >= 2, where + ".n", "must be at least 2");
  require(d.noise >= 0.0, where + ".noise", "must be non-negative");
  return d;
}

json RunConfig::to_json() const {
  return {{"schema_version", schema_version},
          {"name", name},
          {"seed", seed},
          {"mu1", mu1},
          {"mu2", mu2},
          {"mu3", mu3},
          {"alpha", alpha},
          {"h", h},
          {"tau", tau},
          {"l0", l0},
          {"seeds", seeds},
          {"methods", methods},
          {"share_head", share_head},
          {"epoch_t", epoch_t},
          {"epoch_s", epoch_s},
          {"iters", iters},
          {"batch_size", batch_size},
          {"rho", rho},
          {"use_sam", use_sam},
          {"grl_warmup", grl_warmup},
          {"momentum", momentum},
          {"ensemble_lr_mult", ensemble_lr_mult},
          {"clip_norm", clip_norm},
          {"fusion_kind", fusion_kind},
          {"fusion_depth", fusion_depth},
          {"instance_aware", instance_aware},
          {"endogeny_hidden", endogeny_hidden},
          {"disc_hidden", disc_hidden},
          {"proj_dim", proj_dim},
          {"raw_logit_conditioning", raw_logit_conditioning},
          {"normalize_v1", normalize_v1},
          {"mcc_temperature", mcc_temperature},
          {"backbone_hidden", backbone_hidden},
          {"feature_dim", feature_dim},
          {"component_disc_hidden", component_disc_hidden},
          {"transfer_weight", transfer_weight},
          {"components_pretrained", components_pretrained},
          {"pretrain_epochs", pretrain_epochs},
          {"feature_kd_mode", feature_kd_mode},
          {"dataset", dataset.to_json()}};
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig c;
  FieldReader r(j, "config");
  r.read("schema_version", c.schema_version);
  if (c.schema_version != kConfigSchemaVersion) {
    throw ConfigError(r.field("schema_version") + ": unsupported version " +
                      std::to_string(c.schema_version) + " (expected " +
                      std::to_string(kConfigSchemaVersion) + ")");
  }
  r.read("name", c.name);
  r.read("seed", c.seed);
  r.read("mu1", c.mu1);
  r.read("mu2", c.mu2);
  r.read("mu3", c.mu3);
  r.read("alpha", c.alpha);
  r.read("h", c.h);
  r.read("tau", c.tau);
  r.read("l0", c.l0);
  r.read("seeds", c.seeds);
  r.read("methods", c.methods);
  r.read("share_head", c.share_head);
  r.read("epoch_t", c.epoch_t);
  r.read("epoch_s", c.epoch_s);
  r.read("iters", c.iters);
  r.read("batch_size", c.batch_size);
  r.read("rho", c.rho);
  r.read("use_sam", c.use_sam);
  r.read("grl_warmup", c.grl_warmup);
  r.read("momentum", c.momentum);
  r.read("ensemble_lr_mult", c.ensemble_lr_mult);
  r.read("clip_norm", c.clip_norm);
  r.read("fusion_kind", c.fusion_kind);
  r.read("fusion_depth", c.fusion_depth);
  r.read("instance_aware", c.instance_aware);
  r.read("endogeny_hidden", c.endogeny_hidden);
  r.read("disc_hidden", c.disc_hidden);
  r.read("proj_dim", c.proj_dim);
  r.read("raw_logit_conditioning", c.raw_logit_conditioning);
  r.read("normalize_v1", c.normalize_v1);
  r.read("mcc_temperature", c.mcc_temperature);
  r.read("backbone_hidden", c.backbone_hidden);
  r.read("feature_dim", c.feature_dim);
  r.read("component_disc_hidden", c.component_disc_hidden);
  r.read("transfer_weight", c.transfer_weight);
  r.read("components_pretrained", c.components_pretrained);
  r.read("pretrain_epochs", c.pretrain_epochs);
  r.read("feature_kd_mode", c.feature_kd_mode);
  if (auto it = j.find("dataset"); it != j.end()) c.dataset = DatasetSpec::from_json(*it, "config.dataset");
  r.mark("dataset");
  r.reject_unknown();
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": invalid JSON: " + e.what());
  }
  return from_json(j);
}

void RunConfig::validate() const {
  require(mu1 >= 0 && mu2 >= 0 && mu3 >= 0, "config.mu1/mu2/mu3", "factors must be non-negative");
  require(alpha >= 1.0, "config.alpha", "distillation temperature must be >= 1");
  require(h >= 1, "config.h", "group count must be positive");
  require(tau >= 1, "config.tau", "sharing threshold must be positive");
  require(l0 > 0.0, "config.l0", "initial learning rate must be positive");
  require(seeds.size() >= 2, "config.seeds", "an ensemble needs at least two component seeds");
  require(methods.size() == 1 || methods.size() == seeds.size(), "config.methods",
          "give one method tag or one per seed");
  for (const auto& m : methods) {
    try {
      parse_method_tag(m);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("field 'config.methods': ") + e.what());
    }
  }
  require(epoch_t >= 0, "config.epoch_t", "must be non-negative");
  require(epoch_s >= 0, "config.epoch_s", "must be non-negative");
  require(iters >= 1, "config.iters", "must be positive");
  require(batch_size >= 2, "config.batch_size", "must be at least 2");
  require(rho >= 0.0, "config.rho", "SAM radius must be non-negative");
  require(momentum >= 0.0 && momentum < 1.0, "config.momentum", "must lie in [0, 1)");
  require(ensemble_lr_mult > 0.0, "config.ensemble_lr_mult", "must be > 0");
  require(clip_norm >= 0.0, "config.clip_norm", "must be >= 0 (0 disables clipping)");
  require(endogeny_hidden >= 1 && disc_hidden >= 1 && component_disc_hidden >= 1,
          "config.*_hidden", "widths must be positive");
  require(proj_dim >= 1, "config.proj_dim", "must be positive");
  require(mcc_temperature > 0.0, "config.mcc_temperature", "must be positive");
  require(feature_dim >= 1, "config.feature_dim", "must be positive");
  require(pretrain_epochs >= 0, "config.pretrain_epochs", "must be non-negative");
  try {
    parse_fusion_kind(fusion_kind);
    parse_feature_kd_mode(feature_kd_mode);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("field 'config.fusion_kind/feature_kd_mode': ") + e.what());
  }
  if (parse_fusion_kind(fusion_kind) != FusionKind::avg) {
    require(fusion_depth >= 1, "config.fusion_depth", "must be at least 1");
    try {
      fusion_specs(ensemble_config(2));
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("field 'config.h': ") + e.what());
    }
  }
}

std::vector<MethodTag> RunConfig::method_tags() const {
  std::vector<MethodTag> out;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    out.push_back(parse_method_tag(methods.size() == 1 ? methods[0] : methods[i]));
  }
  return out;
}

BackboneSpec RunConfig::backbone_spec(Eigen::Index input_dim) const {
  return BackboneSpec{input_dim, backbone_hidden, feature_dim};
}

ComponentOptions RunConfig::component_options() const {
  return ComponentOptions{transfer_weight, component_disc_hidden, proj_dim, raw_logit_conditioning};
}

EnsembleConfig RunConfig::ensemble_config(int num_classes) const {
  EnsembleConfig e;
  e.n_components = static_cast<int>(seeds.size());
  e.feature_dim = feature_dim;
  e.num_classes = num_classes;
  e.fusion_kind = parse_fusion_kind(fusion_kind);
  e.fusion_depth = fusion_depth;
  e.groups = h;
  e.tau = tau;
  e.instance_aware = instance_aware;
  e.endogeny_hidden = endogeny_hidden;
  e.disc_hidden = disc_hidden;
  e.proj_dim = proj_dim;
  e.raw_logit_conditioning = raw_logit_conditioning;
  e.normalize_v1 = normalize_v1;
  return e;
}

std::uint64_t RunConfig::component_seed(std::size_t i) const {
  return derive_seed(seeds.at(i), "component-init", seed);
}

}  // namespace imed
