#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "imed/config.hpp"

using namespace imed;
using nlohmann::json;

namespace {

std::string error_of(const json& j) {
  try {
    RunConfig::from_json(j);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

bool names(const json& j, const std::string& field) {
  return error_of(j).find("'config." + field + "'") != std::string::npos;
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("defaults round trip") {
    const RunConfig c;
    CHECK_NOTHROW(c.validate());
    const RunConfig back = RunConfig::from_json(c.to_json());
    CHECK(back.to_json() == c.to_json());
    CHECK(RunConfig::from_json(json::object()).to_json() == c.to_json());
  }

  TEST_CASE("every field survives a round trip") {
    RunConfig c;
    c.name = "x";
    c.seed = 9;
    c.mu1 = 0.3;
    c.mu2 = 0.0;
    c.alpha = 2.0;
    c.h = 8;
    c.seeds = {4, 5, 6};
    c.methods = {"jan_like", "cdan_like", "source_only"};
    c.share_head = false;
    c.use_sam = false;
    c.fusion_kind = "dense";
    c.instance_aware = false;
    c.feature_kd_mode = "mse";
    c.dataset.kind = "blobs";
    c.dataset.shift = 1.0;
    const RunConfig back = RunConfig::from_json(json::parse(c.to_json().dump()));
    CHECK(back.to_json() == c.to_json());
    CHECK(back.method_tags().size() == 3);
    CHECK(back.dataset.kind == "blobs");
  }

  TEST_CASE("errors name the offending field") {
    CHECK(names({{"mu1", -1.0}}, "mu1/mu2/mu3"));
    CHECK(names({{"alpha", 0.5}}, "alpha"));
    CHECK(names({{"l0", 0.0}}, "l0"));
    CHECK(names({{"seeds", {1}}}, "seeds"));
    CHECK(names({{"h", 3}}, "h"));
    CHECK(names({{"iters", 0}}, "iters"));
    CHECK(names({{"rho", -0.1}}, "rho"));
    CHECK(names({{"momentum", 1.0}}, "momentum"));
    CHECK(names({{"methods", {"dann"}}}, "methods"));
    CHECK(names({{"mu2", "high"}}, "mu2"));
    CHECK(names({{"share_head", 1}}, "share_head"));
    CHECK(names({{"seed", -1}}, "seed"));
    CHECK(names({{"learning_rate", 0.1}}, "learning_rate"));
    CHECK(error_of({{"dataset", {{"kind", "spirals"}}}}).find("config.dataset") != std::string::npos);
    CHECK(error_of({{"dataset", {{"extra", 1}}}}).find("config.dataset.extra") != std::string::npos);
  }

  TEST_CASE("schema version must match") {
    CHECK(names({{"schema_version", 2}}, "schema_version"));
    CHECK(error_of({{"schema_version", 1}}).empty());
  }

  TEST_CASE("files") {
    const auto dir = std::filesystem::temp_directory_path() / "imed_config_test";
    std::filesystem::create_directories(dir);
    {
      std::ofstream(dir / "ok.json") << json{{"h", 2}, {"iters", 7}}.dump();
      std::ofstream(dir / "bad.json") << "{ not json";
    }
    const RunConfig c = RunConfig::load(dir / "ok.json");
    CHECK(c.h == 2);
    CHECK(c.iters == 7);
    CHECK_THROWS_AS(RunConfig::load(dir / "bad.json"), ConfigError);
    CHECK_THROWS_AS(RunConfig::load(dir / "missing.json"), ConfigError);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("derived model settings") {
    RunConfig c;
    c.methods = {"cdan_like"};
    c.seeds = {1, 2, 3};
    CHECK(c.method_tags() == std::vector<MethodTag>(3, MethodTag::cdan_like));
    const auto e = c.ensemble_config(2);
    CHECK(e.n_components == 3);
    CHECK(e.groups == c.h);
    CHECK(e.feature_dim == c.feature_dim);
    CHECK(c.backbone_spec(2).widths().front() == 2);
    CHECK(c.component_seed(0) != c.component_seed(1));
    RunConfig d = c;
    d.seed = c.seed + 1;
    CHECK(d.component_seed(0) != c.component_seed(0));
  }
}
