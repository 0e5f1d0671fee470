#include <doctest.h>

#include <filesystem>
#include <random>

#include "respalloc/checkpoint.hpp"
#include "support/oracles.hpp"

using namespace respalloc;

TEST_CASE("checkpoints round-trip bit-exactly") {
  const auto dir = std::filesystem::temp_directory_path() / "respalloc_ckpt_test";
  std::filesystem::create_directories(dir);
  std::mt19937_64 rng(1);
  for (auto kind : {ModelKind::constant, ModelKind::mlp, ModelKind::symmetric, ModelKind::relative_symmetric}) {
    ModelSpec spec;
    spec.kind = kind;
    spec.n_agents = kind == ModelKind::symmetric ? 3 : 2;
    spec.context_dim = kind == ModelKind::symmetric ? 6 : 4;
    spec.hidden_width = 8;
    spec.hidden_layers = 2;
    if (kind == ModelKind::mlp) spec.standardizer = {oracle::random_vec(4, 1.0, rng), Vec::Constant(4, 0.3)};
    auto model = init_model(spec, 77);
    auto p = model.parameters();
    std::normal_distribution<double> n(0.0, 1.0);
    for (double& v : p) v = n(rng) / 3.0;  // arbitrary doubles

    const auto path = dir / (std::string(to_string(kind)) + ".json");
    save_checkpoint(model, path, {{"note", "unit test"}});
    const auto back = load_checkpoint(path);
    CHECK(back.kind() == kind);
    CHECK(back.seed() == 77);
    CHECK(back.n_agents() == model.n_agents());
    REQUIRE(back.parameter_count() == model.parameter_count());
    CHECK(std::equal(p.begin(), p.end(), back.parameters().begin()));
    CHECK(back.network_shape() == model.network_shape());
    if (kind == ModelKind::mlp) {
      CHECK(back.standardizer()->offset == model.standardizer()->offset);
      CHECK(back.standardizer()->scale == model.standardizer()->scale);
    }
    const Vec ctx = Vec::LinSpaced(spec.context_dim, -1, 2);
    CHECK(back.gamma(ctx) == model.gamma(ctx));
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("malformed checkpoints are rejected") {
  ModelSpec spec;
  spec.kind = ModelKind::constant;
  auto doc = model_to_json(init_model(spec, 0));
  auto bad_version = doc;
  bad_version["version"] = 99;
  CHECK_THROWS_AS(model_from_json(bad_version), CheckpointError);
  auto bad_params = doc;
  bad_params["parameters"] = {1.0, 2.0, 3.0};
  CHECK_THROWS_AS(model_from_json(bad_params), CheckpointError);
  auto missing = doc;
  missing.erase("kind");
  CHECK_THROWS_AS(model_from_json(missing), CheckpointError);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/model.json"), CheckpointError);
}
