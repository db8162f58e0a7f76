#include <random>

#include "doctest.h"
#include "hbsde/experiment.hpp"
#include "hbsde/parallel.hpp"
#include "hbsde/random.hpp"

#include <json.hpp>

using namespace hbsde;

TEST_CASE("seed splitting is deterministic and spreads") {
  CHECK(split_seed(1, 0) == split_seed(1, 0));
  CHECK(split_seed(1, 0) != split_seed(1, 1));
  CHECK(split_seed(1, 0) != split_seed(2, 0));
  CounterRng a(7), b(7);
  for (int i = 0; i < 10; ++i) CHECK(a() == b());
  CHECK(a.counter() == 10);
}

TEST_CASE("parallel loop stores by index and rethrows") {
  std::vector<int> out(100, -1);
  parallel_for(out.size(), [&](std::size_t i) { out[i] = static_cast<int>(i * i); });
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == static_cast<int>(i * i));
  CHECK_THROWS_AS(parallel_for(10, [](std::size_t i) {
                    if (i == 3) throw std::runtime_error("boom");
                  }),
                  std::runtime_error);
}

TEST_CASE("KS distance") {
  CHECK(ks_distance_normal({0.0}) == doctest::Approx(0.5));
  CounterRng rng(3);
  std::normal_distribution<double> gauss;
  std::vector<double> z(5000), shifted(5000);
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = gauss(rng), shifted[i] = z[i] + 0.5;
  CHECK(ks_distance_normal(z) < 0.03);
  CHECK(ks_distance_normal(shifted) > 0.15);
}

TEST_CASE("unknown suite and bad configuration") {
  ExperimentConfig cfg = canonical_config();
  CHECK_THROWS_AS(run_experiment(cfg, "nope"), ConfigError);
  cfg.mc_replicates = 0;
  CHECK_THROWS_AS(run_experiment(cfg, "prop1"), ConfigError);
}

TEST_CASE("report is machine readable and reproducible") {
  ExperimentConfig cfg = canonical_config();
  cfg.mc_replicates = 8;
  const McReport a = run_experiment(cfg, "lemma1");
  const McReport b = run_experiment(cfg, "lemma1");
  CHECK(a.to_json() == b.to_json());
  CHECK(a.to_csv() == b.to_csv());
  const auto j = nlohmann::json::parse(a.to_json());
  CHECK(j["suite"] == "lemma1");
  CHECK(j.contains("seed_ledger"));
  CHECK(a.find_check("gap_strictly_decreasing_violations")->pass);

  const McReport o = run_experiment(cfg, "filter_oracle");
  CHECK(o.pass());
}
