#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "units/io.hpp"
#include "units/rng.hpp"

using namespace units;

TEST_CASE("grid serialization round trip") {
  ComplexGrid g(3, 4, 2, 2);
  Rng rng(1);
  for (std::size_t i = 0; i < g.size(); ++i) {
    // values representable in float32, so the trip is exact
    g[i] = {std::round(rng.uniform(-100, 100) * 16) / 16.0,
            std::round(rng.uniform(-100, 100) * 16) / 16.0};
  }
  const std::string bytes = serialize_grid(g);
  // one-line JSON header
  const auto nl = bytes.find('\n');
  REQUIRE(nl != std::string::npos);
  const auto header = nlohmann::json::parse(bytes.substr(0, nl));
  REQUIRE(header["dtype"] == "complex64");
  REQUIRE(header["layout"] == "row-major");
  REQUIRE(header["shape"] == nlohmann::json({3, 4, 2, 2}));
  REQUIRE(bytes.size() - nl - 1 == g.size() * 8);

  ComplexGrid back = deserialize_grid(bytes);
  REQUIRE(back.shape() == g.shape());
  for (std::size_t i = 0; i < g.size(); ++i) REQUIRE(back[i] == g[i]);
}

TEST_CASE("serialization is byte-deterministic") {
  ComplexGrid g(4, 4, 1, 1);
  Rng rng(2);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = rng.complex_gaussian();
  REQUIRE(serialize_grid(g) == serialize_grid(g));
}

TEST_CASE("mask serialization round trip through a file") {
  SamplingMask m(5, 6, 3);
  Rng rng(3);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = rng.bernoulli(0.4);

  const auto dir = std::filesystem::temp_directory_path() / "units_io_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "mask.grid";
  save_mask(path, m);
  SamplingMask back = load_mask(path);
  REQUIRE(back == m);
  std::filesystem::remove_all(dir);
}

TEST_CASE("corrupt payloads are rejected") {
  ComplexGrid g(2, 2, 1, 1);
  std::string bytes = serialize_grid(g);
  bytes.pop_back();
  REQUIRE_THROWS_AS(deserialize_grid(bytes), std::runtime_error);
  REQUIRE_THROWS_AS(deserialize_grid("no header here"), std::exception);
}

TEST_CASE("csv writer emits stable text") {
  CsvWriter csv({"step", "loss"});
  csv.row({"0", csv_double(0.125)});
  csv.row({"1", csv_double(1.0 / 3.0)});
  REQUIRE(csv.text() == "step,loss\n0,0.125\n1,0.333333333333\n");
  REQUIRE_THROWS_AS(csv.row({"only-one"}), std::invalid_argument);
}
