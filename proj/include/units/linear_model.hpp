#pragma once

#include <cstdint>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "units/grid.hpp"

namespace units {

/// Tractable reconstruction family for the equivalence verification: one
/// affine map (W, b) per observed-pattern key. Exactly representable
/// conditional expectations, so estimator error is not confounded with
/// approximation error.
struct PatternPredictor {
  std::vector<cdouble> w;  // n x n, row-major; zero off the observed columns
  std::vector<cdouble> b;  // n
  std::uint64_t visits = 0;

  // training state: observed column indices and one recursive
  // least-squares Gram inverse per output row (rows collect their own
  // supervision samples)
  std::vector<int> cols;
  std::vector<std::vector<cdouble>> row_p;  // (cols+1)^2 each
  std::vector<std::uint64_t> row_updates;
};

struct LinearLookupModel {
  int n = 0;
  std::unordered_map<std::uint64_t, PatternPredictor> table;

  PatternPredictor& entry(std::uint64_t key) {
    auto [it, inserted] = table.try_emplace(key);
    if (inserted) {
      it->second.w.assign(static_cast<std::size_t>(n) * n, cdouble{0, 0});
      it->second.b.assign(n, cdouble{0, 0});
    }
    return it->second;
  }
};

/// W * vec(y1) + b for the realized input-mask pattern. An unknown key
/// falls back to the identity and reports it through `known_key`.
inline ComplexGrid linear_predict(const LinearLookupModel& model,
                                  const ComplexGrid& y1, std::uint64_t key,
                                  bool* known_key = nullptr) {
  if (static_cast<int>(y1.size()) != model.n)
    throw std::invalid_argument("linear_predict: vector length mismatch");
  auto it = model.table.find(key);
  if (it == model.table.end()) {
    if (known_key) *known_key = false;
    return y1;  // identity fallback
  }
  if (known_key) *known_key = true;
  const auto& w = it->second.w;
  const auto& b = it->second.b;
  ComplexGrid out(model.n, 1, 1, 1);
  for (int row = 0; row < model.n; ++row) {
    cdouble acc = b[row];
    const cdouble* wr = &w[static_cast<std::size_t>(row) * model.n];
    for (int col = 0; col < model.n; ++col) acc += wr[col] * y1[col];
    out[row] = acc;
  }
  ensure_finite(out, "linear_predict");
  return out;
}

}  // namespace units
