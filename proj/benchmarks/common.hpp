#pragma once

#include "recourse/data.hpp"
#include "recourse/model.hpp"

namespace recourse::bench {

inline data::ShiftedDataset moons() {
  data::MoonsOptions o;
  o.k = 3;
  o.n = 400;
  o.rotation_deg = 30.0;
  return data::synth_shifted_moons(o, 0.2);
}

inline model::Dims dims() { return {{2, 32, 16}, {16, 16}, {16, 16}}; }

inline Matrix head(const Matrix& x, std::size_t rows) {
  std::vector<std::size_t> idx(std::min(rows, x.rows));
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return gather_rows(x, idx);
}

}  // namespace recourse::bench
