#include "synth.hpp"

#include <cmath>

namespace synth {

using tabprof::Cell;
using tabprof::ColumnKind;
using tabprof::ColumnSpec;
using tabprof::Rng;
using tabprof::TabularDataset;
using tabprof::TaskKind;

TabularDataset from_columns(
    const std::string& id,
    const std::vector<std::pair<std::string, std::vector<double>>>& numeric,
    const std::vector<std::pair<std::string, std::vector<std::string>>>&
        categorical,
    const std::string& target_name, TaskKind task) {
  TabularDataset d;
  d.id = id;
  std::size_t rows = 0;
  for (const auto& [name, col] : numeric) {
    ColumnSpec s;
    s.name = name;
    s.kind = ColumnKind::numeric;
    d.columns.push_back(s);
    rows = col.size();
  }
  for (const auto& [name, col] : categorical) {
    ColumnSpec s;
    s.name = name;
    s.kind = ColumnKind::categorical;
    d.columns.push_back(s);
    rows = col.size();
  }
  d.cells.resize(rows * d.columns.size());
  std::size_t c = 0;
  for (const auto& [name, col] : numeric) {
    for (std::size_t r = 0; r < rows; ++r) {
      Cell& cell = d.cells[r * d.columns.size() + c];
      if (std::isnan(col[r])) {
        cell.missing = true;
      } else {
        cell.num = col[r];
      }
    }
    ++c;
  }
  for (const auto& [name, col] : categorical) {
    for (std::size_t r = 0; r < rows; ++r) {
      Cell& cell = d.cells[r * d.columns.size() + c];
      if (col[r].empty()) {
        cell.missing = true;
      } else {
        cell.token = col[r];
      }
    }
    ++c;
  }
  d.target = 0;
  for (std::size_t i = 0; i < d.columns.size(); ++i) {
    if (d.columns[i].name == target_name) d.target = i;
  }
  d.task = task;
  tabprof::revalidate(d);
  return d;
}

TabularDataset fixture20() {
  std::vector<double> x1, x2, x3, y;
  std::vector<std::string> c1;
  const char* tokens[] = {"red", "green", "blue"};
  for (int i = 0; i < 20; ++i) {
    x1.push_back(0.5 * i - 3.0);
    x2.push_back((i % 5) * (i % 5) * 0.25 + (i % 3));
    x3.push_back(i % 4 == 0 ? std::nan("") : std::sin(0.7 * i) * 2.0);
    c1.push_back(tokens[(i * i) % 3]);
    y.push_back(0.8 * x1.back() + 0.3 * (i % 5) + (i % 2 ? 0.5 : -0.5));
  }
  return from_columns("fixture20", {{"x1", x1}, {"x2", x2}, {"x3", x3}, {"y", y}},
                      {{"c1", c1}}, "y", TaskKind::regression);
}

TabularDataset random_dataset(Rng& rng, std::size_t max_rows,
                              std::size_t max_cols, const std::string& id) {
  const std::size_t rows = 20 + rng.below(max_rows - 19);
  const std::size_t n_features = 2 + rng.below(max_cols - 2);
  const std::size_t n_numeric = 1 + rng.below(n_features);
  const bool classify = rng.below(2) == 1;

  std::vector<std::pair<std::string, std::vector<double>>> numeric;
  for (std::size_t j = 0; j < n_numeric; ++j) {
    std::vector<double> col(rows);
    const double scale = std::exp(rng.next_normal());
    const double shift = 2.0 * rng.next_normal();
    const bool inject_missing = rng.below(4) == 0;
    for (std::size_t r = 0; r < rows; ++r) {
      col[r] = shift + scale * rng.next_normal();
      if (inject_missing && rng.below(10) == 0) col[r] = std::nan("");
    }
    // Never let the column collapse to a constant.
    col[0] = shift + scale * 3.0;
    col[1] = shift - scale * 3.0;
    numeric.emplace_back("n" + std::to_string(j), col);
  }

  std::vector<std::pair<std::string, std::vector<std::string>>> categorical;
  for (std::size_t j = n_numeric; j < n_features; ++j) {
    const std::size_t card = 2 + rng.below(4);
    std::vector<std::string> col(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      if (rng.below(20) == 0) {
        col[r] = "";  // missing
      } else {
        col[r] = "t" + std::to_string(rng.below(card));
      }
    }
    categorical.emplace_back("c" + std::to_string(j), col);
  }

  if (classify) {
    std::vector<std::string> target(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      const double z = numeric[0].second[r];
      const double v = std::isnan(z) ? 0.0 : z;
      target[r] = v + 0.5 * rng.next_normal() > 0.0 ? "pos" : "neg";
    }
    // Guarantee both classes.
    target[0] = "pos";
    target[1] = "neg";
    categorical.emplace_back("label", target);
    return from_columns(id, numeric, categorical, "label",
                        TaskKind::classification);
  }
  std::vector<double> target(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double z = numeric[0].second[r];
    const double v = std::isnan(z) ? 0.0 : z;
    target[r] = 1.5 * v + rng.next_normal();
  }
  numeric.emplace_back("resp", target);
  return from_columns(id, numeric, categorical, "resp", TaskKind::regression);
}

}  // namespace synth
