#pragma once

#include <cstdint>
#include <string>

#include <vector>

#include "deepntk/kernels.hpp"
#include "deepntk/regression.hpp"

namespace deepntk::io {

enum class RowNormalization { none, unit_sphere };

RowNormalization parse_row_normalization(const std::string& name);

// CSV with a header row, numeric feature columns and an integer label last.
// Targets are one-hot over labels 0..max_label.
Dataset load_dataset(const std::string& path, RowNormalization normalize);
Dataset parse_dataset(const std::string& text, RowNormalization normalize,
                      const std::string& source = "<memory>");

// n points uniform on S^{d-1}, one per row.
Eigen::MatrixXd synthetic_sphere(int d, int n, std::uint64_t seed);

// Two-class sphere data labelled by the sign of a seeded random projection.
Dataset synthetic_two_class(int d, int n, std::uint64_t seed);

// count input pairs from consecutive rows of synthetic_sphere(d, 2 count, seed),
// scaled to norm sqrt(d).
std::vector<DensePair> synthetic_pairs(int d, int count, std::uint64_t seed);

Dataset make_classification(const Eigen::MatrixXd& X, const std::vector<int>& labels);

// Rows selected by index.
Dataset subset(const Dataset& data, const std::vector<int>& rows);

}  // namespace deepntk::io
