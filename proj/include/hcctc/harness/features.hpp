#ifndef HCCTC_HARNESS_FEATURES_HPP_
#define HCCTC_HARNESS_FEATURES_HPP_

#include <string>

#include "hcctc/numerics/tensor.hpp"

namespace hcctc::harness {

// "HFEA", T and D as little-endian u32, then T*D little-endian f32, row-major.
void write_features(const std::string& path, const Matrix<float>& features);
Matrix<float> read_features(const std::string& path);

/// Writes a matrix as whitespace-separated text, one row per line.
void write_text_matrix(const std::string& path, const Matrix<double>& m);
Matrix<double> read_text_matrix(const std::string& path);

}  // namespace hcctc::harness

#endif  // HCCTC_HARNESS_FEATURES_HPP_
