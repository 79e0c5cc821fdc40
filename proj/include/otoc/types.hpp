#pragma once

#include <cstdint>
#include <optional>

#include <Eigen/Dense>

namespace otoc {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Semantic category id; std::nullopt stands for UNLABELED / ABSENT.
using Label = std::optional<std::int32_t>;

inline constexpr std::int32_t kUnlabeled = -1;

inline std::int32_t to_file_label(const Label& l) { return l ? *l : kUnlabeled; }
inline Label from_file_label(std::int32_t v) { return v < 0 ? Label{} : Label{v}; }

}  // namespace otoc
