#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "bfl1/linalg.hpp"

namespace bfl1 {

struct Sample {
    Vector x;
    Vector y;
};

using Dataset = std::vector<Sample>;

// Stack a dataset into row-major (inputs, targets) matrices.
// Throws input_error if the dataset is empty or rows are ragged.
std::pair<Matrix, Matrix> dataset_to_matrices(const Dataset& data);

} // namespace bfl1
