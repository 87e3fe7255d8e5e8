#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mdnkit/tensor.hpp"

namespace mdnkit {

// Input/target pairs plus the provenance needed to regenerate them.
// For trajectory tasks a target row is a flattened trajectory.
struct Dataset {
    Tensor x;  // [N x d_in]
    Tensor y;  // [N x d_out]
    std::string generator;
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, std::string>> meta;  // generator spec fields

    std::int64_t n() const { return x.dim(0); }
    int d_in() const { return x.dim(1); }
    int d_out() const { return y.dim(1); }

    const std::string* find_meta(const std::string& key) const;
    double meta_number(const std::string& key) const;

    void validate() const;  // row counts match, all values finite
};

}  // namespace mdnkit
