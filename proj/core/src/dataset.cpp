#include "mdnkit/dataset.hpp"

#include <cmath>

namespace mdnkit {

const std::string* Dataset::find_meta(const std::string& key) const {
    for (const auto& [k, v] : meta) {
        if (k == key) return &v;
    }
    return nullptr;
}

double Dataset::meta_number(const std::string& key) const {
    const std::string* v = find_meta(key);
    if (!v) throw IoError("dataset missing meta field: " + key);
    return std::stod(*v);
}

void Dataset::validate() const {
    if (!x.defined() || !y.defined()) throw ShapeError("dataset tensors undefined");
    if (x.rank() != 2 || y.rank() != 2) throw ShapeError("dataset tensors must be rank 2");
    if (x.dim(0) != y.dim(0)) {
        throw ShapeError("dataset row counts differ: " + shape_str(x.shape()) + " vs " +
                         shape_str(y.shape()));
    }
    if (!all_finite(x) || !all_finite(y)) throw NumericError("dataset contains non-finite values");
}

}  // namespace mdnkit
