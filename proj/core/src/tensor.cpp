#include "fastqa/tensor.hpp"

namespace fastqa {

std::string shape_str(const std::vector<int64_t>& shape) {
  std::string s = "(";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  s += ")";
  return s;
}

int64_t shape_numel(const Shape& shape) {
  int64_t n = 1;
  for (auto d : shape) {
    if (d <= 0) throw Error("tensor: non-positive dim in shape " + shape_str(shape));
    n *= d;
  }
  return n;
}

}  // namespace fastqa
