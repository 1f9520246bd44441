#include "pmrnet/tensor.hpp"

namespace pmrnet {

std::string Extent::to_string() const {
  return std::to_string(height) + "x" + std::to_string(width);
}

std::string Shape::to_string() const {
  return std::to_string(n) + "x" + std::to_string(c) + "x" +
         std::to_string(h) + "x" + std::to_string(w);
}

}  // namespace pmrnet
