#include "hdbf/types.hpp"

namespace hdbf {

const char* method_name(Method m) {
  switch (m) {
    case Method::kNew: return "NEW";
    case Method::kCq: return "CQ";
    case Method::kEmpiricalBootstrap: return "EB";
    case Method::kWildBootstrap: return "WB";
    case Method::kChi2Tcq: return "CHI2_TCQ";
    case Method::kChi2Norm: return "CHI2_NORM";
  }
  return "?";
}

std::optional<Method> method_from_name(const std::string& name) {
  if (name == "NEW") return Method::kNew;
  if (name == "CQ") return Method::kCq;
  if (name == "EB") return Method::kEmpiricalBootstrap;
  if (name == "WB") return Method::kWildBootstrap;
  if (name == "CHI2_TCQ") return Method::kChi2Tcq;
  if (name == "CHI2_NORM") return Method::kChi2Norm;
  return std::nullopt;
}

bool method_uses_resampling(Method m) {
  switch (m) {
    case Method::kNew:
    case Method::kEmpiricalBootstrap:
    case Method::kWildBootstrap:
      return true;
    default:
      return false;
  }
}

}  // namespace hdbf
