#include "msglab/oracle.hpp"

#include "msglab/env.hpp"

namespace msglab::oracle {

MsgValue<double> exact_msg_value(const Environment& env, const Mat<double>& scheme,
                                 const std::vector<Mat<double>>& policy, double gamma) {
  const auto model = env.tabular_model();
  if (!model) throw std::invalid_argument("exact_msg_value: " + env.name() + " has no finite model");
  return exact_msg_value<double>(*model, scheme, policy, gamma);
}

}  // namespace msglab::oracle
