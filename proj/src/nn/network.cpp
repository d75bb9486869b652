#include "fq/nn/network.hpp"

#include <stdexcept>

namespace fq::nn {

std::string to_string(TrunkKind k) { return k == TrunkKind::Mlp ? "mlp" : "bilstm"; }
std::string to_string(HeadKind k) { return k == HeadKind::Regression ? "regression" : "classification"; }

TrunkKind trunk_from_string(const std::string& s) {
  if (s == "mlp") return TrunkKind::Mlp;
  if (s == "bilstm") return TrunkKind::BiLstm;
  throw std::invalid_argument("unknown trunk '" + s + "' (expected mlp or bilstm)");
}

HeadKind head_from_string(const std::string& s) {
  if (s == "regression") return HeadKind::Regression;
  if (s == "classification") return HeadKind::Classification;
  throw std::invalid_argument("unknown head '" + s + "' (expected regression or classification)");
}

void Topology::validate() const {
  if (memory < 1 || memory % 2 == 0) throw std::invalid_argument("topology: memory must be odd and positive");
  if (features < 1) throw std::invalid_argument("topology: features must be positive");
  if (trunk == TrunkKind::Mlp) {
    for (int w : mlp_widths) {
      if (w < 1) throw std::invalid_argument("topology: MLP widths must be positive");
    }
  } else if (lstm_hidden < 1) {
    throw std::invalid_argument("topology: LSTM hidden size must be positive");
  }
  if (head == HeadKind::Classification && n_classes < 2) {
    throw std::invalid_argument("topology: classification needs at least two classes");
  }
}

}  // namespace fq::nn
