#include "mrkp/mutual_align.hpp"

namespace mrkp {

std::string to_string(MutualDirection direction) {
  return direction == MutualDirection::kForward ? "forward" : "mirrored";
}

MutualDirection parse_mutual_direction(const std::string& text) {
  if (text == "forward") return MutualDirection::kForward;
  if (text == "mirrored") return MutualDirection::kMirrored;
  throw Error(ErrorKind::kArgument, "mutual.direction must be 'forward' or 'mirrored', got '" + text + "'");
}

OffsetNetwork::OffsetNetwork(nn::ParameterSet& params, std::mt19937_64& rng)
    : mlp_(nn::make_mlp(params, "offset.mlp", 3, {64, 64, 3}, rng, /*activate_last=*/false, nn::Init::kZero)) {}

ad::Var OffsetNetwork::operator()(nn::Binder& bind, const ad::Var& kp1, const ad::Var& kp2) const {
  require(kp1.rows() == kp2.rows() && kp1.cols() == 3 && kp2.cols() == 3, ErrorKind::kArgument,
          "keypoint sets differ in size");
  return mlp_(bind, ad::sub(kp1, kp2));
}

Points<double> OffsetNetwork::operator()(const nn::ParameterSet& params, const Points<double>& kp1,
                                         const Points<double>& kp2) const {
  ad::Tape tape;
  nn::Binder bind(tape, params, false);
  return (*this)(bind, tape.constant(kp1), tape.constant(kp2)).value();
}

std::pair<ad::Var, ad::Var> reshape_keypoints(const ad::Var& kp1, const ad::Var& kp2, const ad::Var& offsets,
                                              MutualDirection direction) {
  if (direction == MutualDirection::kForward) return {ad::add(kp2, offsets), ad::sub(kp1, offsets)};
  return {ad::sub(kp1, offsets), ad::add(kp2, offsets)};
}

}  // namespace mrkp
