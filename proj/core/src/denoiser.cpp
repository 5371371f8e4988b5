#include "mog/denoiser.hpp"

#include "mog/errors.hpp"

namespace mog {

std::string to_string(const DenoiserRole& role) {
  std::string s = role.quality == Quality::good ? "good" : "bad";
  s += role.conditioning == Conditioning::conditional ? "/cond" : "/uncond";
  return s;
}

DenoiserRole parse_role(const std::string& quality, const std::string& conditioning) {
  DenoiserRole role;
  if (quality == "good")
    role.quality = Quality::good;
  else if (quality == "bad")
    role.quality = Quality::bad;
  else
    throw ConfigError("unknown model quality '" + quality + "'");
  if (conditioning == "cond")
    role.conditioning = Conditioning::conditional;
  else if (conditioning == "uncond")
    role.conditioning = Conditioning::unconditional;
  else
    throw ConfigError("unknown conditioning '" + conditioning + "'");
  return role;
}

Vec2 Denoiser::predict(const Vec2& z, int t, Condition condition) const {
  Points in(2, 1);
  in.col(0) = z;
  Points out(2, 1);
  predict_batch(in, t, condition, out);
  return out.col(0);
}

}  // namespace mog
