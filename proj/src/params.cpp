#include "drapefit/params.hpp"

#include <sstream>

#include "drapefit/error.hpp"
#include "drapefit/text_io.hpp"

namespace drapefit {

std::string PhysicsParams::describe() const {
  std::ostringstream ss;
  ss << "rho=" << format_real(rho) << " kappa_s=" << format_real(kappa_s)
     << " kappa_b=" << format_real(kappa_b);
  return ss.str();
}

void require_in_range(const PhysicsParams& params) {
  if (!params.in_range())
    throw ValidationError("physics parameters outside legal ranges: " + params.describe());
}

} // namespace drapefit
