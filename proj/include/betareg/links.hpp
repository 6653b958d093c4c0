#pragma once

#include <cmath>
#include <string>
#include <string_view>

#include "betareg/error.hpp"

namespace betareg {

enum class LinkKind { logit, loglog, log, sqrt, identity };

inline std::string_view link_name(LinkKind kind) {
  switch (kind) {
    case LinkKind::logit: return "logit";
    case LinkKind::loglog: return "loglog";
    case LinkKind::log: return "log";
    case LinkKind::sqrt: return "sqrt";
    case LinkKind::identity: return "identity";
  }
  return "?";
}

inline LinkKind parse_link(std::string_view name) {
  if (name == "logit") return LinkKind::logit;
  if (name == "loglog") return LinkKind::loglog;
  if (name == "log") return LinkKind::log;
  if (name == "sqrt") return LinkKind::sqrt;
  if (name == "identity") return LinkKind::identity;
  throw UsageError("unknown link '" + std::string(name) + "'");
}

// Links allowed for the mean submodel map (0,1) onto the real line.
inline bool is_mean_link(LinkKind kind) {
  return kind == LinkKind::logit || kind == LinkKind::loglog;
}

inline bool is_precision_link(LinkKind kind) { return !is_mean_link(kind); }

namespace detail {

inline void check_link_domain(LinkKind kind, double m) {
  bool ok = std::isfinite(m);
  switch (kind) {
    case LinkKind::logit:
    case LinkKind::loglog: ok = ok && m > 0.0 && m < 1.0; break;
    case LinkKind::log: ok = ok && m > 0.0; break;
    case LinkKind::sqrt: ok = ok && m >= 0.0; break;
    case LinkKind::identity: break;
  }
  if (!ok)
    throw DomainError(std::string(link_name(kind)) + " link: argument " + std::to_string(m) +
                      " outside domain");
}

}  // namespace detail

inline double link_value(LinkKind kind, double m) {
  detail::check_link_domain(kind, m);
  switch (kind) {
    case LinkKind::logit: return std::log(m / (1.0 - m));
    case LinkKind::loglog: return -std::log(-std::log(m));
    case LinkKind::log: return std::log(m);
    case LinkKind::sqrt: return std::sqrt(m);
    case LinkKind::identity: return m;
  }
  return m;
}

inline double link_inverse(LinkKind kind, double eta) {
  if (std::isnan(eta)) throw DomainError("link inverse of NaN");
  switch (kind) {
    case LinkKind::logit:
      return eta >= 0.0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
    case LinkKind::loglog: return std::exp(-std::exp(-eta));
    case LinkKind::log: return std::exp(eta);
    case LinkKind::sqrt:
      if (eta < 0.0) throw DomainError("sqrt link inverse of negative predictor");
      return eta * eta;
    case LinkKind::identity: return eta;
  }
  return eta;
}

// dg/dm. The loglog link g(m) = -log(-log m) has the positive derivative
// -1/(m log m) on (0,1).
inline double link_deriv(LinkKind kind, double m) {
  detail::check_link_domain(kind, m);
  switch (kind) {
    case LinkKind::logit: return 1.0 / (m * (1.0 - m));
    case LinkKind::loglog: return -1.0 / (m * std::log(m));
    case LinkKind::log: return 1.0 / m;
    case LinkKind::sqrt:
      if (m == 0.0) throw DomainError("sqrt link derivative at zero");
      return 0.5 / std::sqrt(m);
    case LinkKind::identity: return 1.0;
  }
  return 1.0;
}

}  // namespace betareg
