#include "fcnbc/bc_strategy.hpp"

namespace fcnbc {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::implicit: return "implicit";
    case Method::context: return "context";
    case Method::explicit_encoding: return "explicit";
  }
  return "unknown";
}

std::string_view to_string(ExplicitRule r) {
  switch (r) {
    case ExplicitRule::neumann: return "neumann";
    case ExplicitRule::periodic_wrap: return "periodic_wrap";
    case ExplicitRule::lodi: return "lodi";
  }
  return "unknown";
}

void StrategyConfig::validate() const {
  if ((method == Method::explicit_encoding) != rule.has_value()) {
    throw ConfigError("an explicit rule is required for, and only for, the explicit method");
  }
  if ((rule == ExplicitRule::lodi) != lodi.has_value()) {
    throw ConfigError("LODI parameters are required for, and only for, the lodi rule");
  }
  if (lodi && !(lodi->courant() > 0.0 && lodi->courant() <= 1.0)) {
    throw ConfigError("LODI Courant number c0*dt/dx must lie in (0, 1]");
  }
}

StrategyConfig parse_strategy(std::string_view text) {
  const auto plus = text.find('+');
  if (plus == std::string_view::npos) {
    throw ConfigError("strategy '" + std::string(text) + "' must look like method[:rule]+padding");
  }
  std::string_view head = text.substr(0, plus);
  StrategyConfig s;
  s.padding = parse_pad_kind(text.substr(plus + 1));
  std::string_view rule;
  if (const auto colon = head.find(':'); colon != std::string_view::npos) {
    rule = head.substr(colon + 1);
    head = head.substr(0, colon);
  }
  if (head == "implicit") {
    s.method = Method::implicit;
  } else if (head == "context") {
    s.method = Method::context;
  } else if (head == "explicit") {
    s.method = Method::explicit_encoding;
  } else {
    throw ConfigError("unknown strategy method '" + std::string(head) + "'");
  }
  if (s.method == Method::explicit_encoding) {
    if (rule == "neumann") {
      s.rule = ExplicitRule::neumann;
    } else if (rule == "periodic_wrap" || rule == "periodic") {
      s.rule = ExplicitRule::periodic_wrap;
    } else if (rule == "lodi") {
      s.rule = ExplicitRule::lodi;
      s.lodi = LodiParams{};
    } else {
      throw ConfigError("explicit strategy needs a rule (neumann, periodic_wrap or lodi), got '" +
                        std::string(rule) + "'");
    }
  } else if (!rule.empty()) {
    throw ConfigError("only the explicit method takes a rule");
  }
  return s;
}

std::string to_string(const StrategyConfig& s) {
  std::string out(to_string(s.method));
  if (s.rule) out += ":" + std::string(to_string(*s.rule));
  return out + "+" + std::string(to_string(s.padding));
}

Field2D make_context_mask(Index h, Index w) {
  Field2D m = Field2D::Ones(h, w);
  if (h > 2 && w > 2) m.block(1, 1, h - 2, w - 2).setZero();
  return m;
}

namespace {

template <typename Scalar>
void require_min_size(const Field2<Scalar>& f, const char* what) {
  if (f.rows() < 3 || f.cols() < 3) throw ConfigError(std::string(what) + " needs at least a 3x3 field");
}

}  // namespace

template <typename Scalar>
Field2<Scalar> enforce_neumann(const Field2<Scalar>& pred) {
  require_min_size(pred, "enforce_neumann");
  const Index h = pred.rows();
  const Index w = pred.cols();
  Field2<Scalar> out = pred;
  for (Index i = 1; i < h - 1; ++i) {
    out(i, 0) = pred(i, 1);
    out(i, w - 1) = pred(i, w - 2);
  }
  for (Index j = 1; j < w - 1; ++j) {
    out(0, j) = pred(1, j);
    out(h - 1, j) = pred(h - 2, j);
  }
  const Scalar half(0.5);
  out(0, 0) = half * (out(0, 1) + out(1, 0));
  out(0, w - 1) = half * (out(0, w - 2) + out(1, w - 1));
  out(h - 1, 0) = half * (out(h - 1, 1) + out(h - 2, 0));
  out(h - 1, w - 1) = half * (out(h - 1, w - 2) + out(h - 2, w - 1));
  return out;
}

template <typename Scalar>
Field2<Scalar> enforce_neumann_adjoint(const Field2<Scalar>& grad) {
  require_min_size(grad, "enforce_neumann_adjoint");
  const Index h = grad.rows();
  const Index w = grad.cols();
  Field2<Scalar> edge = grad;
  const Scalar half(0.5);
  edge(0, 1) += half * grad(0, 0);
  edge(1, 0) += half * grad(0, 0);
  edge(0, w - 2) += half * grad(0, w - 1);
  edge(1, w - 1) += half * grad(0, w - 1);
  edge(h - 1, 1) += half * grad(h - 1, 0);
  edge(h - 2, 0) += half * grad(h - 1, 0);
  edge(h - 1, w - 2) += half * grad(h - 1, w - 1);
  edge(h - 2, w - 1) += half * grad(h - 1, w - 1);

  Field2<Scalar> g = Field2<Scalar>::Zero(h, w);
  g.block(1, 1, h - 2, w - 2) = edge.block(1, 1, h - 2, w - 2);
  for (Index i = 1; i < h - 1; ++i) {
    g(i, 1) += edge(i, 0);
    g(i, w - 2) += edge(i, w - 1);
  }
  for (Index j = 1; j < w - 1; ++j) {
    g(1, j) += edge(0, j);
    g(h - 2, j) += edge(h - 1, j);
  }
  return g;
}

template <typename Scalar>
Field2<Scalar> enforce_periodic(const Field2<Scalar>& pred) {
  require_min_size(pred, "enforce_periodic");
  const Index h = pred.rows();
  const Index w = pred.cols();
  const Scalar half(0.5);
  Field2<Scalar> out = pred;
  for (Index i = 1; i < h - 1; ++i) {
    const Scalar v = half * (pred(i, 1) + pred(i, w - 2));
    out(i, 0) = v;
    out(i, w - 1) = v;
  }
  for (Index j = 0; j < w; ++j) {
    const Scalar v = half * (out(1, j) + out(h - 2, j));
    out(0, j) = v;
    out(h - 1, j) = v;
  }
  return out;
}

template <typename Scalar>
Field2<Scalar> enforce_periodic_adjoint(const Field2<Scalar>& grad) {
  require_min_size(grad, "enforce_periodic_adjoint");
  const Index h = grad.rows();
  const Index w = grad.cols();
  const Scalar half(0.5);
  Field2<Scalar> g = grad;
  for (Index j = 0; j < w; ++j) {
    const Scalar s = g(0, j) + g(h - 1, j);
    g(0, j) = Scalar(0);
    g(h - 1, j) = Scalar(0);
    g(1, j) += half * s;
    g(h - 2, j) += half * s;
  }
  for (Index i = 1; i < h - 1; ++i) {
    const Scalar s = g(i, 0) + g(i, w - 1);
    g(i, 0) = Scalar(0);
    g(i, w - 1) = Scalar(0);
    g(i, 1) += half * s;
    g(i, w - 2) += half * s;
  }
  return g;
}

template <typename Scalar>
Field2<Scalar> enforce_lodi(const Field2<Scalar>& prev, const Field2<Scalar>& pred, const LodiParams& p) {
  require_min_size(pred, "enforce_lodi");
  if (prev.rows() != pred.rows() || prev.cols() != pred.cols()) {
    throw ConfigError("enforce_lodi: previous and predicted fields differ in shape");
  }
  const double courant = p.courant();
  if (!(courant > 0.0) || courant > 1.0) {
    throw ConfigError("enforce_lodi: Courant number " + std::to_string(courant) + " outside (0, 1]");
  }
  const auto nu = static_cast<Scalar>(courant);
  const Index h = pred.rows();
  const Index w = pred.cols();
  const auto wall = [&](Index bi, Index bj, Index ni, Index nj) {
    return prev(bi, bj) - nu * (prev(bi, bj) - prev(ni, nj));
  };
  Field2<Scalar> out = pred;
  for (Index i = 1; i < h - 1; ++i) {
    out(i, 0) = wall(i, 0, i, 1);
    out(i, w - 1) = wall(i, w - 1, i, w - 2);
  }
  for (Index j = 1; j < w - 1; ++j) {
    out(0, j) = wall(0, j, 1, j);
    out(h - 1, j) = wall(h - 1, j, h - 2, j);
  }
  const Scalar half(0.5);
  const Index r = h - 1;
  const Index c = w - 1;
  out(0, 0) = half * (wall(0, 0, 0, 1) + wall(0, 0, 1, 0));
  out(0, c) = half * (wall(0, c, 0, c - 1) + wall(0, c, 1, c));
  out(r, 0) = half * (wall(r, 0, r, 1) + wall(r, 0, r - 1, 0));
  out(r, c) = half * (wall(r, c, r, c - 1) + wall(r, c, r - 1, c));
  return out;
}

template <typename Scalar>
Field2<Scalar> enforce_lodi_adjoint(const Field2<Scalar>& grad) {
  require_min_size(grad, "enforce_lodi_adjoint");
  Field2<Scalar> g = Field2<Scalar>::Zero(grad.rows(), grad.cols());
  g.block(1, 1, grad.rows() - 2, grad.cols() - 2) = grad.block(1, 1, grad.rows() - 2, grad.cols() - 2);
  return g;
}

template <typename Scalar>
Tensor<Scalar> apply_strategy(const StrategyConfig& config, const Tensor<Scalar>& raw_pred,
                              std::span<const Field2<Scalar>> prev_frames) {
  if (config.method != Method::explicit_encoding) return raw_pred;
  config.validate();
  if (raw_pred.c() != 1) throw ConfigError("explicit enforcement expects single-channel predictions");
  if (*config.rule == ExplicitRule::lodi && static_cast<Index>(prev_frames.size()) != raw_pred.n()) {
    throw ConfigError("the lodi rule needs one previous frame per batch item (got " +
                      std::to_string(prev_frames.size()) + " for " + std::to_string(raw_pred.n()) + ")");
  }
  Tensor<Scalar> out(raw_pred.shape());
  for (Index b = 0; b < raw_pred.n(); ++b) {
    const Field2<Scalar> pred = raw_pred.plane(b, 0);
    switch (*config.rule) {
      case ExplicitRule::neumann: out.plane(b, 0) = enforce_neumann(pred); break;
      case ExplicitRule::periodic_wrap: out.plane(b, 0) = enforce_periodic(pred); break;
      case ExplicitRule::lodi:
        out.plane(b, 0) = enforce_lodi(prev_frames[static_cast<std::size_t>(b)], pred, *config.lodi);
        break;
    }
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> apply_strategy_adjoint(const StrategyConfig& config, const Tensor<Scalar>& grad) {
  if (config.method != Method::explicit_encoding) return grad;
  Tensor<Scalar> out(grad.shape());
  for (Index b = 0; b < grad.n(); ++b) {
    const Field2<Scalar> g = grad.plane(b, 0);
    switch (*config.rule) {
      case ExplicitRule::neumann: out.plane(b, 0) = enforce_neumann_adjoint(g); break;
      case ExplicitRule::periodic_wrap: out.plane(b, 0) = enforce_periodic_adjoint(g); break;
      case ExplicitRule::lodi: out.plane(b, 0) = enforce_lodi_adjoint(g); break;
    }
  }
  return out;
}

#define FCNBC_INSTANTIATE(S)                                                                               \
  template Field2<S> enforce_neumann(const Field2<S>&);                                                    \
  template Field2<S> enforce_periodic(const Field2<S>&);                                                   \
  template Field2<S> enforce_lodi(const Field2<S>&, const Field2<S>&, const LodiParams&);                  \
  template Field2<S> enforce_neumann_adjoint(const Field2<S>&);                                            \
  template Field2<S> enforce_periodic_adjoint(const Field2<S>&);                                           \
  template Field2<S> enforce_lodi_adjoint(const Field2<S>&);                                               \
  template Tensor<S> apply_strategy(const StrategyConfig&, const Tensor<S>&, std::span<const Field2<S>>); \
  template Tensor<S> apply_strategy_adjoint(const StrategyConfig&, const Tensor<S>&);

FCNBC_INSTANTIATE(float)
FCNBC_INSTANTIATE(double)
#undef FCNBC_INSTANTIATE

}  // namespace fcnbc
