#include "extps/profile.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_spline.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <sstream>

namespace extps {

namespace {

class ConstantProfile final : public Profile {
 public:
  explicit ConstantProfile(double v) : v_(v) {}
  double value(double, int order) const override { return order == 0 ? v_ : 0.0; }
  std::string describe() const override {
    std::ostringstream os;
    os << "constant(" << v_ << ")";
    return os.str();
  }
  double constant() const { return v_; }

 private:
  double v_;
};

class ExponentialProfile final : public Profile {
 public:
  explicit ExponentialProfile(double rate) : rate_(rate) {}
  double value(double t, int order) const override {
    return std::pow(-rate_, order) * std::exp(-rate_ * t);
  }
  std::string describe() const override {
    std::ostringstream os;
    os << "exp(-" << rate_ << "*t)";
    return os.str();
  }

 private:
  double rate_;
};

class TabulatedProfile final : public Profile {
 public:
  TabulatedProfile(std::vector<double> t, std::vector<double> v) : t_(std::move(t)), v_(std::move(v)) {
    if (t_.size() != v_.size()) throw std::invalid_argument("tabulated profile: size mismatch");
    if (t_.size() < 3) throw std::invalid_argument("tabulated profile: need at least 3 samples");
    for (std::size_t i = 1; i < t_.size(); ++i) {
      if (!(t_[i] > t_[i - 1])) throw std::invalid_argument("tabulated profile: times must increase");
    }
    gsl_set_error_handler_off();
    spline_ = gsl_spline_alloc(gsl_interp_cspline, t_.size());
    gsl_spline_init(spline_, t_.data(), v_.data(), t_.size());
  }
  ~TabulatedProfile() override { gsl_spline_free(spline_); }
  TabulatedProfile(const TabulatedProfile&) = delete;
  TabulatedProfile& operator=(const TabulatedProfile&) = delete;

  double value(double t, int order) const override {
    if (t < t_.front() || t > t_.back()) {
      throw EvalError("tabulated profile evaluated outside [" + std::to_string(t_.front()) + ", " +
                      std::to_string(t_.back()) + "]");
    }
    // gsl_interp_accel is mutable state; a null accelerator keeps this const and thread-safe.
    switch (order) {
      case 0: return gsl_spline_eval(spline_, t, nullptr);
      case 1: return gsl_spline_eval_deriv(spline_, t, nullptr);
      case 2: return gsl_spline_eval_deriv2(spline_, t, nullptr);
      default: throw EvalError("tabulated profile supports derivative orders 0..2");
    }
  }
  std::string describe() const override { return "tabulated(" + std::to_string(t_.size()) + " samples)"; }

 private:
  std::vector<double> t_;
  std::vector<double> v_;
  gsl_spline* spline_ = nullptr;
};

class ExpressionProfile final : public Profile {
 public:
  ExpressionProfile(const Expr& e, std::string var) : var_(std::move(var)) {
    for (const auto& s : free_symbols(e)) {
      if (s != var_) throw std::invalid_argument("profile expression may only depend on " + var_);
    }
    Context ctx;
    ctx.declare_symbol(var_, SymbolKind::Time);
    Expr d = e;
    for (int k = 0; k < 4; ++k) {
      derivatives_.push_back(d);
      d = diff(d, var_, ctx);
    }
  }
  double value(double t, int order) const override {
    if (order < 0 || order >= static_cast<int>(derivatives_.size())) {
      throw EvalError("expression profile supports derivative orders 0..3");
    }
    return eval_with(derivatives_[static_cast<std::size_t>(order)], [&](const BaseNode& n) -> double {
      if (n.kind == BaseNode::Kind::Symbol && n.name == var_) return t;
      throw EvalError("unbound leaf in profile expression");
    });
  }
  std::string describe() const override { return render(derivatives_.front()); }

 private:
  std::string var_;
  std::vector<Expr> derivatives_;
};

class FrictionScaleProfile final : public Profile {
 public:
  explicit FrictionScaleProfile(ProfilePtr eta) : eta_(std::move(eta)) {}

  double value(double t, int order) const override {
    const double f = std::exp(-integral(t));
    const double e0 = eta_->value(t, 0);
    switch (order) {
      case 0: return f;
      case 1: return -e0 * f;
      case 2: return (e0 * e0 - eta_->value(t, 1)) * f;
      case 3: {
        const double e1 = eta_->value(t, 1);
        const double e2 = eta_->value(t, 2);
        return (-e0 * e0 * e0 + 3.0 * e0 * e1 - e2) * f;
      }
      default: throw EvalError("friction scale profile supports derivative orders 0..3");
    }
  }
  std::string describe() const override { return "exp(-int " + eta_->describe() + ")"; }

 private:
  double integral(double t) const {
    if (auto* c = dynamic_cast<const ConstantProfile*>(eta_.get())) return c->constant() * t;
    if (t == 0.0) return 0.0;
    auto g = [this](double s) { return eta_->value(s, 0); };
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(g, 0.0, t, 15, 1e-14);
  }

  ProfilePtr eta_;
};

}  // namespace

ProfilePtr constant_profile(double value) { return std::make_shared<ConstantProfile>(value); }

ProfilePtr exponential_profile(double rate) { return std::make_shared<ExponentialProfile>(rate); }

ProfilePtr tabulated_profile(std::vector<double> times, std::vector<double> values) {
  return std::make_shared<TabulatedProfile>(std::move(times), std::move(values));
}

ProfilePtr expression_profile(const Expr& e, const std::string& var) {
  return std::make_shared<ExpressionProfile>(e, var);
}

ProfilePtr expression_profile(const std::string& text, const std::string& var) {
  Context ctx;
  ctx.declare_symbol(var, SymbolKind::Time);
  return std::make_shared<ExpressionProfile>(parse(text, ctx), var);
}

ProfilePtr friction_scale_profile(ProfilePtr friction) {
  return std::make_shared<FrictionScaleProfile>(std::move(friction));
}

}  // namespace extps
