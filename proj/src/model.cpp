#include "greybox/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <Eigen/LU>

namespace greybox {

void Dimensions::validate() const {
  if (n_s < 1 || m < 1 || l < 1 || s < 0 || n_p < 0) {
    throw DimensionError("dimensions: require n_s >= 1, m >= 1, l >= 1, s >= 0 (got n_s=" +
                         std::to_string(n_s) + ", m=" + std::to_string(m) +
                         ", l=" + std::to_string(l) + ", s=" + std::to_string(s) + ")");
  }
}

double BasisTerm::value(double v) const {
  if (function) return function->value(v);
  double r = 1.0;
  for (int k = 0; k < exponent; ++k) r *= v;
  return r;
}

double BasisTerm::derivative(double v) const {
  if (function) return function->derivative(v);
  double r = static_cast<double>(exponent);
  for (int k = 0; k < exponent - 1; ++k) r *= v;
  return r;
}

std::string BasisTerm::label() const {
  const std::string var = (signal == BasisSignal::velocity ? "ydot" : "y") +
                          std::to_string(channel + 1);
  if (function) return function->tag + "(" + var + ")";
  return var + "^" + std::to_string(exponent);
}

bool BasisSet::has_velocity_terms() const {
  return std::any_of(terms.begin(), terms.end(), [](const BasisTerm& t) {
    return t.signal == BasisSignal::velocity;
  });
}

std::vector<int> BasisSet::nl_channels() const {
  std::set<int> channels;
  for (const auto& t : terms) channels.insert(t.channel);
  return {channels.begin(), channels.end()};
}

void BasisSet::validate(int l) const {
  for (std::size_t a = 0; a < terms.size(); ++a) {
    const auto& t = terms[a];
    if (t.channel < 0 || t.channel >= l) {
      throw DimensionError("basis term " + std::to_string(a) + ": channel " +
                           std::to_string(t.channel) + " out of range for " +
                           std::to_string(l) + " outputs");
    }
    if (!t.function && t.exponent < 2) {
      throw DimensionError("basis term " + std::to_string(a) +
                           ": polynomial exponent must be >= 2");
    }
    if (t.function && (!t.function->value || !t.function->derivative)) {
      throw DimensionError("basis term " + std::to_string(a) +
                           ": custom function needs value and derivative");
    }
  }
}

BasisSet BasisSet::polynomial(int channel, const std::vector<int>& degrees) {
  BasisSet b;
  for (int p : degrees) b.terms.push_back({channel, BasisSignal::displacement, p, std::nullopt});
  return b;
}

namespace {

void check_channels(const BasisSet& basis, Eigen::Index l) {
  basis.validate(static_cast<int>(l));
}

}  // namespace

Vector eval_basis(const BasisSet& basis, const Vector& y) {
  if (basis.has_velocity_terms()) {
    throw DimensionError("eval_basis: velocity term present but no derivative samples given");
  }
  return eval_basis(basis, y, Vector::Zero(y.size()));
}

Vector eval_basis(const BasisSet& basis, const Vector& y, const Vector& ydot) {
  check_channels(basis, y.size());
  if (ydot.size() != y.size()) throw DimensionError("eval_basis: ydot size differs from y");
  Vector g(basis.size());
  for (int a = 0; a < basis.size(); ++a) {
    const auto& t = basis.terms[a];
    g[a] = t.value(t.signal == BasisSignal::velocity ? ydot[t.channel] : y[t.channel]);
  }
  return g;
}

BasisGradient basis_gradient(const BasisSet& basis, const Vector& y) {
  if (basis.has_velocity_terms()) {
    throw DimensionError("basis_gradient: velocity term present but no derivative samples given");
  }
  return basis_gradient(basis, y, Vector::Zero(y.size()));
}

BasisGradient basis_gradient(const BasisSet& basis, const Vector& y, const Vector& ydot) {
  check_channels(basis, y.size());
  if (ydot.size() != y.size()) throw DimensionError("basis_gradient: ydot size differs from y");
  BasisGradient grad{Matrix::Zero(basis.size(), y.size()), Matrix::Zero(basis.size(), y.size())};
  for (int a = 0; a < basis.size(); ++a) {
    const auto& t = basis.terms[a];
    if (t.signal == BasisSignal::velocity) {
      grad.dydot(a, t.channel) = t.derivative(ydot[t.channel]);
    } else {
      grad.dy(a, t.channel) = t.derivative(y[t.channel]);
    }
  }
  return grad;
}

GreyBoxModel GreyBoxModel::zeros(const Dimensions& dims, double Ts, BasisSet basis) {
  dims.validate();
  if (basis.size() != dims.s) throw DimensionError("GreyBoxModel: basis size differs from s");
  GreyBoxModel model;
  model.A = Matrix::Zero(dims.n_s, dims.n_s);
  model.Bext = Matrix::Zero(dims.n_s, dims.extended_inputs());
  model.C = Matrix::Zero(dims.l, dims.n_s);
  model.Dext = Matrix::Zero(dims.l, dims.extended_inputs());
  model.Ts = Ts;
  model.basis = std::move(basis);
  model.dims = dims;
  return model;
}

void GreyBoxModel::validate() const {
  dims.validate();
  const auto w = dims.extended_inputs();
  auto shape = [](const Matrix& M, Eigen::Index r, Eigen::Index c, const char* name) {
    if (M.rows() != r || M.cols() != c) {
      throw DimensionError(std::string("model: ") + name + " is " + std::to_string(M.rows()) +
                           "x" + std::to_string(M.cols()) + ", expected " + std::to_string(r) +
                           "x" + std::to_string(c));
    }
    if (!M.allFinite()) throw DimensionError(std::string("model: ") + name + " has non-finite entries");
  };
  shape(A, dims.n_s, dims.n_s, "A");
  shape(Bext, dims.n_s, w, "Bext");
  shape(C, dims.l, dims.n_s, "C");
  shape(Dext, dims.l, w, "Dext");
  if (basis.size() != dims.s) throw DimensionError("model: basis size differs from s");
  basis.validate(dims.l);
  if (!(Ts > 0.0) || !std::isfinite(Ts)) throw DimensionError("model: Ts must be positive");
}

bool GreyBoxModel::implicit_output() const {
  if (dims.s == 0) return false;
  const Matrix f = F();
  for (int ch : basis.nl_channels()) {
    if ((f.row(ch).array() != 0.0).any()) return true;
  }
  return false;
}

GreyBoxModel transform_state(const GreyBoxModel& model, const Matrix& T) {
  Eigen::PartialPivLU<Matrix> lu(T);
  const Matrix Tinv = lu.inverse();
  GreyBoxModel out = model;
  out.A = T * model.A * Tinv;
  out.Bext = T * model.Bext;
  out.C = model.C * Tinv;
  return out;
}

ParameterMask ParameterMask::defaults(const Dimensions& dims) {
  ParameterMask mask = all_free(dims);
  mask.Dext.rightCols(dims.s).setConstant(false);
  return mask;
}

ParameterMask ParameterMask::all_free(const Dimensions& dims) {
  dims.validate();
  const auto w = dims.extended_inputs();
  return {Mask::Constant(dims.n_s, dims.n_s, true), Mask::Constant(dims.n_s, w, true),
          Mask::Constant(dims.l, dims.n_s, true), Mask::Constant(dims.l, w, true)};
}

int ParameterMask::free_count() const {
  return static_cast<int>(A.count() + Bext.count() + C.count() + Dext.count());
}

void ParameterMask::check(const Dimensions& dims) const {
  const auto w = dims.extended_inputs();
  if (A.rows() != dims.n_s || A.cols() != dims.n_s || Bext.rows() != dims.n_s ||
      Bext.cols() != w || C.rows() != dims.l || C.cols() != dims.n_s ||
      Dext.rows() != dims.l || Dext.cols() != w) {
    throw DimensionError("parameter mask does not match model dimensions");
  }
}

namespace {

template <typename Visit>
void for_each_free(const ParameterMask& mask, Visit&& visit) {
  int k = 0;
  auto walk = [&](const Mask& pattern, int block) {
    for (Eigen::Index c = 0; c < pattern.cols(); ++c) {
      for (Eigen::Index r = 0; r < pattern.rows(); ++r) {
        if (pattern(r, c)) visit(k++, block, r, c);
      }
    }
  };
  walk(mask.A, 0);
  walk(mask.Bext, 1);
  walk(mask.C, 2);
  walk(mask.Dext, 3);
}

template <typename Model>
auto& block_of(Model& model, int block) {
  switch (block) {
    case 0: return model.A;
    case 1: return model.Bext;
    case 2: return model.C;
    default: return model.Dext;
  }
}

}  // namespace

Vector pack_parameters(const GreyBoxModel& model, const ParameterMask& mask) {
  mask.check(model.dims);
  Vector theta(mask.free_count());
  for_each_free(mask, [&](int k, int block, Eigen::Index r, Eigen::Index c) {
    theta[k] = block_of(model, block)(r, c);
  });
  return theta;
}

GreyBoxModel unpack_parameters(const Vector& theta, const ParameterMask& mask,
                               const GreyBoxModel& model_template) {
  mask.check(model_template.dims);
  if (theta.size() != mask.free_count()) {
    throw DimensionError("unpack_parameters: theta has " + std::to_string(theta.size()) +
                         " entries, mask has " + std::to_string(mask.free_count()) + " free");
  }
  GreyBoxModel model = model_template;
  for_each_free(mask, [&](int k, int block, Eigen::Index r, Eigen::Index c) {
    block_of(model, block)(r, c) = theta[k];
  });
  return model;
}

std::vector<std::string> parameter_labels(const Dimensions& dims, const ParameterMask& mask) {
  mask.check(dims);
  std::vector<std::string> labels(mask.free_count());
  for_each_free(mask, [&](int k, int block, Eigen::Index r, Eigen::Index c) {
    std::string name;
    Eigen::Index col = c;
    switch (block) {
      case 0: name = "A"; break;
      case 1:
        name = c < dims.m ? "B" : "E";
        if (c >= dims.m) col -= dims.m;
        break;
      case 2: name = "C"; break;
      default:
        name = c < dims.m ? "D" : "F";
        if (c >= dims.m) col -= dims.m;
        break;
    }
    labels[k] = name + "(" + std::to_string(r + 1) + "," + std::to_string(col + 1) + ")";
  });
  return labels;
}

int default_parameter_count(const Dimensions& dims) {
  return dims.n_s * dims.n_s + dims.n_s * (dims.m + dims.s) + dims.l * dims.n_s + dims.l * dims.m;
}

}  // namespace greybox
